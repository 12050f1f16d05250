#include "globenet/layers.hpp"

namespace globenet {

std::string_view activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::LeakyReLU: return "leaky";
    case ActivationKind::ELU: return "elu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Linear: return "linear";
  }
  return "linear";
}

std::optional<ActivationKind> parse_activation_kind(std::string_view name) {
  for (ActivationKind k : {ActivationKind::ReLU, ActivationKind::LeakyReLU, ActivationKind::ELU,
                           ActivationKind::Sigmoid, ActivationKind::Tanh, ActivationKind::Linear}) {
    if (activation_name(k) == name) return k;
  }
  return std::nullopt;
}

Activation default_activation(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::LeakyReLU: return Activation::leaky_relu();
    case ActivationKind::ELU: return Activation::elu();
    default: return {kind, 0.0};
  }
}

}  // namespace globenet
