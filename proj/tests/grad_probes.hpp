#pragma once

// Small networks that isolate one layer kind each, shared by the gradient tests.

#include <functional>
#include <vector>

#include "globenet/network.hpp"
#include "globenet/training.hpp"

namespace probes {

using namespace globenet;

inline const std::vector<Activation> kAllActivations{Activation::relu(),    Activation::leaky_relu(), Activation::elu(),
                                              Activation::sigmoid(), Activation::tanh(),       Activation::linear()};

inline std::vector<LayerSpec> linear_tail(std::vector<LayerSpec> layers) {
  layers.push_back(FlattenLayerSpec{});
  layers.push_back(DenseLayerSpec{2});
  layers.push_back(ActivationLayerSpec{Activation::linear()});
  return layers;
}

// One network per layer kind, each isolating that kind behind the activation under test.
struct Probe {
  const char* name;
  InputShape input;
  std::function<std::vector<LayerSpec>(Activation)> layers;
};

inline const std::vector<Probe> kProbes{
    {"conv same s1", {5, 5, 2}, [](Activation a) { return linear_tail({ConvLayerSpec{3, 2, 1, Padding::Same}, ActivationLayerSpec{a}}); }},
    {"conv same s2", {5, 5, 2}, [](Activation a) { return linear_tail({ConvLayerSpec{3, 2, 2, Padding::Same}, ActivationLayerSpec{a}}); }},
    {"conv valid s2", {6, 6, 2}, [](Activation a) { return linear_tail({ConvLayerSpec{3, 2, 2, Padding::Valid}, ActivationLayerSpec{a}}); }},
    {"maxpool", {6, 6, 2},
     [](Activation a) { return linear_tail({ConvLayerSpec{1, 2, 1, Padding::Same}, ActivationLayerSpec{a}, PoolLayerSpec{3, 2, Padding::Same}}); }},
    {"dense", {3, 3, 2},
     [](Activation a) {
       return std::vector<LayerSpec>{FlattenLayerSpec{}, DenseLayerSpec{4}, ActivationLayerSpec{a}, DenseLayerSpec{2},
                                     ActivationLayerSpec{Activation::linear()}};
     }},
    {"inception", {4, 4, 3}, [](Activation a) { return linear_tail({InceptionLayerSpec{2, 1, 2, 1, 1, 2, a}}); }},
};

/// Full topology at 16x16x4 with tiny widths, so every coordinate can be probed.
inline Network tiny_topology(NetworkKind kind, Activation conv, Activation fc, std::uint64_t seed) {
  NetworkSpec spec = kind == NetworkKind::Simple ? NetworkSpec::simple({16, 16, 4}) : NetworkSpec::complex({16, 16, 4});
  spec.stage_filters = kind == NetworkKind::Simple ? std::vector<std::size_t>{3, 4, 4, 5}
                                                   : std::vector<std::size_t>{4, 4, 2, 2, 2, 1, 2, 2};
  spec.fc_sizes = {6, 5, 4};
  spec.conv_activation = conv;
  spec.fc_activation = fc;
  return build_network(spec, seed);
}

}  // namespace probes
