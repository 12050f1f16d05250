#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "globenet/layers.hpp"

namespace globenet {

enum class NetworkKind { Simple, Complex };

std::string_view network_kind_name(NetworkKind kind);
std::optional<NetworkKind> parse_network_kind(std::string_view name);

/// Spatial input (H, W, C) of a network; the batch extent is free.
using InputShape = std::array<std::size_t, 3>;

/// Declarative description of one of the two regression topologies.
///
/// stage_filters holds four conv widths for Simple, and for Complex eight
/// entries: [stem1, stem2, b1, b2_reduce, b2, b3_reduce, b3, b4], the branch
/// widths being those of the first two inception units (doubled every two
/// units after that).
struct NetworkSpec {
  NetworkKind kind = NetworkKind::Simple;
  InputShape input_shape{64, 64, 4};
  Activation conv_activation = Activation::relu();
  Activation fc_activation = Activation::sigmoid();
  std::vector<std::size_t> stage_filters;
  std::vector<std::size_t> fc_sizes{512, 256, 64};
  Activation final_activation = Activation::sigmoid();

  static NetworkSpec simple(InputShape input = {64, 64, 4});
  static NetworkSpec complex(InputShape input = {64, 64, 4});

  static std::vector<std::size_t> default_stage_filters(NetworkKind kind);

  /// Throws ShapeError / ValueError on a spec that cannot be built.
  void validate() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Layer descriptions. A Network is materialized from a list of these.
struct ConvLayerSpec {
  std::size_t kernel = 3;
  std::size_t filters = 1;
  std::size_t stride = 1;
  Padding padding = Padding::Same;
  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};
struct PoolLayerSpec {
  std::size_t window = 2;
  std::size_t stride = 2;
  Padding padding = Padding::Same;
  friend bool operator==(const PoolLayerSpec&, const PoolLayerSpec&) = default;
};
struct ActivationLayerSpec {
  Activation activation;
  friend bool operator==(const ActivationLayerSpec&, const ActivationLayerSpec&) = default;
};
struct FlattenLayerSpec {
  friend bool operator==(const FlattenLayerSpec&, const FlattenLayerSpec&) = default;
};
struct DenseLayerSpec {
  std::size_t units = 1;
  friend bool operator==(const DenseLayerSpec&, const DenseLayerSpec&) = default;
};
struct InceptionLayerSpec {
  std::size_t branch1 = 1, branch2_reduce = 1, branch2 = 1, branch3_reduce = 1, branch3 = 1,
              branch4 = 1;
  Activation activation = Activation::relu();

  std::size_t out_channels() const { return branch1 + branch2 + branch3 + branch4; }
  InceptionLayerSpec scaled(std::size_t factor) const;
  friend bool operator==(const InceptionLayerSpec&, const InceptionLayerSpec&) = default;
};

using LayerSpec = std::variant<ConvLayerSpec, PoolLayerSpec, ActivationLayerSpec, FlattenLayerSpec,
                               DenseLayerSpec, InceptionLayerSpec>;

/// Head shared by both topologies: three dense+fc_activation layers, then dense(2)+final_activation.
std::vector<LayerSpec> build_regression_head(std::size_t flat_width, const NetworkSpec& spec);

/// Layer list for a Simple or Complex spec, without materializing parameters.
std::vector<LayerSpec> topology_layers(const NetworkSpec& spec);

namespace detail {

struct ConvLayer {
  ConvParams<double> params;
};
struct PoolLayer {
  PoolParams params;
};
struct ActivationLayer {
  Activation activation;
};
struct FlattenLayer {};
struct DenseLayer {
  DenseParams<double> params;
};
struct InceptionLayer {
  InceptionParams<double> params;
};

using Layer = std::variant<ConvLayer, PoolLayer, ActivationLayer, FlattenLayer, DenseLayer,
                           InceptionLayer>;

/// Intermediates of one convolution followed by an activation.
struct ConvActRecord {
  Tensor input, pre, post;
};

struct InceptionRecord {
  ConvActRecord branch1, branch2_reduce, branch2, branch3_reduce, branch3, branch4;
  std::vector<std::size_t> pool_argmax;
};

struct LayerRecord {
  Tensor input;
  Tensor output;
  std::vector<std::size_t> argmax;
  InceptionRecord inception;
};

}  // namespace detail

/// Everything the backward pass needs from one forward pass.
struct ForwardTrace {
  std::vector<detail::LayerRecord> records;
};

/// Gradient (or any per-parameter tensor) list aligned with Network::parameter_names().
struct Gradients {
  std::vector<std::string> names;
  std::vector<Tensor> values;
};

class Network {
 public:
  /// Materializes `layers` on top of `input`, He-uniform weights (rounded to
  /// f32-representable values) and zero biases, drawn in layer order from `seed`.
  static Network from_layers(InputShape input, std::vector<LayerSpec> layers, std::uint64_t seed,
                             std::optional<NetworkSpec> spec = std::nullopt);

  InputShape input_shape() const { return input_; }
  const std::optional<NetworkSpec>& spec() const { return spec_; }
  const std::vector<LayerSpec>& layer_specs() const { return layer_specs_; }
  /// Per-sample output shape of every layer (batch extent 1).
  const std::vector<Shape>& layer_output_shapes() const { return shapes_; }

  const std::vector<std::string>& parameter_names() const { return names_; }
  std::vector<const Tensor*> parameters() const;
  std::vector<Tensor*> mutable_parameters();
  std::size_t parameter_count() const;

  /// Forward pass on an (N,H,W,C) batch. Returns (N, 2).
  Tensor predict(const Tensor& batch) const;
  /// Forward pass that records the intermediates into `trace`.
  Tensor forward(const Tensor& batch, ForwardTrace& trace) const;
  /// Reverse pass from dLoss/dOutput; values align with parameter_names().
  Gradients backward(const ForwardTrace& trace, const Tensor& grad_output) const;

  /// Identifies the piecewise regime of the last forward pass: sign pattern
  /// of piecewise activations and every max-pool argmax. Equal signatures mean
  /// the network is a single smooth function between the two points.
  std::vector<std::uint32_t> regime_signature(const ForwardTrace& trace) const;

 private:
  void check_batch(const Tensor& batch) const;

  InputShape input_{};
  std::optional<NetworkSpec> spec_;
  std::vector<LayerSpec> layer_specs_;
  std::vector<detail::Layer> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::string> names_;
};

Network build_simple_cnn(const NetworkSpec& spec, std::uint64_t seed);
Network build_complex_cnn(const NetworkSpec& spec, std::uint64_t seed);
/// Dispatches on spec.kind.
Network build_network(const NetworkSpec& spec, std::uint64_t seed);

Tensor predict(const Network& net, const Tensor& batch);

// ---------------------------------------------------------------------------
// GNM1 model files

/// Optional training provenance stored next to the parameters.
struct ModelMetadata {
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;
  std::optional<double> train_rmse;
  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

struct LoadedModel {
  Network network;
  ModelMetadata metadata;
};

/// "GNM1", u32 LE header length, JSON header, then per parameter: u32 rank,
/// u32 extents, f32 LE values.
std::string encode_model(const Network& net, const ModelMetadata& meta = {});
LoadedModel decode_model(std::string_view bytes);

void save_model(const std::filesystem::path& path, const Network& net, const ModelMetadata& meta = {});
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace globenet
