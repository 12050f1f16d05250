#include "globenet/network.hpp"

#include <cmath>
#include <numeric>
#include <type_traits>

#include "globenet/random.hpp"

namespace globenet {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

/// Visits every parameter tensor of a layer in registry order.
template <typename LayerT, typename F>
void for_each_param(LayerT& layer, F&& f) {
  std::visit(
      [&f](auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, detail::ConvLayer>) {
          f("kernels", l.params.kernels);
          f("bias", l.params.bias);
        } else if constexpr (std::is_same_v<L, detail::DenseLayer>) {
          f("weights", l.params.weights);
          f("bias", l.params.bias);
        } else if constexpr (std::is_same_v<L, detail::InceptionLayer>) {
          auto& p = l.params;
          f("b1.kernels", p.branch1.kernels);
          f("b1.bias", p.branch1.bias);
          f("b2_reduce.kernels", p.branch2_reduce.kernels);
          f("b2_reduce.bias", p.branch2_reduce.bias);
          f("b2.kernels", p.branch2.kernels);
          f("b2.bias", p.branch2.bias);
          f("b3_reduce.kernels", p.branch3_reduce.kernels);
          f("b3_reduce.bias", p.branch3_reduce.bias);
          f("b3.kernels", p.branch3.kernels);
          f("b3.bias", p.branch3.bias);
          f("b4.kernels", p.branch4.kernels);
          f("b4.bias", p.branch4.bias);
        }
      },
      layer);
}

const char* layer_tag(const detail::Layer& layer) {
  static constexpr const char* tags[] = {"conv", "pool", "act", "flatten", "dense", "inception"};
  return tags[layer.index()];
}

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (double& v : t.mutable_values()) {
    v = static_cast<double>(static_cast<float>(uniform(rng, -bound, bound)));
  }
  return t;
}

ConvParams<double> make_conv(std::size_t k, std::size_t cin, std::size_t cout, std::size_t stride,
                             Padding padding, Rng& rng) {
  return {he_uniform(Shape{k, k, cin, cout}, k * k * cin, rng), Tensor(Shape{cout}), stride, padding};
}

std::string two_digits(std::size_t i) {
  return (i < 10 ? "0" : "") + std::to_string(i);
}

// Forward helpers for the conv+activation pairs inside inception units.
Tensor conv_act_forward(const Tensor& x, const ConvParams<double>& p, const Activation& act,
                        detail::ConvActRecord* rec) {
  Tensor pre = conv2d(x, p);
  Tensor post = activate(pre, act);
  if (rec) {
    rec->input = x;
    rec->pre = std::move(pre);
    rec->post = post;
  }
  return post;
}

/// Returns dLoss/dInput and stores parameter gradients into kernels/bias slots.
Tensor conv_act_backward(const detail::ConvActRecord& rec, const ConvParams<double>& p,
                         const Activation& act, const Tensor& grad_out, Tensor& g_kernels,
                         Tensor& g_bias) {
  const Tensor g_pre = activate_backward(rec.pre, rec.post, grad_out, act);
  ConvGradients<double> g = conv2d_backward(rec.input, p, g_pre);
  g_kernels = std::move(g.kernels);
  g_bias = std::move(g.bias);
  return std::move(g.input);
}

void add_into(Tensor& acc, const Tensor& x) {
  double* a = acc.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) a[i] += x[i];
}

void push_signs(std::vector<std::uint32_t>& sig, const Tensor& pre) {
  for (double v : pre.values()) sig.push_back(v > 0 ? 1u : 0u);
}

}  // namespace

std::string_view network_kind_name(NetworkKind kind) {
  return kind == NetworkKind::Simple ? "simple" : "complex";
}

std::optional<NetworkKind> parse_network_kind(std::string_view name) {
  if (name == "simple") return NetworkKind::Simple;
  if (name == "complex") return NetworkKind::Complex;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Specs

std::vector<std::size_t> NetworkSpec::default_stage_filters(NetworkKind kind) {
  if (kind == NetworkKind::Simple) return {32, 64, 128, 256};
  return {32, 64, 16, 16, 32, 8, 16, 16};
}

NetworkSpec NetworkSpec::simple(InputShape input) {
  NetworkSpec s;
  s.kind = NetworkKind::Simple;
  s.input_shape = input;
  s.stage_filters = default_stage_filters(NetworkKind::Simple);
  return s;
}

NetworkSpec NetworkSpec::complex(InputShape input) {
  NetworkSpec s;
  s.kind = NetworkKind::Complex;
  s.input_shape = input;
  s.stage_filters = default_stage_filters(NetworkKind::Complex);
  return s;
}

void NetworkSpec::validate() const {
  for (std::size_t d : input_shape) {
    if (d == 0) throw ShapeError("network input extents must be >= 1");
  }
  const std::size_t want = kind == NetworkKind::Simple ? 4 : 8;
  if (stage_filters.size() != want) {
    throw ShapeError(std::string(network_kind_name(kind)) + " network needs " + std::to_string(want) +
                     " stage_filters entries, got " + std::to_string(stage_filters.size()));
  }
  if (fc_sizes.size() != 3) {
    throw ShapeError("fc_sizes must have exactly 3 entries, got " + std::to_string(fc_sizes.size()));
  }
  for (std::size_t f : stage_filters) {
    if (f == 0) throw ShapeError("stage_filters entries must be >= 1");
  }
  for (std::size_t f : fc_sizes) {
    if (f == 0) throw ShapeError("fc_sizes entries must be >= 1");
  }
  const auto k = conv_activation.kind;
  if (k != ActivationKind::ReLU && k != ActivationKind::LeakyReLU && k != ActivationKind::ELU) {
    throw ValueError("conv activation must be relu, leaky or elu");
  }
  if (fc_activation.kind != ActivationKind::Sigmoid && fc_activation.kind != ActivationKind::Tanh) {
    throw ValueError("fc activation must be sigmoid or tanh");
  }
  if (final_activation.kind != ActivationKind::Sigmoid &&
      final_activation.kind != ActivationKind::Linear) {
    throw ValueError("final activation must be sigmoid or linear");
  }
  check_activation(conv_activation);
}

InceptionLayerSpec InceptionLayerSpec::scaled(std::size_t factor) const {
  InceptionLayerSpec s = *this;
  s.branch1 *= factor;
  s.branch2_reduce *= factor;
  s.branch2 *= factor;
  s.branch3_reduce *= factor;
  s.branch3 *= factor;
  s.branch4 *= factor;
  return s;
}

std::vector<LayerSpec> build_regression_head(std::size_t flat_width, const NetworkSpec& spec) {
  if (flat_width == 0) throw ShapeError("regression head needs a flat width >= 1");
  if (spec.fc_sizes.size() != 3) throw ShapeError("fc_sizes must have exactly 3 entries");
  std::vector<LayerSpec> head;
  for (std::size_t units : spec.fc_sizes) {
    head.push_back(DenseLayerSpec{units});
    head.push_back(ActivationLayerSpec{spec.fc_activation});
  }
  head.push_back(DenseLayerSpec{2});
  head.push_back(ActivationLayerSpec{spec.final_activation});
  return head;
}

std::vector<LayerSpec> topology_layers(const NetworkSpec& spec) {
  spec.validate();
  const auto& f = spec.stage_filters;
  const Activation act = spec.conv_activation;
  std::vector<LayerSpec> layers;
  std::size_t h = spec.input_shape[0], w = spec.input_shape[1], c = spec.input_shape[2];
  auto conv = [&](std::size_t k, std::size_t filters, std::size_t stride) {
    layers.push_back(ConvLayerSpec{k, filters, stride, Padding::Same});
    layers.push_back(ActivationLayerSpec{act});
    h = plan_axis(h, k, stride, Padding::Same).out;
    w = plan_axis(w, k, stride, Padding::Same).out;
    c = filters;
  };
  auto pool = [&](std::size_t window, std::size_t stride) {
    layers.push_back(PoolLayerSpec{window, stride, Padding::Same});
    h = plan_axis(h, window, stride, Padding::Same).out;
    w = plan_axis(w, window, stride, Padding::Same).out;
  };

  if (spec.kind == NetworkKind::Simple) {
    for (std::size_t stage = 0; stage < 4; ++stage) {
      conv(3, f[stage], 2);
      pool(2, 2);
    }
  } else {
    conv(7, f[0], 2);
    pool(3, 2);
    conv(3, f[1], 1);
    pool(3, 2);
    const InceptionLayerSpec base{f[2], f[3], f[4], f[5], f[6], f[7], act};
    for (std::size_t unit = 1; unit <= 8; ++unit) {
      const InceptionLayerSpec u = base.scaled(std::size_t{1} << ((unit - 1) / 2));
      layers.push_back(u);
      c = u.out_channels();
      if (unit == 2 || unit == 4 || unit == 6) pool(2, 2);
    }
  }
  layers.push_back(FlattenLayerSpec{});
  for (LayerSpec& l : build_regression_head(h * w * c, spec)) layers.push_back(std::move(l));
  return layers;
}

// ---------------------------------------------------------------------------
// Materialization

Network Network::from_layers(InputShape input, std::vector<LayerSpec> layers, std::uint64_t seed,
                             std::optional<NetworkSpec> spec) {
  Network net;
  net.input_ = input;
  net.spec_ = std::move(spec);
  net.layer_specs_ = std::move(layers);

  Rng rng(seed);
  Shape shape{1, input[0], input[1], input[2]};
  auto need_rank4 = [&shape](const char* what) {
    if (shape.rank() != 4) {
      throw ShapeError(std::string(what) + " needs a rank-4 input, got " + shape.to_string());
    }
  };

  for (const LayerSpec& ls : net.layer_specs_) {
    detail::Layer layer = std::visit(
        overloaded{
            [&](const ConvLayerSpec& s) -> detail::Layer {
              need_rank4("conv");
              if (s.filters == 0) throw ShapeError("conv filters must be >= 1");
              const WindowGeometry g = plan_window(shape, s.kernel, s.kernel, s.stride, s.padding);
              auto params = make_conv(s.kernel, shape[3], s.filters, s.stride, s.padding, rng);
              shape = Shape{1, g.out_h, g.out_w, s.filters};
              return detail::ConvLayer{std::move(params)};
            },
            [&](const PoolLayerSpec& s) -> detail::Layer {
              need_rank4("pool");
              const WindowGeometry g = plan_window(shape, s.window, s.window, s.stride, s.padding);
              shape = Shape{1, g.out_h, g.out_w, shape[3]};
              return detail::PoolLayer{{s.window, s.stride, s.padding}};
            },
            [&](const ActivationLayerSpec& s) -> detail::Layer {
              check_activation(s.activation);
              return detail::ActivationLayer{s.activation};
            },
            [&](const FlattenLayerSpec&) -> detail::Layer {
              need_rank4("flatten");
              shape = Shape{1, shape[1] * shape[2] * shape[3]};
              return detail::FlattenLayer{};
            },
            [&](const DenseLayerSpec& s) -> detail::Layer {
              if (shape.rank() != 2) throw ShapeError("dense needs a flattened input, got " + shape.to_string());
              if (s.units == 0) throw ShapeError("dense units must be >= 1");
              const std::size_t din = shape[1];
              DenseParams<double> p{he_uniform(Shape{din, s.units}, din, rng), Tensor(Shape{s.units})};
              shape = Shape{1, s.units};
              return detail::DenseLayer{std::move(p)};
            },
            [&](const InceptionLayerSpec& s) -> detail::Layer {
              need_rank4("inception");
              check_activation(s.activation);
              const std::size_t cin = shape[3];
              InceptionParams<double> p;
              p.branch1 = make_conv(1, cin, s.branch1, 1, Padding::Same, rng);
              p.branch2_reduce = make_conv(1, cin, s.branch2_reduce, 1, Padding::Same, rng);
              p.branch2 = make_conv(3, s.branch2_reduce, s.branch2, 1, Padding::Same, rng);
              p.branch3_reduce = make_conv(1, cin, s.branch3_reduce, 1, Padding::Same, rng);
              p.branch3 = make_conv(5, s.branch3_reduce, s.branch3, 1, Padding::Same, rng);
              p.branch4 = make_conv(1, cin, s.branch4, 1, Padding::Same, rng);
              p.activation = s.activation;
              p.validate(cin);
              shape = Shape{1, shape[1], shape[2], s.out_channels()};
              return detail::InceptionLayer{std::move(p)};
            },
        },
        ls);
    net.layers_.push_back(std::move(layer));
    net.shapes_.push_back(shape);
  }
  if (shape.rank() != 2 || shape[1] != 2) {
    throw ShapeError("network must end in a (N,2) output, got " + shape.to_string());
  }

  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    const std::string prefix = "L" + two_digits(i) + "." + layer_tag(net.layers_[i]) + ".";
    for_each_param(net.layers_[i], [&](const char* name, const Tensor&) {
      net.names_.push_back(prefix + name);
    });
  }
  return net;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_) for_each_param(l, [&](const char*, const Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<Tensor*> Network::mutable_parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) for_each_param(l, [&](const char*, Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameters()) n += t->size();
  return n;
}

void Network::check_batch(const Tensor& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != input_[0] || batch.dim(2) != input_[1] ||
      batch.dim(3) != input_[2]) {
    throw ShapeError("batch shape " + batch.shape().to_string() + " does not match network input (N," +
                     std::to_string(input_[0]) + "," + std::to_string(input_[1]) + "," +
                     std::to_string(input_[2]) + ")");
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

Tensor Network::predict(const Tensor& batch) const {
  check_batch(batch);
  Tensor x = batch;
  for (const auto& layer : layers_) {
    x = std::visit(overloaded{
                       [&](const detail::ConvLayer& l) { return conv2d(x, l.params); },
                       [&](const detail::PoolLayer& l) { return maxpool2d(x, l.params); },
                       [&](const detail::ActivationLayer& l) { return activate(x, l.activation); },
                       [&](const detail::FlattenLayer&) { return flatten(x); },
                       [&](const detail::DenseLayer& l) { return dense(x, l.params); },
                       [&](const detail::InceptionLayer& l) { return inception_forward(x, l.params); },
                   },
                   layer);
  }
  return x;
}

Tensor Network::forward(const Tensor& batch, ForwardTrace& trace) const {
  check_batch(batch);
  trace.records.assign(layers_.size(), {});
  Tensor x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    detail::LayerRecord& rec = trace.records[i];
    rec.input = std::move(x);
    const Tensor& in = rec.input;
    x = std::visit(
        overloaded{
            [&](const detail::ConvLayer& l) { return conv2d(in, l.params); },
            [&](const detail::PoolLayer& l) { return maxpool2d(in, l.params, &rec.argmax); },
            [&](const detail::ActivationLayer& l) {
              rec.output = activate(in, l.activation);
              return rec.output;
            },
            [&](const detail::FlattenLayer&) { return flatten(in); },
            [&](const detail::DenseLayer& l) { return dense(in, l.params); },
            [&](const detail::InceptionLayer& l) {
              const auto& p = l.params;
              p.validate(in.dim(3));
              auto& r = rec.inception;
              const Activation& act = p.activation;
              const Tensor b1 = conv_act_forward(in, p.branch1, act, &r.branch1);
              const Tensor r2 = conv_act_forward(in, p.branch2_reduce, act, &r.branch2_reduce);
              const Tensor b2 = conv_act_forward(r2, p.branch2, act, &r.branch2);
              const Tensor r3 = conv_act_forward(in, p.branch3_reduce, act, &r.branch3_reduce);
              const Tensor b3 = conv_act_forward(r3, p.branch3, act, &r.branch3);
              const Tensor pooled =
                  maxpool2d(in, InceptionParams<double>::branch4_pool(), &r.pool_argmax);
              const Tensor b4 = conv_act_forward(pooled, p.branch4, act, &r.branch4);
              return concat_channels({b1, b2, b3, b4});
            },
        },
        layers_[i]);
  }
  return x;
}

Gradients Network::backward(const ForwardTrace& trace, const Tensor& grad_output) const {
  if (trace.records.size() != layers_.size()) throw ShapeError("trace does not belong to this network");
  Gradients grads;
  grads.names = names_;
  grads.values.resize(names_.size());

  // First registry slot of each layer.
  std::vector<std::size_t> first(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::size_t count = 0;
    for_each_param(layers_[i], [&count](const char*, const Tensor&) { ++count; });
    first[i + 1] = first[i] + count;
  }

  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const detail::LayerRecord& rec = trace.records[i];
    Tensor* slot = grads.values.data() + first[i];
    g = std::visit(
        overloaded{
            [&](const detail::ConvLayer& l) {
              ConvGradients<double> cg = conv2d_backward(rec.input, l.params, g);
              slot[0] = std::move(cg.kernels);
              slot[1] = std::move(cg.bias);
              return std::move(cg.input);
            },
            [&](const detail::PoolLayer&) {
              return maxpool2d_backward(rec.input.shape(), rec.argmax, g);
            },
            [&](const detail::ActivationLayer& l) {
              return activate_backward(rec.input, rec.output, g, l.activation);
            },
            [&](const detail::FlattenLayer&) { return g.reshaped(rec.input.shape()); },
            [&](const detail::DenseLayer& l) {
              DenseGradients<double> dg = dense_backward(rec.input, l.params, g);
              slot[0] = std::move(dg.weights);
              slot[1] = std::move(dg.bias);
              return std::move(dg.input);
            },
            [&](const detail::InceptionLayer& l) {
              const auto& p = l.params;
              const auto& r = rec.inception;
              const Activation& act = p.activation;
              std::size_t offset = 0;
              auto take = [&](std::size_t width) {
                Tensor part = slice_channels(g, offset, width);
                offset += width;
                return part;
              };
              const Tensor g1 = take(p.branch1.out_channels());
              const Tensor g2 = take(p.branch2.out_channels());
              const Tensor g3 = take(p.branch3.out_channels());
              const Tensor g4 = take(p.branch4.out_channels());

              Tensor dx = conv_act_backward(r.branch1, p.branch1, act, g1, slot[0], slot[1]);
              const Tensor dr2 = conv_act_backward(r.branch2, p.branch2, act, g2, slot[4], slot[5]);
              add_into(dx, conv_act_backward(r.branch2_reduce, p.branch2_reduce, act, dr2, slot[2], slot[3]));
              const Tensor dr3 = conv_act_backward(r.branch3, p.branch3, act, g3, slot[8], slot[9]);
              add_into(dx, conv_act_backward(r.branch3_reduce, p.branch3_reduce, act, dr3, slot[6], slot[7]));
              const Tensor dpool = conv_act_backward(r.branch4, p.branch4, act, g4, slot[10], slot[11]);
              add_into(dx, maxpool2d_backward(rec.input.shape(), r.pool_argmax, dpool));
              return dx;
            },
        },
        layers_[i]);
  }
  return grads;
}

std::vector<std::uint32_t> Network::regime_signature(const ForwardTrace& trace) const {
  std::vector<std::uint32_t> sig;
  for (std::size_t i = 0; i < layers_.size() && i < trace.records.size(); ++i) {
    const detail::LayerRecord& rec = trace.records[i];
    std::visit(overloaded{
                   [&](const detail::PoolLayer&) {
                     for (std::size_t a : rec.argmax) sig.push_back(static_cast<std::uint32_t>(a));
                   },
                   [&](const detail::ActivationLayer& l) {
                     if (l.activation.is_piecewise()) push_signs(sig, rec.input);
                   },
                   [&](const detail::InceptionLayer& l) {
                     const auto& r = rec.inception;
                     if (l.params.activation.is_piecewise()) {
                       for (const auto* c : {&r.branch1, &r.branch2_reduce, &r.branch2,
                                             &r.branch3_reduce, &r.branch3, &r.branch4}) {
                         push_signs(sig, c->pre);
                       }
                     }
                     for (std::size_t a : r.pool_argmax) sig.push_back(static_cast<std::uint32_t>(a));
                   },
                   [](const auto&) {},
               },
               layers_[i]);
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Builders

Network build_simple_cnn(const NetworkSpec& spec, std::uint64_t seed) {
  if (spec.kind != NetworkKind::Simple) throw ValueError("build_simple_cnn needs a Simple spec");
  return Network::from_layers(spec.input_shape, topology_layers(spec), seed, spec);
}

Network build_complex_cnn(const NetworkSpec& spec, std::uint64_t seed) {
  if (spec.kind != NetworkKind::Complex) throw ValueError("build_complex_cnn needs a Complex spec");
  return Network::from_layers(spec.input_shape, topology_layers(spec), seed, spec);
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  return spec.kind == NetworkKind::Simple ? build_simple_cnn(spec, seed) : build_complex_cnn(spec, seed);
}

Tensor predict(const Network& net, const Tensor& batch) { return net.predict(batch); }

}  // namespace globenet
