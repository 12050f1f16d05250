#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "globenet/tensor.hpp"

namespace globenet {

enum class Padding { Same, Valid };

enum class ActivationKind { ReLU, LeakyReLU, ELU, Sigmoid, Tanh, Linear };

/// Activation function plus its slope parameter (LeakyReLU, ELU only).
struct Activation {
  ActivationKind kind = ActivationKind::Linear;
  double alpha = 0.0;

  static Activation relu() { return {ActivationKind::ReLU, 0.0}; }
  static Activation leaky_relu(double alpha = 0.3) { return {ActivationKind::LeakyReLU, alpha}; }
  static Activation elu(double alpha = 1.0) { return {ActivationKind::ELU, alpha}; }
  static Activation sigmoid() { return {ActivationKind::Sigmoid, 0.0}; }
  static Activation tanh() { return {ActivationKind::Tanh, 0.0}; }
  static Activation linear() { return {ActivationKind::Linear, 0.0}; }

  bool has_alpha() const {
    return kind == ActivationKind::LeakyReLU || kind == ActivationKind::ELU;
  }
  /// Defined piecewise around 0. ELU with alpha = 1 is C1 there, but its
  /// second derivative still jumps, which spoils central differences.
  bool is_piecewise() const {
    return kind == ActivationKind::ReLU || kind == ActivationKind::LeakyReLU || kind == ActivationKind::ELU;
  }

  friend bool operator==(const Activation&, const Activation&) = default;
};

/// Short lowercase names used in CSV reports and the CLI: relu, leaky, elu, sigmoid, tanh, linear.
std::string_view activation_name(ActivationKind kind);
std::optional<ActivationKind> parse_activation_kind(std::string_view name);
/// Default-parameterised activation for a kind (LeakyReLU alpha 0.3, ELU alpha 1.0).
Activation default_activation(ActivationKind kind);

inline void check_activation(const Activation& a) {
  if (a.has_alpha() && !(a.alpha > 0.0)) {
    throw ValueError("activation alpha must be > 0");
  }
}

template <typename Scalar>
Scalar activation_value(const Activation& a, Scalar x) {
  switch (a.kind) {
    case ActivationKind::ReLU: return x > 0 ? x : Scalar(0);
    case ActivationKind::LeakyReLU: return x > 0 ? x : Scalar(a.alpha) * x;
    case ActivationKind::ELU: return x > 0 ? x : Scalar(a.alpha) * std::expm1(x);
    case ActivationKind::Sigmoid:
      // Split on sign so exp never overflows.
      if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
      else {
        const Scalar e = std::exp(x);
        return e / (Scalar(1) + e);
      }
    case ActivationKind::Tanh: return std::tanh(x);
    case ActivationKind::Linear: return x;
  }
  return x;
}

/// Derivative given the pre-activation x and the activation output y.
template <typename Scalar>
Scalar activation_derivative(const Activation& a, Scalar x, Scalar y) {
  switch (a.kind) {
    case ActivationKind::ReLU: return x > 0 ? Scalar(1) : Scalar(0);
    case ActivationKind::LeakyReLU: return x > 0 ? Scalar(1) : Scalar(a.alpha);
    case ActivationKind::ELU: return x > 0 ? Scalar(1) : y + Scalar(a.alpha);
    case ActivationKind::Sigmoid: return y * (Scalar(1) - y);
    case ActivationKind::Tanh: return Scalar(1) - y * y;
    case ActivationKind::Linear: return Scalar(1);
  }
  return Scalar(1);
}

// ---------------------------------------------------------------------------
// Window geometry

/// Output extent and leading pad of one spatial axis.
struct AxisPlan {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};

/// Same: out = ceil(in/stride), odd padding goes after. Valid: out = floor((in-k)/stride)+1.
inline AxisPlan plan_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (kernel == 0 || stride == 0) throw ShapeError("kernel and stride must be >= 1");
  if (padding == Padding::Same) {
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + kernel;
    const std::size_t total = needed > in ? needed - in : 0;
    return {out, total / 2};
  }
  if (in < kernel) {
    throw ShapeError("valid window of " + std::to_string(kernel) + " does not fit extent " +
                     std::to_string(in));
  }
  return {(in - kernel) / stride + 1, 0};
}

struct WindowGeometry {
  std::size_t batch = 0, in_h = 0, in_w = 0, channels = 0;
  std::size_t kernel_h = 0, kernel_w = 0, stride = 1;
  std::size_t out_h = 0, out_w = 0, pad_top = 0, pad_left = 0;

  std::size_t out_pixels() const { return batch * out_h * out_w; }
  std::size_t patch_size() const { return kernel_h * kernel_w * channels; }
  /// Patches coincide with input pixels (1x1, stride 1, no padding).
  bool is_pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && stride == 1 && pad_top == 0 && pad_left == 0;
  }
};

inline WindowGeometry plan_window(const Shape& input, std::size_t kh, std::size_t kw,
                                  std::size_t stride, Padding padding) {
  if (input.rank() != 4) throw ShapeError("expected rank-4 NHWC input, got " + input.to_string());
  const AxisPlan ph = plan_axis(input[1], kh, stride, padding);
  const AxisPlan pw = plan_axis(input[2], kw, stride, padding);
  return {input[0], input[1], input[2], input[3], kh, kw, stride,
          ph.out,   pw.out,   ph.pad_before, pw.pad_before};
}

// ---------------------------------------------------------------------------
// Parameters

template <typename Scalar>
struct ConvParams {
  BasicTensor<Scalar> kernels;  // (KH, KW, Cin, Cout)
  BasicTensor<Scalar> bias;     // (Cout)
  std::size_t stride = 1;
  Padding padding = Padding::Same;

  std::size_t kernel_h() const { return kernels.dim(0); }
  std::size_t kernel_w() const { return kernels.dim(1); }
  std::size_t in_channels() const { return kernels.dim(2); }
  std::size_t out_channels() const { return kernels.dim(3); }

  void validate() const {
    if (kernels.rank() != 4) throw ShapeError("conv kernels must be (KH,KW,Cin,Cout)");
    if (bias.rank() != 1 || bias.dim(0) != out_channels()) {
      throw ShapeError("conv bias length must equal Cout");
    }
    if (stride < 1) throw ShapeError("conv stride must be >= 1");
  }
};

struct PoolParams {
  std::size_t window = 2;
  std::size_t stride = 2;
  Padding padding = Padding::Same;
};

template <typename Scalar>
struct DenseParams {
  BasicTensor<Scalar> weights;  // (Din, Dout)
  BasicTensor<Scalar> bias;     // (Dout)

  std::size_t in_features() const { return weights.dim(0); }
  std::size_t out_features() const { return weights.dim(1); }

  void validate() const {
    if (weights.rank() != 2) throw ShapeError("dense weights must be (Din,Dout)");
    if (bias.rank() != 1 || bias.dim(0) != out_features()) {
      throw ShapeError("dense bias length must equal Dout");
    }
  }
};

/// Four-branch inception unit: 1x1 | 1x1 -> 3x3 | 1x1 -> 5x5 | pool3x3 -> 1x1.
template <typename Scalar>
struct InceptionParams {
  ConvParams<Scalar> branch1;
  ConvParams<Scalar> branch2_reduce, branch2;
  ConvParams<Scalar> branch3_reduce, branch3;
  ConvParams<Scalar> branch4;
  Activation activation = Activation::relu();

  static PoolParams branch4_pool() { return {3, 1, Padding::Same}; }

  std::size_t out_channels() const {
    return branch1.out_channels() + branch2.out_channels() + branch3.out_channels() +
           branch4.out_channels();
  }

  void validate(std::size_t in_channels) const {
    for (const ConvParams<Scalar>* c :
         {&branch1, &branch2_reduce, &branch2, &branch3_reduce, &branch3, &branch4}) {
      c->validate();
      if (c->stride != 1 || c->padding != Padding::Same) {
        throw ShapeError("inception branches must use stride 1 and Same padding");
      }
    }
    for (const ConvParams<Scalar>* c : {&branch1, &branch2_reduce, &branch3_reduce, &branch4}) {
      if (c->in_channels() != in_channels) {
        throw ShapeError("inception branch expects " + std::to_string(c->in_channels()) +
                         " input channels, unit receives " + std::to_string(in_channels));
      }
    }
    if (branch2.in_channels() != branch2_reduce.out_channels() ||
        branch3.in_channels() != branch3_reduce.out_channels()) {
      throw ShapeError("inception reduce width does not feed its spatial convolution");
    }
    check_activation(activation);
  }
};

// ---------------------------------------------------------------------------
// Convolution

/// Gathers every receptive field into one row: (N*OH*OW, KH*KW*Cin). Padding taps are 0.
template <typename Scalar>
RowMatrix<Scalar> im2col(const BasicTensor<Scalar>& input, const WindowGeometry& g) {
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(static_cast<Eigen::Index>(g.out_pixels()),
                                                   static_cast<Eigen::Index>(g.patch_size()));
  const Scalar* in = input.data();
  Scalar* dst = cols.data();
  const std::size_t c = g.channels;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        for (std::size_t dy = 0; dy < g.kernel_h; ++dy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + dy) -
                                   static_cast<std::ptrdiff_t>(g.pad_top);
          for (std::size_t dx = 0; dx < g.kernel_w; ++dx, dst += c) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + dx) -
                                     static_cast<std::ptrdiff_t>(g.pad_left);
            if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h) ||
                x >= static_cast<std::ptrdiff_t>(g.in_w)) {
              continue;
            }
            std::memcpy(dst, in + ((n * g.in_h + y) * g.in_w + x) * c, c * sizeof(Scalar));
          }
        }
      }
    }
  }
  return cols;
}

/// Scatter-adds patch rows back onto the input grid (adjoint of im2col).
template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, const WindowGeometry& g, BasicTensor<Scalar>& out) {
  Scalar* dst = out.mutable_data();
  const Scalar* src = cols.data();
  const std::size_t c = g.channels;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        for (std::size_t dy = 0; dy < g.kernel_h; ++dy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + dy) -
                                   static_cast<std::ptrdiff_t>(g.pad_top);
          for (std::size_t dx = 0; dx < g.kernel_w; ++dx, src += c) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + dx) -
                                     static_cast<std::ptrdiff_t>(g.pad_left);
            if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h) ||
                x >= static_cast<std::ptrdiff_t>(g.in_w)) {
              continue;
            }
            Scalar* d = dst + ((n * g.in_h + y) * g.in_w + x) * c;
            for (std::size_t k = 0; k < c; ++k) d[k] += src[k];
          }
        }
      }
    }
  }
}

template <typename Scalar>
WindowGeometry conv_geometry(const BasicTensor<Scalar>& input, const ConvParams<Scalar>& p) {
  p.validate();
  if (input.rank() != 4) throw ShapeError("conv2d expects rank-4 input");
  if (input.dim(3) != p.in_channels()) {
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(input.dim(3)) +
                     ", kernels expect " + std::to_string(p.in_channels()));
  }
  return plan_window(input.shape(), p.kernel_h(), p.kernel_w(), p.stride, p.padding);
}

template <typename Scalar>
BasicTensor<Scalar> conv2d(const BasicTensor<Scalar>& input, const ConvParams<Scalar>& p) {
  const WindowGeometry g = conv_geometry(input, p);
  const std::size_t cout = p.out_channels();
  BasicTensor<Scalar> out(Shape{g.batch, g.out_h, g.out_w, cout});
  auto y = out.mutable_matrix(g.out_pixels(), cout);
  const auto k = p.kernels.matrix(g.patch_size(), cout);
  if (g.is_pointwise()) {
    y.noalias() = input.pixel_matrix() * k;
  } else {
    y.noalias() = im2col(input, g) * k;
  }
  y.rowwise() += p.bias.matrix(1, cout).row(0);
  return out;
}

template <typename Scalar>
struct ConvGradients {
  BasicTensor<Scalar> input;
  BasicTensor<Scalar> kernels;
  BasicTensor<Scalar> bias;
};

template <typename Scalar>
ConvGradients<Scalar> conv2d_backward(const BasicTensor<Scalar>& input, const ConvParams<Scalar>& p,
                                      const BasicTensor<Scalar>& grad_out) {
  const WindowGeometry g = conv_geometry(input, p);
  const std::size_t cout = p.out_channels();
  const auto dy = grad_out.matrix(g.out_pixels(), cout);
  const auto k = p.kernels.matrix(g.patch_size(), cout);

  ConvGradients<Scalar> grads{BasicTensor<Scalar>(input.shape()),
                              BasicTensor<Scalar>(p.kernels.shape()),
                              BasicTensor<Scalar>(p.bias.shape())};
  grads.bias.mutable_matrix(1, cout) = dy.colwise().sum();
  if (g.is_pointwise()) {
    grads.kernels.mutable_matrix(g.patch_size(), cout).noalias() = input.pixel_matrix().transpose() * dy;
    grads.input.mutable_matrix(g.out_pixels(), g.channels).noalias() = dy * k.transpose();
  } else {
    const RowMatrix<Scalar> cols = im2col(input, g);
    grads.kernels.mutable_matrix(g.patch_size(), cout).noalias() = cols.transpose() * dy;
    const RowMatrix<Scalar> dcols = dy * k.transpose();
    col2im_add(dcols, g, grads.input);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Max pooling

/// Max over each window; padding taps are skipped. When `argmax` is given it
/// receives, per output element, the flat input index of the first maximum.
template <typename Scalar>
BasicTensor<Scalar> maxpool2d(const BasicTensor<Scalar>& input, const PoolParams& p,
                              std::vector<std::size_t>* argmax = nullptr) {
  if (p.window < 1 || p.stride < 1) throw ShapeError("pool window and stride must be >= 1");
  const WindowGeometry g = plan_window(input.shape(), p.window, p.window, p.stride, p.padding);
  const std::size_t c = g.channels;
  BasicTensor<Scalar> out(Shape{g.batch, g.out_h, g.out_w, c});
  if (argmax) argmax->assign(out.size(), 0);
  const Scalar* in = input.data();
  Scalar* o = out.mutable_data();
  std::vector<Scalar> best(c);
  std::vector<std::size_t> where(c);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * g.stride) -
                                static_cast<std::ptrdiff_t>(g.pad_top);
      const std::size_t ylo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
      const std::size_t yhi = static_cast<std::size_t>(
          std::min<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(g.kernel_h),
                                   static_cast<std::ptrdiff_t>(g.in_h)));
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * g.stride) -
                                  static_cast<std::ptrdiff_t>(g.pad_left);
        const std::size_t xlo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
        const std::size_t xhi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(g.kernel_w),
                                     static_cast<std::ptrdiff_t>(g.in_w)));
        bool first = true;
        for (std::size_t y = ylo; y < yhi; ++y) {
          for (std::size_t x = xlo; x < xhi; ++x) {
            const std::size_t base = ((n * g.in_h + y) * g.in_w + x) * c;
            for (std::size_t k = 0; k < c; ++k) {
              if (first || in[base + k] > best[k]) {
                best[k] = in[base + k];
                where[k] = base + k;
              }
            }
            first = false;
          }
        }
        const std::size_t obase = ((n * g.out_h + oy) * g.out_w + ox) * c;
        for (std::size_t k = 0; k < c; ++k) {
          o[obase + k] = best[k];
          if (argmax) (*argmax)[obase + k] = where[k];
        }
      }
    }
  }
  return out;
}

/// Routes each output gradient to its recorded argmax input position.
template <typename Scalar>
BasicTensor<Scalar> maxpool2d_backward(const Shape& input_shape,
                                       const std::vector<std::size_t>& argmax,
                                       const BasicTensor<Scalar>& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("argmax record does not match gradient");
  BasicTensor<Scalar> grad_in(input_shape);
  Scalar* d = grad_in.mutable_data();
  const Scalar* g = grad_out.data();
  for (std::size_t i = 0; i < argmax.size(); ++i) d[argmax[i]] += g[i];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Dense, activation, flatten

template <typename Scalar>
BasicTensor<Scalar> dense(const BasicTensor<Scalar>& input, const DenseParams<Scalar>& p) {
  p.validate();
  if (input.rank() != 2 || input.dim(1) != p.in_features()) {
    throw ShapeError("dense expects (N," + std::to_string(p.in_features()) + "), got " +
                     input.shape().to_string());
  }
  const std::size_t n = input.dim(0), dout = p.out_features();
  BasicTensor<Scalar> out(Shape{n, dout});
  auto y = out.mutable_matrix(n, dout);
  y.noalias() = input.matrix(n, p.in_features()) * p.weights.matrix(p.in_features(), dout);
  y.rowwise() += p.bias.matrix(1, dout).row(0);
  return out;
}

template <typename Scalar>
struct DenseGradients {
  BasicTensor<Scalar> input;
  BasicTensor<Scalar> weights;
  BasicTensor<Scalar> bias;
};

template <typename Scalar>
DenseGradients<Scalar> dense_backward(const BasicTensor<Scalar>& input, const DenseParams<Scalar>& p,
                                      const BasicTensor<Scalar>& grad_out) {
  const std::size_t n = input.dim(0), din = p.in_features(), dout = p.out_features();
  const auto x = input.matrix(n, din);
  const auto dy = grad_out.matrix(n, dout);
  DenseGradients<Scalar> g{BasicTensor<Scalar>(input.shape()), BasicTensor<Scalar>(p.weights.shape()),
                           BasicTensor<Scalar>(p.bias.shape())};
  g.weights.mutable_matrix(din, dout).noalias() = x.transpose() * dy;
  g.bias.mutable_matrix(1, dout) = dy.colwise().sum();
  g.input.mutable_matrix(n, din).noalias() = dy * p.weights.matrix(din, dout).transpose();
  return g;
}

template <typename Scalar>
BasicTensor<Scalar> activate(const BasicTensor<Scalar>& input, const Activation& a) {
  check_activation(a);
  return map_elementwise(input, [&a](Scalar x) { return activation_value(a, x); });
}

/// grad_in = grad_out * f'(pre), with post = f(pre) from the forward pass.
template <typename Scalar>
BasicTensor<Scalar> activate_backward(const BasicTensor<Scalar>& pre, const BasicTensor<Scalar>& post,
                                      const BasicTensor<Scalar>& grad_out, const Activation& a) {
  BasicTensor<Scalar> g(pre.shape());
  Scalar* d = g.mutable_data();
  for (std::size_t i = 0; i < pre.size(); ++i) {
    d[i] = grad_out[i] * activation_derivative(a, pre[i], post[i]);
  }
  return g;
}

template <typename Scalar>
BasicTensor<Scalar> flatten(const BasicTensor<Scalar>& input) {
  if (input.rank() != 4) throw ShapeError("flatten expects rank-4 input");
  return input.reshaped(Shape{input.dim(0), input.dim(1) * input.dim(2) * input.dim(3)});
}

// ---------------------------------------------------------------------------
// Inception

template <typename Scalar>
BasicTensor<Scalar> inception_forward(const BasicTensor<Scalar>& input, const InceptionParams<Scalar>& p) {
  if (input.rank() != 4) throw ShapeError("inception expects rank-4 input");
  p.validate(input.dim(3));
  const Activation& act = p.activation;
  auto conv_act = [&act](const BasicTensor<Scalar>& x, const ConvParams<Scalar>& c) {
    return activate(conv2d(x, c), act);
  };
  const BasicTensor<Scalar> b1 = conv_act(input, p.branch1);
  const BasicTensor<Scalar> b2 = conv_act(conv_act(input, p.branch2_reduce), p.branch2);
  const BasicTensor<Scalar> b3 = conv_act(conv_act(input, p.branch3_reduce), p.branch3);
  const BasicTensor<Scalar> b4 = conv_act(maxpool2d(input, InceptionParams<Scalar>::branch4_pool()), p.branch4);
  return concat_channels({b1, b2, b3, b4});
}

}  // namespace globenet
