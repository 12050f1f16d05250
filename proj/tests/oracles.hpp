#pragma once

// Brute-force references; padding and indexing are re-derived, not shared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "globenet/tensor.hpp"

namespace oracle {

using globenet::Shape;
using globenet::Tensor;

struct Axis {
  long out, pad;
};

inline Axis same_axis(long in, long k, long s) {
  long out = (in + s - 1) / s;
  long total = std::max((out - 1) * s + k - in, 0L);
  return {out, total / 2};
}

inline Axis valid_axis(long in, long k, long s) { return {(in - k) / s + 1, 0}; }

inline Axis axis(long in, long k, long s, bool same) { return same ? same_axis(in, k, s) : valid_axis(in, k, s); }

inline double at(const Tensor& t, long n, long h, long w, long c) {
  const auto& d = t.shape();
  return t[static_cast<std::size_t>(((n * long(d[1]) + h) * long(d[2]) + w) * long(d[3]) + c)];
}

// kernels (KH,KW,Cin,Cout), bias (Cout)
inline Tensor conv(const Tensor& x, const Tensor& k, const Tensor& b, long s, bool same) {
  long N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  long KH = k.dim(0), KW = k.dim(1), CO = k.dim(3);
  Axis ah = axis(H, KH, s, same), aw = axis(W, KW, s, same);
  std::vector<double> out;
  for (long n = 0; n < N; ++n)
    for (long i = 0; i < ah.out; ++i)
      for (long j = 0; j < aw.out; ++j)
        for (long co = 0; co < CO; ++co) {
          double acc = b[co];
          for (long u = 0; u < KH; ++u)
            for (long v = 0; v < KW; ++v) {
              long h = i * s + u - ah.pad, w = j * s + v - aw.pad;
              if (h < 0 || h >= H || w < 0 || w >= W) continue;
              for (long ci = 0; ci < C; ++ci) acc += at(x, n, h, w, ci) * k[((u * KW + v) * C + ci) * CO + co];
            }
          out.push_back(acc);
        }
  return Tensor(Shape{std::size_t(N), std::size_t(ah.out), std::size_t(aw.out), std::size_t(CO)}, out);
}

inline Tensor maxpool(const Tensor& x, long win, long s, bool same) {
  long N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  Axis ah = axis(H, win, s, same), aw = axis(W, win, s, same);
  std::vector<double> out;
  for (long n = 0; n < N; ++n)
    for (long i = 0; i < ah.out; ++i)
      for (long j = 0; j < aw.out; ++j)
        for (long c = 0; c < C; ++c) {
          double m = -std::numeric_limits<double>::infinity();
          for (long u = 0; u < win; ++u)
            for (long v = 0; v < win; ++v) {
              long h = i * s + u - ah.pad, w = j * s + v - aw.pad;
              if (h >= 0 && h < H && w >= 0 && w < W) m = std::max(m, at(x, n, h, w, c));
            }
          out.push_back(m);
        }
  return Tensor(Shape{std::size_t(N), std::size_t(ah.out), std::size_t(aw.out), std::size_t(C)}, out);
}

inline Tensor relu(const Tensor& x) {
  std::vector<double> v(x.values().begin(), x.values().end());
  for (double& e : v) e = e > 0 ? e : 0.0;
  return Tensor(x.shape(), v);
}

// Channel concatenation by explicit index walk.
inline Tensor concat(const std::vector<Tensor>& parts) {
  long N = parts[0].dim(0), H = parts[0].dim(1), W = parts[0].dim(2), CT = 0;
  for (const auto& p : parts) CT += p.dim(3);
  std::vector<double> out;
  for (long n = 0; n < N; ++n)
    for (long h = 0; h < H; ++h)
      for (long w = 0; w < W; ++w)
        for (const auto& p : parts)
          for (long c = 0; c < long(p.dim(3)); ++c) out.push_back(at(p, n, h, w, c));
  return Tensor(Shape{std::size_t(N), std::size_t(H), std::size_t(W), std::size_t(CT)}, out);
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape.size());
  for (double& e : v) e = u(rng);
  return Tensor(std::move(shape), v);
}

}  // namespace oracle
