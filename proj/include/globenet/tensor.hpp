#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "globenet/error.hpp"

namespace globenet {

/// Extents of a rank 1..4 array. Rank-4 shapes are read as (N, H, W, C).
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 4) {
      throw ShapeError("shape rank must be 1..4, got " + std::to_string(dims_.size()));
    }
    std::size_t total = 1;
    for (std::size_t d : dims_) {
      if (d == 0) throw ShapeError("shape extents must be >= 1: " + to_string());
      if (__builtin_mul_overflow(total, d, &total)) {
        throw ShapeError("shape element count overflows: " + to_string());
      }
    }
    size_ = total;
  }

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return size_; }
  const std::vector<std::size_t>& dims() const { return dims_; }

  friend bool operator==(const Shape&, const Shape&) = default;

  std::string to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ')';
    return os.str();
  }

 private:
  std::vector<std::size_t> dims_;
  std::size_t size_ = 0;
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;

template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

/// Dense row-major NHWC array. Values are checked finite on construction.
template <typename Scalar>
class BasicTensor {
 public:
  using value_type = Scalar;

  BasicTensor() = default;

  /// Zero-filled tensor.
  explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(shape_.size(), Scalar(0)) {}

  BasicTensor(Shape shape, std::vector<Scalar> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("value count " + std::to_string(data_.size()) + " does not match shape " +
                       shape_.to_string());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw ValueError("non-finite value at flat index " + std::to_string(i));
      }
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }

  std::span<const Scalar> values() const { return data_; }
  const Scalar* data() const { return data_.data(); }
  /// Writable storage for kernels that fill a freshly allocated output.
  Scalar* mutable_data() { return data_.data(); }
  std::span<Scalar> mutable_values() { return data_; }

  Scalar operator[](std::size_t flat) const { return data_[flat]; }
  Scalar& operator[](std::size_t flat) { return data_[flat]; }

  /// Flat offset of (n,h,w,c) in a rank-4 tensor.
  std::size_t offset(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return ((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
  }
  Scalar at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return data_[offset(n, h, w, c)];
  }

  /// View as a (rows x cols) row-major matrix; rows * cols must equal size().
  ConstMatrixMap<Scalar> matrix(std::size_t rows, std::size_t cols) const {
    check_matrix(rows, cols);
    return ConstMatrixMap<Scalar>(data_.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
  }
  MatrixMap<Scalar> mutable_matrix(std::size_t rows, std::size_t cols) {
    check_matrix(rows, cols);
    return MatrixMap<Scalar>(data_.data(), static_cast<Eigen::Index>(rows),
                             static_cast<Eigen::Index>(cols));
  }
  /// Rank-4 tensor viewed as (N*H*W, C).
  ConstMatrixMap<Scalar> pixel_matrix() const {
    const std::size_t c = shape_[rank() - 1];
    return matrix(size() / c, c);
  }

  BasicTensor reshaped(Shape shape) const {
    if (shape.size() != size()) {
      throw ShapeError("cannot reshape " + shape_.to_string() + " to " + shape.to_string());
    }
    BasicTensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    std::vector<Other> v(data_.begin(), data_.end());
    return BasicTensor<Other>(shape_, std::move(v));
  }

  bool all_finite() const {
    for (Scalar x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  /// Bitwise equality of shape and values.
  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void check_matrix(std::size_t rows, std::size_t cols) const {
    if (rows * cols != data_.size()) {
      throw ShapeError("matrix view " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " does not cover " + shape_.to_string());
    }
  }

  Shape shape_;
  std::vector<Scalar> data_;
};

using Tensor = BasicTensor<double>;

/// Applies f to every element. Throws if f yields a non-finite value.
template <typename Scalar, typename F>
BasicTensor<Scalar> map_elementwise(const BasicTensor<Scalar>& a, F&& f) {
  BasicTensor<Scalar> out(a.shape());
  const Scalar* in = a.data();
  Scalar* o = out.mutable_data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    o[i] = f(in[i]);
    if (!std::isfinite(o[i])) {
      throw ValueError("elementwise map produced a non-finite value at flat index " +
                       std::to_string(i));
    }
  }
  return out;
}

/// Joins rank-4 tensors along the channel axis in order.
template <typename Scalar>
BasicTensor<Scalar> concat_channels(std::span<const BasicTensor<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels needs at least one part");
  const Shape& first = parts[0].shape();
  std::size_t total_c = 0;
  for (const auto& p : parts) {
    if (p.rank() != 4) throw ShapeError("concat_channels needs rank-4 parts");
    if (p.dim(0) != first[0] || p.dim(1) != first[1] || p.dim(2) != first[2]) {
      throw ShapeError("concat_channels batch/spatial mismatch: " + first.to_string() + " vs " +
                       p.shape().to_string());
    }
    total_c += p.dim(3);
  }
  const std::size_t pixels = first[0] * first[1] * first[2];
  BasicTensor<Scalar> out(Shape{first[0], first[1], first[2], total_c});
  auto dst = out.mutable_matrix(pixels, total_c);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(3);
    dst.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(c)) =
        p.matrix(pixels, c);
    offset += c;
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> concat_channels(std::initializer_list<BasicTensor<Scalar>> parts) {
  return concat_channels(std::span<const BasicTensor<Scalar>>(parts.begin(), parts.size()));
}

/// Channels [begin, begin + count) of a rank-4 tensor.
/// Stacks along the leading (batch) axis; trailing extents must agree.
template <typename Scalar>
BasicTensor<Scalar> concat_batch(std::span<const BasicTensor<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_batch needs at least one part");
  auto dims = parts[0].shape().dims();
  std::vector<Scalar> v;
  std::size_t n = 0;
  for (const auto& p : parts) {
    auto d = p.shape().dims();
    if (d.size() != dims.size() || !std::equal(d.begin() + 1, d.end(), dims.begin() + 1)) {
      throw ShapeError("concat_batch trailing extents differ: " + parts[0].shape().to_string() + " vs " +
                       p.shape().to_string());
    }
    n += d[0];
    v.insert(v.end(), p.values().begin(), p.values().end());
  }
  dims[0] = n;
  return BasicTensor<Scalar>(Shape(dims), std::move(v));
}

template <typename Scalar>
BasicTensor<Scalar> concat_batch(std::initializer_list<BasicTensor<Scalar>> parts) {
  return concat_batch(std::span<const BasicTensor<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
BasicTensor<Scalar> slice_channels(const BasicTensor<Scalar>& a, std::size_t begin,
                                   std::size_t count) {
  if (a.rank() != 4 || begin + count > a.dim(3) || count == 0) {
    throw ShapeError("channel slice out of range for " + a.shape().to_string());
  }
  const std::size_t pixels = a.dim(0) * a.dim(1) * a.dim(2);
  BasicTensor<Scalar> out(Shape{a.dim(0), a.dim(1), a.dim(2), count});
  out.mutable_matrix(pixels, count) = a.matrix(pixels, a.dim(3))
                                          .middleCols(static_cast<Eigen::Index>(begin),
                                                      static_cast<Eigen::Index>(count));
  return out;
}

/// Samples [begin, begin + count) along the leading axis.
template <typename Scalar>
BasicTensor<Scalar> slice_batch(const BasicTensor<Scalar>& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.dim(0) || count == 0) {
    throw ShapeError("batch slice out of range for " + a.shape().to_string());
  }
  auto dims = a.shape().dims();
  const std::size_t stride = a.size() / dims[0];
  dims[0] = count;
  std::vector<Scalar> v(a.data() + begin * stride, a.data() + (begin + count) * stride);
  return BasicTensor<Scalar>(Shape(dims), std::move(v));
}

}  // namespace globenet
