#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <ostream>
#include <string>

#include "latsplit/errors.hpp"

namespace latsplit {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct Shape {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;

  int pixels() const { return h * w; }
  int rows() const { return n * h * w; }
  long size() const { return static_cast<long>(n) * h * w * c; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w) + "x" +
         std::to_string(s.c);
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << to_string(s); }

// Batched channel-last tensor. Storage is an Eigen matrix with one row per
// pixel (batch-major, then row-major over y, x) and one column per channel,
// which makes 1x1 convolutions plain matrix products and keeps im2col cheap.
template <typename Scalar>
class Tensor {
 public:
  using Matrix = Mat<Scalar>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(Matrix::Zero(shape.rows(), shape.c)) {}
  Tensor(int h, int w, int c) : Tensor(Shape{1, h, w, c}) {}
  Tensor(int n, int h, int w, int c) : Tensor(Shape{n, h, w, c}) {}
  Tensor(Shape shape, Matrix data) : shape_(shape), data_(std::move(data)) {
    if (data_.rows() != shape.rows() || data_.cols() != shape.c) {
      throw DimensionError("tensor data does not match shape " + to_string(shape));
    }
  }

  static Tensor constant(Shape shape, Scalar value) {
    return Tensor(shape, Matrix::Constant(shape.rows(), shape.c, value));
  }

  const Shape& shape() const { return shape_; }
  int batch() const { return shape_.n; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  int channels() const { return shape_.c; }
  long size() const { return shape_.size(); }
  bool empty() const { return shape_.size() == 0; }

  Scalar& operator()(int b, int y, int x, int ch) { return data_(index(b, y, x), ch); }
  Scalar operator()(int b, int y, int x, int ch) const { return data_(index(b, y, x), ch); }
  Scalar& operator()(int y, int x, int ch) { return data_(index(0, y, x), ch); }
  Scalar operator()(int y, int x, int ch) const { return data_(index(0, y, x), ch); }

  Matrix& matrix() { return data_; }
  const Matrix& matrix() const { return data_; }
  auto array() { return data_.array(); }
  auto array() const { return data_.array(); }

  // Rows belonging to one batch element.
  auto sample_rows(int b) { return data_.middleRows(static_cast<Eigen::Index>(b) * shape_.pixels(), shape_.pixels()); }
  auto sample_rows(int b) const {
    return data_.middleRows(static_cast<Eigen::Index>(b) * shape_.pixels(), shape_.pixels());
  }

  Tensor sample(int b) const { return slice(b, 1); }

  Tensor slice(int first, int count) const {
    Shape s = shape_;
    s.n = count;
    return Tensor(s, data_.middleRows(static_cast<Eigen::Index>(first) * shape_.pixels(),
                                      static_cast<Eigen::Index>(count) * shape_.pixels()));
  }

  void set_slice(int first, const Tensor& part) {
    if (part.height() != height() || part.width() != width() || part.channels() != channels() ||
        first + part.batch() > batch()) {
      throw DimensionError("set_slice: " + to_string(part.shape()) + " into " + to_string(shape_));
    }
    data_.middleRows(static_cast<Eigen::Index>(first) * shape_.pixels(), part.matrix().rows()) = part.matrix();
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Eigen::Index index(int b, int y, int x) const {
    return (static_cast<Eigen::Index>(b) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  Matrix data_;
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

// Concatenate along the batch axis.
template <typename Scalar>
Tensor<Scalar> stack(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
    throw DimensionError("stack: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Shape s = a.shape();
  s.n += b.batch();
  Mat<Scalar> m(s.rows(), s.c);
  m << a.matrix(), b.matrix();
  return Tensor<Scalar>(s, std::move(m));
}

// Concatenate along the channel axis.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError("concat_channels: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Shape s = a.shape();
  s.c += b.channels();
  Mat<Scalar> m(s.rows(), s.c);
  m << a.matrix(), b.matrix();
  return Tensor<Scalar>(s, std::move(m));
}

template <typename Scalar>
Tensor<Scalar> channel_range(const Tensor<Scalar>& t, int first, int count) {
  Shape s = t.shape();
  s.c = count;
  return Tensor<Scalar>(s, t.matrix().middleCols(first, count));
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "operator+");
  return Tensor<Scalar>(a.shape(), a.matrix() + b.matrix());
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "operator-");
  return Tensor<Scalar>(a.shape(), a.matrix() - b.matrix());
}

template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, const Tensor<Scalar>& a) {
  return Tensor<Scalar>(a.shape(), s * a.matrix());
}

template <typename Scalar>
Scalar squared_distance(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "squared_distance");
  return (a.matrix() - b.matrix()).squaredNorm();
}

using Image = Tensor<float>;
using Latent = Tensor<float>;

}  // namespace latsplit
