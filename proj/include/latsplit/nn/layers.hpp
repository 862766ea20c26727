#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "latsplit/errors.hpp"
#include "latsplit/random.hpp"
#include "latsplit/tensor.hpp"

namespace latsplit::nn {

template <typename Scalar>
struct Parameter {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;
  Mat<Scalar> adam_m;
  Mat<Scalar> adam_v;

  Parameter() = default;
  Parameter(std::string n, Mat<Scalar> v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Mat<Scalar>::Zero(value.rows(), value.cols())),
        adam_m(Mat<Scalar>::Zero(value.rows(), value.cols())),
        adam_v(Mat<Scalar>::Zero(value.rows(), value.cols())) {}
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>*>;

// Activations saved by forward passes, consumed in reverse order by backward.
template <typename Scalar>
class Tape {
 public:
  struct Entry {
    Mat<Scalar> data;
    Shape shape;
  };

  void push(Mat<Scalar> data, Shape shape = {}) { entries_.push_back({std::move(data), shape}); }

  Entry pop() {
    if (entries_.empty()) throw StateError("tape underflow: backward called without matching forward");
    Entry e = std::move(entries_.back());
    entries_.pop_back();
    return e;
  }

  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

template <typename Scalar>
Mat<Scalar> he_normal(int rows, int cols, int fan_in, double gain, Rng& rng) {
  std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / fan_in));
  Mat<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

template <typename Scalar>
void zero_grad(const ParameterList<Scalar>& params) {
  for (auto* p : params) p->grad.setZero();
}

// Zero-padded ("same") 2-D convolution, kernel 1 or 3, stride 1 or 2.
template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in, int out, int kernel, int stride, Rng& rng, double gain = 1.0)
      : in_(in),
        out_(out),
        kernel_(kernel),
        stride_(stride),
        weight_(name + ".weight", he_normal<Scalar>(kernel * kernel * in, out, kernel * kernel * in, gain, rng)),
        bias_(name + ".bias", Mat<Scalar>::Zero(1, out)) {
    if (kernel != 1 && kernel != 3) throw ParameterError("Conv2d: kernel must be 1 or 3");
    if (stride != 1 && stride != 2) throw ParameterError("Conv2d: stride must be 1 or 2");
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

  Shape output_shape(const Shape& in) const {
    const int pad = kernel_ / 2;
    return {in.n, (in.h + 2 * pad - kernel_) / stride_ + 1, (in.w + 2 * pad - kernel_) / stride_ + 1, out_};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Tape<Scalar>* tape) const {
    if (x.channels() != in_) {
      throw DimensionError(weight_.name + ": expected " + std::to_string(in_) + " channels, got " +
                           std::to_string(x.channels()));
    }
    const Shape out_shape = output_shape(x.shape());
    Mat<Scalar> y;
    if (kernel_ == 1 && stride_ == 1) {
      y.noalias() = x.matrix() * weight_.value;
    } else {
      auto cols = im2col(x, out_shape);
      y.noalias() = cols * weight_.value;
    }
    if (tape) tape->push(x.matrix(), x.shape());
    y.rowwise() += bias_.value.row(0);
    return Tensor<Scalar>(out_shape, std::move(y));
  }

  // The im2col matrix is rebuilt from the saved input instead of being kept on
  // the tape; large short-lived buffers cost more in page faults than the copy.
  Tensor<Scalar> backward(const Tensor<Scalar>& dy, Tape<Scalar>& tape) {
    auto saved = tape.pop();
    bias_.grad += dy.matrix().colwise().sum();
    if (kernel_ == 1 && stride_ == 1) {
      weight_.grad.noalias() += saved.data.transpose() * dy.matrix();
      return Tensor<Scalar>(saved.shape, dy.matrix() * weight_.value.transpose());
    }
    const Tensor<Scalar> x(saved.shape, std::move(saved.data));
    {
      auto cols = im2col(x, dy.shape());
      weight_.grad.noalias() += cols.transpose() * dy.matrix();
    }
    auto dcols = scratch(1, dy.shape().rows(), kernel_ * kernel_ * in_);
    dcols.noalias() = dy.matrix() * weight_.value.transpose();
    return col2im(dcols, saved.shape, dy.shape());
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  using MatMap = Eigen::Map<Mat<Scalar>>;

  // Per-thread reusable workspace; slot 0 holds im2col, slot 1 its gradient.
  static MatMap scratch(int slot, Eigen::Index rows, Eigen::Index cols) {
    static thread_local std::vector<Scalar> buffers[2];
    auto& buf = buffers[slot];
    if (buf.size() < static_cast<size_t>(rows * cols)) buf.resize(rows * cols);
    return MatMap(buf.data(), rows, cols);
  }

  MatMap im2col(const Tensor<Scalar>& x, const Shape& o) const {
    const Shape& s = x.shape();
    const int pad = kernel_ / 2;
    MatMap cols = scratch(0, o.rows(), kernel_ * kernel_ * in_);
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        for (int ci = 0; ci < in_; ++ci) {
          Scalar* dst = cols.col((ky * kernel_ + kx) * in_ + ci).data();
          const Scalar* src = x.matrix().col(ci).data();
          for (int b = 0; b < s.n; ++b) {
            for (int oy = 0; oy < o.h; ++oy) {
              const int iy = oy * stride_ + ky - pad;
              Scalar* row = dst + (static_cast<long>(b) * o.h + oy) * o.w;
              if (iy < 0 || iy >= s.h) {
                for (int ox = 0; ox < o.w; ++ox) row[ox] = Scalar(0);
                continue;
              }
              const Scalar* in_row = src + (static_cast<long>(b) * s.h + iy) * s.w;
              const int shift = kx - pad;
              if (stride_ == 1) {
                // valid output columns: 0 <= ox + shift < s.w
                const int lo = std::max(0, -shift);
                const int hi = std::min(o.w, s.w - shift);
                for (int ox = 0; ox < lo; ++ox) row[ox] = Scalar(0);
                std::copy(in_row + lo + shift, in_row + hi + shift, row + lo);
                for (int ox = hi; ox < o.w; ++ox) row[ox] = Scalar(0);
              } else {
                for (int ox = 0; ox < o.w; ++ox) {
                  const int ix = ox * stride_ + shift;
                  row[ox] = (ix < 0 || ix >= s.w) ? Scalar(0) : in_row[ix];
                }
              }
            }
          }
        }
      }
    }
    return cols;
  }

  Tensor<Scalar> col2im(const MatMap& dcols, const Shape& s, const Shape& o) const {
    const int pad = kernel_ / 2;
    Tensor<Scalar> dx(s);
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        for (int ci = 0; ci < in_; ++ci) {
          const Scalar* src = dcols.col((ky * kernel_ + kx) * in_ + ci).data();
          Scalar* dst = dx.matrix().col(ci).data();
          for (int b = 0; b < s.n; ++b) {
            for (int oy = 0; oy < o.h; ++oy) {
              const int iy = oy * stride_ + ky - pad;
              if (iy < 0 || iy >= s.h) continue;
              const Scalar* row = src + (static_cast<long>(b) * o.h + oy) * o.w;
              Scalar* out_row = dst + (static_cast<long>(b) * s.h + iy) * s.w;
              const int shift = kx - pad;
              if (stride_ == 1) {
                const int lo = std::max(0, -shift);
                const int hi = std::min(o.w, s.w - shift);
                for (int ox = lo; ox < hi; ++ox) out_row[ox + shift] += row[ox];
              } else {
                for (int ox = 0; ox < o.w; ++ox) {
                  const int ix = ox * stride_ + shift;
                  if (ix >= 0 && ix < s.w) out_row[ix] += row[ox];
                }
              }
            }
          }
        }
      }
    }
    return dx;
  }

  int in_ = 0;
  int out_ = 0;
  int kernel_ = 3;
  int stride_ = 1;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
};

// Dense layer on N x 1 x 1 x C tensors.
template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, double gain = 1.0)
      : weight_(name + ".weight", he_normal<Scalar>(in, out, in, gain, rng)),
        bias_(name + ".bias", Mat<Scalar>::Zero(1, out)) {}

  Eigen::Index input_dim() const { return weight_.value.rows(); }
  Eigen::Index output_dim() const { return weight_.value.cols(); }

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape) const {
    Mat<Scalar> y = x * weight_.value;
    y.rowwise() += bias_.value.row(0);
    if (tape) tape->push(x);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, Tape<Scalar>& tape) {
    auto saved = tape.pop();
    weight_.grad.noalias() += saved.data.transpose() * dy;
    bias_.grad += dy.colwise().sum();
    return dy * weight_.value.transpose();
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
Mat<Scalar> sigmoid_matrix(const Mat<Scalar>& x) {
  return ((-x.array()).exp() + Scalar(1)).inverse().matrix();
}

template <typename Scalar>
Mat<Scalar> silu_forward(const Mat<Scalar>& x, Tape<Scalar>* tape) {
  Mat<Scalar> y = x.cwiseProduct(sigmoid_matrix(x));
  if (tape) tape->push(x);
  return y;
}

template <typename Scalar>
Mat<Scalar> silu_backward(const Mat<Scalar>& dy, Tape<Scalar>& tape) {
  auto saved = tape.pop();
  const Mat<Scalar> s = sigmoid_matrix(saved.data);
  return (dy.array() * s.array() * (Scalar(1) + saved.data.array() * (Scalar(1) - s.array()))).matrix();
}

template <typename Scalar>
Tensor<Scalar> silu_forward(const Tensor<Scalar>& x, Tape<Scalar>* tape) {
  return Tensor<Scalar>(x.shape(), silu_forward(x.matrix(), tape));
}

template <typename Scalar>
Tensor<Scalar> silu_backward(const Tensor<Scalar>& dy, Tape<Scalar>& tape) {
  return Tensor<Scalar>(dy.shape(), silu_backward(dy.matrix(), tape));
}

template <typename Scalar>
Tensor<Scalar> sigmoid_forward(const Tensor<Scalar>& x, Tape<Scalar>* tape) {
  Mat<Scalar> y = sigmoid_matrix(x.matrix());
  if (tape) tape->push(y);
  return Tensor<Scalar>(x.shape(), std::move(y));
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& dy, Tape<Scalar>& tape) {
  auto saved = tape.pop();
  const auto& y = saved.data.array();
  return Tensor<Scalar>(dy.shape(), (dy.matrix().array() * y * (Scalar(1) - y)).matrix());
}

// Nearest-neighbour 2x upsampling.
template <typename Scalar>
Tensor<Scalar> upsample2x(const Tensor<Scalar>& x) {
  const Shape& s = x.shape();
  Tensor<Scalar> y(Shape{s.n, 2 * s.h, 2 * s.w, s.c});
  for (int ch = 0; ch < s.c; ++ch) {
    const Scalar* src = x.matrix().col(ch).data();
    Scalar* dst = y.matrix().col(ch).data();
    for (int b = 0; b < s.n; ++b) {
      for (int yy = 0; yy < 2 * s.h; ++yy) {
        const Scalar* in_row = src + (static_cast<long>(b) * s.h + yy / 2) * s.w;
        Scalar* out_row = dst + (static_cast<long>(b) * 2 * s.h + yy) * 2 * s.w;
        for (int xx = 0; xx < 2 * s.w; ++xx) out_row[xx] = in_row[xx / 2];
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> upsample2x_backward(const Tensor<Scalar>& dy) {
  const Shape& o = dy.shape();
  Tensor<Scalar> dx(Shape{o.n, o.h / 2, o.w / 2, o.c});
  for (int ch = 0; ch < o.c; ++ch) {
    const Scalar* src = dy.matrix().col(ch).data();
    Scalar* dst = dx.matrix().col(ch).data();
    for (int b = 0; b < o.n; ++b) {
      for (int yy = 0; yy < o.h; ++yy) {
        const Scalar* in_row = src + (static_cast<long>(b) * o.h + yy) * o.w;
        Scalar* out_row = dst + (static_cast<long>(b) * (o.h / 2) + yy / 2) * (o.w / 2);
        for (int xx = 0; xx < o.w; ++xx) out_row[xx / 2] += in_row[xx];
      }
    }
  }
  return dx;
}

// Adds a per-sample channel bias (N x C) to every pixel of x.
template <typename Scalar>
void add_sample_bias(Tensor<Scalar>& x, const Mat<Scalar>& bias) {
  for (int b = 0; b < x.batch(); ++b) x.sample_rows(b).rowwise() += bias.row(b);
}

template <typename Scalar>
Mat<Scalar> sample_bias_backward(const Tensor<Scalar>& dy) {
  Mat<Scalar> db(dy.batch(), dy.channels());
  for (int b = 0; b < dy.batch(); ++b) db.row(b) = dy.sample_rows(b).colwise().sum();
  return db;
}

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global gradient-norm clip; <= 0 disables
};

template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // Applies one update from the accumulated gradients and returns the
  // pre-clipping global gradient norm.
  double step(const ParameterList<Scalar>& params) {
    ++steps_;
    double norm2 = 0.0;
    for (const auto* p : params) norm2 += static_cast<double>(p->grad.squaredNorm());
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm at optimizer step " + std::to_string(steps_));
    const double scale = (options_.clip_norm > 0 && norm > options_.clip_norm) ? options_.clip_norm / norm : 1.0;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const Scalar lr = static_cast<Scalar>(options_.learning_rate * std::sqrt(correction2) / correction1);
    for (auto* p : params) {
      const Mat<Scalar> g = static_cast<Scalar>(scale) * p->grad;
      p->adam_m = static_cast<Scalar>(b1) * p->adam_m + static_cast<Scalar>(1 - b1) * g;
      p->adam_v = static_cast<Scalar>(b2) * p->adam_v + static_cast<Scalar>(1 - b2) * g.cwiseAbs2();
      p->value.array() -= lr * p->adam_m.array() / (p->adam_v.array().sqrt() + static_cast<Scalar>(options_.epsilon));
    }
    return norm;
  }

  long steps() const { return steps_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  AdamOptions options_;
  long steps_ = 0;
};

}  // namespace latsplit::nn
