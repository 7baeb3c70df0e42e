#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "eegclean/error.hpp"

// Activations are row-major matrices of shape channels x (batch * length):
// example n occupies columns [n * length, (n + 1) * length). Dense layers work
// on features x batch.
namespace eegclean::cnn {

using Index = Eigen::Index;

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
struct Param {
  std::string name;
  Mat<S>* value;
  Mat<S>* grad;
};

// Uniform on +-sqrt(6 / fan_in).
template <typename S>
void fan_in_uniform(Mat<S>& w, Index fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(dist(rng));
}

template <typename S>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(Index in_channels, Index out_channels, Index kernel, bool bias)
      : in_(in_channels), out_(out_channels), k_(kernel), has_bias_(bias),
        weight(Mat<S>::Zero(out_channels, in_channels * kernel)),
        bias(Mat<S>::Zero(out_channels, 1)),
        grad_weight(Mat<S>::Zero(out_channels, in_channels * kernel)),
        grad_bias(Mat<S>::Zero(out_channels, 1)) {}

  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }
  Index kernel() const { return k_; }
  bool has_bias() const { return has_bias_; }
  static Index output_length(Index length, Index kernel) { return length - kernel + 1; }

  void init(std::mt19937_64& rng) {
    fan_in_uniform(weight, in_ * k_, rng);
    bias.setZero();
  }

  Mat<S> forward(const Mat<S>& x, Index batch) {
    if (x.rows() != in_ || batch < 1 || x.cols() % batch != 0)
      throw Error(ErrorCode::ShapeMismatch, "conv1d: input has the wrong shape");
    len_ = x.cols() / batch;
    batch_ = batch;
    const Index lout = output_length(len_, k_);
    if (lout < 1) throw Error(ErrorCode::ShapeMismatch, "conv1d: input shorter than the kernel");
    cols_.resize(in_ * k_, batch * lout);
    for (Index ci = 0; ci < in_; ++ci)
      for (Index j = 0; j < k_; ++j)
        for (Index n = 0; n < batch; ++n)
          cols_.row(ci * k_ + j).segment(n * lout, lout) = x.row(ci).segment(n * len_ + j, lout);
    Mat<S> y = weight * cols_;
    if (has_bias_) y.colwise() += bias.col(0);
    return y;
  }

  // Accumulates parameter gradients; returns the input gradient when asked.
  Mat<S> backward(const Mat<S>& dy, bool need_input_grad = true) {
    const Index lout = output_length(len_, k_);
    if (dy.rows() != out_ || dy.cols() != batch_ * lout)
      throw Error(ErrorCode::ShapeMismatch, "conv1d: gradient has the wrong shape");
    grad_weight.noalias() += dy * cols_.transpose();
    if (has_bias_) grad_bias += dy.rowwise().sum();
    if (!need_input_grad) return {};
    const Mat<S> dcols = weight.transpose() * dy;
    Mat<S> dx = Mat<S>::Zero(in_, batch_ * len_);
    for (Index ci = 0; ci < in_; ++ci)
      for (Index j = 0; j < k_; ++j)
        for (Index n = 0; n < batch_; ++n)
          dx.row(ci).segment(n * len_ + j, lout) += dcols.row(ci * k_ + j).segment(n * lout, lout);
    return dx;
  }

  void params(std::vector<Param<S>>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight, &grad_weight});
    if (has_bias_) out.push_back({prefix + ".bias", &bias, &grad_bias});
  }

 private:
  Index in_ = 0, out_ = 0, k_ = 0;
  bool has_bias_ = true;
  Index len_ = 0, batch_ = 0;
  Mat<S> cols_;

 public:
  Mat<S> weight;  // out x (in * kernel), kernel taps contiguous per input channel
  Mat<S> bias;    // out x 1
  Mat<S> grad_weight;
  Mat<S> grad_bias;
};

// Per-channel normalisation over every column of the batch.
template <typename S>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(Index channels, double eps = 1e-5, double momentum = 0.1)
      : eps(eps), momentum(momentum),
        gamma(Mat<S>::Ones(channels, 1)), beta(Mat<S>::Zero(channels, 1)),
        running_mean(Mat<S>::Zero(channels, 1)), running_var(Mat<S>::Ones(channels, 1)),
        grad_gamma(Mat<S>::Zero(channels, 1)), grad_beta(Mat<S>::Zero(channels, 1)) {}

  Index channels() const { return gamma.rows(); }

  Mat<S> forward(const Mat<S>& x, bool training) {
    if (x.rows() != channels()) throw Error(ErrorCode::ShapeMismatch, "batchnorm: channel count differs");
    const Index m = x.cols();
    if (!training) {
      Mat<S> y(x.rows(), m);
      for (Index c = 0; c < x.rows(); ++c) {
        const S scale = gamma(c, 0) / std::sqrt(running_var(c, 0) + static_cast<S>(eps));
        y.row(c) = ((x.row(c).array() - running_mean(c, 0)) * scale + beta(c, 0)).matrix();
      }
      return y;
    }
    xhat_.resize(x.rows(), m);
    inv_std_.resize(x.rows(), 1);
    Mat<S> y(x.rows(), m);
    for (Index c = 0; c < x.rows(); ++c) {
      const S mean = x.row(c).mean();
      const S var = (x.row(c).array() - mean).square().mean();
      const S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
      inv_std_(c, 0) = inv;
      xhat_.row(c) = ((x.row(c).array() - mean) * inv).matrix();
      y.row(c) = (xhat_.row(c).array() * gamma(c, 0) + beta(c, 0)).matrix();
      const S unbiased = m > 1 ? var * static_cast<S>(m) / static_cast<S>(m - 1) : var;
      running_mean(c, 0) = static_cast<S>(1 - momentum) * running_mean(c, 0) + static_cast<S>(momentum) * mean;
      running_var(c, 0) = static_cast<S>(1 - momentum) * running_var(c, 0) + static_cast<S>(momentum) * unbiased;
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) {
    if (dy.rows() != xhat_.rows() || dy.cols() != xhat_.cols())
      throw Error(ErrorCode::ShapeMismatch, "batchnorm: gradient has the wrong shape");
    const S m = static_cast<S>(dy.cols());
    Mat<S> dx(dy.rows(), dy.cols());
    for (Index c = 0; c < dy.rows(); ++c) {
      const S sum_dy = dy.row(c).sum();
      const S sum_dy_xhat = dy.row(c).dot(xhat_.row(c));
      grad_beta(c, 0) += sum_dy;
      grad_gamma(c, 0) += sum_dy_xhat;
      const S k = gamma(c, 0) * inv_std_(c, 0) / m;
      dx.row(c) = (k * (m * dy.row(c).array() - sum_dy - xhat_.row(c).array() * sum_dy_xhat)).matrix();
    }
    return dx;
  }

  void params(std::vector<Param<S>>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma, &grad_gamma});
    out.push_back({prefix + ".beta", &beta, &grad_beta});
  }

  double eps = 1e-5;
  double momentum = 0.1;
  Mat<S> gamma, beta, running_mean, running_var;
  Mat<S> grad_gamma, grad_beta;

 private:
  Mat<S> xhat_, inv_std_;
};

template <typename S>
class Relu {
 public:
  Mat<S> forward(const Mat<S>& x) {
    mask_ = (x.array() > S(0)).template cast<S>();
    return x.cwiseMax(S(0));
  }
  Mat<S> backward(const Mat<S>& dy) const {
    if (dy.rows() != mask_.rows() || dy.cols() != mask_.cols())
      throw Error(ErrorCode::ShapeMismatch, "relu: gradient has the wrong shape");
    return dy.cwiseProduct(mask_);
  }

 private:
  Mat<S> mask_;
};

// Non-overlapping max over windows of `size`; a trailing partial window is dropped.
template <typename S>
class MaxPool {
 public:
  explicit MaxPool(Index size = 2) : size_(size) {}
  Index size() const { return size_; }
  static Index output_length(Index length, Index size) { return length / size; }

  Mat<S> forward(const Mat<S>& x, Index batch) {
    if (batch < 1 || x.cols() % batch != 0)
      throw Error(ErrorCode::ShapeMismatch, "maxpool: input has the wrong shape");
    len_ = x.cols() / batch;
    batch_ = batch;
    rows_ = x.rows();
    const Index lout = output_length(len_, size_);
    if (lout < 1) throw Error(ErrorCode::ShapeMismatch, "maxpool: input shorter than the window");
    Mat<S> y(x.rows(), batch * lout);
    argmax_.resize(x.rows(), batch * lout);
    for (Index c = 0; c < x.rows(); ++c)
      for (Index n = 0; n < batch; ++n)
        for (Index t = 0; t < lout; ++t) {
          const Index base = n * len_ + t * size_;
          Index best = base;
          for (Index j = 1; j < size_; ++j)
            if (x(c, base + j) > x(c, best)) best = base + j;
          y(c, n * lout + t) = x(c, best);
          argmax_(c, n * lout + t) = best;
        }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) const {
    if (dy.rows() != argmax_.rows() || dy.cols() != argmax_.cols())
      throw Error(ErrorCode::ShapeMismatch, "maxpool: gradient has the wrong shape");
    Mat<S> dx = Mat<S>::Zero(rows_, batch_ * len_);
    for (Index c = 0; c < dy.rows(); ++c)
      for (Index j = 0; j < dy.cols(); ++j) dx(c, argmax_(c, j)) += dy(c, j);
    return dx;
  }

 private:
  Index size_ = 2;
  Index len_ = 0, batch_ = 0, rows_ = 0;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax_;
};

// y = W x + b on features x batch.
template <typename S>
class Dense {
 public:
  Dense() = default;
  Dense(Index in, Index out)
      : weight(Mat<S>::Zero(out, in)), bias(Mat<S>::Zero(out, 1)),
        grad_weight(Mat<S>::Zero(out, in)), grad_bias(Mat<S>::Zero(out, 1)) {}

  Index in_features() const { return weight.cols(); }
  Index out_features() const { return weight.rows(); }

  void init(std::mt19937_64& rng) {
    fan_in_uniform(weight, in_features(), rng);
    bias.setZero();
  }

  Mat<S> forward(const Mat<S>& x) {
    if (x.rows() != in_features()) throw Error(ErrorCode::ShapeMismatch, "dense: input width differs");
    x_ = x;
    Mat<S> y = weight * x;
    y.colwise() += bias.col(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) {
    if (dy.rows() != out_features() || dy.cols() != x_.cols())
      throw Error(ErrorCode::ShapeMismatch, "dense: gradient has the wrong shape");
    grad_weight.noalias() += dy * x_.transpose();
    grad_bias += dy.rowwise().sum();
    return weight.transpose() * dy;
  }

  void params(std::vector<Param<S>>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight, &grad_weight});
    out.push_back({prefix + ".bias", &bias, &grad_bias});
  }

  Mat<S> weight, bias, grad_weight, grad_bias;

 private:
  Mat<S> x_;
};

// Numerically stable mean binary cross-entropy over every (class, example)
// entry, taken from logits.
template <typename S>
double bce_with_logits(const Mat<S>& logits, const Mat<S>& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw Error(ErrorCode::ShapeMismatch, "loss: logits and targets differ in shape");
  double total = 0.0;
  for (Index i = 0; i < logits.size(); ++i) {
    const double z = static_cast<double>(logits.data()[i]);
    const double t = static_cast<double>(targets.data()[i]);
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

template <typename S>
Mat<S> sigmoid(const Mat<S>& z) {
  return (S(1) / (S(1) + (-z.array()).exp())).matrix();
}

// d loss / d logits = (sigmoid(z) - t) / count.
template <typename S>
Mat<S> bce_logit_gradient(const Mat<S>& logits, const Mat<S>& targets) {
  return (sigmoid(logits) - targets) / static_cast<S>(logits.size());
}

}  // namespace eegclean::cnn
