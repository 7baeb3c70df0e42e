#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eegclean/cnn/layers.hpp"
#include "eegclean/error.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean::cnn {

// Conv stages are conv(kernel, stride 1, no padding) -> batchnorm -> ReLU ->
// maxpool(pool, stride pool). The dense stack starts at the flattened width
// and ends at one logit per label.
struct CnnArchitecture {
  Index in_channels = 14;
  Index input_length = kDefaultWindowLength;
  std::vector<Index> conv_channels{75, 150, 300};
  Index kernel = 3;
  Index pool = 2;
  std::vector<Index> dense{23400, 1024, 512, 256, 5};
  double batchnorm_eps = 1e-5;
  double batchnorm_momentum = 0.1;

  // Temporal length after the input and after every conv and every pool.
  std::vector<Index> length_trace() const {
    std::vector<Index> trace{input_length};
    Index len = input_length;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
      len = Conv1d<double>::output_length(len, kernel);
      trace.push_back(len);
      if (len < 1) return trace;
      len = MaxPool<double>::output_length(len, pool);
      trace.push_back(len);
      if (len < 1) return trace;
    }
    return trace;
  }

  Index flatten_width() const {
    if (conv_channels.empty()) return in_channels * input_length;
    return conv_channels.back() * length_trace().back();
  }

  void validate() const {
    if (in_channels < 1 || input_length < 1 || kernel < 1 || pool < 1)
      throw Error(ErrorCode::InvalidArgument, "architecture sizes must be positive");
    if (conv_channels.empty()) throw Error(ErrorCode::InvalidArgument, "at least one conv stage is required");
    for (Index c : conv_channels)
      if (c < 1) throw Error(ErrorCode::InvalidArgument, "conv channel counts must be positive");
    if (dense.size() < 2) throw Error(ErrorCode::InvalidArgument, "dense stack needs an input and an output width");
    for (Index d : dense)
      if (d < 1) throw Error(ErrorCode::InvalidArgument, "dense widths must be positive");
    const auto trace = length_trace();
    if (trace.back() < 1)
      throw Error(ErrorCode::ShapeMismatch, "input length " + std::to_string(input_length) +
                                                " is too short for the conv/pool stack");
    if (flatten_width() != dense.front())
      throw Error(ErrorCode::ShapeMismatch, "flattened width " + std::to_string(flatten_width()) +
                                                " does not match dense input " +
                                                std::to_string(dense.front()));
    if (dense.back() != static_cast<Index>(kNumLabels))
      throw Error(ErrorCode::ShapeMismatch, "output width must equal the number of labels");
  }
};

template <typename S>
struct ConvStage {
  Conv1d<S> conv;
  BatchNorm<S> bn;
  Relu<S> relu;
  MaxPool<S> pool;
};

template <typename S>
class Network {
 public:
  explicit Network(CnnArchitecture arch, std::uint64_t seed = 42) : arch_(std::move(arch)) {
    arch_.validate();
    Index in = arch_.in_channels;
    for (Index out : arch_.conv_channels) {
      // the batchnorm shift plays the role of the conv bias
      stages_.push_back({Conv1d<S>(in, out, arch_.kernel, false),
                         BatchNorm<S>(out, arch_.batchnorm_eps, arch_.batchnorm_momentum), Relu<S>{},
                         MaxPool<S>(arch_.pool)});
      in = out;
    }
    for (std::size_t i = 0; i + 1 < arch_.dense.size(); ++i)
      dense_.emplace_back(arch_.dense[i], arch_.dense[i + 1]);
    relus_.resize(dense_.size());
    init(seed);
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& s : stages_) s.conv.init(rng);
    for (auto& d : dense_) d.init(rng);
  }

  const CnnArchitecture& architecture() const { return arch_; }
  std::vector<ConvStage<S>>& stages() { return stages_; }
  const std::vector<ConvStage<S>>& stages() const { return stages_; }
  std::vector<Dense<S>>& dense_layers() { return dense_; }
  const std::vector<Dense<S>>& dense_layers() const { return dense_; }

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  // Stacks windows into channels x (batch * length).
  Mat<S> pack(const std::vector<const Eigen::MatrixXd*>& windows) const {
    if (windows.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
    const Index len = arch_.input_length;
    Mat<S> x(arch_.in_channels, static_cast<Index>(windows.size()) * len);
    for (std::size_t n = 0; n < windows.size(); ++n) {
      const auto& w = *windows[n];
      check_window(w);
      x.middleCols(static_cast<Index>(n) * len, len) = w.template cast<S>();
    }
    return x;
  }

  void check_window(const Eigen::MatrixXd& w) const {
    if (w.rows() != arch_.in_channels || w.cols() != arch_.input_length)
      throw Error(ErrorCode::ShapeMismatch,
                  "expected a " + std::to_string(arch_.in_channels) + " x " +
                      std::to_string(arch_.input_length) + " window, got " + std::to_string(w.rows()) +
                      " x " + std::to_string(w.cols()));
  }

  // labels x batch logits.
  Mat<S> logits(const Mat<S>& x, Index batch) {
    if (batch < 1 || x.rows() != arch_.in_channels || x.cols() != batch * arch_.input_length)
      throw Error(ErrorCode::ShapeMismatch, "input does not hold " + std::to_string(batch) + " windows of " +
                                                std::to_string(arch_.in_channels) + " x " +
                                                std::to_string(arch_.input_length));
    batch_ = batch;
    Mat<S> h = x;
    for (auto& s : stages_) {
      h = s.conv.forward(h, batch);
      h = s.bn.forward(h, training_);
      h = s.relu.forward(h);
      h = s.pool.forward(h, batch);
    }
    pooled_len_ = h.cols() / batch;
    h = flatten(h, batch);
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      h = dense_[i].forward(h);
      if (i + 1 < dense_.size()) h = relus_[i].forward(h);
    }
    logits_ = h;
    return h;
  }

  // Per-label sigmoid probabilities, labels x batch.
  Mat<S> forward(const Mat<S>& x, Index batch) { return sigmoid(logits(x, batch)); }

  // Loss of the last forward pass against one-hot targets (labels x batch);
  // accumulates loss_scale * d loss / d theta into every gradient.
  double backward(const Mat<S>& targets, double loss_scale = 1.0) {
    const double loss = bce_with_logits(logits_, targets);
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");
    logit_grad_ = bce_logit_gradient(logits_, targets) * static_cast<S>(loss_scale);
    backward_from_logits(logit_grad_);
    return loss;
  }

  void backward_from_logits(const Mat<S>& dlogits) {
    Mat<S> g = dlogits;
    for (std::size_t i = dense_.size(); i-- > 0;) {
      if (i + 1 < dense_.size()) g = relus_[i].backward(g);
      g = dense_[i].backward(g);
    }
    g = unflatten(g, batch_);
    for (std::size_t i = stages_.size(); i-- > 0;) {
      auto& s = stages_[i];
      g = s.pool.backward(g);
      g = s.relu.backward(g);
      g = s.bn.backward(g);
      g = s.conv.backward(g, i > 0);
    }
  }

  const Mat<S>& last_logit_grad() const { return logit_grad_; }

  std::vector<Param<S>> params() {
    std::vector<Param<S>> out;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      stages_[i].conv.params(out, "conv" + std::to_string(i));
      stages_[i].bn.params(out, "bn" + std::to_string(i));
    }
    for (std::size_t i = 0; i < dense_.size(); ++i) dense_[i].params(out, "dense" + std::to_string(i));
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) p.grad->setZero();
  }

 private:
  Mat<S> flatten(const Mat<S>& h, Index batch) const {
    const Index len = h.cols() / batch;
    Mat<S> flat(h.rows() * len, batch);
    for (Index c = 0; c < h.rows(); ++c)
      for (Index n = 0; n < batch; ++n)
        for (Index t = 0; t < len; ++t) flat(c * len + t, n) = h(c, n * len + t);
    return flat;
  }

  Mat<S> unflatten(const Mat<S>& flat, Index batch) const {
    const Index len = pooled_len_;
    const Index channels = flat.rows() / len;
    Mat<S> h(channels, batch * len);
    for (Index c = 0; c < channels; ++c)
      for (Index n = 0; n < batch; ++n)
        for (Index t = 0; t < len; ++t) h(c, n * len + t) = flat(c * len + t, n);
    return h;
  }

  CnnArchitecture arch_;
  std::vector<ConvStage<S>> stages_;
  std::vector<Dense<S>> dense_;
  std::vector<Relu<S>> relus_;
  bool training_ = true;
  Index batch_ = 0;
  Index pooled_len_ = 0;
  Mat<S> logits_, logit_grad_;
};

}  // namespace eegclean::cnn
