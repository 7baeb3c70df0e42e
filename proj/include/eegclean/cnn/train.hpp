#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "eegclean/cnn/network.hpp"
#include "eegclean/error.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean::cnn {

enum class OptimizerKind { Adam, SgdMomentum };

inline std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd-momentum";
}

inline OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "sgd-momentum" || text == "sgd") return OptimizerKind::SgdMomentum;
  throw Error(ErrorCode::InvalidConfig, "unknown optimizer '" + std::string(text) + "'");
}

struct TrainConfig {
  double learning_rate = 1e-3;
  Index epochs = 20;
  Index batch_size = 16;
  std::uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // A zero learning rate is accepted so a run can be frozen for diagnostics.
  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw Error(ErrorCode::InvalidConfig, "learning rate must be finite and non-negative");
    if (epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be non-negative");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch size must be at least 1");
    if (!(momentum >= 0.0 && momentum < 1.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
        !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
      throw Error(ErrorCode::InvalidConfig, "optimizer coefficients out of range");
  }
};

template <typename S>
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::vector<Param<S>> params) : cfg_(cfg), params_(std::move(params)) {
    for (const auto& p : params_) {
      first_.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
      if (cfg_.optimizer == OptimizerKind::Adam) second_.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  void step() {
    ++t_;
    const S lr = static_cast<S>(cfg_.learning_rate);
    if (cfg_.optimizer == OptimizerKind::SgdMomentum) {
      const S mu = static_cast<S>(cfg_.momentum);
      for (std::size_t i = 0; i < params_.size(); ++i) {
        first_[i] = mu * first_[i] + *params_[i].grad;
        *params_[i].value -= lr * first_[i];
      }
      return;
    }
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const S c1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S c2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const S eps = static_cast<S>(cfg_.adam_eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto g = params_[i].grad->array();
      first_[i].array() = b1 * first_[i].array() + (S(1) - b1) * g;
      second_[i].array() = b2 * second_[i].array() + (S(1) - b2) * g.square();
      params_[i].value->array() -=
          lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Param<S>> params_;
  std::vector<Mat<S>> first_, second_;
  long t_ = 0;
};

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> train_accuracy;
  std::vector<double> test_accuracy;  // NaN when there is no test set
  bool diverged = false;
  std::string failure;

  std::size_t epochs() const { return loss.size(); }
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

template <typename S>
Mat<S> one_hot(const std::vector<Label>& labels) {
  Mat<S> t = Mat<S>::Zero(static_cast<Index>(kNumLabels), static_cast<Index>(labels.size()));
  for (std::size_t n = 0; n < labels.size(); ++n) t(static_cast<Index>(label_index(labels[n])), static_cast<Index>(n)) = S(1);
  return t;
}

// Highest score wins; ties go to the lowest label index.
template <typename Derived>
Label argmax_label(const Eigen::DenseBase<Derived>& scores) {
  if (scores.size() != static_cast<Index>(kNumLabels))
    throw Error(ErrorCode::ShapeMismatch, "expected one score per label");
  Index best = 0;
  for (Index i = 1; i < scores.size(); ++i)
    if (scores(i) > scores(best)) best = i;
  return label_from_index(static_cast<std::size_t>(best));
}

// Eval-mode probabilities for every window, labels x N.
template <typename S>
Mat<S> predict_proba(Network<S>& net, const std::vector<const Eigen::MatrixXd*>& windows, Index chunk = 16) {
  const bool was_training = net.training();
  net.set_training(false);
  Mat<S> out(static_cast<Index>(kNumLabels), static_cast<Index>(windows.size()));
  for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(windows.size(), start + static_cast<std::size_t>(chunk));
    const std::vector<const Eigen::MatrixXd*> part(windows.begin() + static_cast<std::ptrdiff_t>(start),
                                                   windows.begin() + static_cast<std::ptrdiff_t>(end));
    out.middleCols(static_cast<Index>(start), static_cast<Index>(part.size())) =
        net.forward(net.pack(part), static_cast<Index>(part.size()));
  }
  net.set_training(was_training);
  return out;
}

template <typename S>
std::vector<Label> predict_labels(Network<S>& net, const Dataset& ds, Index chunk = 16) {
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& w : ds.windows) ptrs.push_back(&w.samples);
  const Mat<S> p = predict_proba(net, ptrs, chunk);
  std::vector<Label> labels;
  for (Index n = 0; n < p.cols(); ++n) labels.push_back(argmax_label(p.col(n)));
  return labels;
}

template <typename S>
Label predict(Network<S>& net, const Eigen::MatrixXd& window) {
  return argmax_label(predict_proba(net, {&window}).col(0));
}

template <typename S>
double dataset_accuracy(Network<S>& net, const Dataset& ds, Index chunk = 16) {
  if (ds.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto predicted = predict_labels(net, ds, chunk);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == ds.windows[i].label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// Minibatch training with a seeded shuffle each epoch. Batches hold at most
// batch_size windows. Batchnorm uses batch
// statistics while training; accuracies are measured in eval mode after each
// epoch. A non-finite loss stops training and returns the history so far.
template <typename S>
TrainHistory train(Network<S>& net, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                   const std::function<void(const EpochStats&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  for (const auto& w : train_set.windows) net.check_window(w.samples);
  for (const auto& w : test_set.windows) net.check_window(w.samples);

  Optimizer<S> opt(cfg, net.params());
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Equal-as-possible batches, so no tiny trailing batch skews the batch statistics.
  const std::size_t n_batches =
      (order.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> bounds{0};
  for (std::size_t b = 0; b < n_batches; ++b)
    bounds.push_back(bounds.back() + order.size() / n_batches + (b < order.size() % n_batches ? 1 : 0));

  TrainHistory history;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t start = bounds[b], end = bounds[b + 1];
        std::vector<const Eigen::MatrixXd*> windows;
        std::vector<Label> labels;
        for (std::size_t i = start; i < end; ++i) {
          windows.push_back(&train_set.windows[order[i]].samples);
          labels.push_back(train_set.windows[order[i]].label);
        }
        const auto n = static_cast<Index>(windows.size());
        net.set_training(true);
        net.zero_grad();
        net.logits(net.pack(windows), n);
        loss_sum += net.backward(one_hot<S>(labels)) * static_cast<double>(n);
        opt.step();
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteLoss) throw;
      history.diverged = true;
      history.failure = "non-finite loss in epoch " + std::to_string(epoch + 1);
      break;
    }
    EpochStats stats;
    stats.epoch = static_cast<std::size_t>(epoch) + 1;
    stats.loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = dataset_accuracy(net, train_set, cfg.batch_size);
    stats.test_accuracy = dataset_accuracy(net, test_set, cfg.batch_size);
    history.loss.push_back(stats.loss);
    history.train_accuracy.push_back(stats.train_accuracy);
    history.test_accuracy.push_back(stats.test_accuracy);
    if (on_epoch) on_epoch(stats);
  }
  net.set_training(false);
  return history;
}

}  // namespace eegclean::cnn
