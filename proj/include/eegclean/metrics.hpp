#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "eegclean/error.hpp"
#include "eegclean/report.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean {

// Ranks starting at 1; tied values share the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, "pearson: inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "pearson: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(ErrorCode::ZeroVariance, "correlation of a constant sequence is undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Spearman rank correlation: Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, "spearman: inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "spearman: need at least 2 samples");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

// Closed form 1 - 6 sum(d^2) / (n (n^2 - 1)). Exact only when neither input has ties.
inline double spearman_closed_form(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, "spearman: inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "spearman: need at least 2 samples");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) sum_d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(rx.size());
  return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Hjorth activity: population variance.
inline double hjorth_activity(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "activity: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / n;
}

// 10 log10(activity(clean) / activity(noise)); +infinity when the noise has no power.
inline double snr_db(std::span<const double> clean, std::span<const double> noise) {
  const double signal_power = hjorth_activity(clean);
  const double noise_power = hjorth_activity(noise);
  if (noise_power == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal_power / noise_power);
}

inline std::vector<double> residual_noise(std::span<const double> input,
                                          std::span<const double> clean) {
  if (input.size() != clean.size())
    throw Error(ErrorCode::LengthMismatch, "residual: inputs differ in length");
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] - clean[i];
  return out;
}

template <typename T>
double accuracy(std::span<const T> predicted, std::span<const T> truth) {
  if (predicted.size() != truth.size())
    throw Error(ErrorCode::LengthMismatch, "accuracy: inputs differ in length");
  if (predicted.empty()) throw Error(ErrorCode::EmptyDataset, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

template <typename T>
double accuracy(const std::vector<T>& predicted, const std::vector<T>& truth) {
  return accuracy(std::span<const T>(predicted), std::span<const T>(truth));
}

// Channel-by-channel |spearman| against a single-channel reference. A constant
// channel has no rank information and scores 0.
inline std::vector<double> channel_correlations(const Recording& rec, const Recording& reference) {
  if (reference.channels() != 1)
    throw Error(ErrorCode::ChannelMismatch, "reference must have exactly one channel");
  if (reference.length() != rec.length())
    throw Error(ErrorCode::LengthMismatch, "reference length differs from recording length");
  const Eigen::VectorXd ref = reference.samples.row(0).transpose();
  std::vector<double> out(static_cast<std::size_t>(rec.channels()));
  for (Index c = 0; c < rec.channels(); ++c) {
    const Eigen::VectorXd ch = rec.samples.row(c).transpose();
    try {
      out[static_cast<std::size_t>(c)] = std::abs(spearman(as_span(ch), as_span(ref)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
      out[static_cast<std::size_t>(c)] = 0.0;
    }
  }
  return out;
}

// Builds the before/after table: correlation of each channel with the EOG
// before and after cleaning, and SNR with S = cleaned channel and
// N = input - cleaned.
inline DenoiseReport compute_report(const Recording& input, const Recording& cleaned,
                                    const Recording& eog) {
  if (input.channels() != cleaned.channels() || input.length() != cleaned.length())
    throw Error(ErrorCode::ShapeMismatch, "input and cleaned recordings differ in shape");
  DenoiseReport report;
  report.channel_names = input.channel_names;
  report.corr_before = channel_correlations(input, eog);
  report.corr_after = channel_correlations(cleaned, eog);
  report.snr_db.resize(report.channel_names.size());
  for (Index c = 0; c < input.channels(); ++c) {
    const Eigen::VectorXd in = input.samples.row(c).transpose();
    const Eigen::VectorXd out = cleaned.samples.row(c).transpose();
    const auto noise = residual_noise(as_span(in), as_span(out));
    report.snr_db[static_cast<std::size_t>(c)] = snr_db(as_span(out), noise);
  }
  return report;
}

}  // namespace eegclean
