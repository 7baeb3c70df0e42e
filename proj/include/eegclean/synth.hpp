#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "eegclean/error.hpp"
#include "eegclean/preprocess.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean {

inline constexpr double kBlinkWidthS = 0.3;

// Squared-cosine bumps of 300 ms on a zero baseline, one every
// (0.5 .. 1.5) / rate_hz seconds.
inline Eigen::VectorXd make_blink_train(double duration_s, double rate_hz, double amplitude,
                                        double sample_rate_hz, std::uint64_t seed) {
  if (!(duration_s > 0 && rate_hz > 0 && sample_rate_hz > 0))
    throw Error(ErrorCode::InvalidArgument, "blink train parameters must be positive");
  const auto n = static_cast<Index>(std::llround(duration_s * sample_rate_hz));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (amplitude == 0.0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  const double half = 0.5 * kBlinkWidthS;
  for (double centre = jitter(rng) / rate_hz; centre + half < duration_s;
       centre += jitter(rng) / rate_hz) {
    const auto first = static_cast<Index>(std::ceil((centre - half) * sample_rate_hz));
    const auto last = static_cast<Index>(std::floor((centre + half) * sample_rate_hz));
    for (Index i = std::max<Index>(first, 0); i <= std::min(last, n - 1); ++i) {
      const double tau = static_cast<double>(i) / sample_rate_hz - centre;
      const double c = std::cos(std::numbers::pi * tau / kBlinkWidthS);
      out(i) += amplitude * c * c;
    }
  }
  return out;
}

// Square-wave synchronization marker: 0 everywhere except the pattern's high
// segments, which are `amplitude`.
inline Eigen::VectorXd make_pulse_marker(const PulsePattern& pattern, double sample_rate_hz,
                                         Index length, Index start_index, double amplitude) {
  pattern.validate();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(length);
  const auto to_samples = [&](double s) { return static_cast<Index>(std::llround(s * sample_rate_hz)); };
  const auto set_high = [&](Index from, Index count) {
    for (Index i = std::max<Index>(from, 0); i < std::min(from + count, length); ++i) out(i) = amplitude;
  };
  Index pos = start_index;
  set_high(pos, to_samples(pattern.start_pulse_width_s));
  pos += to_samples(pattern.start_pulse_width_s) + to_samples(pattern.low_gap_s);
  const Index on = to_samples(pattern.trailer_pulse_period_s * pattern.trailer_duty);
  const Index off = to_samples(pattern.trailer_pulse_period_s * (1.0 - pattern.trailer_duty));
  for (int p = 0; p < pattern.trailer_pulses; ++p) {
    set_high(pos, on);
    pos += on + off;
  }
  return out;
}

// Lead-in and marker placed ahead of the scenario on each simulated device.
struct PulseInjection {
  PulsePattern pattern;
  double amplitude = 50.0;
  double eeg_lead_s = 3.0;
  double eog_lead_s = 7.0;
};

struct ScenarioSpec {
  Index n_channels = 14;
  // 0 selects n_channels - 1, leaving one dimension for the ocular source.
  Index n_sources = 0;
  double duration_s = 60.0;
  double sample_rate_hz = kDefaultSampleRateHz;
  double blink_rate_hz = 0.3;
  double blink_amplitude = 2.5;
  // Peak of the slow eye-movement drift added to the ocular signal (0 disables).
  double eye_movement_amplitude = 0.8;
  // Per-channel blink gain. Empty selects the default frontal-heavy profile.
  std::vector<double> blink_weights;
  // channels x sources. Unset draws a seeded, well-conditioned matrix.
  std::optional<Eigen::MatrixXd> mixing;
  std::optional<PulseInjection> pulse;
  // Tile the scenario with labelled windows of this length (0 disables).
  Index window_len = 0;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  Eigen::MatrixXd sources;  // sources x time, unit variance
  Eigen::VectorXd eog;      // blink train plus slow eye-movement drift
  Eigen::VectorXd blink_weights;
  Eigen::MatrixXd mixing;   // channels x sources
  Recording contaminated;   // mixing * sources + blink_weights * eog^T
  Recording clean;          // mixing * sources
  Recording eog_recording;  // eog as a one-channel recording
  std::optional<Schedule> labels;
  // Device recordings with lead-in and sync marker; set when a pulse is requested.
  std::optional<Recording> eeg_raw;
  std::optional<Recording> eog_raw;

  // Square model over neural sources plus the ocular signal: [mixing | blink_weights].
  Eigen::MatrixXd full_mixing() const {
    Eigen::MatrixXd m(mixing.rows(), mixing.cols() + 1);
    m << mixing, blink_weights;
    return m;
  }
};

// Blink gain by electrode: strongest over the frontal poles, zero over the
// temporal, parietal and occipital sites.
inline std::vector<double> default_blink_weights(Index n_channels) {
  static const std::vector<double> montage{1.0, 0.6, 0.7, 0.35, 0.0, 0.0, 0.0,
                                           0.0, 0.0, 0.0, 0.35, 0.7, 0.6, 0.9};
  std::vector<double> w(static_cast<std::size_t>(n_channels), 0.0);
  for (Index c = 0; c < n_channels && c < static_cast<Index>(montage.size()); ++c)
    w[static_cast<std::size_t>(c)] = montage[static_cast<std::size_t>(c)];
  return w;
}

inline std::vector<std::string> scenario_channel_names(Index n_channels) {
  const auto& montage = default_channel_names();
  if (n_channels == static_cast<Index>(montage.size())) return montage;
  std::vector<std::string> names;
  for (Index c = 0; c < n_channels; ++c) names.push_back("CH" + std::to_string(c + 1));
  return names;
}

inline double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smallest = s(s.size() - 1);
  return smallest > 0 ? s(0) / smallest : std::numeric_limits<double>::infinity();
}

namespace detail {

// Sinusoid at an EEG-band frequency plus uniform noise, scaled to unit variance.
inline Eigen::MatrixXd make_sources(Index n_sources, Index n, double fs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::uniform_real_distribution<double> offset(0.0, 0.5);
  Eigen::MatrixXd s(n_sources, n);
  for (Index k = 0; k < n_sources; ++k) {
    // Spread over 2 .. 35 Hz so no two sources share a frequency.
    const double f = 2.0 + 33.0 * static_cast<double>(k) / static_cast<double>(std::max<Index>(n_sources, 2) - 1) + offset(rng);
    const double phi = phase(rng);
    for (Index t = 0; t < n; ++t)
      s(k, t) = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / fs + phi) +
                0.8 * uniform(rng);
  }
  const Eigen::VectorXd mean = s.rowwise().mean();
  s.colwise() -= mean;
  const Eigen::VectorXd sd = (s.array().square().rowwise().mean()).sqrt();
  return sd.cwiseInverse().asDiagonal() * s;
}

}  // namespace detail

// Smooth low-frequency ocular drift: three sinusoids between 0.1 and 0.5 Hz
// with random phases, peak magnitude at most `amplitude`.
inline Eigen::VectorXd make_eye_movement(Index n, double sample_rate_hz, double amplitude,
                                         std::mt19937_64& rng) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (amplitude == 0.0) return out;
  std::uniform_real_distribution<double> freq(0.1, 0.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (int k = 0; k < 3; ++k) {
    const double f = freq(rng);
    const double phi = phase(rng);
    for (Index t = 0; t < n; ++t)
      out(t) += amplitude / 3.0 *
                std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / sample_rate_hz + phi);
  }
  return out;
}

inline GroundTruth make_scenario(const ScenarioSpec& spec) {
  const Index n_sources = spec.n_sources > 0 ? spec.n_sources : spec.n_channels - 1;
  if (spec.n_channels < 1 || n_sources < 1 || spec.n_sources < 0 || !(spec.duration_s > 0) ||
      !(spec.sample_rate_hz > 0) || !(spec.blink_rate_hz > 0))
    throw Error(ErrorCode::InvalidArgument, "scenario sizes, durations and rates must be positive");
  const auto n = static_cast<Index>(std::llround(spec.duration_s * spec.sample_rate_hz));
  std::mt19937_64 rng(spec.seed);

  GroundTruth gt;
  if (spec.mixing) {
    if (spec.mixing->rows() != spec.n_channels || spec.mixing->cols() != n_sources)
      throw Error(ErrorCode::ShapeMismatch, "mixing must be channels x sources");
    if (!(condition_number(*spec.mixing) < 100.0))
      throw Error(ErrorCode::InvalidArgument, "requested mixing is ill-conditioned");
    gt.mixing = *spec.mixing;
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double spread = 0.4 / std::sqrt(static_cast<double>(n_sources));
    do {
      gt.mixing = Eigen::MatrixXd::Identity(spec.n_channels, n_sources);
      for (Index i = 0; i < spec.n_channels; ++i) {
        // channels past the identity block get a full-strength random row
        const double s = i < n_sources ? spread : 1.0 / std::sqrt(static_cast<double>(n_sources));
        for (Index j = 0; j < n_sources; ++j) gt.mixing(i, j) += s * normal(rng);
      }
    } while (!(condition_number(gt.mixing) < 100.0));
  }

  gt.sources = detail::make_sources(n_sources, n, spec.sample_rate_hz, rng);
  gt.eog = make_blink_train(spec.duration_s, spec.blink_rate_hz, spec.blink_amplitude,
                            spec.sample_rate_hz, rng());
  gt.eog.conservativeResize(n);
  gt.eog += make_eye_movement(n, spec.sample_rate_hz, spec.eye_movement_amplitude, rng);

  auto weights = spec.blink_weights.empty() ? default_blink_weights(spec.n_channels) : spec.blink_weights;
  if (static_cast<Index>(weights.size()) != spec.n_channels)
    throw Error(ErrorCode::ShapeMismatch, "need one blink weight per channel");
  gt.blink_weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), spec.n_channels);

  const auto names = scenario_channel_names(spec.n_channels);
  gt.clean = Recording{names, spec.sample_rate_hz, gt.mixing * gt.sources, 0.0};
  gt.contaminated = gt.clean;
  gt.contaminated.samples += gt.blink_weights * gt.eog.transpose();
  gt.eog_recording = Recording{{"EOG"}, spec.sample_rate_hz, gt.eog.transpose(), 0.0};

  if (spec.window_len > 0) {
    Schedule schedule;
    for (Index start = 0, k = 0; start + spec.window_len <= n; start += spec.window_len, ++k)
      schedule.push_back({start, label_from_index(static_cast<std::size_t>(k) % kNumLabels)});
    gt.labels = std::move(schedule);
  }

  if (spec.pulse) {
    const auto& p = *spec.pulse;
    const double fs = spec.sample_rate_hz;
    const auto marker_len = static_cast<Index>(std::llround(p.pattern.duration_s() * fs));
    std::normal_distribution<double> noise(0.0, 0.1);
    const auto build = [&](const Recording& body, double lead_s) {
      const auto lead = static_cast<Index>(std::llround(lead_s * fs));
      const Eigen::VectorXd marker =
          make_pulse_marker(p.pattern, fs, lead + marker_len, lead, p.amplitude);
      Recording raw = body;
      raw.samples.resize(body.channels(), lead + marker_len + body.length());
      for (Index c = 0; c < body.channels(); ++c)
        for (Index t = 0; t < lead + marker_len; ++t) raw.samples(c, t) = marker(t) + noise(rng);
      raw.samples.rightCols(body.length()) = body.samples;
      return raw;
    };
    gt.eeg_raw = build(gt.contaminated, p.eeg_lead_s);
    gt.eog_raw = build(gt.eog_recording, p.eog_lead_s);
  }
  return gt;
}

// Dominant oscillation per label, all on the 0.2 Hz grid of a 640-sample
// window at 128 Hz.
inline constexpr std::array<double, kNumLabels> kClassFrequenciesHz{6.0, 10.0, 14.0, 20.0, 28.0};

// Windows whose every channel is a class-specific sinusoid with random phase
// plus Gaussian noise.
inline Dataset make_labeled_set(std::size_t n_per_class, Index window_len, std::uint64_t seed,
                                Index n_channels = 14,
                                double sample_rate_hz = kDefaultSampleRateHz) {
  if (n_per_class < 1 || window_len < 1 || n_channels < 1)
    throw Error(ErrorCode::InvalidArgument, "labeled set sizes must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 0.5);
  Dataset ds;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (auto label : kAllLabels) {
      const double f = kClassFrequenciesHz[label_index(label)];
      LabeledWindow w{Eigen::MatrixXd(n_channels, window_len), label};
      for (Index c = 0; c < n_channels; ++c) {
        const double phi = phase(rng);
        for (Index t = 0; t < window_len; ++t)
          w.samples(c, t) =
              std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / sample_rate_hz + phi) +
              noise(rng);
      }
      ds.windows.push_back(std::move(w));
    }
  }
  return ds;
}

// Concatenates windows into one recording plus the schedule that tiles it.
inline std::pair<Recording, Schedule> dataset_to_recording(const Dataset& ds,
                                                           double sample_rate_hz = kDefaultSampleRateHz) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "no windows to concatenate");
  const Index channels = ds.windows.front().samples.rows();
  Index total = 0;
  for (const auto& w : ds.windows) {
    if (w.samples.rows() != channels)
      throw Error(ErrorCode::ShapeMismatch, "windows differ in channel count");
    total += w.samples.cols();
  }
  Recording rec{scenario_channel_names(channels), sample_rate_hz, Eigen::MatrixXd(channels, total), 0.0};
  Schedule schedule;
  Index pos = 0;
  for (const auto& w : ds.windows) {
    rec.samples.middleCols(pos, w.samples.cols()) = w.samples;
    schedule.push_back({pos, w.label});
    pos += w.samples.cols();
  }
  return {std::move(rec), std::move(schedule)};
}

}  // namespace eegclean
