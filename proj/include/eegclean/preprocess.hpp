#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eegclean/error.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean {

// ---------------------------------------------------------------------------
// Synchronization pulses

// Marker waveform injected into both devices: one long pulse, a low gap, then
// a short square-wave trailer.
struct PulsePattern {
  double start_pulse_width_s = 2.0;
  double low_gap_s = 6.0;
  double trailer_pulse_period_s = 2.0;
  double trailer_duty = 0.5;
  int trailer_pulses = 2;
  // Detection threshold above the channel median. Unset means 5x the median
  // absolute deviation of the channel.
  std::optional<double> amplitude_threshold;

  double duration_s() const {
    return start_pulse_width_s + low_gap_s + trailer_pulse_period_s * trailer_pulses;
  }

  void validate() const {
    if (!(start_pulse_width_s > 0 && low_gap_s > 0 && trailer_pulse_period_s > 0))
      throw Error(ErrorCode::InvalidArgument, "pulse durations must be positive");
    if (!(trailer_duty > 0 && trailer_duty < 1))
      throw Error(ErrorCode::InvalidArgument, "trailer duty must lie in (0, 1)");
    if (trailer_pulses < 1) throw Error(ErrorCode::InvalidArgument, "need at least one trailer pulse");
  }
};

inline constexpr double kPulseScanWindowS = 20.0;

struct SyncResult {
  Index eeg_start_index = 0;
  Index eog_start_index = 0;
  Index common_length = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const auto lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

struct Run {
  Index start;
  Index length;
  bool high;
};

// Run-length encodes a thresholded channel, absorbing runs shorter than
// `min_run` into their neighbours so isolated noise crossings do not split
// a pulse or a gap.
inline std::vector<Run> debounced_runs(const std::vector<bool>& high, Index min_run) {
  std::vector<Run> runs;
  const auto n = static_cast<Index>(high.size());
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j < n && high[j] == high[i]) ++j;
    runs.push_back({i, j - i, high[i]});
    i = j;
  }
  std::vector<Run> merged;
  for (const auto& r : runs) {
    const bool glitch = r.length < min_run && !merged.empty();
    if (glitch || (!merged.empty() && merged.back().high == r.high)) {
      merged.back().length += r.length;
    } else {
      merged.push_back(r);
    }
  }
  return merged;
}

}  // namespace detail

// Index of the first sample of the start pulse, scanning the channel in
// 20 s windows that overlap by one pattern length.
inline Index detect_pulse_start(const Recording& rec, std::string_view channel,
                                const PulsePattern& pattern) {
  pattern.validate();
  const Index ch = rec.channel_index(channel);
  const double fs = rec.sample_rate_hz;
  const auto to_samples = [fs](double s) { return static_cast<Index>(std::llround(s * fs)); };
  const Index pattern_len = to_samples(pattern.duration_s());
  if (rec.length() < pattern_len)
    throw Error(ErrorCode::PatternNotFound, "recording shorter than the pulse pattern");

  std::vector<double> x(static_cast<std::size_t>(rec.length()));
  Eigen::Map<Eigen::RowVectorXd>(x.data(), rec.length()) = rec.samples.row(ch);

  const double center = detail::median(x);
  double threshold = 0.0;
  if (pattern.amplitude_threshold) {
    threshold = *pattern.amplitude_threshold;
  } else {
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = std::abs(x[i] - center);
    threshold = 5.0 * detail::median(std::move(dev));
  }
  std::vector<bool> high(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) high[i] = x[i] - center > threshold;

  const Index min_run = std::max<Index>(2, to_samples(0.05));
  const auto runs = detail::debounced_runs(high, min_run);

  // Expected segment lengths after the rising edge, high first.
  std::vector<Index> expected{to_samples(pattern.start_pulse_width_s), to_samples(pattern.low_gap_s)};
  const Index on = to_samples(pattern.trailer_pulse_period_s * pattern.trailer_duty);
  const Index off = to_samples(pattern.trailer_pulse_period_s * (1.0 - pattern.trailer_duty));
  for (int p = 0; p < pattern.trailer_pulses; ++p) {
    expected.push_back(on);
    if (p + 1 < pattern.trailer_pulses) expected.push_back(off);
  }
  const auto matches_at = [&](std::size_t run_idx) {
    if (run_idx + expected.size() > runs.size()) return false;
    for (std::size_t k = 0; k < expected.size(); ++k) {
      const auto& r = runs[run_idx + k];
      const Index tol = std::max<Index>(2, expected[k] / 10);
      if (r.high != (k % 2 == 0) || std::abs(r.length - expected[k]) > tol) return false;
    }
    return true;
  };

  const Index window = std::max(to_samples(kPulseScanWindowS), pattern_len);
  const Index step = std::max<Index>(1, window - pattern_len);
  std::size_t first_run = 0;
  for (Index w = 0; w < rec.length(); w += step) {
    const Index last_start = std::min(w + window, rec.length()) - pattern_len;
    while (first_run < runs.size() && runs[first_run].start < w) ++first_run;
    for (std::size_t r = first_run; r < runs.size() && runs[r].start <= last_start; ++r)
      if (runs[r].high && matches_at(r)) return runs[r].start;
    if (w + window >= rec.length()) break;
  }
  throw Error(ErrorCode::PatternNotFound, "no synchronization pulse found on channel '" +
                                              std::string(channel) + "'");
}

// Crops both recordings to start at their sync index and to the same length.
inline std::pair<Recording, Recording> synchronize(const Recording& eeg, const Recording& eog,
                                                   Index eeg_idx, Index eog_idx) {
  if (eeg.sample_rate_hz != eog.sample_rate_hz)
    throw Error(ErrorCode::InvalidArgument, "synchronize requires equal sample rates");
  if (eeg_idx < 0 || eog_idx < 0 || eeg_idx > eeg.length() || eog_idx > eog.length())
    throw Error(ErrorCode::OutOfRange, "sync index outside recording");
  const Index common = std::min(eeg.length() - eeg_idx, eog.length() - eog_idx);
  if (common <= 0) throw Error(ErrorCode::ZeroOverlap, "recordings do not overlap after sync");

  const auto crop = [common](const Recording& rec, Index idx) {
    Recording out = rec;
    out.samples = rec.samples.middleCols(idx, common);
    out.t0_offset_s = rec.t0_offset_s + static_cast<double>(idx) / rec.sample_rate_hz;
    return out;
  };
  return {crop(eeg, eeg_idx), crop(eog, eog_idx)};
}

inline SyncResult auto_sync(const Recording& eeg, std::string_view eeg_channel,
                            const Recording& eog, std::string_view eog_channel,
                            const PulsePattern& pattern = {}) {
  SyncResult r;
  r.eeg_start_index = detect_pulse_start(eeg, eeg_channel, pattern);
  r.eog_start_index = detect_pulse_start(eog, eog_channel, pattern);
  r.common_length = std::min(eeg.length() - r.eeg_start_index, eog.length() - r.eog_start_index);
  return r;
}

// ---------------------------------------------------------------------------
// Butterworth bandpass

struct BandpassSpec {
  int order = 5;
  double low_cut_hz = 0.1;
  double high_cut_hz = 40.0;

  void validate(double sample_rate_hz) const {
    if (order < 1) throw Error(ErrorCode::InvalidArgument, "filter order must be >= 1");
    if (!(low_cut_hz > 0.0 && low_cut_hz < high_cut_hz))
      throw Error(ErrorCode::InvalidArgument, "need 0 < low cut < high cut");
    if (!(high_cut_hz < 0.5 * sample_rate_hz))
      throw Error(ErrorCode::InvalidArgument, "high cut must be below Nyquist");
  }
};

// One second-order section, a[0] == 1.
struct Biquad {
  std::array<double, 3> b{1.0, 0.0, 0.0};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
  double sample_rate_hz = kDefaultSampleRateHz;
};

// Digital Butterworth bandpass: analog lowpass prototype of the given order,
// lowpass-to-bandpass transform at prewarped edges, bilinear transform.
// Yields `order` biquads, each with zeros at z = 1 and z = -1.
inline FilterCoefficients design_butterworth(const BandpassSpec& spec, double sample_rate_hz) {
  spec.validate(sample_rate_hz);
  using cd = std::complex<double>;
  const double fs2 = 2.0 * sample_rate_hz;
  const double w1 = fs2 * std::tan(std::numbers::pi * spec.low_cut_hz / sample_rate_hz);
  const double w2 = fs2 * std::tan(std::numbers::pi * spec.high_cut_hz / sample_rate_hz);
  const double bw = w2 - w1;
  const double w0_sq = w1 * w2;
  const int n = spec.order;

  std::vector<cd> analog;
  for (int k = 0; k < n; ++k) {
    const cd p = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n));
    const cd half_b = 0.5 * p * bw;
    const cd disc = std::sqrt(half_b * half_b - w0_sq);
    analog.push_back(half_b + disc);
    analog.push_back(half_b - disc);
  }

  cd gain = std::pow(cd(bw * fs2), n);
  std::vector<cd> digital;
  for (const auto& s : analog) {
    gain /= (fs2 - s);
    digital.push_back((fs2 + s) / (fs2 - s));
  }

  std::vector<cd> complex_poles;
  std::vector<double> real_poles;
  for (const auto& z : digital) {
    if (std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z)))
      real_poles.push_back(z.real());
    else if (z.imag() > 0)
      complex_poles.push_back(z);
  }
  std::sort(real_poles.begin(), real_poles.end());
  std::sort(complex_poles.begin(), complex_poles.end(),
            [](const cd& x, const cd& y) { return std::abs(x) < std::abs(y); });

  FilterCoefficients out;
  out.sample_rate_hz = sample_rate_hz;
  for (const auto& z : complex_poles)
    out.sections.push_back({{1.0, 0.0, -1.0}, {1.0, -2.0 * z.real(), std::norm(z)}});
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2)
    out.sections.push_back(
        {{1.0, 0.0, -1.0}, {1.0, -(real_poles[i] + real_poles[i + 1]), real_poles[i] * real_poles[i + 1]}});
  if (out.sections.size() != static_cast<std::size_t>(n) || real_poles.size() % 2 != 0)
    throw Error(ErrorCode::UnstableFilter, "pole pairing failed for this design");

  const double k = gain.real();
  const double per_section = std::pow(std::abs(k), 1.0 / n);
  for (auto& sec : out.sections)
    for (auto& b : sec.b) b *= per_section;
  if (k < 0)
    for (auto& b : out.sections.front().b) b = -b;
  return out;
}

inline std::complex<double> frequency_response(const FilterCoefficients& coeffs, double f_hz) {
  const auto z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / coeffs.sample_rate_hz);
  const auto z2 = z1 * z1;
  std::complex<double> h{1.0, 0.0};
  for (const auto& s : coeffs.sections)
    h *= (s.b[0] + s.b[1] * z1 + s.b[2] * z2) / (s.a[0] + s.a[1] * z1 + s.a[2] * z2);
  return h;
}

inline std::vector<std::complex<double>> poles(const FilterCoefficients& coeffs) {
  std::vector<std::complex<double>> out;
  for (const auto& s : coeffs.sections) {
    const std::complex<double> half = -0.5 * s.a[1] / s.a[0];
    const auto disc = std::sqrt(half * half - s.a[2] / s.a[0]);
    out.push_back(half + disc);
    out.push_back(half - disc);
  }
  return out;
}

inline bool is_stable(const FilterCoefficients& coeffs) {
  for (const auto& p : poles(coeffs))
    if (!(std::abs(p) < 1.0)) return false;
  return true;
}

// Causal cascade filtering of every channel (transposed direct form II).
inline Recording apply_filter(const Recording& rec, const FilterCoefficients& coeffs) {
  if (!is_stable(coeffs))
    throw Error(ErrorCode::UnstableFilter, "filter has a pole on or outside the unit circle");
  Recording out = rec;
  for (Index c = 0; c < rec.channels(); ++c) {
    for (const auto& s : coeffs.sections) {
      double z1 = 0.0, z2 = 0.0;
      for (Index t = 0; t < rec.length(); ++t) {
        const double x = out.samples(c, t);
        const double y = s.b[0] * x + z1;
        z1 = s.b[1] * x - s.a[1] * y + z2;
        z2 = s.b[2] * x - s.a[2] * y;
        out.samples(c, t) = y;
      }
    }
  }
  if (!out.samples.allFinite())
    throw Error(ErrorCode::UnstableFilter, "filter output is not finite");
  return out;
}

}  // namespace eegclean
