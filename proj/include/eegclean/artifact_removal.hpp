#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "eegclean/error.hpp"
#include "eegclean/ica.hpp"
#include "eegclean/metrics.hpp"
#include "eegclean/report.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean {

struct DenoiseConfig {
  double threshold = 0.1;
  bool use_absolute_correlation = true;

  void validate() const {
    if (!(threshold >= 0.0 && threshold < 1.0))
      throw Error(ErrorCode::InvalidConfig, "threshold must lie in [0, 1)");
  }
};

struct ComponentScore {
  std::size_t index = 0;
  double correlation = 0.0;
};

// Spearman correlation of every component with the single-channel EOG.
inline std::vector<ComponentScore> score_components(const ComponentSet& components,
                                                    const Recording& eog,
                                                    bool absolute = true) {
  if (eog.channels() != 1)
    throw Error(ErrorCode::ChannelMismatch, "EOG reference must have exactly one channel");
  if (eog.length() != components.length())
    throw Error(ErrorCode::LengthMismatch, "EOG length " + std::to_string(eog.length()) +
                                               " differs from component length " +
                                               std::to_string(components.length()));
  const Eigen::VectorXd ref = eog.samples.row(0).transpose();
  std::vector<ComponentScore> scores;
  for (Index k = 0; k < components.count(); ++k) {
    const Eigen::VectorXd comp = components.components.row(k).transpose();
    double rho = 0.0;
    try {
      rho = spearman(as_span(comp), as_span(ref));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
    }
    scores.push_back({static_cast<std::size_t>(k), absolute ? std::abs(rho) : rho});
  }
  return scores;
}

// Attenuation for one score. Above the threshold the factor is 1 - 2c up to
// and including c = 0.5, and 1 - c beyond it.
inline double scale_for(double score, double threshold) {
  if (!(score > threshold)) return 1.0;
  return score <= 0.5 ? 1.0 - 2.0 * score : 1.0 - score;
}

inline std::vector<ComponentVerdict> decide(const std::vector<ComponentScore>& scores,
                                            const DenoiseConfig& config = {}) {
  config.validate();
  std::vector<ComponentVerdict> verdicts;
  verdicts.reserve(scores.size());
  for (const auto& s : scores) {
    if (!(s.correlation >= -1.0 && s.correlation <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "correlation score outside [-1, 1]");
    ComponentVerdict v;
    v.component_index = s.index;
    v.abs_correlation = s.correlation;
    v.selected = s.correlation > config.threshold;
    v.scale_factor = scale_for(s.correlation, config.threshold);
    verdicts.push_back(v);
  }
  return verdicts;
}

inline ComponentSet apply_verdicts(ComponentSet components,
                                   const std::vector<ComponentVerdict>& verdicts) {
  if (static_cast<Index>(verdicts.size()) != components.count())
    throw Error(ErrorCode::ShapeMismatch, "need exactly one verdict per component");
  for (const auto& v : verdicts) {
    if (static_cast<Index>(v.component_index) >= components.count())
      throw Error(ErrorCode::OutOfRange, "verdict refers to a missing component");
    if (v.scale_factor != 1.0) components.components.row(static_cast<Index>(v.component_index)) *= v.scale_factor;
  }
  return components;
}

struct DenoiseResult {
  Recording cleaned;
  DenoiseReport report;
  SeparationModel model;
  ComponentSet components;  // as separated, before scaling
};

// fit_ica -> score -> decide -> scale -> inverse_ica, plus the report.
inline DenoiseResult denoise(const Recording& eeg, const Recording& eog,
                             const DenoiseConfig& config = {}, const IcaParams& ica = {}) {
  config.validate();
  if (eog.channels() != 1)
    throw Error(ErrorCode::ChannelMismatch, "EOG reference must have exactly one channel");
  if (eog.length() != eeg.length())
    throw Error(ErrorCode::LengthMismatch, "EEG and EOG lengths differ; synchronize first");

  auto [model, components] = fit_ica(eeg, ica);
  const auto scores = score_components(components, eog, config.use_absolute_correlation);
  const auto verdicts = decide(scores, config);
  Recording cleaned = inverse_ica(apply_verdicts(components, verdicts), model);
  cleaned.t0_offset_s = eeg.t0_offset_s;

  DenoiseReport report = compute_report(eeg, cleaned, eog);
  report.verdicts = verdicts;
  return {std::move(cleaned), std::move(report), std::move(model), std::move(components)};
}

}  // namespace eegclean
