#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace eegclean {

// Outcome of the artifact test for one independent component.
struct ComponentVerdict {
  std::size_t component_index = 0;
  double abs_correlation = 0.0;
  bool selected = false;
  double scale_factor = 1.0;
};

// Per-channel before/after correlation with the EOG reference and the
// post-cleaning SNR, plus the component verdicts that produced them.
struct DenoiseReport {
  std::vector<std::string> channel_names;
  std::vector<double> corr_before;
  std::vector<double> corr_after;
  std::vector<double> snr_db;
  std::vector<ComponentVerdict> verdicts;

  std::size_t size() const { return channel_names.size(); }

  bool consistent() const {
    const auto n = channel_names.size();
    return corr_before.size() == n && corr_after.size() == n && snr_db.size() == n;
  }
};

}  // namespace eegclean
