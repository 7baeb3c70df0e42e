#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "eegclean/cnn/layers.hpp"

namespace testutil {

struct GradMismatch {
  std::string name;
  Eigen::Index index;
  double analytic;
  double numeric;
  double rel;
};

struct GradCheckResult {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::vector<GradMismatch> failures;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps entries that are zero on both
// sides from dividing by nothing.
inline double relative_error(double a, double n, double floor = 1e-8) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Central differences of `loss` with respect to every entry of `value`,
// compared against `analytic`.
inline void check_entries(const std::string& name, eegclean::cnn::Mat<double>& value,
                          const eegclean::cnn::Mat<double>& analytic, const std::function<double()>& loss,
                          GradCheckResult& result, double eps = 1e-4, double tol = 1e-3) {
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    const double saved = value.data()[i];
    value.data()[i] = saved + eps;
    const double up = loss();
    value.data()[i] = saved - eps;
    const double down = loss();
    value.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.data()[i];
    const double rel = relative_error(a, numeric);
    result.max_rel = std::max(result.max_rel, rel);
    ++result.checked;
    if (rel > tol) result.failures.push_back({name, i, a, numeric, rel});
  }
}

}  // namespace testutil
