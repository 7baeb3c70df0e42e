#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "eegclean/metrics.hpp"
#include "test_util.hpp"

using namespace eegclean;

namespace {

// Independent reference: rank by counting, Pearson on ranks, all with plain loops.
double reference_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST(Spearman, HandCase) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 1, 4, 3};
  EXPECT_EQ(spearman(x, y), 0.6);
  EXPECT_EQ(spearman_closed_form(x, y), 0.6);
}

TEST(Spearman, MatchesClosedFormWithoutTies) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(50), y(50);
    for (auto& v : x) v = d(rng);
    for (auto& v : y) v = d(rng);
    EXPECT_NEAR(spearman(x, y), spearman_closed_form(x, y), 1e-12);
  }
}

TEST(Spearman, TiesUseAverageRanks) {
  const std::vector<double> x{1, 2, 2, 3, 5, 5, 5}, y{3, 1, 4, 1, 5, 9, 2};
  EXPECT_NEAR(spearman(x, y), reference_spearman(x, y), 1e-14);
  const auto r = average_ranks(x);
  EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4, 6, 6, 6}));
}

TEST(Spearman, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  std::vector<double> x(100), y(100), ex(100);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = d(rng);
    y[i] = x[i] + d(rng);
    ex[i] = std::exp(3 * x[i]);
  }
  EXPECT_NEAR(spearman(x, y), spearman(ex, y), 1e-14);
  EXPECT_NEAR(spearman(x, ex), 1.0, 1e-15);
}

TEST(Spearman, ReversalGivesMinusOne) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{50, 40, 30, 20, 10};
  EXPECT_EQ(spearman(x, y), -1.0);
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  EXPECT_ERROR_CODE(spearman(a, b), ErrorCode::LengthMismatch);
  const std::vector<double> c{1, 1, 1};
  EXPECT_ERROR_CODE(spearman(a, c), ErrorCode::ZeroVariance);
}

TEST(Pearson, KnownValue) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
  // sxy = 6, sxx = 10, syy = 6
  EXPECT_NEAR(pearson(x, y), 6.0 / std::sqrt(60.0), 1e-15);
}

TEST(HjorthActivity, PopulationVariance) {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(hjorth_activity(x), 4.0);
}

TEST(Snr, TenLogRatio) {
  const std::vector<double> s{1, -1, 1, -1}, n{0.1, -0.1, 0.1, -0.1};
  EXPECT_NEAR(snr_db(s, n), 20.0, 1e-12);
}

TEST(Snr, ZeroNoiseIsInfinite) {
  const std::vector<double> s{1, -1, 1, -1}, n{0, 0, 0, 0};
  EXPECT_TRUE(std::isinf(snr_db(s, n)));
}

TEST(Snr, SignalEqualToInputHasInfiniteSnr) {
  const std::vector<double> s{1, 3, 2, 5};
  const auto n = residual_noise(s, s);
  EXPECT_TRUE(std::isinf(snr_db(s, n)));
}

TEST(Accuracy, FractionCorrect) {
  const std::vector<int> p{0, 1, 2, 3}, t{0, 1, 0, 3};
  EXPECT_DOUBLE_EQ(accuracy(p, t), 0.75);
  EXPECT_ERROR_CODE(accuracy(std::vector<int>{}, std::vector<int>{}), ErrorCode::EmptyDataset);
}

TEST(ComputeReport, ChannelAlignedColumns) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  const Index n = 400;
  Eigen::RowVectorXd eog(n);
  for (Index t = 0; t < n; ++t) eog(t) = d(rng);
  Eigen::MatrixXd clean(2, n);
  for (Index i = 0; i < clean.size(); ++i) clean.data()[i] = d(rng);
  Eigen::MatrixXd input = clean;
  input.row(0) += 2.0 * eog;
  const Recording in{{"A", "B"}, 128, input, 0}, out{{"A", "B"}, 128, clean, 0}, ref{{"EOG"}, 128, eog, 0};
  const auto r = compute_report(in, out, ref);
  ASSERT_TRUE(r.consistent());
  EXPECT_GT(r.corr_before[0], 0.7);
  EXPECT_LT(r.corr_after[0], 0.2);
  EXPECT_TRUE(std::isinf(r.snr_db[1]));
  const Eigen::VectorXd s0 = clean.row(0).transpose(), n0 = (2.0 * eog).transpose();
  EXPECT_NEAR(r.snr_db[0], snr_db(as_span(s0), as_span(n0)), 1e-12);
}
