#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "eegclean/ica.hpp"
#include "eegclean/metrics.hpp"
#include "test_util.hpp"

using namespace eegclean;
using testutil::TempDir;

namespace {

Eigen::MatrixXd sources_sine_uniform(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd s(2, n);
  for (Index t = 0; t < n; ++t) {
    s(0, t) = std::sin(2.0 * std::numbers::pi * 7.0 * static_cast<double>(t) / 128.0);
    s(1, t) = u(rng);
  }
  return s;
}

Eigen::MatrixXd three_sources(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::exponential_distribution<double> e(1.0);
  Eigen::MatrixXd s(3, n);
  for (Index t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t) / 128.0;
    s(0, t) = std::sin(2.0 * std::numbers::pi * 5.0 * tt);
    s(1, t) = u(rng);
    s(2, t) = (e(rng) - 1.0) * (u(rng) > 0 ? 1.0 : -1.0);  // Laplacian-like
  }
  return s;
}

Recording as_recording(const Eigen::MatrixXd& x) {
  std::vector<std::string> names;
  for (Index c = 0; c < x.rows(); ++c) names.push_back("c" + std::to_string(c));
  return Recording{names, 128.0, x, 0.0};
}

double abs_pearson(const Eigen::MatrixXd& a, Index i, const Eigen::MatrixXd& b, Index j) {
  const Eigen::VectorXd x = a.row(i).transpose(), y = b.row(j).transpose();
  return std::abs(pearson(as_span(x), as_span(y)));
}

// Best mean |Pearson| over all permutations, enumerated exhaustively.
double best_assignment(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth, double* worst = nullptr) {
  std::vector<Index> perm(static_cast<std::size_t>(truth.rows()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Index>(i);
  double best = -1.0, best_worst = 0.0;
  do {
    double sum = 0.0, low = 1.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      const double r = abs_pearson(est, perm[i], truth, static_cast<Index>(i));
      sum += r;
      low = std::min(low, r);
    }
    const double mean = sum / static_cast<double>(perm.size());
    if (mean > best) {
      best = mean;
      best_worst = low;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (worst) *worst = best_worst;
  return best;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.colwise() - x.rowwise().mean();
  return c * c.transpose() / static_cast<double>(x.cols());
}

}  // namespace

TEST(Kurtosis, RademacherIsMinusTwo) {
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 1.0 : -1.0;
  EXPECT_NEAR(kurtosis(x), -2.0, 1e-12);
}

TEST(Kurtosis, GaussianNearZero) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  std::vector<double> x(100000);
  for (auto& v : x) v = d(rng);
  EXPECT_LT(std::abs(kurtosis(x)), 0.1);
}

TEST(Kurtosis, Errors) {
  EXPECT_ERROR_CODE(kurtosis(std::vector<double>(10, 2.0)), ErrorCode::ZeroVariance);
  EXPECT_ERROR_CODE(kurtosis(std::vector<double>{1, 2, 3}), ErrorCode::InvalidArgument);
}

TEST(Whiten, DiagonalCovarianceScalesByInverseSd) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d;
  Eigen::MatrixXd x(2, 20000);
  for (Index t = 0; t < x.cols(); ++t) {
    x(0, t) = 2.0 * d(rng);
    x(1, t) = d(rng);
  }
  const auto w = whiten(x);
  EXPECT_LE((covariance(w.data) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
  // Dominant direction first: scale close to 1/2 on channel 0, 1 on channel 1.
  EXPECT_NEAR(std::abs(w.whitening(0, 0)), 0.5, 0.02);
  EXPECT_NEAR(std::abs(w.whitening(1, 1)), 1.0, 0.02);
  EXPECT_LT(std::abs(w.whitening(0, 1)), 0.02);
}

TEST(Whiten, WhiteInputGivesOrthogonalTransform) {
  Eigen::MatrixXd x(3, 6);
  x << 1, -1, 0, 0, 0, 0,
       0, 0, 1, -1, 0, 0,
       0, 0, 0, 0, 1, -1;
  x *= std::sqrt(3.0);  // population variance 1 per row
  const auto w = whiten(x);
  EXPECT_LE((w.whitening.transpose() * w.whitening - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Whiten, ConstantChannelIsRankDeficient) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 100);
  x.row(2).setConstant(4.0);
  EXPECT_ERROR_CODE(whiten(x), ErrorCode::RankDeficient);
  EXPECT_NO_THROW(whiten(x, 2));
}

TEST(Whiten, DewhiteningIsPseudoInverse) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 500);
  const auto w = whiten(x);
  EXPECT_LE((w.whitening * w.dewhitening - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitIca, SineAndUniformRecovered) {
  const Eigen::MatrixXd s = sources_sine_uniform(5000, 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  Eigen::Matrix2d a;
  do {
    for (Index i = 0; i < 4; ++i) a.data()[i] = d(rng);
  } while (std::abs(a.determinant()) < 0.3);
  const auto [model, comps] = fit_ica(as_recording(a * s));
  double worst = 0.0;
  best_assignment(comps.components, s, &worst);
  EXPECT_GE(worst, 0.99);
  EXPECT_TRUE(model.converged);
}

TEST(FitIca, IdentityMixingReturnsInputs) {
  const Eigen::MatrixXd s = sources_sine_uniform(5000, 7);
  const auto [model, comps] = fit_ica(as_recording(s));
  double worst = 0.0;
  best_assignment(comps.components, s, &worst);
  EXPECT_GE(worst, 0.999);
}

TEST(FitIca, ThreeSourceMixtureBestAssignment) {
  const Eigen::MatrixXd s = three_sources(10000, 11);
  Eigen::Matrix3d a;
  a << 1.0, 0.5, 0.3,
       0.2, 1.0, 0.6,
       0.4, 0.1, 1.0;
  const auto [model, comps] = fit_ica(as_recording(a * s));
  EXPECT_GE(best_assignment(comps.components, s), 0.99);
}

TEST(FitIca, ComponentInvariants) {
  const Eigen::MatrixXd s = three_sources(4000, 5);
  const Eigen::MatrixXd x = Eigen::Matrix3d::Random() * s + Eigen::MatrixXd::Constant(3, 4000, 2.5);
  const auto [model, comps] = fit_ica(as_recording(x));
  for (Index k = 0; k < comps.count(); ++k) {
    const double mean = comps.components.row(k).mean();
    EXPECT_LE(std::abs(mean), 1e-9);
    const double var = (comps.components.row(k).array() - mean).square().mean();
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
  EXPECT_LE((model.demixing * model.demixing.transpose() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((model.remixing * model.unmixing() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitIca, RoundTripReproducesInput) {
  const Eigen::MatrixXd s = three_sources(3000, 8);
  Eigen::Matrix3d a;
  a << 2, 1, 0, 0.5, 1, 0.3, 0.1, 0.2, 3;
  const Eigen::MatrixXd x = a * s;
  const auto rec = as_recording(x);
  const auto [model, comps] = fit_ica(rec);
  const auto back = inverse_ica(comps, model);
  EXPECT_LT((back.samples - x).norm() / x.norm(), 1e-8);
  EXPECT_EQ(back.channel_names, rec.channel_names);
}

TEST(FitIca, ZeroedComponentIsRankOneUpdate) {
  const Eigen::MatrixXd s = three_sources(3000, 9);
  Eigen::Matrix3d a;
  a << 1, 0.4, 0.2, 0.3, 1, 0.5, 0.6, 0.1, 1;
  const Eigen::MatrixXd x = a * s;
  const auto [model, comps] = fit_ica(as_recording(x));
  ComponentSet edited = comps;
  edited.components.row(1).setZero();
  const auto out = inverse_ica(edited, model);
  // Independent computation: subtract outer product of remixing column and component.
  const Eigen::MatrixXd expected = x - model.remixing.col(1) * comps.components.row(1);
  EXPECT_LE((out.samples - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FitIca, AllZeroedGivesChannelMeans) {
  const Eigen::MatrixXd x = three_sources(2000, 3) + Eigen::MatrixXd::Constant(3, 2000, 1.5);
  const auto [model, comps] = fit_ica(as_recording(x));
  ComponentSet zero{Eigen::MatrixXd::Zero(3, 2000)};
  const auto out = inverse_ica(zero, model);
  for (Index c = 0; c < 3; ++c)
    EXPECT_LE((out.samples.row(c).array() - x.row(c).mean()).abs().maxCoeff(), 1e-12);
}

TEST(FitIca, ConvergedRowIsFixedPoint) {
  const Eigen::MatrixXd s = three_sources(10000, 12);
  Eigen::Matrix3d a;
  a << 1, 0.5, 0.3, 0.2, 1, 0.6, 0.4, 0.1, 1;
  IcaParams p;
  p.tol = 1e-10;
  p.max_iter = 2000;
  const auto [model, comps] = fit_ica(as_recording(a * s), p);
  ASSERT_TRUE(model.converged);
  const auto white = whiten(a * s);
  const Eigen::MatrixXd next = fastica_update(model.demixing, white.data);
  EXPECT_LT(fastica_change(next, model.demixing), 1e-6);
}

TEST(FitIca, SymmetricDecorrelationOrthonormalizes) {
  const Eigen::MatrixXd w = symmetric_decorrelation(Eigen::MatrixXd::Random(5, 5));
  EXPECT_LE((w * w.transpose() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FitIca, SeedDeterministic) {
  const Eigen::MatrixXd x = Eigen::Matrix3d::Random() * three_sources(3000, 2);
  IcaParams p;
  p.seed = 17;
  const auto r1 = fit_ica(as_recording(x), p);
  const auto r2 = fit_ica(as_recording(x), p);
  EXPECT_EQ(r1.first.demixing, r2.first.demixing);
  EXPECT_EQ(r1.second.components, r2.second.components);
}

TEST(FitIca, IdenticalChannelsAreRankDeficient) {
  Eigen::MatrixXd x = three_sources(1000, 1);
  x.row(2) = x.row(0);
  EXPECT_ERROR_CODE(fit_ica(as_recording(x)), ErrorCode::RankDeficient);
}

TEST(FitIca, PreconditionErrors) {
  const Eigen::MatrixXd x = three_sources(20, 1);
  EXPECT_ERROR_CODE(fit_ica(as_recording(x)), ErrorCode::InvalidArgument);
  IcaParams p;
  p.n_components = 4;
  EXPECT_ERROR_CODE(fit_ica(as_recording(three_sources(500, 1)), p), ErrorCode::InvalidArgument);
}

TEST(FitIca, NonConvergenceIsFlaggedNotThrown) {
  IcaParams p;
  p.max_iter = 1;
  p.tol = 1e-15;
  const auto [model, comps] = fit_ica(as_recording(Eigen::Matrix3d::Random() * three_sources(2000, 4)), p);
  EXPECT_FALSE(model.converged);
  EXPECT_EQ(model.iterations, 1);
  EXPECT_EQ(comps.count(), 3);
}

TEST(FitIca, FewerComponentsThanChannels) {
  Eigen::MatrixXd x(4, 3000);
  x.topRows(3) = three_sources(3000, 6);
  x.row(3) = x.row(0) + x.row(1);
  IcaParams p;
  p.n_components = 3;
  const auto [model, comps] = fit_ica(as_recording(x), p);
  EXPECT_EQ(model.remixing.rows(), 4);
  EXPECT_EQ(model.remixing.cols(), 3);
  const auto back = inverse_ica(comps, model);
  EXPECT_LT((back.samples - x).norm() / x.norm(), 1e-8);
}

TEST(InverseIca, CountMismatch) {
  const auto [model, comps] = fit_ica(as_recording(three_sources(500, 1)));
  EXPECT_ERROR_CODE(inverse_ica(ComponentSet{Eigen::MatrixXd::Zero(2, 500)}, model), ErrorCode::ShapeMismatch);
}

TEST(SeparationModelJson, RoundTrip) {
  TempDir dir;
  const auto [model, comps] = fit_ica(as_recording(three_sources(800, 2)));
  save_separation_model(model, dir / "m.json");
  const auto back = load_separation_model(dir / "m.json");
  EXPECT_EQ(back.channel_names, model.channel_names);
  EXPECT_EQ(back.demixing, model.demixing);
  EXPECT_EQ(back.whitening, model.whitening);
  EXPECT_EQ(back.remixing, model.remixing);
  EXPECT_EQ(back.mean, model.mean);
  EXPECT_EQ(back.converged, model.converged);
}

TEST(SeparationModelJson, ApplyUnmixingMatchesFit) {
  const auto rec = as_recording(Eigen::Matrix3d::Random() * three_sources(1000, 5));
  const auto [model, comps] = fit_ica(rec);
  EXPECT_LE((apply_unmixing(model, rec).components - comps.components).cwiseAbs().maxCoeff(), 1e-10);
}
