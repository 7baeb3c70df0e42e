#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eegclean/error.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean {

// Excess kurtosis E[(x - mu)^4] / sigma^4 - 3 with population moments.
inline double kurtosis(std::span<const double> x) {
  if (x.size() < 4) throw Error(ErrorCode::InvalidArgument, "kurtosis needs at least 4 samples");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d2 = (v - mean) * (v - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (m2 <= 0.0) throw Error(ErrorCode::ZeroVariance, "kurtosis of a constant sequence");
  return m4 / (m2 * m2) - 3.0;
}

struct IcaParams {
  Index n_components = 0;  // 0 selects one component per channel
  std::uint64_t seed = 42;
  int max_iter = 200;
  double tol = 1e-6;
};

// Centering, whitening and rotation learned by fit_ica.
//   components = demixing * whitening * (x - mean)
//   x          = remixing * components + mean
struct SeparationModel {
  std::vector<std::string> channel_names;
  double sample_rate_hz = kDefaultSampleRateHz;
  Eigen::VectorXd mean;
  Eigen::MatrixXd whitening;  // components x channels
  Eigen::MatrixXd demixing;   // components x components, orthonormal rows
  Eigen::MatrixXd remixing;   // channels x components
  bool converged = false;
  int iterations = 0;

  Index n_components() const { return demixing.rows(); }
  Index n_channels() const { return mean.size(); }
  Eigen::MatrixXd unmixing() const { return demixing * whitening; }
};

struct ComponentSet {
  Eigen::MatrixXd components;  // components x time

  Index count() const { return components.rows(); }
  Index length() const { return components.cols(); }
};

struct Whitened {
  Eigen::MatrixXd data;         // components x time, identity covariance
  Eigen::VectorXd mean;
  Eigen::MatrixXd whitening;    // components x channels
  Eigen::MatrixXd dewhitening;  // channels x components, pseudoinverse of whitening
};

// PCA whitening keeping the `n_components` strongest directions.
// Directions with eigenvalue <= 1e-10 * max are treated as absent.
inline Whitened whiten(const Eigen::MatrixXd& x, Index n_components = 0) {
  const Index channels = x.rows();
  const Index n = x.cols();
  if (n_components == 0) n_components = channels;
  if (n_components < 1 || n_components > channels)
    throw Error(ErrorCode::InvalidArgument, "component count must lie in [1, channels]");
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "whitening needs at least 2 samples");

  Whitened w;
  w.mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - w.mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorCode::RankDeficient, "covariance eigendecomposition failed");

  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double max_value = values(channels - 1);
  Index retained = 0;
  for (Index i = 0; i < channels; ++i)
    if (values(i) > 1e-10 * max_value) ++retained;
  if (!(max_value > 0.0) || retained < n_components)
    throw Error(ErrorCode::RankDeficient, "covariance rank " + std::to_string(retained) +
                                              " is below the requested " +
                                              std::to_string(n_components) + " components");

  const Eigen::MatrixXd vectors = eig.eigenvectors().rightCols(n_components).rowwise().reverse();
  const Eigen::VectorXd kept = values.tail(n_components).reverse();
  w.whitening = kept.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
  w.dewhitening = vectors * kept.cwiseSqrt().asDiagonal();
  w.data = w.whitening * centered;
  return w;
}

inline Whitened whiten(const Recording& rec, Index n_components = 0) {
  return whiten(rec.samples, n_components);
}

// W <- (W W^T)^(-1/2) W
inline Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * w.transpose());
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * w;
}

// One fixed-point step with g(u) = u^3, g'(u) = 3u^2, applied to every row,
// followed by symmetric decorrelation. `z` must be white.
inline Eigen::MatrixXd fastica_update(const Eigen::MatrixXd& w, const Eigen::MatrixXd& z) {
  const double n = static_cast<double>(z.cols());
  const Eigen::MatrixXd y = w * z;
  const Eigen::MatrixXd g = y.array().cube().matrix();
  const Eigen::VectorXd g_prime_mean = (3.0 * y.array().square()).rowwise().mean();
  const Eigen::MatrixXd next = g * z.transpose() / n - g_prime_mean.asDiagonal() * w;
  return symmetric_decorrelation(next);
}

// max over rows of |1 - |<w_new_i, w_old_i>||
inline double fastica_change(const Eigen::MatrixXd& w_new, const Eigen::MatrixXd& w_old) {
  const Eigen::VectorXd dots = (w_new.cwiseProduct(w_old)).rowwise().sum();
  return (1.0 - dots.array().abs()).abs().maxCoeff();
}

// Symmetric FastICA with the kurtosis contrast. Non-convergence is reported
// through `converged`, the model is still usable.
inline std::pair<SeparationModel, ComponentSet> fit_ica(const Recording& rec,
                                                         const IcaParams& params = {}) {
  const Index channels = rec.channels();
  const Index n_comp = params.n_components == 0 ? channels : params.n_components;
  if (n_comp < 1 || n_comp > channels)
    throw Error(ErrorCode::InvalidArgument, "component count must lie in [1, channels]");
  if (rec.length() < 10 * channels)
    throw Error(ErrorCode::InvalidArgument, "recording needs at least 10 samples per channel");
  if (params.max_iter < 1 || !(params.tol > 0.0))
    throw Error(ErrorCode::InvalidArgument, "max_iter must be >= 1 and tol > 0");

  const Whitened white = whiten(rec.samples, n_comp);

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(n_comp, n_comp);
  for (Index i = 0; i < n_comp; ++i)
    for (Index j = 0; j < n_comp; ++j) w(i, j) = normal(rng);
  w = symmetric_decorrelation(w);

  SeparationModel model;
  for (int it = 1; it <= params.max_iter; ++it) {
    const Eigen::MatrixXd next = fastica_update(w, white.data);
    const double change = fastica_change(next, w);
    w = next;
    model.iterations = it;
    if (change < params.tol) {
      model.converged = true;
      break;
    }
  }

  model.channel_names = rec.channel_names;
  model.sample_rate_hz = rec.sample_rate_hz;
  model.mean = white.mean;
  model.whitening = white.whitening;
  model.demixing = w;
  model.remixing = white.dewhitening * w.transpose();
  ComponentSet set{w * white.data};
  return {std::move(model), std::move(set)};
}

inline ComponentSet apply_unmixing(const SeparationModel& model, const Recording& rec) {
  if (rec.channels() != model.n_channels())
    throw Error(ErrorCode::ShapeMismatch, "recording channel count differs from the model");
  return {model.unmixing() * (rec.samples.colwise() - model.mean)};
}

// Projects (possibly modified) components back to sensor space.
inline Recording inverse_ica(const ComponentSet& components, const SeparationModel& model) {
  if (components.count() != model.n_components())
    throw Error(ErrorCode::ShapeMismatch, "component count " + std::to_string(components.count()) +
                                              " differs from model's " +
                                              std::to_string(model.n_components()));
  Recording out;
  out.channel_names = model.channel_names;
  out.sample_rate_hz = model.sample_rate_hz;
  out.samples = (model.remixing * components.components).colwise() + model.mean;
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, "expected a nested array");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows ? static_cast<Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw Error(ErrorCode::InvalidConfig, "ragged matrix in JSON");
    for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const SeparationModel& m) {
  nlohmann::json j;
  j["format"] = "eegclean-separation-model";
  j["version"] = 1;
  j["channel_names"] = m.channel_names;
  j["sample_rate_hz"] = m.sample_rate_hz;
  j["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
  j["whitening"] = detail::matrix_to_json(m.whitening);
  j["demixing"] = detail::matrix_to_json(m.demixing);
  j["remixing"] = detail::matrix_to_json(m.remixing);
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  return j;
}

inline SeparationModel separation_model_from_json(const nlohmann::json& j) {
  try {
    SeparationModel m;
    m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Index>(mean.size()));
    m.whitening = detail::matrix_from_json(j.at("whitening"));
    m.demixing = detail::matrix_from_json(j.at("demixing"));
    m.remixing = detail::matrix_from_json(j.at("remixing"));
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<int>();
    const Index k = m.demixing.rows();
    const Index c = m.mean.size();
    if (m.demixing.cols() != k || m.whitening.rows() != k || m.whitening.cols() != c ||
        m.remixing.rows() != c || m.remixing.cols() != k ||
        static_cast<Index>(m.channel_names.size()) != c)
      throw Error(ErrorCode::InvalidConfig, "separation model matrices have inconsistent shapes");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad separation model: ") + e.what());
  }
}

inline void save_separation_model(const SeparationModel& m, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << to_json(m).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing '" + path.string() + "'");
}

inline SeparationModel load_separation_model(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad JSON: ") + e.what());
  }
  return separation_model_from_json(j);
}

}  // namespace eegclean
