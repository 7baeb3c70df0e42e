#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "eegclean/cnn/network.hpp"
#include "eegclean/cnn/train.hpp"
#include "eegclean/error.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean::cnn {

inline constexpr const char* kModelFormat = "eegclean-cnn";
inline constexpr int kModelVersion = 1;

namespace detail {

template <typename S>
void write_scalar(std::ostream& out, S v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "model holds a non-finite parameter");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

template <typename S>
void write_row(std::ostream& out, const S* data, Index n) {
  out.put('[');
  for (Index i = 0; i < n; ++i) {
    if (i) out.put(',');
    write_scalar(out, data[i]);
  }
  out.put(']');
}

template <typename S>
void write_vector(std::ostream& out, const Mat<S>& v) {
  write_row(out, v.data(), v.size());
}

// rows x cols as nested arrays.
template <typename S>
void write_matrix(std::ostream& out, const Mat<S>& m) {
  out.put('[');
  for (Index r = 0; r < m.rows(); ++r) {
    if (r) out.put(',');
    write_row(out, m.data() + r * m.cols(), m.cols());
  }
  out.put(']');
}

// out x (in * kernel) stored as [out][in][kernel].
template <typename S>
void write_conv_weight(std::ostream& out, const Mat<S>& w, Index in, Index kernel) {
  out.put('[');
  for (Index o = 0; o < w.rows(); ++o) {
    if (o) out.put(',');
    out.put('[');
    for (Index i = 0; i < in; ++i) {
      if (i) out.put(',');
      write_row(out, w.data() + o * w.cols() + i * kernel, kernel);
    }
    out.put(']');
  }
  out.put(']');
}

inline void write_index_list(std::ostream& out, const std::vector<Index>& v) {
  out.put('[');
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.put(',');
    out << v[i];
  }
  out.put(']');
}

[[noreturn]] inline void malformed(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "malformed model file: " + what);
}

template <typename S>
void read_vector(const nlohmann::json& j, Mat<S>& v, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != v.size()) malformed(what + " has the wrong length");
  for (Index i = 0; i < v.size(); ++i) {
    const auto& x = j[static_cast<std::size_t>(i)];
    if (!x.is_number()) malformed(what + " holds a non-number");
    v.data()[i] = static_cast<S>(x.get<double>());
  }
}

template <typename S>
void read_matrix(const nlohmann::json& j, Mat<S>& m, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != m.rows()) malformed(what + " has the wrong row count");
  for (Index r = 0; r < m.rows(); ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != m.cols()) malformed(what + " has a row of the wrong width");
    for (Index c = 0; c < m.cols(); ++c) {
      const auto& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) malformed(what + " holds a non-number");
      m(r, c) = static_cast<S>(x.get<double>());
    }
  }
}

template <typename S>
void read_conv_weight(const nlohmann::json& j, Mat<S>& w, Index in, Index kernel, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != w.rows()) malformed(what + " has the wrong output count");
  for (Index o = 0; o < w.rows(); ++o) {
    const auto& per_out = j[static_cast<std::size_t>(o)];
    if (!per_out.is_array() || static_cast<Index>(per_out.size()) != in) malformed(what + " has the wrong input count");
    for (Index i = 0; i < in; ++i) {
      const auto& taps = per_out[static_cast<std::size_t>(i)];
      if (!taps.is_array() || static_cast<Index>(taps.size()) != kernel) malformed(what + " has the wrong kernel size");
      for (Index k = 0; k < kernel; ++k) {
        if (!taps[static_cast<std::size_t>(k)].is_number()) malformed(what + " holds a non-number");
        w(o, i * kernel + k) = static_cast<S>(taps[static_cast<std::size_t>(k)].template get<double>());
      }
    }
  }
}

}  // namespace detail

inline nlohmann::json architecture_to_json(const CnnArchitecture& a) {
  return {{"in_channels", a.in_channels}, {"input_length", a.input_length},
          {"conv_channels", a.conv_channels}, {"kernel", a.kernel},
          {"pool", a.pool}, {"dense", a.dense},
          {"batchnorm_eps", a.batchnorm_eps}, {"batchnorm_momentum", a.batchnorm_momentum}};
}

inline CnnArchitecture architecture_from_json(const nlohmann::json& j) {
  CnnArchitecture a;
  try {
    a.in_channels = j.at("in_channels").get<Index>();
    a.input_length = j.at("input_length").get<Index>();
    a.conv_channels = j.at("conv_channels").get<std::vector<Index>>();
    a.kernel = j.at("kernel").get<Index>();
    a.pool = j.at("pool").get<Index>();
    a.dense = j.at("dense").get<std::vector<Index>>();
    a.batchnorm_eps = j.at("batchnorm_eps").get<double>();
    a.batchnorm_momentum = j.at("batchnorm_momentum").get<double>();
  } catch (const nlohmann::json::exception& e) {
    detail::malformed(std::string("architecture: ") + e.what());
  }
  a.validate();
  return a;
}

// Streams the model as JSON: an architecture header followed by every conv
// stage (weights [out][in][kernel], batchnorm affine and running statistics)
// and every dense layer (weights [out][in], bias). Numbers use the shortest
// round-trip form, so equal models give byte-identical files.
template <typename S>
void write_model(std::ostream& out, const Network<S>& net) {
  const auto& a = net.architecture();
  out << "{\"format\":\"" << kModelFormat << "\",\"version\":" << kModelVersion << ",\"architecture\":{";
  out << "\"in_channels\":" << a.in_channels << ",\"input_length\":" << a.input_length << ",\"conv_channels\":";
  detail::write_index_list(out, a.conv_channels);
  out << ",\"kernel\":" << a.kernel << ",\"pool\":" << a.pool << ",\"dense\":";
  detail::write_index_list(out, a.dense);
  out << ",\"batchnorm_eps\":" << format_number(a.batchnorm_eps)
      << ",\"batchnorm_momentum\":" << format_number(a.batchnorm_momentum) << "},\"conv\":[";
  for (std::size_t i = 0; i < net.stages().size(); ++i) {
    const auto& s = net.stages()[i];
    if (i) out.put(',');
    out << "{\"weight\":";
    detail::write_conv_weight(out, s.conv.weight, s.conv.in_channels(), s.conv.kernel());
    out << ",\"gamma\":";
    detail::write_vector(out, s.bn.gamma);
    out << ",\"beta\":";
    detail::write_vector(out, s.bn.beta);
    out << ",\"running_mean\":";
    detail::write_vector(out, s.bn.running_mean);
    out << ",\"running_var\":";
    detail::write_vector(out, s.bn.running_var);
    out.put('}');
  }
  out << "],\"dense\":[";
  for (std::size_t i = 0; i < net.dense_layers().size(); ++i) {
    const auto& d = net.dense_layers()[i];
    if (i) out.put(',');
    out << "{\"weight\":";
    detail::write_matrix(out, d.weight);
    out << ",\"bias\":";
    detail::write_vector(out, d.bias);
    out.put('}');
  }
  out << "]}\n";
}

template <typename S>
void save_model(const Network<S>& net, const std::filesystem::path& path) {
  auto out = eegclean::detail::open_output(path);
  write_model(out, net);
  out.flush();
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing " + path.string());
}

template <typename S>
Network<S> model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kModelFormat) detail::malformed("not an eegclean CNN model");
  if (j.value("version", 0) != kModelVersion) detail::malformed("unsupported version");
  if (!j.contains("architecture") || !j.contains("conv") || !j.contains("dense"))
    detail::malformed("missing architecture, conv or dense section");
  Network<S> net(architecture_from_json(j["architecture"]), 0);
  const auto& conv = j["conv"];
  const auto& dense = j["dense"];
  if (!conv.is_array() || conv.size() != net.stages().size()) detail::malformed("conv stage count differs");
  if (!dense.is_array() || dense.size() != net.dense_layers().size()) detail::malformed("dense layer count differs");
  for (std::size_t i = 0; i < conv.size(); ++i) {
    auto& s = net.stages()[i];
    const auto& c = conv[i];
    const std::string tag = "conv[" + std::to_string(i) + "]";
    if (!c.is_object()) detail::malformed(tag + " is not an object");
    for (const char* key : {"weight", "gamma", "beta", "running_mean", "running_var"})
      if (!c.contains(key)) detail::malformed(tag + " lacks " + key);
    detail::read_conv_weight(c["weight"], s.conv.weight, s.conv.in_channels(), s.conv.kernel(), tag + ".weight");
    detail::read_vector(c["gamma"], s.bn.gamma, tag + ".gamma");
    detail::read_vector(c["beta"], s.bn.beta, tag + ".beta");
    detail::read_vector(c["running_mean"], s.bn.running_mean, tag + ".running_mean");
    detail::read_vector(c["running_var"], s.bn.running_var, tag + ".running_var");
    if (!(s.bn.running_var.array() > S(0)).all()) detail::malformed(tag + " has a non-positive running variance");
  }
  for (std::size_t i = 0; i < dense.size(); ++i) {
    auto& d = net.dense_layers()[i];
    const std::string tag = "dense[" + std::to_string(i) + "]";
    if (!dense[i].is_object() || !dense[i].contains("weight") || !dense[i].contains("bias"))
      detail::malformed(tag + " lacks weight or bias");
    detail::read_matrix(dense[i]["weight"], d.weight, tag + ".weight");
    detail::read_vector(dense[i]["bias"], d.bias, tag + ".bias");
  }
  net.set_training(false);
  return net;
}

template <typename S>
Network<S> load_model(const std::filesystem::path& path) {
  auto in = eegclean::detail::open_input(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    detail::malformed(e.what());
  }
  return model_from_json<S>(j);
}

// One row per epoch: epoch,loss,train_accuracy,test_accuracy.
inline void write_history(const TrainHistory& h, const std::filesystem::path& path) {
  auto out = eegclean::detail::open_output(path);
  out << "epoch,loss,train_accuracy,test_accuracy\n";
  for (std::size_t e = 0; e < h.loss.size(); ++e)
    out << e + 1 << ',' << format_number(h.loss[e]) << ',' << format_number(h.train_accuracy[e]) << ','
        << format_number(h.test_accuracy[e]) << '\n';
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing " + path.string());
}

}  // namespace eegclean::cnn
