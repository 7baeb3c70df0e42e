#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eegclean/artifact_removal.hpp"
#include "eegclean/cnn/train.hpp"
#include "eegclean/error.hpp"
#include "eegclean/ica.hpp"
#include "eegclean/preprocess.hpp"
#include "eegclean/signal_io.hpp"
#include "eegclean/synth.hpp"

namespace eegclean {

// INI document with typed, strict accessors: malformed values and keys that
// nobody asked about are configuration errors.
class IniConfig {
 public:
  IniConfig() = default;

  // A config that cannot be found is a configuration error, not an input error.
  static IniConfig load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::InvalidConfig, "config file '" + path.string() + "' not found");
    IniConfig cfg;
    try {
      boost::property_tree::ini_parser::read_ini(path.string(), cfg.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
    cfg.source_ = path.string();
    return cfg;
  }

  static IniConfig parse(const std::string& text) {
    IniConfig cfg;
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, cfg.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
    cfg.source_ = "<string>";
    return cfg;
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    known_.insert(key);
    const auto raw = tree_.get_optional<std::string>(key);
    if (!raw) return;
    target = convert<T>(key, std::string(detail::trim(*raw)));
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& target) {
    known_.insert(key);
    const auto raw = tree_.get_optional<std::string>(key);
    if (!raw) return;
    target = convert<T>(key, std::string(detail::trim(*raw)));
  }

  // Rejects any section.key that no read() call claimed.
  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) throw Error(ErrorCode::InvalidConfig, source_ + ": key '" + section + "' outside a section");
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!known_.count(full)) throw Error(ErrorCode::InvalidConfig, source_ + ": unknown key '" + full + "'");
      }
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key, const std::string& text) const {
    const auto fail = [&]() -> T {
      throw Error(ErrorCode::InvalidConfig, source_ + ": bad value '" + text + "' for '" + key + "'");
    };
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      return std::filesystem::path(text);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
      if (text == "false" || text == "0" || text == "no" || text == "off") return false;
      return fail();
    } else if constexpr (std::is_floating_point_v<T>) {
      const auto v = detail::parse_double(text);
      if (!v) return fail();
      return static_cast<T>(*v);
    } else if constexpr (std::is_integral_v<T>) {
      T v{};
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size()) return fail();
      return v;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config value type");
    }
  }

  boost::property_tree::ptree tree_;
  std::set<std::string> known_;
  std::string source_;
};

enum class SyncMode { Auto, Manual, None };

inline SyncMode parse_sync_mode(std::string_view text) {
  if (text == "auto") return SyncMode::Auto;
  if (text == "manual") return SyncMode::Manual;
  if (text == "none") return SyncMode::None;
  throw Error(ErrorCode::InvalidConfig, "sync mode must be auto, manual or none");
}

struct SyncConfig {
  SyncMode mode = SyncMode::Auto;
  Index eeg_index = 0;
  Index eog_index = 0;
  // Marker channels; empty selects the first channel of each recording.
  std::string eeg_channel;
  std::string eog_channel;
  PulsePattern pattern;
  // Start both streams after the marker instead of at its rising edge, so the
  // marker itself never reaches the filter or ICA.
  bool skip_marker = true;
};

struct PipelineConfig {
  double sample_rate_hz = kDefaultSampleRateHz;
  std::filesystem::path eeg;
  std::filesystem::path eog;
  std::filesystem::path schedule;  // optional; enables windowing and training
  std::filesystem::path out_dir = "eegclean_out";
  std::string eog_channel;         // needed only when the EOG file holds several channels
  SyncConfig sync;
  bool filter_enabled = true;
  BandpassSpec filter;
  IcaParams ica;
  DenoiseConfig denoise;
  Index window_len = kDefaultWindowLength;
  double split_fraction = 0.8;
  bool train_enabled = true;
  cnn::TrainConfig train;

  void validate() const {
    if (!(sample_rate_hz > 0)) throw Error(ErrorCode::InvalidConfig, "sample rate must be positive");
    if (sync.eeg_index < 0 || sync.eog_index < 0)
      throw Error(ErrorCode::InvalidConfig, "sync indices must be non-negative");
    try {
      sync.pattern.validate();
      if (filter_enabled) filter.validate(sample_rate_hz);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
    if (ica.n_components < 0 || ica.max_iter < 1 || !(ica.tol > 0))
      throw Error(ErrorCode::InvalidConfig, "ica settings out of range");
    denoise.validate();
    if (window_len < 1) throw Error(ErrorCode::InvalidConfig, "window length must be positive");
    if (!(split_fraction > 0 && split_fraction < 1))
      throw Error(ErrorCode::InvalidConfig, "split fraction must lie in (0, 1)");
    train.validate();
  }
};

// Sections: [general] [input] [sync] [filter] [ica] [denoise] [window] [train].
inline PipelineConfig read_pipeline_config(IniConfig& ini, PipelineConfig cfg = {}) {
  ini.read("general.sample_rate_hz", cfg.sample_rate_hz);
  ini.read("general.out_dir", cfg.out_dir);
  std::optional<std::uint64_t> seed;
  ini.read("general.seed", seed);
  if (seed) cfg.ica.seed = cfg.train.seed = *seed;

  ini.read("input.eeg", cfg.eeg);
  ini.read("input.eog", cfg.eog);
  ini.read("input.schedule", cfg.schedule);
  ini.read("input.eog_channel", cfg.eog_channel);

  std::string mode;
  ini.read("sync.mode", mode);
  if (!mode.empty()) cfg.sync.mode = parse_sync_mode(mode);
  ini.read("sync.eeg_index", cfg.sync.eeg_index);
  ini.read("sync.eog_index", cfg.sync.eog_index);
  ini.read("sync.eeg_channel", cfg.sync.eeg_channel);
  ini.read("sync.eog_channel", cfg.sync.eog_channel);
  ini.read("sync.skip_marker", cfg.sync.skip_marker);
  ini.read("sync.start_pulse_s", cfg.sync.pattern.start_pulse_width_s);
  ini.read("sync.low_gap_s", cfg.sync.pattern.low_gap_s);
  ini.read("sync.trailer_period_s", cfg.sync.pattern.trailer_pulse_period_s);
  ini.read("sync.trailer_duty", cfg.sync.pattern.trailer_duty);
  ini.read("sync.trailer_pulses", cfg.sync.pattern.trailer_pulses);
  ini.read("sync.threshold", cfg.sync.pattern.amplitude_threshold);

  ini.read("filter.enabled", cfg.filter_enabled);
  ini.read("filter.order", cfg.filter.order);
  ini.read("filter.low_hz", cfg.filter.low_cut_hz);
  ini.read("filter.high_hz", cfg.filter.high_cut_hz);

  ini.read("ica.components", cfg.ica.n_components);
  ini.read("ica.seed", cfg.ica.seed);
  ini.read("ica.max_iter", cfg.ica.max_iter);
  ini.read("ica.tol", cfg.ica.tol);

  ini.read("denoise.threshold", cfg.denoise.threshold);
  ini.read("denoise.absolute", cfg.denoise.use_absolute_correlation);

  ini.read("window.length", cfg.window_len);
  ini.read("window.split", cfg.split_fraction);

  ini.read("train.enabled", cfg.train_enabled);
  ini.read("train.epochs", cfg.train.epochs);
  ini.read("train.learning_rate", cfg.train.learning_rate);
  ini.read("train.batch_size", cfg.train.batch_size);
  ini.read("train.seed", cfg.train.seed);
  std::string optimizer;
  ini.read("train.optimizer", optimizer);
  if (!optimizer.empty()) cfg.train.optimizer = cnn::parse_optimizer(optimizer);
  ini.read("train.momentum", cfg.train.momentum);
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  auto ini = IniConfig::load(path);
  auto cfg = read_pipeline_config(ini);
  ini.reject_unknown();
  return cfg;
}

// What `synth` produces: a contaminated scenario or a separable labelled set.
struct SynthConfig {
  enum class Kind { Scenario, Labeled } kind = Kind::Scenario;
  ScenarioSpec scenario;
  bool with_pulse = false;
  std::size_t per_class = 10;
  Index window_len = kDefaultWindowLength;
};

// Sections: [synth] kind, seed, sample_rate_hz; [scenario] ...; [labeled] ...
inline SynthConfig read_synth_config(IniConfig& ini, SynthConfig cfg = {}) {
  std::string kind;
  ini.read("synth.kind", kind);
  if (kind == "labeled") cfg.kind = SynthConfig::Kind::Labeled;
  else if (!kind.empty() && kind != "scenario")
    throw Error(ErrorCode::InvalidConfig, "synth kind must be scenario or labeled");
  ini.read("synth.seed", cfg.scenario.seed);
  ini.read("synth.sample_rate_hz", cfg.scenario.sample_rate_hz);

  auto& s = cfg.scenario;
  ini.read("scenario.channels", s.n_channels);
  ini.read("scenario.sources", s.n_sources);
  ini.read("scenario.duration_s", s.duration_s);
  ini.read("scenario.blink_rate_hz", s.blink_rate_hz);
  ini.read("scenario.blink_amplitude", s.blink_amplitude);
  ini.read("scenario.eye_movement_amplitude", s.eye_movement_amplitude);
  ini.read("scenario.window_len", s.window_len);
  ini.read("scenario.pulse", cfg.with_pulse);

  ini.read("labeled.per_class", cfg.per_class);
  ini.read("labeled.window_len", cfg.window_len);
  ini.read("labeled.channels", s.n_channels);
  return cfg;
}

inline SynthConfig load_synth_config(const std::filesystem::path& path) {
  auto ini = IniConfig::load(path);
  auto cfg = read_synth_config(ini);
  ini.reject_unknown();
  return cfg;
}

}  // namespace eegclean
