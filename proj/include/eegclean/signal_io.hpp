#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "eegclean/error.hpp"
#include "eegclean/report.hpp"

namespace eegclean {

using Index = Eigen::Index;

inline constexpr double kDefaultSampleRateHz = 128.0;
inline constexpr Index kDefaultWindowLength = 640;

// The 14 electrode positions of the headset montage, in recording order.
inline const std::vector<std::string>& default_channel_names() {
  static const std::vector<std::string> names{"AF3", "F7",  "F3", "FC5", "T7", "P7",  "O1",
                                              "O2",  "P8",  "T8", "FC6", "F4", "F8", "AF4"};
  return names;
}

// Uniformly sampled multi-channel signal. Rows are channels, columns are samples.
struct Recording {
  std::vector<std::string> channel_names;
  double sample_rate_hz = kDefaultSampleRateHz;
  Eigen::MatrixXd samples;
  double t0_offset_s = 0.0;

  Index channels() const { return samples.rows(); }
  Index length() const { return samples.cols(); }
  double duration_s() const { return static_cast<double>(length()) / sample_rate_hz; }

  std::optional<Index> find_channel(std::string_view name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i)
      if (channel_names[i] == name) return static_cast<Index>(i);
    return std::nullopt;
  }

  Index channel_index(std::string_view name) const {
    if (auto idx = find_channel(name)) return *idx;
    throw Error(ErrorCode::InvalidArgument, "no channel named '" + std::string(name) + "'");
  }
};

inline void validate(const Recording& rec) {
  if (rec.length() < 1 || rec.channels() < 1)
    throw Error(ErrorCode::ShapeMismatch, "recording must have at least one channel and one sample");
  if (static_cast<Index>(rec.channel_names.size()) != rec.channels())
    throw Error(ErrorCode::ChannelMismatch, "channel name count " +
                                                std::to_string(rec.channel_names.size()) +
                                                " does not match row count " +
                                                std::to_string(rec.channels()));
  std::unordered_set<std::string> seen;
  for (const auto& name : rec.channel_names)
    if (!seen.insert(name).second)
      throw Error(ErrorCode::ChannelMismatch, "duplicate channel name '" + name + "'");
  if (!(rec.sample_rate_hz > 0.0) || !std::isfinite(rec.sample_rate_hz))
    throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (!rec.samples.allFinite())
    throw Error(ErrorCode::NonFiniteSample, "recording contains NaN or Inf");
}

inline Recording make_recording(std::vector<std::string> names, double sample_rate_hz,
                                Eigen::MatrixXd samples, double t0_offset_s = 0.0) {
  Recording rec{std::move(names), sample_rate_hz, std::move(samples), t0_offset_s};
  validate(rec);
  return rec;
}

// ---------------------------------------------------------------------------
// Labels

enum class Label : std::uint8_t { Lab = 0, College = 1, Friends = 2, Dog = 3, Cat = 4 };

inline constexpr std::size_t kNumLabels = 5;

inline constexpr std::array<Label, kNumLabels> kAllLabels{Label::Lab, Label::College,
                                                          Label::Friends, Label::Dog, Label::Cat};

inline std::string_view to_string(Label label) {
  static constexpr std::array<std::string_view, kNumLabels> names{"LAB", "COLLEGE", "FRIENDS",
                                                                  "DOG", "CAT"};
  return names[static_cast<std::size_t>(label)];
}

inline std::size_t label_index(Label label) { return static_cast<std::size_t>(label); }

inline Label label_from_index(std::size_t idx) {
  if (idx >= kNumLabels) throw Error(ErrorCode::InvalidArgument, "label index out of range");
  return kAllLabels[idx];
}

inline Label parse_label(std::string_view text) {
  for (auto label : kAllLabels)
    if (to_string(label) == text) return label;
  throw Error(ErrorCode::InvalidArgument, "unknown label '" + std::string(text) + "'");
}

struct LabeledWindow {
  Eigen::MatrixXd samples;  // channels x window_len
  Label label = Label::Lab;
};

struct Dataset {
  std::vector<LabeledWindow> windows;
  double split_fraction = 0.8;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
};

struct ScheduleEntry {
  Index start_index = 0;
  Label label = Label::Lab;
};

using Schedule = std::vector<ScheduleEntry>;

// ---------------------------------------------------------------------------
// Text helpers

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char delim = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(delim, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Unwritable, "cannot write '" + path.string() + "'");
  return out;
}

}  // namespace detail

// Shortest text that parses back to exactly the same double.
inline std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

// ---------------------------------------------------------------------------
// Recording CSV + sidecar

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".meta");
}

// Reads `key=value` lines. Blank lines and lines starting with '#' are ignored.
inline std::vector<std::pair<std::string, std::string>> read_key_values(
    const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::InvalidConfig, "expected key=value in '" + path.string() + "'");
    out.emplace_back(std::string(detail::trim(t.substr(0, eq))),
                     std::string(detail::trim(t.substr(eq + 1))));
  }
  return out;
}

// Loads a column-per-channel CSV. The sample rate comes from the `<path>.meta`
// sidecar when present, otherwise from `default_rate_hz`.
inline Recording load_recording(const std::filesystem::path& path,
                                std::optional<Index> expected_channels = std::nullopt,
                                double default_rate_hz = kDefaultSampleRateHz) {
  auto in = detail::open_input(path);

  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::NonNumeric, "'" + path.string() + "' has no header row");
  std::vector<std::string> names;
  for (auto cell : detail::split(line)) names.emplace_back(cell);
  const auto n_channels = static_cast<Index>(names.size());
  if (expected_channels && *expected_channels != n_channels)
    throw Error(ErrorCode::ChannelMismatch, "expected " + std::to_string(*expected_channels) +
                                                " channels, found " + std::to_string(n_channels));

  std::vector<double> values;
  std::size_t line_no = 1;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line);
    if (static_cast<Index>(cells.size()) != n_channels)
      throw Error(ErrorCode::ChannelMismatch, path.string() + ":" + std::to_string(line_no) +
                                                  ": expected " + std::to_string(n_channels) +
                                                  " cells, found " + std::to_string(cells.size()));
    for (auto cell : cells) {
      const auto v = detail::parse_double(cell);
      if (!v)
        throw Error(ErrorCode::NonNumeric, path.string() + ":" + std::to_string(line_no) +
                                               ": not a number '" + std::string(cell) + "'");
      if (!std::isfinite(*v))
        throw Error(ErrorCode::NonFiniteSample,
                    path.string() + ":" + std::to_string(line_no) + ": non-finite sample");
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::ShapeMismatch, "'" + path.string() + "' has no samples");

  Recording rec;
  rec.channel_names = std::move(names);
  rec.sample_rate_hz = default_rate_hz;
  rec.samples = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(values.data(), rows, n_channels)
                    .transpose();

  const auto meta = sidecar_path(path);
  if (std::filesystem::exists(meta)) {
    for (const auto& [key, value] : read_key_values(meta)) {
      const auto v = detail::parse_double(value);
      if (key == "sample_rate_hz" || key == "t0_offset_s") {
        if (!v) throw Error(ErrorCode::InvalidConfig, "bad value for " + key + " in sidecar");
        (key == "sample_rate_hz" ? rec.sample_rate_hz : rec.t0_offset_s) = *v;
      }
    }
  }
  validate(rec);
  return rec;
}

inline void save_recording(const Recording& rec, const std::filesystem::path& path) {
  validate(rec);
  auto out = detail::open_output(path);
  for (Index c = 0; c < rec.channels(); ++c) out << (c ? "," : "") << rec.channel_names[c];
  out << '\n';
  for (Index t = 0; t < rec.length(); ++t) {
    for (Index c = 0; c < rec.channels(); ++c)
      out << (c ? "," : "") << format_number(rec.samples(c, t));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing '" + path.string() + "'");

  auto meta = detail::open_output(sidecar_path(path));
  meta << "sample_rate_hz=" << format_number(rec.sample_rate_hz) << '\n'
       << "t0_offset_s=" << format_number(rec.t0_offset_s) << '\n';
}

// ---------------------------------------------------------------------------
// Window schedule

inline Schedule load_schedule(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  Schedule schedule;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line);
    if (line_no == 1 && !cells.empty() && cells[0] == "start_index") continue;
    if (cells.size() != 2)
      throw Error(ErrorCode::NonNumeric,
                  path.string() + ":" + std::to_string(line_no) + ": expected start_index,label");
    const auto start = detail::parse_double(cells[0]);
    if (!start || *start < 0 || std::floor(*start) != *start)
      throw Error(ErrorCode::NonNumeric, path.string() + ":" + std::to_string(line_no) +
                                             ": bad start index '" + std::string(cells[0]) + "'");
    schedule.push_back({static_cast<Index>(*start), parse_label(cells[1])});
  }
  return schedule;
}

inline void save_schedule(const Schedule& schedule, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "start_index,label\n";
  for (const auto& e : schedule) out << e.start_index << ',' << to_string(e.label) << '\n';
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing '" + path.string() + "'");
}

inline std::vector<LabeledWindow> slice_windows(const Recording& rec, const Schedule& schedule,
                                                Index window_len = kDefaultWindowLength) {
  if (window_len < 1) throw Error(ErrorCode::InvalidArgument, "window length must be positive");
  std::vector<LabeledWindow> windows;
  windows.reserve(schedule.size());
  for (const auto& entry : schedule) {
    if (entry.start_index < 0 || entry.start_index + window_len > rec.length())
      throw Error(ErrorCode::OutOfRange, "window at " + std::to_string(entry.start_index) +
                                             " of length " + std::to_string(window_len) +
                                             " exceeds recording length " +
                                             std::to_string(rec.length()));
    windows.push_back({rec.samples.middleCols(entry.start_index, window_len), entry.label});
  }
  return windows;
}

// Seeded shuffle, then the first round(fraction * N) windows train.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction,
                                                 std::uint64_t seed) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "split fraction must lie in (0, 1)");

  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ds.size())));
  Dataset train{{}, fraction}, test{{}, fraction};
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : test).windows.push_back(ds.windows[order[i]]);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Report CSV

inline void write_report(const DenoiseReport& report, const std::filesystem::path& path) {
  if (!report.consistent())
    throw Error(ErrorCode::LengthMismatch, "report columns have inconsistent lengths");
  auto out = detail::open_output(path);
  out << "channel,corr_before,corr_after,snr_db\n";
  for (std::size_t i = 0; i < report.size(); ++i)
    out << report.channel_names[i] << ',' << format_number(report.corr_before[i]) << ','
        << format_number(report.corr_after[i]) << ',' << format_number(report.snr_db[i]) << '\n';
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing '" + path.string() + "'");
}

inline void write_verdicts(const std::vector<ComponentVerdict>& verdicts,
                           const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "component,abs_correlation,selected,scale_factor\n";
  for (const auto& v : verdicts)
    out << v.component_index << ',' << format_number(v.abs_correlation) << ','
        << (v.selected ? 1 : 0) << ',' << format_number(v.scale_factor) << '\n';
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing '" + path.string() + "'");
}

}  // namespace eegclean
