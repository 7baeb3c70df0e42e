#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eegclean/artifact_removal.hpp"
#include "eegclean/classifier.hpp"
#include "eegclean/config.hpp"
#include "eegclean/error.hpp"
#include "eegclean/ica.hpp"
#include "eegclean/metrics.hpp"
#include "eegclean/preprocess.hpp"
#include "eegclean/signal_io.hpp"

namespace eegclean {

// A dataset directory holds one recording and the schedule that slices it.
inline constexpr const char* kDatasetRecording = "eeg.csv";
inline constexpr const char* kDatasetSchedule = "schedule.csv";

inline void save_dataset_dir(const Recording& rec, const Schedule& schedule, const std::filesystem::path& dir) {
  save_recording(rec, dir / kDatasetRecording);
  save_schedule(schedule, dir / kDatasetSchedule);
}

inline Dataset load_dataset_dir(const std::filesystem::path& dir, Index window_len = kDefaultWindowLength,
                                double default_rate_hz = kDefaultSampleRateHz) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::MissingFile, "dataset directory '" + dir.string() + "' not found");
  const auto rec = load_recording(dir / kDatasetRecording, std::nullopt, default_rate_hz);
  const auto schedule = load_schedule(dir / kDatasetSchedule);
  Dataset ds;
  ds.windows = slice_windows(rec, schedule, window_len);
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "schedule in '" + dir.string() + "' selects no windows");
  return ds;
}

inline Recording components_recording(const ComponentSet& cs, double sample_rate_hz, double t0_offset_s) {
  std::vector<std::string> names;
  for (Index k = 0; k < cs.count(); ++k) names.push_back("IC" + std::to_string(k + 1));
  return Recording{std::move(names), sample_rate_hz, cs.components, t0_offset_s};
}

// Picks the single reference channel out of an EOG recording.
inline Recording select_eog_channel(const Recording& eog, const std::string& name) {
  if (eog.channels() == 1 && name.empty()) return eog;
  if (name.empty())
    throw Error(ErrorCode::ChannelMismatch, "EOG recording has " + std::to_string(eog.channels()) +
                                                " channels; name the reference channel");
  const Index c = eog.channel_index(name);
  return Recording{{eog.channel_names[static_cast<std::size_t>(c)]}, eog.sample_rate_hz, eog.samples.row(c),
                   eog.t0_offset_s};
}

// Sync indices for the configured mode, already moved past the marker when
// skip_marker is set.
inline std::pair<Index, Index> sync_indices(const Recording& eeg, const Recording& eog, const SyncConfig& cfg) {
  Index ie = 0, io = 0;
  switch (cfg.mode) {
    case SyncMode::None:
      return {0, 0};
    case SyncMode::Manual:
      ie = cfg.eeg_index;
      io = cfg.eog_index;
      break;
    case SyncMode::Auto: {
      const auto& ce = cfg.eeg_channel.empty() ? eeg.channel_names.front() : cfg.eeg_channel;
      const auto& co = cfg.eog_channel.empty() ? eog.channel_names.front() : cfg.eog_channel;
      const auto r = auto_sync(eeg, ce, eog, co, cfg.pattern);
      ie = r.eeg_start_index;
      io = r.eog_start_index;
      break;
    }
  }
  if (cfg.skip_marker) {
    ie += static_cast<Index>(std::llround(cfg.pattern.duration_s() * eeg.sample_rate_hz));
    io += static_cast<Index>(std::llround(cfg.pattern.duration_s() * eog.sample_rate_hz));
  }
  return {ie, io};
}

struct PipelineResult {
  DenoiseReport report;
  Index eeg_sync_index = 0;
  Index eog_sync_index = 0;
  std::optional<cnn::TrainHistory> history;
  std::vector<std::filesystem::path> written;
};

// sync -> filter -> ICA -> score/decide -> scale -> reconstruct -> report,
// then window/split/train when a schedule is configured. Every intermediate
// lands in cfg.out_dir. Both inputs are read before anything is written.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  if (cfg.eeg.empty() || cfg.eog.empty())
    throw Error(ErrorCode::InvalidConfig, "pipeline needs both an EEG and an EOG input");
  const auto note = [&](const std::string& msg) {
    if (log) *log << msg << '\n';
  };

  const Recording eeg_in = load_recording(cfg.eeg, std::nullopt, cfg.sample_rate_hz);
  const Recording eog_in = select_eog_channel(load_recording(cfg.eog, std::nullopt, cfg.sample_rate_hz),
                                              cfg.eog_channel);
  std::optional<Schedule> schedule;
  if (!cfg.schedule.empty()) schedule = load_schedule(cfg.schedule);

  PipelineResult result;
  const auto out = [&](const char* name) {
    result.written.push_back(cfg.out_dir / name);
    return result.written.back();
  };

  const auto [ie, io] = sync_indices(eeg_in, eog_in, cfg.sync);
  auto [eeg, eog] = synchronize(eeg_in, eog_in, ie, io);
  result.eeg_sync_index = ie;
  result.eog_sync_index = io;
  note("sync: eeg from " + std::to_string(ie) + ", eog from " + std::to_string(io) + ", " +
       std::to_string(eeg.length()) + " common samples");
  save_recording(eeg, out("eeg_synced.csv"));
  save_recording(eog, out("eog_synced.csv"));

  if (cfg.filter_enabled) {
    const auto coeffs = design_butterworth(cfg.filter, eeg.sample_rate_hz);
    eeg = apply_filter(eeg, coeffs);
    eog = apply_filter(eog, coeffs);
    save_recording(eeg, out("eeg_filtered.csv"));
    save_recording(eog, out("eog_filtered.csv"));
    note("filter: order " + std::to_string(cfg.filter.order) + " bandpass " + format_number(cfg.filter.low_cut_hz) +
         "-" + format_number(cfg.filter.high_cut_hz) + " Hz");
  }

  auto dn = denoise(eeg, eog, cfg.denoise, cfg.ica);
  save_separation_model(dn.model, out("ica_model.json"));
  save_recording(components_recording(dn.components, eeg.sample_rate_hz, eeg.t0_offset_s), out("components.csv"));
  write_verdicts(dn.report.verdicts, out("verdicts.csv"));
  save_recording(dn.cleaned, out("eeg_clean.csv"));
  write_report(dn.report, out("report.csv"));
  std::size_t selected = 0;
  for (const auto& v : dn.report.verdicts) selected += v.selected ? 1 : 0;
  note("denoise: " + std::to_string(selected) + " of " + std::to_string(dn.report.verdicts.size()) +
       " components attenuated" + (dn.model.converged ? "" : " (ICA did not converge)"));
  result.report = dn.report;

  if (schedule && cfg.train_enabled) {
    Dataset ds;
    ds.windows = slice_windows(dn.cleaned, *schedule, cfg.window_len);
    ds.split_fraction = cfg.split_fraction;
    auto [train_set, test_set] = split_dataset(ds, cfg.split_fraction, cfg.train.seed);
    cnn::CnnArchitecture arch;
    arch.in_channels = dn.cleaned.channels();
    arch.input_length = cfg.window_len;
    cnn::Network<float> net(arch, cfg.train.seed);
    auto history = cnn::train(net, train_set, test_set, cfg.train, [&](const cnn::EpochStats& s) {
      note("train: epoch " + std::to_string(s.epoch) + " loss " + format_number(s.loss) + " train acc " +
           format_number(s.train_accuracy) + " test acc " + format_number(s.test_accuracy));
    });
    cnn::write_history(history, out("loss_history.csv"));
    if (history.diverged) throw Error(ErrorCode::NonFiniteLoss, "training diverged: " + history.failure);
    cnn::save_model(net, out("model.json"));
    result.history = std::move(history);
  }
  return result;
}

}  // namespace eegclean
