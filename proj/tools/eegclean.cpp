#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "eegclean/artifact_removal.hpp"
#include "eegclean/classifier.hpp"
#include "eegclean/config.hpp"
#include "eegclean/ica.hpp"
#include "eegclean/metrics.hpp"
#include "eegclean/pipeline.hpp"
#include "eegclean/preprocess.hpp"
#include "eegclean/signal_io.hpp"
#include "eegclean/synth.hpp"

namespace fs = std::filesystem;
using namespace eegclean;

namespace {

constexpr const char* kConfigEnv = "EEGCLEAN_CONFIG";

// Shared config: --config, else $EEGCLEAN_CONFIG, else built-in defaults.
PipelineConfig base_config(const std::string& flag_path) {
  std::string path = flag_path;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnv)) path = env;
  if (path.empty()) return {};
  return load_pipeline_config(path);
}

template <typename T>
void override_with(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

void print_report(const DenoiseReport& r) {
  std::cout << std::left << std::setw(8) << "channel" << std::right << std::setw(13) << "corr_before"
            << std::setw(13) << "corr_after" << std::setw(11) << "snr_db" << '\n';
  std::cout << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < r.size(); ++i)
    std::cout << std::left << std::setw(8) << r.channel_names[i] << std::right << std::setw(13) << r.corr_before[i]
              << std::setw(13) << r.corr_after[i] << std::setw(11) << std::setprecision(2) << r.snr_db[i]
              << std::setprecision(4) << '\n';
  std::cout.unsetf(std::ios::floatfield);
}

Recording eog_reference(const fs::path& path, const std::string& channel, double rate) {
  return select_eog_channel(load_recording(path, std::nullopt, rate), channel);
}

void write_matrix_csv(const Eigen::MatrixXd& m, const fs::path& path) {
  auto out = eegclean::detail::open_output(path);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_number(m(r, c));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Unwritable, "failed writing '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG ocular-artifact removal and window classification"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, std::string("Pipeline config (INI); defaults to $") + kConfigEnv);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario or labelled window set");
  std::string synth_spec;
  fs::path synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::string> synth_kind;
  bool synth_pulse = false;
  synth->add_option("--spec", synth_spec, "Synthesis config (INI)");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--kind", synth_kind, "scenario or labeled");
  synth->add_flag("--pulse", synth_pulse, "Prefix both recordings with a sync marker");

  // sync
  auto* sync = app.add_subcommand("sync", "Align EEG and EOG recordings at their sync markers");
  fs::path sync_eeg, sync_eog, sync_out;
  bool sync_auto = false, sync_keep_marker = false;
  std::optional<Index> sync_eeg_idx, sync_eog_idx;
  std::optional<std::string> sync_eeg_ch, sync_eog_ch;
  sync->add_option("--eeg", sync_eeg, "EEG CSV")->required();
  sync->add_option("--eog", sync_eog, "EOG CSV")->required();
  sync->add_option("--out", sync_out, "Output directory")->required();
  auto* auto_flag = sync->add_flag("--auto", sync_auto, "Locate the markers automatically");
  auto* ie_opt = sync->add_option("--eeg-idx", sync_eeg_idx, "EEG sample index of the marker");
  auto* io_opt = sync->add_option("--eog-idx", sync_eog_idx, "EOG sample index of the marker");
  ie_opt->needs(io_opt);
  io_opt->needs(ie_opt);
  auto_flag->excludes(ie_opt)->excludes(io_opt);
  sync->add_option("--eeg-channel", sync_eeg_ch, "EEG channel carrying the marker");
  sync->add_option("--eog-channel", sync_eog_ch, "EOG channel carrying the marker");
  sync->add_flag("--keep-marker", sync_keep_marker, "Start at the marker instead of after it");

  // filter
  auto* filt = app.add_subcommand("filter", "Butterworth bandpass every channel");
  fs::path filt_in, filt_out;
  std::optional<int> filt_order;
  std::optional<double> filt_low, filt_high;
  filt->add_option("--in", filt_in, "Input CSV")->required();
  filt->add_option("--out", filt_out, "Output CSV")->required();
  filt->add_option("--order", filt_order, "Filter order (default 5)");
  filt->add_option("--low", filt_low, "Low cut-off in Hz (default 0.1)");
  filt->add_option("--high", filt_high, "High cut-off in Hz (default 40)");

  // ica
  auto* ica = app.add_subcommand("ica", "Fit FastICA and write the model and components");
  fs::path ica_in, ica_model, ica_components;
  std::optional<Index> ica_n;
  std::optional<std::uint64_t> ica_seed;
  std::optional<int> ica_max_iter;
  std::optional<double> ica_tol;
  ica->add_option("--in", ica_in, "EEG CSV")->required();
  ica->add_option("--model", ica_model, "Output model JSON")->required();
  ica->add_option("--out-components", ica_components, "Output components CSV");
  ica->add_option("--components", ica_n, "Number of components (0 = one per channel)");
  ica->add_option("--seed", ica_seed, "Random seed");
  ica->add_option("--max-iter", ica_max_iter, "Iteration cap");
  ica->add_option("--tol", ica_tol, "Convergence tolerance");

  // denoise
  auto* den = app.add_subcommand("denoise", "Remove EOG-correlated components");
  fs::path den_eeg, den_eog, den_report, den_out, den_dump;
  std::optional<double> den_threshold;
  std::optional<std::uint64_t> den_seed;
  std::optional<Index> den_components;
  std::string den_eog_ch;
  den->add_option("--eeg", den_eeg, "EEG CSV")->required();
  den->add_option("--eog", den_eog, "EOG CSV")->required();
  den->add_option("--report", den_report, "Report CSV")->required();
  den->add_option("--out", den_out, "Cleaned EEG CSV");
  den->add_option("--threshold", den_threshold, "Correlation threshold (default 0.1)");
  den->add_option("--seed", den_seed, "ICA seed");
  den->add_option("--components", den_components, "Number of components");
  den->add_option("--eog-channel", den_eog_ch, "EOG reference channel");
  den->add_option("--dump-components", den_dump, "Write components, scores and model here");

  // metrics
  auto* met = app.add_subcommand("metrics", "Correlation and SNR table for a cleaned recording");
  fs::path met_in, met_clean, met_eog, met_report;
  std::string met_eog_ch;
  met->add_option("--input", met_in, "Uncleaned EEG CSV")->required();
  met->add_option("--cleaned", met_clean, "Cleaned EEG CSV")->required();
  met->add_option("--eog", met_eog, "EOG CSV")->required();
  met->add_option("--eog-channel", met_eog_ch, "EOG reference channel");
  met->add_option("--report", met_report, "Report CSV");

  // train
  auto* tr = app.add_subcommand("train", "Train the window classifier");
  fs::path tr_data, tr_out, tr_history;
  std::optional<Index> tr_epochs, tr_batch, tr_window;
  std::optional<std::uint64_t> tr_seed;
  std::optional<double> tr_lr, tr_split;
  std::optional<std::string> tr_opt;
  tr->add_option("--data", tr_data, "Dataset directory (eeg.csv + schedule.csv)")->required();
  tr->add_option("--out", tr_out, "Output model JSON")->required();
  tr->add_option("--history", tr_history, "Loss history CSV");
  tr->add_option("--epochs", tr_epochs, "Epochs");
  tr->add_option("--seed", tr_seed, "Seed for init, shuffling and the split");
  tr->add_option("--lr", tr_lr, "Learning rate");
  tr->add_option("--batch-size", tr_batch, "Batch size");
  tr->add_option("--optimizer", tr_opt, "adam or sgd-momentum");
  tr->add_option("--window-len", tr_window, "Window length in samples");
  tr->add_option("--split", tr_split, "Training fraction");

  // predict
  auto* pr = app.add_subcommand("predict", "Label one window");
  fs::path pr_model, pr_window;
  pr->add_option("--model", pr_model, "Model JSON")->required();
  pr->add_option("--window", pr_window, "Window CSV")->required();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run sync, filter, denoise, report and optional training");
  std::optional<fs::path> pl_eeg, pl_eog, pl_schedule, pl_out;
  std::optional<std::uint64_t> pl_seed;
  std::optional<double> pl_threshold;
  std::optional<Index> pl_epochs;
  std::optional<std::string> pl_sync;
  bool pl_no_train = false;
  pipe->add_option("--eeg", pl_eeg, "EEG CSV");
  pipe->add_option("--eog", pl_eog, "EOG CSV");
  pipe->add_option("--schedule", pl_schedule, "Window schedule CSV");
  pipe->add_option("--out-dir", pl_out, "Output directory");
  pipe->add_option("--seed", pl_seed, "Seed for ICA, split and training");
  pipe->add_option("--threshold", pl_threshold, "Correlation threshold");
  pipe->add_option("--epochs", pl_epochs, "Training epochs");
  pipe->add_option("--sync", pl_sync, "auto, manual or none");
  pipe->add_flag("--no-train", pl_no_train, "Skip windowing and training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code_for(ErrorCode::InvalidConfig);
  }

  try {
    if (synth->parsed()) {
      SynthConfig sc = synth_spec.empty() ? SynthConfig{} : load_synth_config(synth_spec);
      if (synth_seed) sc.scenario.seed = *synth_seed;
      if (synth_kind) {
        if (*synth_kind == "labeled") sc.kind = SynthConfig::Kind::Labeled;
        else if (*synth_kind == "scenario") sc.kind = SynthConfig::Kind::Scenario;
        else throw Error(ErrorCode::InvalidConfig, "--kind must be scenario or labeled");
      }
      if (synth_pulse) sc.with_pulse = true;
      if (sc.kind == SynthConfig::Kind::Labeled) {
        const auto ds = make_labeled_set(sc.per_class, sc.window_len, sc.scenario.seed, sc.scenario.n_channels,
                                         sc.scenario.sample_rate_hz);
        const auto [rec, schedule] = dataset_to_recording(ds, sc.scenario.sample_rate_hz);
        save_dataset_dir(rec, schedule, synth_out);
        std::cout << "wrote " << ds.size() << " labelled windows to " << synth_out.string() << '\n';
        return 0;
      }
      if (sc.with_pulse) sc.scenario.pulse = PulseInjection{};
      const auto gt = make_scenario(sc.scenario);
      save_recording(gt.eeg_raw ? *gt.eeg_raw : gt.contaminated, synth_out / "eeg.csv");
      save_recording(gt.eog_raw ? *gt.eog_raw : gt.eog_recording, synth_out / "eog.csv");
      save_recording(gt.clean, synth_out / "eeg_clean_truth.csv");
      write_matrix_csv(gt.mixing, synth_out / "mixing.csv");
      write_matrix_csv(gt.blink_weights, synth_out / "blink_weights.csv");
      if (gt.labels) save_schedule(*gt.labels, synth_out / "schedule.csv");
      std::cout << "wrote scenario (" << gt.contaminated.channels() << " channels, " << gt.contaminated.length()
                << " samples) to " << synth_out.string() << '\n';
      return 0;
    }

    PipelineConfig cfg = base_config(config_path);

    if (sync->parsed()) {
      if (!sync_auto && !sync_eeg_idx && cfg.sync.mode == SyncMode::Auto) sync_auto = true;
      if (sync_eeg_idx) {
        cfg.sync.mode = SyncMode::Manual;
        cfg.sync.eeg_index = *sync_eeg_idx;
        cfg.sync.eog_index = *sync_eog_idx;
      } else if (sync_auto) {
        cfg.sync.mode = SyncMode::Auto;
      }
      override_with(cfg.sync.eeg_channel, sync_eeg_ch);
      override_with(cfg.sync.eog_channel, sync_eog_ch);
      if (sync_keep_marker) cfg.sync.skip_marker = false;
      const auto eeg = load_recording(sync_eeg, std::nullopt, cfg.sample_rate_hz);
      const auto eog = load_recording(sync_eog, std::nullopt, cfg.sample_rate_hz);
      const auto [ie, io] = sync_indices(eeg, eog, cfg.sync);
      const auto [a, b] = synchronize(eeg, eog, ie, io);
      save_recording(a, sync_out / "eeg_synced.csv");
      save_recording(b, sync_out / "eog_synced.csv");
      std::cout << "eeg_index=" << ie << " eog_index=" << io << " common_length=" << a.length() << '\n';
      return 0;
    }

    if (filt->parsed()) {
      override_with(cfg.filter.order, filt_order);
      override_with(cfg.filter.low_cut_hz, filt_low);
      override_with(cfg.filter.high_cut_hz, filt_high);
      cfg.filter_enabled = true;
      cfg.validate();
      const auto rec = load_recording(filt_in, std::nullopt, cfg.sample_rate_hz);
      save_recording(apply_filter(rec, design_butterworth(cfg.filter, rec.sample_rate_hz)), filt_out);
      return 0;
    }

    if (ica->parsed()) {
      override_with(cfg.ica.n_components, ica_n);
      override_with(cfg.ica.seed, ica_seed);
      override_with(cfg.ica.max_iter, ica_max_iter);
      override_with(cfg.ica.tol, ica_tol);
      cfg.validate();
      const auto rec = load_recording(ica_in, std::nullopt, cfg.sample_rate_hz);
      const auto [model, comps] = fit_ica(rec, cfg.ica);
      save_separation_model(model, ica_model);
      if (!ica_components.empty())
        save_recording(components_recording(comps, rec.sample_rate_hz, rec.t0_offset_s), ica_components);
      std::cout << "components=" << model.n_components() << " iterations=" << model.iterations
                << " converged=" << (model.converged ? "yes" : "no") << '\n';
      return 0;
    }

    if (den->parsed()) {
      override_with(cfg.denoise.threshold, den_threshold);
      override_with(cfg.ica.seed, den_seed);
      override_with(cfg.ica.n_components, den_components);
      cfg.validate();
      if (den_eog_ch.empty()) den_eog_ch = cfg.eog_channel;
      const auto eeg = load_recording(den_eeg, std::nullopt, cfg.sample_rate_hz);
      const auto eog = eog_reference(den_eog, den_eog_ch, cfg.sample_rate_hz);
      const auto r = denoise(eeg, eog, cfg.denoise, cfg.ica);
      write_report(r.report, den_report);
      if (!den_out.empty()) save_recording(r.cleaned, den_out);
      if (!den_dump.empty()) {
        save_recording(components_recording(r.components, eeg.sample_rate_hz, eeg.t0_offset_s),
                       den_dump / "components.csv");
        write_verdicts(r.report.verdicts, den_dump / "verdicts.csv");
        save_separation_model(r.model, den_dump / "ica_model.json");
      }
      print_report(r.report);
      return 0;
    }

    if (met->parsed()) {
      if (met_eog_ch.empty()) met_eog_ch = cfg.eog_channel;
      const auto input = load_recording(met_in, std::nullopt, cfg.sample_rate_hz);
      const auto cleaned = load_recording(met_clean, std::nullopt, cfg.sample_rate_hz);
      const auto eog = eog_reference(met_eog, met_eog_ch, cfg.sample_rate_hz);
      const auto report = compute_report(input, cleaned, eog);
      if (!met_report.empty()) write_report(report, met_report);
      print_report(report);
      return 0;
    }

    if (tr->parsed()) {
      override_with(cfg.train.epochs, tr_epochs);
      override_with(cfg.train.batch_size, tr_batch);
      override_with(cfg.train.seed, tr_seed);
      override_with(cfg.train.learning_rate, tr_lr);
      override_with(cfg.window_len, tr_window);
      override_with(cfg.split_fraction, tr_split);
      if (tr_opt) cfg.train.optimizer = cnn::parse_optimizer(*tr_opt);
      cfg.validate();
      const auto ds = load_dataset_dir(tr_data, cfg.window_len, cfg.sample_rate_hz);
      const auto [train_set, test_set] = split_dataset(ds, cfg.split_fraction, cfg.train.seed);
      cnn::CnnArchitecture arch;
      arch.in_channels = ds.windows.front().samples.rows();
      arch.input_length = cfg.window_len;
      cnn::Network<float> net(arch, cfg.train.seed);
      const auto history = cnn::train(net, train_set, test_set, cfg.train, [](const cnn::EpochStats& s) {
        std::cout << "epoch " << s.epoch << " loss " << format_number(s.loss) << " train_acc "
                  << format_number(s.train_accuracy) << " test_acc " << format_number(s.test_accuracy) << '\n';
      });
      if (!tr_history.empty()) cnn::write_history(history, tr_history);
      if (history.diverged) throw Error(ErrorCode::NonFiniteLoss, "training diverged: " + history.failure);
      cnn::save_model(net, tr_out);
      return 0;
    }

    if (pr->parsed()) {
      auto net = cnn::load_model<float>(pr_model);
      const auto window = load_recording(pr_window, std::nullopt, cfg.sample_rate_hz);
      const auto probs = cnn::predict_proba(net, {&window.samples});
      const auto label = cnn::argmax_label(probs.col(0));
      std::cout << to_string(label) << '\n';
      for (std::size_t i = 0; i < kNumLabels; ++i)
        std::cout << "  " << to_string(label_from_index(i)) << ' ' << format_number(probs(static_cast<Index>(i), 0))
                  << '\n';
      return 0;
    }

    if (pipe->parsed()) {
      override_with(cfg.eeg, pl_eeg);
      override_with(cfg.eog, pl_eog);
      override_with(cfg.schedule, pl_schedule);
      override_with(cfg.out_dir, pl_out);
      override_with(cfg.denoise.threshold, pl_threshold);
      override_with(cfg.train.epochs, pl_epochs);
      if (pl_seed) cfg.ica.seed = cfg.train.seed = *pl_seed;
      if (pl_sync) cfg.sync.mode = parse_sync_mode(*pl_sync);
      if (pl_no_train) cfg.train_enabled = false;
      const auto result = run_pipeline(cfg, &std::cerr);
      print_report(result.report);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "eegclean: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "eegclean: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
