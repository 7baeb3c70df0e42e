#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "eegclean/signal_io.hpp"
#include "test_util.hpp"

using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
};

// Runs the CLI through the shell with stdout captured to a file.
Run cli(const std::string& args, const TempDir& dir, const std::string& env = "") {
  const auto out = dir / "stdout.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" EEGCLEAN_CLI_PATH "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_text(out)};
}

}  // namespace

TEST(Cli, HelpOnEverySubcommand) {
  TempDir dir;
  EXPECT_EQ(cli("--help", dir).code, 0);
  for (const char* sub : {"synth", "sync", "filter", "ica", "denoise", "metrics", "train", "predict", "pipeline"}) {
    const auto r = cli(std::string(sub) + " --help", dir);
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << sub;
  }
}

TEST(Cli, ParseErrorsAreConfigErrors) {
  TempDir dir;
  EXPECT_EQ(cli("", dir).code, 4);
  EXPECT_EQ(cli("filter --bogus 1", dir).code, 4);
  EXPECT_EQ(cli("sync --eeg a --eog b --out c --eeg-idx 3", dir).code, 4);
  EXPECT_EQ(cli("sync --eeg a --eog b --out c --auto --eeg-idx 3 --eog-idx 4", dir).code, 4);
}

TEST(Cli, MissingInputIsInputError) {
  TempDir dir;
  EXPECT_EQ(cli("filter --in /nonexistent/x.csv --out " + (dir / "y.csv").string(), dir).code, 2);
  const auto err = testutil::read_text(dir / "stderr.txt");
  EXPECT_NE(err.find("MissingFile"), std::string::npos) << err;
}

TEST(Cli, BadConfigFromFlagAndEnvironment) {
  TempDir dir;
  testutil::write_text(dir / "bad.ini", "[filter]\nordr = 3\n");
  testutil::write_text(dir / "x.csv", "a\n1\n2\n3\n");
  const std::string args = "filter --in " + (dir / "x.csv").string() + " --out " + (dir / "y.csv").string();
  EXPECT_EQ(cli("--config " + (dir / "bad.ini").string() + " " + args, dir).code, 4);
  EXPECT_EQ(cli(args, dir, "EEGCLEAN_CONFIG=" + (dir / "bad.ini").string()).code, 4);
  EXPECT_EQ(cli(args, dir, "EEGCLEAN_CONFIG=" + (dir / "missing.ini").string()).code, 4);
}

TEST(Cli, EnvironmentConfigIsApplied) {
  TempDir dir;
  testutil::write_text(dir / "c.ini", "[filter]\nhigh_hz = 80\n");
  testutil::write_text(dir / "x.csv", "a\n1\n2\n3\n");
  const std::string args = "filter --in " + (dir / "x.csv").string() + " --out " + (dir / "y.csv").string();
  // 80 Hz is above Nyquist at 128 Hz: the environment config must have been read.
  EXPECT_EQ(cli(args, dir, "EEGCLEAN_CONFIG=" + (dir / "c.ini").string()).code, 4);
  EXPECT_EQ(cli(args + " --high 30", dir, "EEGCLEAN_CONFIG=" + (dir / "c.ini").string()).code, 0);
}

TEST(Cli, SynthDenoiseMetricsRoundTrip) {
  TempDir dir;
  const auto d = dir.path().string();
  ASSERT_EQ(cli("synth --out " + d + "/s --seed 3", dir).code, 0);
  ASSERT_EQ(cli("denoise --eeg " + d + "/s/eeg.csv --eog " + d + "/s/eog.csv --report " + d + "/r.csv --out " + d +
                    "/clean.csv --dump-components " + d + "/dump",
                dir)
                .code,
            0);
  const auto report = testutil::read_text(dir / "r.csv");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 15);
  EXPECT_TRUE(std::filesystem::exists(dir / "dump" / "components.csv"));
  const auto r = cli("metrics --input " + d + "/s/eeg.csv --cleaned " + d + "/clean.csv --eog " + d +
                         "/s/eog.csv --report " + d + "/r2.csv",
                     dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(testutil::read_text(dir / "r2.csv"), report);
  EXPECT_NE(r.out.find("AF3"), std::string::npos);
}

TEST(Cli, SyncFilterIcaChain) {
  TempDir dir;
  const auto d = dir.path().string();
  ASSERT_EQ(cli("synth --out " + d + "/s --seed 4 --pulse", dir).code, 0);
  const auto s = cli("sync --eeg " + d + "/s/eeg.csv --eog " + d + "/s/eog.csv --out " + d + "/sync --auto", dir);
  ASSERT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("eeg_index="), std::string::npos);
  ASSERT_EQ(cli("filter --in " + d + "/sync/eeg_synced.csv --out " + d + "/f.csv", dir).code, 0);
  const auto i = cli("ica --in " + d + "/f.csv --model " + d + "/m.json --out-components " + d + "/c.csv", dir);
  EXPECT_EQ(i.code, 0);
  EXPECT_NE(i.out.find("components=14"), std::string::npos);
  const auto synced = eegclean::load_recording(dir / "sync" / "eeg_synced.csv");
  const auto truth = eegclean::load_recording(dir / "s" / "eeg.csv");
  EXPECT_LT(synced.length(), truth.length());
}

TEST(Cli, RankDeficientIsNumericalError) {
  TempDir dir;
  std::string csv = "a,b\n";
  for (int t = 0; t < 100; ++t) csv += std::to_string(t % 7) + "," + std::to_string(t % 7) + "\n";
  testutil::write_text(dir / "x.csv", csv);
  EXPECT_EQ(cli("ica --in " + (dir / "x.csv").string() + " --model " + (dir / "m.json").string(), dir).code, 3);
}

TEST(Cli, TrainAndPredict) {
  TempDir dir;
  const auto d = dir.path().string();
  ASSERT_EQ(cli("synth --kind labeled --out " + d + "/data --seed 2", dir).code, 0);
  ASSERT_EQ(cli("train --data " + d + "/data --out " + d + "/model.json --history " + d + "/h.csv --epochs 2", dir).code,
            0);
  const auto h = testutil::read_text(dir / "h.csv");
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 3);
  const auto rec = eegclean::load_recording(dir / "data" / "eeg.csv");
  eegclean::Recording w{rec.channel_names, rec.sample_rate_hz, rec.samples.leftCols(640), 0.0};
  eegclean::save_recording(w, dir / "w.csv");
  const auto p = cli("predict --model " + d + "/model.json --window " + d + "/w.csv", dir);
  EXPECT_EQ(p.code, 0);
  EXPECT_NO_THROW(eegclean::parse_label(p.out.substr(0, p.out.find('\n'))));
  eegclean::Recording short_w{rec.channel_names, rec.sample_rate_hz, rec.samples.leftCols(641), 0.0};
  eegclean::save_recording(short_w, dir / "w641.csv");
  EXPECT_EQ(cli("predict --model " + d + "/model.json --window " + d + "/w641.csv", dir).code, 2);
}

TEST(Cli, PipelineMissingEog) {
  TempDir dir;
  const auto d = dir.path().string();
  ASSERT_EQ(cli("synth --out " + d + "/s --seed 5 --pulse", dir).code, 0);
  EXPECT_EQ(cli("pipeline --eeg " + d + "/s/eeg.csv --eog " + d + "/nope.csv --out-dir " + d + "/out", dir).code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "report.csv"));
  EXPECT_EQ(cli("pipeline --eeg " + d + "/s/eeg.csv --eog " + d + "/s/eog.csv --out-dir " + d + "/out --no-train", dir)
                .code,
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "report.csv"));
}
