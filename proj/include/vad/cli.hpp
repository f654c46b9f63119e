#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vad/detector.hpp"

namespace vad::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitDivergence = 4 };

// Every pipeline knob. Config files use flat `key = value` lines (with `#`
// comments) and every key can be overridden by `--key value`.
struct RunConfig {
  // preprocessing
  int cadence_seconds = kDefaultCadenceSeconds;
  double sog_epsilon = kDefaultSogEpsilon;
  // detector
  DetectorKind detector = DetectorKind::Lstm;
  int window_length = 13;
  int stride = 1;
  double percentile = kDefaultPercentile;
  double high_cut = kDefaultHighCut;
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
  std::uint64_t seed = 42;
  int tolerance_seconds = kDefaultToleranceSeconds;
  // surrogate
  int max_depth = 5;
  int min_samples_leaf = 1;
  int n_trees = 100;
  double coverage = 0.95;
  // embedding
  double perplexity = 30.0;
  int tsne_iterations = 1000;
  int embed_max_points = 2000;
  // monitoring
  double expected_flag_rate = 0.05;
  double drift_factor = 2.0;
  // synthesis
  std::string scenario = "benchmark";  // benchmark | custom
  std::int64_t duration_seconds = 86400;
  std::string anomalies;  // custom: kind@offset_s+length_s, comma separated
  bool always_active = false;
  // paths
  std::filesystem::path out = "run";
  std::filesystem::path telemetry;
  std::filesystem::path truth;
  std::filesystem::path model;

  std::filesystem::path model_path() const { return model.empty() ? out / "model.json" : model; }
};

// All recognised keys, in echo order.
std::span<const std::string_view> config_keys() noexcept;

// Throws UsageError for unknown keys or unparseable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
std::string get_setting(const RunConfig& config, std::string_view key);
void apply_config_text(RunConfig& config, std::string_view text);

// Throws ParameterError naming the first out-of-range field.
void validate(const RunConfig& config);

// `key = value` lines for every key.
std::string echo_config(const RunConfig& config);

// Subcommands. Each writes its artifacts plus `<name>_report.json` under
// config.out and logs progress to `log`.
void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_detect(const RunConfig& config, std::ostream& log);
void cmd_explain(const RunConfig& config, std::ostream& log);
void cmd_embed(const RunConfig& config, std::ostream& log);
// Reads the reports under config.out and writes report.md there. Returns the
// markdown.
std::string cmd_report(const RunConfig& config, std::ostream& log);

// Flag-rate monitoring rule shared by detect and report.
bool flag_rate_drift(double non_normal_fraction, const RunConfig& config) noexcept;

// Full command line (argv[0] excluded). Maps errors to exit codes.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace vad::cli
