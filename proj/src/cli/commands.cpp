#include <algorithm>
#include <cstdio>
#include <ostream>

#include "run_report.hpp"
#include "vad/embed.hpp"
#include "vad/errors.hpp"
#include "vad/model_io.hpp"
#include "vad/rng.hpp"
#include "vad/surrogate.hpp"
#include "vad/synth.hpp"

namespace vad::cli {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Prepared {
  FrameSeries series;
  std::size_t records = 0;
  std::size_t resampled = 0;
};

Prepared prepare(const RunConfig& config) {
  if (config.telemetry.empty()) throw UsageError("no telemetry file given (use --telemetry PATH)");
  Prepared p;
  const auto records = parse_telemetry(read_text_file(config.telemetry));
  p.records = records.size();
  const FrameSeries resampled = resample_mean(records, config.cadence_seconds);
  p.resampled = resampled.size();
  p.series = filter_inactive(resampled, config.sog_epsilon);
  return p;
}

Json data_section(const Prepared& p) {
  Json j;
  j["records"] = p.records;
  j["frames_resampled"] = p.resampled;
  j["frames_kept"] = p.series.size();
  j["frames_dropped"] = p.resampled - p.series.size();
  return j;
}

std::array<std::size_t, kNumLabels> label_counts(std::span<const AnomalyVerdict> vs) {
  std::array<std::size_t, kNumLabels> c{};
  for (const auto& v : vs) ++c[static_cast<std::size_t>(v.label)];
  return c;
}

Json counts_json(const std::array<std::size_t, kNumLabels>& c) {
  Json j;
  for (std::size_t k = 0; k < kNumLabels; ++k) j[std::string(label_name(static_cast<Label>(k)))] = c[k];
  return j;
}

Json thresholds_json(const Thresholds& t) {
  Json j;
  j["tau"] = t.tau;
  j["high_cut"] = t.high_cut;
  return j;
}

std::vector<AnomalyWindow> parse_anomalies(std::string_view text) {
  std::vector<AnomalyWindow> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const std::string item(text.substr(pos, comma - pos));
    pos = comma + 1;
    if (item.empty()) continue;
    const auto at = item.find('@');
    const auto plus = item.find('+', at == std::string::npos ? 0 : at);
    if (at == std::string::npos || plus == std::string::npos) {
      throw UsageError("anomaly '" + item + "' must look like kind@offset_seconds+length_seconds");
    }
    AnomalyWindow w;
    const std::string kind = item.substr(0, at);
    if (kind == anomaly_kind_name(AnomalyKind::PropellerFailure)) {
      w.kind = AnomalyKind::PropellerFailure;
    } else if (kind == anomaly_kind_name(AnomalyKind::StressManeuver)) {
      w.kind = AnomalyKind::StressManeuver;
    } else {
      throw UsageError("unknown anomaly kind '" + kind + "'");
    }
    try {
      std::size_t used = 0;
      const std::string offset = item.substr(at + 1, plus - at - 1);
      const std::string length = item.substr(plus + 1);
      w.start_offset_seconds = std::stoll(offset, &used);
      if (used != offset.size()) throw std::invalid_argument(offset);
      w.length_seconds = std::stoll(length, &used);
      if (used != length.size()) throw std::invalid_argument(length);
    } catch (const std::logic_error&) {
      throw UsageError("anomaly '" + item + "' has a malformed offset or length");
    }
    out.push_back(w);
  }
  return out;
}

Json scenario_json(const ScenarioSpec& spec, const LabeledSeries& data) {
  Json j;
  j["start"] = format_timestamp(spec.start);
  j["duration_seconds"] = spec.duration_seconds;
  j["seed"] = spec.seed;
  j["frames"] = data.series.size();
  j["active_frames"] = std::count_if(data.series.frames.begin(), data.series.frames.end(), [](const SignalFrame& f) {
    return f[Signal::PortBattV].has_value() || f[Signal::StbdBattV].has_value();
  });
  j["anomalous_frames"] = std::count(data.truth.begin(), data.truth.end(), true);
  Json windows = Json::array();
  for (const auto& w : spec.anomaly_windows) {
    windows.push_back({{"kind", anomaly_kind_name(w.kind)},
                       {"start", format_timestamp(spec.start + std::chrono::seconds{w.start_offset_seconds})},
                       {"length_seconds", w.length_seconds}});
  }
  j["anomaly_windows"] = windows;
  return j;
}

ModelParams load_configured_model(const RunConfig& config) {
  const auto path = config.model_path();
  if (!std::filesystem::exists(path)) throw DataError("model file '" + path.string() + "' does not exist");
  return load_model(path);
}

struct Scored {
  Prepared data;
  ModelParams model;
  std::vector<AnomalyVerdict> verdicts;
};

Scored score_telemetry(const RunConfig& config, std::ostream& log) {
  Scored s;
  s.model = load_configured_model(config);
  s.data = prepare(config);
  s.verdicts = verdicts(s.model, s.data.series);
  log << "scored " << s.verdicts.size() << " points with the " << detector_kind_name(s.model.kind())
      << " detector (tau " << fixed(s.model.thresholds.tau, 6) << ")\n";
  return s;
}

}  // namespace

void cmd_synth(const RunConfig& config, std::ostream& log) {
  RunReport report("synth", config);
  auto emit = [&](const ScenarioSpec& spec, const std::filesystem::path& telemetry, const std::filesystem::path& truth,
                  std::string_view name) {
    validate_windows(spec);
    const LabeledSeries data = generate_scenario(spec);
    report.write(telemetry, format_telemetry(data.series));
    report.write(truth, format_truth(data));
    Json& j = report.section("scenarios")[std::string(name)];
    j = scenario_json(spec, data);
    j["telemetry"] = manifest_name(telemetry, config.out);
    j["truth"] = manifest_name(truth, config.out);
    log << name << ": " << data.series.size() << " frames, " << j["anomalous_frames"].get<long long>()
        << " anomalous -> " << telemetry.generic_string() << "\n";
  };

  if (config.scenario == "benchmark") {
    Benchmark b = benchmark_scenarios(config.seed + seed_offset::kSynth);
    b.train.cadence_seconds = b.test.cadence_seconds = config.cadence_seconds;
    emit(b.train, config.out / "train_telemetry.csv", config.out / "train_truth.csv", "train");
    emit(b.test, config.out / "test_telemetry.csv", config.out / "test_truth.csv", "test");
  } else {
    ScenarioSpec spec;
    spec.duration_seconds = config.duration_seconds;
    spec.seed = config.seed + seed_offset::kSynth;
    spec.cadence_seconds = config.cadence_seconds;
    spec.schedule.always_active = config.always_active;
    spec.anomaly_windows = parse_anomalies(config.anomalies);
    emit(spec, config.telemetry.empty() ? config.out / "telemetry.csv" : config.telemetry,
         config.truth.empty() ? config.out / "truth.csv" : config.truth, "custom");
  }
  report.finish();
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  RunReport report("train", config);
  const Prepared data = prepare(config);
  log << "preprocessed " << data.records << " records into " << data.series.size() << " active frames ("
      << data.resampled - data.series.size() << " dropped)\n";

  DetectorTrainOptions options;
  options.kind = config.detector;
  options.lstm.sequence_length = config.window_length;
  options.lstm.stride = config.stride;
  options.train.epochs = config.epochs;
  options.train.batch_size = config.batch_size;
  options.train.learning_rate = config.learning_rate;
  options.train.seed = config.seed;
  options.percentile = config.percentile;
  options.high_cut = config.high_cut;
  options.validation_fraction = config.validation_fraction;

  const DetectorTrainOutcome outcome = train_detector(data.series, options);
  const auto& history = outcome.history;
  for (std::size_t e = 0; e < history.loss_history.size(); ++e) {
    log << "epoch " << e + 1 << "/" << history.loss_history.size() << " loss " << fixed(history.loss_history[e], 6);
    if (e < history.validation_history.size()) log << " val " << fixed(history.validation_history[e], 6);
    log << "\n";
  }
  log << "tau " << fixed(outcome.model.thresholds.tau, 6) << " (p" << format_double(config.percentile)
      << " of " << outcome.train_scores.size() << " training scores)\n";
  for (const auto& w : outcome.warnings) report.warn(w, log);

  report.write(config.model_path(), serialize_model(outcome.model));

  Json& d = report.section("data");
  d = data_section(data);
  d["train_rows"] = outcome.train_rows;
  d["validation_rows"] = outcome.validation_rows;
  Json& t = report.section("training");
  t["detector"] = detector_kind_name(config.detector);
  t["loss_history"] = history.loss_history;
  t["validation_history"] = history.validation_history;
  t["final_loss"] = outcome.model.training.final_loss;
  Json& c = report.section("calibration");
  c["percentile"] = config.percentile;
  c["thresholds"] = thresholds_json(outcome.model.thresholds);
  c["training_scores"] = outcome.train_scores.size();
  const auto flagged = std::count_if(outcome.train_scores.begin(), outcome.train_scores.end(),
                                     [&](double s) { return s > outcome.model.thresholds.tau; });
  c["training_flag_rate"] =
      outcome.train_scores.empty() ? 0.0 : static_cast<double>(flagged) / static_cast<double>(outcome.train_scores.size());
  report.finish();
}

void cmd_detect(const RunConfig& config, std::ostream& log) {
  RunReport report("detect", config);
  const Scored s = score_telemetry(config, log);
  report.write(config.out / "verdicts.csv", format_verdicts(s.verdicts));

  std::vector<TruthEntry> truth;
  if (!config.truth.empty()) truth = parse_truth(read_text_file(config.truth));
  report.write(config.out / "timeline.svg",
               render_timeline_svg(s.verdicts, s.model.thresholds, truth, s.data.series.cadence_seconds));

  report.section("data") = data_section(s.data);
  Json& d = report.section("detection");
  d["detector"] = detector_kind_name(s.model.kind());
  d["thresholds"] = thresholds_json(s.model.thresholds);
  const auto counts = label_counts(s.verdicts);
  d["verdicts"] = s.verdicts.size();
  d["counts"] = counts_json(counts);
  const double flagged = s.verdicts.empty() ? 0.0
                                            : static_cast<double>(counts[1] + counts[2]) /
                                                  static_cast<double>(s.verdicts.size());
  d["non_normal_fraction"] = flagged;
  d["expected_flag_rate"] = config.expected_flag_rate;
  d["drift"] = flag_rate_drift(flagged, config);
  log << "verdicts: " << counts[0] << " normal, " << counts[1] << " potential, " << counts[2] << " high ("
      << fixed(100.0 * flagged, 2) << "% flagged)\n";
  if (!s.model.thresholds.banded()) {
    report.warn("calibration: tau exceeds high_cut, no potential-anomaly band", log);
  }
  if (flag_rate_drift(flagged, config)) {
    report.warn("flag-rate drift: non-Normal fraction " + fixed(flagged, 3) + " vs expected " +
                    fixed(config.expected_flag_rate, 3) + "; review for model degradation",
                log);
  }

  if (!config.truth.empty()) {
    const Evaluation e = evaluate(s.verdicts, truth, config.tolerance_seconds);
    Json& m = report.section("metrics");
    m["tolerance_seconds"] = config.tolerance_seconds;
    m["precision"] = e.precision;
    m["precision_defined"] = e.precision_defined;
    m["recall"] = e.recall;
    m["f1"] = e.f1;
    m["detections"] = e.detections;
    m["true_positives"] = e.true_positives;
    m["false_positives"] = e.false_positives;
    m["truth_positives"] = e.truth_positives;
    m["matched_truth"] = e.matched_truth;
    m["false_negatives"] = e.false_negatives;
    m["true_negatives"] = e.true_negatives;
    log << "precision " << fixed(e.precision, 4) << " recall " << fixed(e.recall, 4) << " f1 " << fixed(e.f1, 4) << "\n";
    if (!e.precision_defined) report.warn("no detections: precision reported as 0", log);
  }
  report.finish();
}

void cmd_explain(const RunConfig& config, std::ostream& log) {
  RunReport report("explain", config);
  const Scored s = score_telemetry(config, log);
  const auto samples = build_samples(s.data.series, s.verdicts);
  if (samples.empty()) throw InsufficientDataError("no scored points to explain");

  ForestSpec forest_spec;
  forest_spec.n_trees = config.n_trees;
  forest_spec.seed = config.seed + seed_offset::kForest;
  const Forest forest = fit_forest(samples, forest_spec);
  const FeatureImportance importance = feature_importance(forest);
  if (!importance.any_split) report.warn("random forest made no splits: feature importances are all zero", log);
  const auto selected = select_features(importance.scores, config.coverage);

  TreeConfig tree_cfg;
  tree_cfg.max_depth = config.max_depth;
  tree_cfg.min_samples_leaf = static_cast<std::size_t>(config.min_samples_leaf);
  tree_cfg.allowed.fill(false);
  for (Signal sig : selected) tree_cfg.allowed[index_of(sig)] = true;
  const Tree tree = fit_tree(samples, tree_cfg);

  std::vector<Rule> rules;
  if (tree.root().is_leaf()) {
    report.warn("all verdicts share one class: single-leaf tree, no rules extracted", log);
  } else {
    rules = extract_rules(tree, 0.0);
  }
  const double fid = fidelity(tree, samples);

  report.write(config.out / "rules.txt", format_rules(rules));
  report.write(config.out / "tree.json", export_tree_json(tree));

  Json& j = report.section("surrogate");
  j["samples"] = samples.size();
  std::array<std::size_t, kNumLabels> counts{};
  for (const auto& smp : samples) ++counts[static_cast<std::size_t>(smp.label)];
  j["counts"] = counts_json(counts);
  Json imp;
  for (std::size_t k = 0; k < kNumSignals; ++k) imp[std::string(kSignalNames[k])] = importance.scores[k];
  j["importance"] = imp;
  Json sel = Json::array();
  for (Signal sig : selected) sel.push_back(signal_name(sig));
  j["selected_features"] = sel;
  j["tree_depth"] = tree.depth();
  j["tree_leaves"] = tree.leaf_count();
  j["fidelity"] = fid;
  Json rule_list = Json::array();
  for (const auto& r : rules) {
    rule_list.push_back({{"text", render_rule(r)}, {"support", r.support}, {"gini", r.gini}});
  }
  j["rules"] = rule_list;

  log << "selected features:";
  for (Signal sig : selected) log << " " << signal_name(sig);
  log << "\nfidelity " << fixed(fid, 4) << ", " << rules.size() << " rules with gini 0\n";
  log << format_rules(rules);
  report.finish();
}

void cmd_embed(const RunConfig& config, std::ostream& log) {
  RunReport report("embed", config);
  const ModelParams model = load_configured_model(config);
  const Prepared data = prepare(config);
  const ScoredSeries scored = reconstruction_errors(model, data.series);
  const std::size_t n = scored.scores.size();
  if (n < 4) throw InsufficientDataError("t-SNE needs at least 4 scored points, got " + std::to_string(n));

  // Even stride over the scored points when there are too many for exact t-SNE.
  const std::size_t m = std::min(n, static_cast<std::size_t>(config.embed_max_points));
  std::vector<std::size_t> picks(m);
  for (std::size_t i = 0; i < m; ++i) picks[i] = i * n / m;

  const Eigen::MatrixXd normalized = apply_scaler(model.scaler, data.series, 0.0);
  Eigen::MatrixXd points(static_cast<Eigen::Index>(m), normalized.cols());
  std::vector<Label> labels;
  std::vector<Timestamp> stamps;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t row = scored.rows[picks[i]];
    points.row(static_cast<Eigen::Index>(i)) = normalized.row(static_cast<Eigen::Index>(row));
    labels.push_back(classify(scored.scores[picks[i]], model.thresholds));
    stamps.push_back(data.series.frames[row].timestamp);
  }

  TsneConfig tsne_cfg;
  tsne_cfg.perplexity = config.perplexity;
  tsne_cfg.iterations = config.tsne_iterations;
  tsne_cfg.seed = config.seed + seed_offset::kTsne;
  log << "embedding " << m << " of " << n << " points\n";
  Embedding embedding = tsne(points, tsne_cfg);
  embedding.labels = std::move(labels);
  embedding.timestamps = std::move(stamps);

  report.write(config.out / "embedding.csv", format_embedding_csv(embedding));
  report.write(config.out / "embedding.svg", render_map_svg(embedding));

  Json& j = report.section("embedding");
  j["scored_points"] = n;
  j["embedded_points"] = m;
  j["perplexity"] = config.perplexity;
  j["iterations"] = config.tsne_iterations;
  j["final_kl"] = embedding.kl_history.empty() ? 0.0 : embedding.kl_history.back();
  std::array<std::size_t, kNumLabels> counts{};
  for (Label l : embedding.labels) ++counts[static_cast<std::size_t>(l)];
  j["counts"] = counts_json(counts);
  if (!embedding.kl_history.empty()) log << "final KL " << fixed(embedding.kl_history.back(), 4) << "\n";
  report.finish();
}

}  // namespace vad::cli
