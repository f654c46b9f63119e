#include <algorithm>
#include <cstdio>
#include <ostream>

#include "run_report.hpp"
#include "vad/errors.hpp"
#include "vad/model_io.hpp"

namespace vad::cli {

namespace {

constexpr std::array<std::string_view, 5> kCommands = {"synth", "train", "detect", "explain", "embed"};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string number(const Json& j, int digits = 4) {
  if (j.is_number_float()) return fixed(j.get<double>(), digits);
  if (j.is_number()) return std::to_string(j.get<long long>());
  if (j.is_boolean()) return j.get<bool>() ? "yes" : "no";
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

void missing(std::string& md, std::string_view command) {
  md += "_Not available: `" + std::string(command) + "_report.json` is missing from the run directory._\n";
}

void list_warnings(std::string& md, const Json& report) {
  for (const auto& w : report.value("warnings", Json::array())) md += "- **Review:** " + w.get<std::string>() + "\n";
}

}  // namespace

RunReport::RunReport(std::string command, const RunConfig& config) : command_(std::move(command)), out_(config.out) {
  body_["command"] = command_;
  Json echo;
  for (auto key : config_keys()) echo[std::string(key)] = get_setting(config, key);
  body_["config"] = echo;
}

void RunReport::write(const std::filesystem::path& path, std::string_view text) {
  write_text_file(path, text);
  manifest_.push_back({{"file", manifest_name(path, out_)}, {"bytes", text.size()}, {"crc32", crc_hex(text)}});
}

void RunReport::warn(const std::string& message, std::ostream& log) {
  log << "warning: " << message << "\n";
  warnings_.push_back(message);
}

void RunReport::finish() {
  body_["warnings"] = warnings_;
  body_["manifest"] = manifest_;
  write_text_file(out_ / (command_ + "_report.json"), body_.dump(2) + "\n");
}

std::string crc_hex(std::string_view bytes) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(bytes));
  return buf;
}

std::string manifest_name(const std::filesystem::path& path, const std::filesystem::path& out) {
  const auto rel = path.lexically_normal().lexically_relative(out.lexically_normal());
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return path.generic_string();
}

std::string cmd_report(const RunConfig& config, std::ostream& log) {
  std::map<std::string, Json> reports;
  for (auto command : kCommands) {
    const auto path = config.out / (std::string(command) + "_report.json");
    if (!std::filesystem::exists(path)) {
      log << "note: " << path.generic_string() << " not found\n";
      continue;
    }
    try {
      reports[std::string(command)] = Json::parse(read_text_file(path));
    } catch (const Json::exception& e) {
      throw DataError("cannot parse " + path.generic_string() + ": " + e.what());
    }
  }
  auto find = [&](std::string_view c) -> const Json* {
    const auto it = reports.find(std::string(c));
    return it == reports.end() ? nullptr : &it->second;
  };

  std::string md = "# Anomaly detection run report\n\nRun directory: `" + config.out.generic_string() + "`\n\n";

  md += "## 1. Configuration\n\n";
  const Json* train = find("train");
  const Json* detect = find("detect");
  const Json* config_source = train ? train : detect;
  if (!config_source && !reports.empty()) config_source = &reports.begin()->second;
  if (config_source) {
    md += "```\n";
    for (const auto& [key, value] : config_source->at("config").items()) md += key + " = " + value.get<std::string>() + "\n";
    md += "```\n";
  } else {
    md += "_No command reports found._\n";
  }
  if (const Json* synth = find("synth")) {
    md += "\nSynthetic scenarios:\n\n| scenario | frames | active | anomalous |\n|---|---|---|---|\n";
    const Json scenarios = synth->at("sections").value("scenarios", Json::object());
    for (const auto& [name, s] : scenarios.items()) {
      md += "| " + name + " | " + number(s["frames"]) + " | " + number(s["active_frames"]) + " | " +
            number(s["anomalous_frames"]) + " |\n";
    }
  }

  md += "\n## 2. Training\n\n";
  if (train) {
    const Json& sec = train->at("sections");
    const Json& data = sec.at("data");
    md += "- records parsed: " + number(data["records"]) + "\n";
    md += "- frames kept / dropped: " + number(data["frames_kept"]) + " / " + number(data["frames_dropped"]) + "\n";
    md += "- train / validation rows: " + number(data["train_rows"]) + " / " + number(data["validation_rows"]) + "\n";
    const Json& tr = sec.at("training");
    md += "- detector: " + number(tr["detector"]) + "\n";
    md += "- final training loss: " + number(tr["final_loss"], 6) + "\n";
    const Json& cal = sec.at("calibration");
    md += "- calibrated tau: " + number(cal["thresholds"]["tau"], 6) + " (percentile " + number(cal["percentile"], 1) +
          "), high-score cutoff " + number(cal["thresholds"]["high_cut"], 3) + "\n";
    md += "- training flag rate: " + number(cal["training_flag_rate"]) + "\n\n";
    md += "| epoch | loss | validation |\n|---|---|---|\n";
    const Json& loss = tr["loss_history"];
    const Json& val = tr["validation_history"];
    for (std::size_t e = 0; e < loss.size(); ++e) {
      md += "| " + std::to_string(e + 1) + " | " + number(loss[e], 6) + " | " +
            (e < val.size() ? number(val[e], 6) : std::string("-")) + " |\n";
    }
    list_warnings(md, *train);
  } else {
    missing(md, "train");
  }

  md += "\n## 3. Detection\n\n";
  if (detect) {
    const Json& d = detect->at("sections").at("detection");
    md += "- detector: " + number(d["detector"]) + ", tau " + number(d["thresholds"]["tau"], 6) + "\n";
    md += "- verdicts: " + number(d["verdicts"]) + " (normal " + number(d["counts"]["normal"]) + ", potential " +
          number(d["counts"]["potential"]) + ", high " + number(d["counts"]["high"]) + ")\n";
    md += "- non-Normal fraction: " + number(d["non_normal_fraction"]) + " (expected " +
          number(d["expected_flag_rate"], 3) + ")\n";
    if (detect->at("sections").contains("metrics")) {
      const Json& m = detect->at("sections").at("metrics");
      md += "- precision " + number(m["precision"]) + ", recall " + number(m["recall"]) + ", F1 " + number(m["f1"]) +
            " (tolerance " + number(m["tolerance_seconds"]) + " s)\n";
    } else {
      md += "- no truth labels supplied: metrics not computed\n";
    }
    list_warnings(md, *detect);
  } else {
    missing(md, "detect");
  }

  md += "\n## 4. Explanation\n\n";
  if (const Json* explain = find("explain")) {
    const Json& s = explain->at("sections").at("surrogate");
    md += "- samples: " + number(s["samples"]) + ", fidelity " + number(s["fidelity"]) + ", tree depth " +
          number(s["tree_depth"]) + "\n";
    md += "- selected features:";
    for (const auto& f : s["selected_features"]) md += " " + f.get<std::string>();
    md += "\n\n| feature | importance |\n|---|---|\n";
    for (const auto& [name, v] : s["importance"].items()) md += "| " + name + " | " + number(v) + " |\n";
    md += "\nRules (leaves with Gini 0):\n\n";
    std::size_t k = 0;
    for (const auto& r : s["rules"]) {
      md += std::to_string(++k) + ") " + r["text"].get<std::string>() + " (support " + number(r["support"]) + ")\n";
    }
    if (k == 0) md += "_none_\n";
    list_warnings(md, *explain);
  } else {
    missing(md, "explain");
  }

  md += "\n## 5. Embedding\n\n";
  if (const Json* embed = find("embed")) {
    const Json& e = embed->at("sections").at("embedding");
    md += "- embedded points: " + number(e["embedded_points"]) + " of " + number(e["scored_points"]) + "\n";
    md += "- final KL divergence: " + number(e["final_kl"]) + "\n";
    md += "- map: `embedding.svg`, coordinates: `embedding.csv`\n";
    list_warnings(md, *embed);
  } else {
    missing(md, "embed");
  }

  md += "\n## 6. Manifest\n\n| file | bytes | crc32 | status |\n|---|---|---|---|\n";
  for (const auto& [command, report] : reports) {
    for (const auto& entry : report.value("manifest", Json::array())) {
      const std::string name = entry["file"].get<std::string>();
      std::filesystem::path p(name);
      if (p.is_relative()) p = config.out / p;
      std::string status = "missing";
      if (std::filesystem::exists(p)) status = crc_hex(read_text_file(p)) == entry["crc32"] ? "ok" : "checksum mismatch";
      md += "| " + name + " | " + number(entry["bytes"]) + " | " + entry["crc32"].get<std::string>() + " | " + status + " |\n";
    }
  }

  write_text_file(config.out / "report.md", md);
  return md;
}

}  // namespace vad::cli
