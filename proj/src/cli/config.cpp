#include <algorithm>
#include <array>
#include <charconv>
#include <functional>

#include "vad/cli.hpp"
#include "vad/errors.hpp"

namespace vad::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw UsageError("invalid value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError("invalid value '" + std::string(text) + "' for " + std::string(key) + " (expected true/false)");
}

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field number(std::string_view key, T RunConfig::*member) {
  return {key, [key, member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field path(std::string_view key, std::filesystem::path RunConfig::*member) {
  return {key, [member](RunConfig& c, std::string_view v) { c.*member = std::filesystem::path(std::string(v)); },
          [member](const RunConfig& c) { return (c.*member).generic_string(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number("cadence_seconds", &RunConfig::cadence_seconds),
      number("sog_epsilon", &RunConfig::sog_epsilon),
      {"detector", [](RunConfig& c, std::string_view v) { c.detector = detector_kind_from_name(v); },
       [](const RunConfig& c) { return std::string(detector_kind_name(c.detector)); }},
      number("window_length", &RunConfig::window_length),
      number("stride", &RunConfig::stride),
      number("percentile", &RunConfig::percentile),
      number("high_cut", &RunConfig::high_cut),
      number("epochs", &RunConfig::epochs),
      number("batch_size", &RunConfig::batch_size),
      number("learning_rate", &RunConfig::learning_rate),
      number("validation_fraction", &RunConfig::validation_fraction),
      number("seed", &RunConfig::seed),
      number("tolerance_seconds", &RunConfig::tolerance_seconds),
      number("max_depth", &RunConfig::max_depth),
      number("min_samples_leaf", &RunConfig::min_samples_leaf),
      number("n_trees", &RunConfig::n_trees),
      number("coverage", &RunConfig::coverage),
      number("perplexity", &RunConfig::perplexity),
      number("tsne_iterations", &RunConfig::tsne_iterations),
      number("embed_max_points", &RunConfig::embed_max_points),
      number("expected_flag_rate", &RunConfig::expected_flag_rate),
      number("drift_factor", &RunConfig::drift_factor),
      {"scenario", [](RunConfig& c, std::string_view v) { c.scenario = std::string(v); },
       [](const RunConfig& c) { return c.scenario; }},
      number("duration_seconds", &RunConfig::duration_seconds),
      {"anomalies", [](RunConfig& c, std::string_view v) { c.anomalies = std::string(v); },
       [](const RunConfig& c) { return c.anomalies; }},
      {"always_active", [](RunConfig& c, std::string_view v) { c.always_active = parse_bool("always_active", v); },
       [](const RunConfig& c) { return std::string(c.always_active ? "true" : "false"); }},
      path("out", &RunConfig::out),
      path("telemetry", &RunConfig::telemetry),
      path("truth", &RunConfig::truth),
      path("model", &RunConfig::model),
  };
  return table;
}

const Field& field(std::string_view key) {
  const auto& table = fields();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
  if (it == table.end()) throw UsageError("unknown setting '" + std::string(key) + "'");
  return *it;
}

}  // namespace

std::span<const std::string_view> config_keys() noexcept {
  static const std::vector<std::string_view> keys = [] {
    std::vector<std::string_view> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const Field& f = field(key);
  try {
    f.set(config, trim(value));
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string(key) + ": " + e.what());
  }
}

std::string get_setting(const RunConfig& config, std::string_view key) { return field(key).get(config); }

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError("invalid configuration: " + what);
  };
  require(c.cadence_seconds >= 1, "cadence_seconds must be >= 1");
  require(c.sog_epsilon >= 0.0, "sog_epsilon must be >= 0");
  require(c.window_length >= 1, "window_length must be >= 1");
  require(c.stride >= 1, "stride must be >= 1");
  require(c.percentile > 0.0 && c.percentile <= 100.0, "percentile must lie in (0, 100]");
  require(c.high_cut >= 0.0, "high_cut must be >= 0");
  require(c.epochs >= 0, "epochs must be >= 0");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.learning_rate > 0.0, "learning_rate must be > 0");
  require(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0, "validation_fraction must lie in [0, 1)");
  require(c.tolerance_seconds >= 0, "tolerance_seconds must be >= 0");
  require(c.max_depth >= 0, "max_depth must be >= 0");
  require(c.min_samples_leaf >= 1, "min_samples_leaf must be >= 1");
  require(c.n_trees >= 1, "n_trees must be >= 1");
  require(c.coverage > 0.0 && c.coverage <= 1.0, "coverage must lie in (0, 1]");
  require(c.perplexity > 0.0, "perplexity must be > 0");
  require(c.tsne_iterations >= 0, "tsne_iterations must be >= 0");
  require(c.embed_max_points >= 4, "embed_max_points must be >= 4");
  require(c.expected_flag_rate > 0.0 && c.expected_flag_rate < 1.0, "expected_flag_rate must lie in (0, 1)");
  require(c.drift_factor >= 1.0, "drift_factor must be >= 1");
  require(c.scenario == "benchmark" || c.scenario == "custom", "scenario must be 'benchmark' or 'custom'");
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

bool flag_rate_drift(double non_normal_fraction, const RunConfig& config) noexcept {
  return non_normal_fraction > config.drift_factor * config.expected_flag_rate;
}

}  // namespace vad::cli
