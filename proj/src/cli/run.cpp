#include <algorithm>
#include <iostream>

#include "CLI11.hpp"
#include "vad/cli.hpp"
#include "vad/errors.hpp"

namespace vad::cli {

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vessel operational anomaly detection", "vad"};
  app.require_subcommand(1, 1);

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value configuration file");

  std::map<std::string, std::string, std::less<>> values;
  std::vector<std::pair<std::string, CLI::Option*>> overrides;
  for (auto key : config_keys()) {
    const std::string k(key);
    overrides.emplace_back(k, app.add_option("--" + k, values[k], "override '" + k + "'"));
  }

  struct Sub {
    std::string name;
    std::string help;
    CLI::App* app = nullptr;
    std::string positional;
  };
  std::vector<Sub> subs = {
      {"synth", "generate labeled synthetic telemetry", nullptr, {}},
      {"train", "preprocess telemetry and train a detector", nullptr, {}},
      {"detect", "score telemetry and write verdicts", nullptr, {}},
      {"explain", "fit the surrogate tree and extract rules", nullptr, {}},
      {"embed", "t-SNE map of the detector's view of the data", nullptr, {}},
      {"report", "consolidate a run directory into report.md", nullptr, {}},
  };
  for (auto& s : subs) {
    s.app = app.add_subcommand(s.name, s.help);
    s.app->fallthrough();
    if (s.name == "report") {
      s.app->add_option("run_dir", s.positional, "run directory (same as --out)");
    } else if (s.name != "synth") {
      s.app->add_option("telemetry", s.positional, "telemetry CSV (same as --telemetry)");
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) apply_config_text(config, read_text_file(config_path));
    for (const auto& [key, opt] : overrides) {
      if (opt->count() > 0) apply_setting(config, key, values[key]);
    }
    const auto sub = std::find_if(subs.begin(), subs.end(), [](const Sub& s) { return s.app->parsed(); });
    if (!sub->positional.empty()) {
      if (sub->name == "report") {
        config.out = sub->positional;
      } else {
        config.telemetry = sub->positional;
      }
    }
    validate(config);

    if (sub->name == "synth") {
      cmd_synth(config, out);
    } else if (sub->name == "train") {
      cmd_train(config, out);
    } else if (sub->name == "detect") {
      cmd_detect(config, out);
    } else if (sub->name == "explain") {
      cmd_explain(config, out);
    } else if (sub->name == "embed") {
      cmd_embed(config, out);
    } else {
      out << cmd_report(config, err);
    }
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace vad::cli
