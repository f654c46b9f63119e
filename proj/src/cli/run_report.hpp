#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "vad/cli.hpp"

namespace vad::cli {

using Json = nlohmann::ordered_json;

// Collects one subcommand's report: config echo, free-form sections,
// warnings, and a manifest of every artifact written through it.
class RunReport {
 public:
  RunReport(std::string command, const RunConfig& config);

  Json& section(std::string_view name) { return body_["sections"][std::string(name)]; }

  void write(const std::filesystem::path& path, std::string_view text);
  void warn(const std::string& message, std::ostream& log);

  // Writes <out>/<command>_report.json.
  void finish();

 private:
  std::string command_;
  std::filesystem::path out_;
  Json body_;
  Json warnings_ = Json::array();
  Json manifest_ = Json::array();
};

std::string crc_hex(std::string_view bytes);

// Path as recorded in manifests: relative to the run directory when inside it.
std::string manifest_name(const std::filesystem::path& path, const std::filesystem::path& out);

}  // namespace vad::cli
