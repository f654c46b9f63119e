#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vad/detector.hpp"

namespace vad {

inline constexpr int kModelFormatVersion = 1;

// CRC-32 (zlib polynomial) of the weight byte stream: every layer in file
// order, each tensor (W, then U for LSTM layers, then b) row-major as
// little-endian IEEE-754 doubles.
std::uint32_t weight_checksum(const ModelParams& model);

std::string serialize_model(const ModelParams& model);
ModelParams deserialize_model(std::string_view text);

void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

// Verdict CSV: `timestamp,score,label`.
std::string format_verdicts(std::span<const AnomalyVerdict> verdicts);
std::vector<AnomalyVerdict> parse_verdicts(std::string_view csv_text);

std::uint32_t crc32_of(std::string_view bytes);

}  // namespace vad
