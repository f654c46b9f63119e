#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vad/signals.hpp"

namespace vad {

inline constexpr int kDefaultCadenceSeconds = 10;
// Below steerage way (~0.1 kn).
inline constexpr double kDefaultSogEpsilon = 0.05;

struct RawRecord {
  Timestamp timestamp;
  Signal signal;
  double value;
};

struct SignalFrame {
  Timestamp timestamp;
  std::array<std::optional<double>, kNumSignals> values{};

  std::optional<double>& operator[](Signal s) noexcept { return values[index_of(s)]; }
  const std::optional<double>& operator[](Signal s) const noexcept { return values[index_of(s)]; }

  bool all_null() const noexcept;
  bool operator==(const SignalFrame&) const = default;
};

// Frames in strictly increasing time order, every timestamp a multiple of the
// cadence. Freshly resampled series are gap-free; filter_inactive may remove
// frames, leaving gaps that downstream windowing respects.
struct FrameSeries {
  std::vector<SignalFrame> frames;
  int cadence_seconds = kDefaultCadenceSeconds;

  std::size_t size() const noexcept { return frames.size(); }
  bool empty() const noexcept { return frames.empty(); }
  bool operator==(const FrameSeries&) const = default;
};

struct Scaler {
  std::array<double, kNumSignals> min{};
  std::array<double, kNumSignals> max{};
};

// Telemetry CSV (see README for the column contract). One record per
// non-null cell, in row order then column order.
std::vector<RawRecord> parse_telemetry(std::string_view csv_text);

// Per-signal arithmetic mean over [bin_start, bin_start + cadence). Bins are
// anchored at multiples of the cadence since the Unix epoch. Bins between the
// first and last record without any data are emitted as all-null frames.
FrameSeries resample_mean(std::span<const RawRecord> records, int cadence_seconds = kDefaultCadenceSeconds);

// Drops non-functioning frames (all eight signals null) and non-moving frames
// (both battery voltages null and sog < sog_epsilon). A null sog never counts
// as "below epsilon".
FrameSeries filter_inactive(const FrameSeries& series, double sog_epsilon = kDefaultSogEpsilon);

Scaler fit_scaler(const FrameSeries& series);

// rows x 8 matrix of (x - min) / (max - min); 0 where max == min. No clamping.
// Nulls become null_fill after scaling.
Eigen::MatrixXd apply_scaler(const Scaler& scaler, const FrameSeries& series, double null_fill = 0.0);

// The inverse affine map for a single normalized value.
double invert_scaler(const Scaler& scaler, Signal s, double normalized) noexcept;

// Writes the telemetry CSV for a frame series (17 significant digits).
std::string format_telemetry(const FrameSeries& series);

// parse -> resample convenience for files.
FrameSeries load_telemetry(const std::filesystem::path& path, int cadence_seconds = kDefaultCadenceSeconds);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// %.17g: exact round-trip for doubles.
std::string format_double(double v);

}  // namespace vad
