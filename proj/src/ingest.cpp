#include "vad/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "vad/errors.hpp"

namespace vad {

bool SignalFrame::all_null() const noexcept {
  return std::none_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

namespace {

constexpr std::string_view kHeader =
    "timestamp,port_rpm,stbd_rpm,port_batt_v,stbd_batt_v,heading_true,rate_of_turn,sog,rudder_angle";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_real(std::string_view cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::vector<RawRecord> parse_telemetry(std::string_view csv_text) {
  std::vector<RawRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos < csv_text.size()) {
    std::size_t eol = csv_text.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv_text.size();
    std::string_view line = csv_text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!saw_header) {
      if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != kHeader) {
        for (std::string_view cell : split_commas(line)) {
          if (cell != "timestamp" && !signal_from_name(cell)) {
            throw SchemaError("unknown column '" + std::string(cell) + "'");
          }
        }
        throw SchemaError("header must be exactly: " + std::string(kHeader));
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;

    const auto cells = split_commas(line);
    if (cells.size() != kNumSignals + 1) {
      throw ParseError(line_no, "expected " + std::to_string(kNumSignals + 1) + " cells, found " +
                                    std::to_string(cells.size()));
    }
    const auto ts = parse_timestamp(cells[0]);
    if (!ts) throw ParseError(line_no, "malformed timestamp '" + std::string(cells[0]) + "'");
    for (std::size_t i = 0; i < kNumSignals; ++i) {
      const std::string_view cell = cells[i + 1];
      if (cell.empty()) continue;
      const auto v = parse_real(cell);
      if (!v) {
        throw ParseError(line_no, "malformed value '" + std::string(cell) + "' for " +
                                      std::string(kSignalNames[i]));
      }
      records.push_back({*ts, static_cast<Signal>(i), *v});
    }
  }
  if (!saw_header) throw SchemaError("missing header");
  return records;
}

FrameSeries resample_mean(std::span<const RawRecord> records, int cadence_seconds) {
  if (cadence_seconds <= 0) throw ParameterError("cadence_seconds must be positive");
  if (records.empty()) throw EmptyInputError("no telemetry records to resample");

  const std::int64_t bin_us = static_cast<std::int64_t>(cadence_seconds) * 1'000'000;
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  for (const auto& r : records) {
    const std::int64_t b = floor_div(micros_since_epoch(r.timestamp), bin_us);
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }

  const auto nbins = static_cast<std::size_t>(hi - lo + 1);
  std::vector<std::array<double, kNumSignals>> sums(nbins);
  std::vector<std::array<std::size_t, kNumSignals>> counts(nbins);
  for (auto& s : sums) s.fill(0.0);
  for (auto& c : counts) c.fill(0);
  for (const auto& r : records) {
    const auto b = static_cast<std::size_t>(floor_div(micros_since_epoch(r.timestamp), bin_us) - lo);
    sums[b][index_of(r.signal)] += r.value;
    counts[b][index_of(r.signal)] += 1;
  }

  FrameSeries out;
  out.cadence_seconds = cadence_seconds;
  out.frames.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    auto& f = out.frames[b];
    f.timestamp = Timestamp{std::chrono::microseconds{(lo + static_cast<std::int64_t>(b)) * bin_us}};
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      if (counts[b][k] > 0) f.values[k] = sums[b][k] / static_cast<double>(counts[b][k]);
    }
  }
  return out;
}

FrameSeries filter_inactive(const FrameSeries& series, double sog_epsilon) {
  FrameSeries out;
  out.cadence_seconds = series.cadence_seconds;
  out.frames.reserve(series.size());
  for (const auto& f : series.frames) {
    if (f.all_null()) continue;
    const bool batteries_missing = !f[Signal::PortBattV] && !f[Signal::StbdBattV];
    const auto& sog = f[Signal::Sog];
    if (batteries_missing && sog && *sog < sog_epsilon) continue;
    out.frames.push_back(f);
  }
  return out;
}

Scaler fit_scaler(const FrameSeries& series) {
  if (series.empty()) throw EmptyInputError("cannot fit scaler on an empty series");
  Scaler s;
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  std::array<bool, kNumSignals> seen{};
  for (const auto& f : series.frames) {
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      if (!f.values[k]) continue;
      seen[k] = true;
      s.min[k] = std::min(s.min[k], *f.values[k]);
      s.max[k] = std::max(s.max[k], *f.values[k]);
    }
  }
  for (std::size_t k = 0; k < kNumSignals; ++k) {
    if (!seen[k]) throw DataError("feature '" + std::string(kSignalNames[k]) + "' is entirely null; cannot fit scaler");
  }
  return s;
}

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const FrameSeries& series, double null_fill) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(series.size()), static_cast<Eigen::Index>(kNumSignals));
  for (std::size_t r = 0; r < series.size(); ++r) {
    const auto& f = series.frames[r];
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      double v = null_fill;
      if (f.values[k]) {
        const double span = scaler.max[k] - scaler.min[k];
        v = span > 0.0 ? (*f.values[k] - scaler.min[k]) / span : 0.0;
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

double invert_scaler(const Scaler& scaler, Signal s, double normalized) noexcept {
  const std::size_t k = index_of(s);
  return scaler.min[k] + normalized * (scaler.max[k] - scaler.min[k]);
}

std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string format_telemetry(const FrameSeries& series) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& f : series.frames) {
    out += format_timestamp(f.timestamp);
    for (const auto& v : f.values) {
      out += ',';
      if (v) out += format_double(*v);
    }
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

FrameSeries load_telemetry(const std::filesystem::path& path, int cadence_seconds) {
  const auto records = parse_telemetry(read_text_file(path));
  return resample_mean(records, cadence_seconds);
}

}  // namespace vad
