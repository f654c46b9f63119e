#include "vad/signals.hpp"

#include <charconv>
#include <cstdio>

namespace vad {

std::string_view signal_name(Signal s) noexcept { return kSignalNames[index_of(s)]; }

std::optional<Signal> signal_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumSignals; ++i) {
    if (kSignalNames[i] == name) return static_cast<Signal>(i);
  }
  return std::nullopt;
}

namespace {

bool read_fixed(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) noexcept {
  using namespace std::chrono;
  // 0123456789012345678
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() < 19) return std::nullopt;
  int y, mo, d, h, mi, s;
  if (!read_fixed(text, 0, 4, y) || text[4] != '-' || !read_fixed(text, 5, 2, mo) || text[7] != '-' ||
      !read_fixed(text, 8, 2, d) || (text[10] != 'T' && text[10] != ' ') || !read_fixed(text, 11, 2, h) ||
      text[13] != ':' || !read_fixed(text, 14, 2, mi) || text[16] != ':' || !read_fixed(text, 17, 2, s)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  std::int64_t frac_us = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    std::int64_t scale = 100000;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 6) {
        frac_us += (text[pos] - '0') * scale;
        scale /= 10;
      }
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) return std::nullopt;

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  const sys_days days{ymd};
  return Timestamp{duration_cast<microseconds>(days.time_since_epoch()) + hours{h} + minutes{mi} + seconds{s} +
                   microseconds{frac_us}};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(t);
  const year_month_day ymd{days};
  auto rem = t - days;
  const auto h = duration_cast<hours>(rem);
  rem -= h;
  const auto mi = duration_cast<minutes>(rem);
  rem -= mi;
  const auto s = duration_cast<seconds>(rem);
  rem -= s;
  const auto us = rem.count();

  char buf[48];
  int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                        static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                        static_cast<int>(h.count()), static_cast<int>(mi.count()), static_cast<int>(s.count()));
  std::string out(buf, static_cast<std::size_t>(n));
  if (us != 0) {
    std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(us));
    std::string frac(buf);
    while (frac.back() == '0') frac.pop_back();
    out += frac;
  }
  out += 'Z';
  return out;
}

}  // namespace vad
