#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace vad {

// The eight vessel signals, in CSV column order.
enum class Signal : std::uint8_t {
  PortRpm = 0,
  StbdRpm,
  PortBattV,
  StbdBattV,
  HeadingTrue,  // radians, [0, 2*pi)
  RateOfTurn,   // radians per minute
  Sog,          // m/s
  RudderAngle,  // radians, positive to starboard
};

inline constexpr std::size_t kNumSignals = 8;

inline constexpr std::size_t index_of(Signal s) noexcept { return static_cast<std::size_t>(s); }

inline constexpr std::array<Signal, kNumSignals> kAllSignals = {
    Signal::PortRpm,     Signal::StbdRpm,    Signal::PortBattV, Signal::StbdBattV,
    Signal::HeadingTrue, Signal::RateOfTurn, Signal::Sog,       Signal::RudderAngle};

// Canonical (CSV header) names.
inline constexpr std::array<std::string_view, kNumSignals> kSignalNames = {
    "port_rpm",     "stbd_rpm",     "port_batt_v", "stbd_batt_v",
    "heading_true", "rate_of_turn", "sog",         "rudder_angle"};

// Names used when rendering surrogate rules, spelled as in the vessel's
// dashboard export (including the "Ruddere" misspelling).
inline constexpr std::array<std::string_view, kNumSignals> kDisplayNames = {
    "PORT_RPM_Mean",     "STBD_RPM_Mean",      "PORT_Battery_Voltage_Mean", "STBD_Battery_Voltage_Mean",
    "Heading_True_Mean", "Rate_of_Turn_Mean", "SOG_Speed_over_Ground",     "Ruddere_angle_Mean"};

std::string_view signal_name(Signal s) noexcept;
std::optional<Signal> signal_from_name(std::string_view name) noexcept;

using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

// Parses ISO-8601 UTC: YYYY-MM-DDTHH:MM:SS[.ffffff][Z]. Returns nullopt on any
// deviation from that shape or on out-of-range fields.
std::optional<Timestamp> parse_timestamp(std::string_view text) noexcept;

// YYYY-MM-DDTHH:MM:SSZ, with a fractional part only when non-zero.
std::string format_timestamp(Timestamp t);

inline Timestamp from_unix_seconds(std::int64_t s) {
  return Timestamp{std::chrono::seconds{s}};
}

inline std::int64_t micros_since_epoch(Timestamp t) noexcept { return t.time_since_epoch().count(); }

}  // namespace vad
