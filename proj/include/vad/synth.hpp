#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vad/ingest.hpp"

namespace vad {

enum class AnomalyKind { PropellerFailure, StressManeuver };

std::string_view anomaly_kind_name(AnomalyKind kind) noexcept;

struct AnomalyWindow {
  std::int64_t start_offset_seconds = 0;
  std::int64_t length_seconds = 0;
  AnomalyKind kind = AnomalyKind::PropellerFailure;
};

// Daily operating pattern in UTC hours. Outside [active_from_hour,
// active_to_hour) the vessel is moored for moored_minutes on either side
// (engines off, battery telemetry absent, sog ~ 0) and otherwise the logger is
// off (all signals null).
struct OperatingSchedule {
  bool always_active = false;
  int active_from_hour = 6;
  int active_to_hour = 20;
  int moored_minutes = 60;
};

struct ScenarioSpec {
  std::int64_t duration_seconds = 0;
  std::uint64_t seed = 0;
  std::vector<AnomalyWindow> anomaly_windows;
  Timestamp start = from_unix_seconds(1709251200);  // 2024-03-01T00:00:00Z
  int cadence_seconds = kDefaultCadenceSeconds;
  OperatingSchedule schedule;
};

// Generator constants. Magnitudes follow the vessel's observed operating
// ranges: cruise RPM in the mid-20s, sog ~5 m/s.
struct VesselProfile {
  double cruise_rpm = 25.0;
  double rpm_band_sigma = 1.5;       // stationary sd of the slow RPM setpoint
  double rpm_tau_seconds = 1800.0;
  double rpm_noise = 0.25;
  double sog_per_rpm = 0.2;          // sog = sog_per_rpm * rpm_setpoint + noise
  double sog_noise = 0.04;
  double port_batt_v = 25.6;
  double stbd_batt_v = 25.4;
  double batt_drift_sigma = 0.08;
  double batt_tau_seconds = 14400.0;
  double batt_noise = 0.02;
  double heading_wander_sigma = 0.02;  // rad/min, stationary sd of the wander in turn rate
  double heading_wander_tau_seconds = 120.0;
  double course_change_min_rate = 0.3;  // rad/min, drawn per course change
  double course_change_max_rate = 1.0;
  double course_change_min_interval_s = 1800.0;
  double course_change_max_interval_s = 3600.0;
  double rudder_per_rot = 0.25;        // rad of rudder per rad/min of turn
  double rudder_noise = 0.005;

  // Propeller failure: starboard shaft overspeeds, port shaft sags, thrust
  // collapses.
  double failure_stbd_gain = 1.45;
  double failure_port_gain = 0.85;
  double failure_rpm_noise = 0.8;
  double failure_sog_fraction = 0.08;

  // Stress maneuvers: alternating zig-zag and turning-circle tests. The
  // zig-zag stays inside the normal helm envelope frame by frame; only its
  // rhythm is unusual. The circle is a hard-over turn.
  double maneuver_zigzag_rudder = 0.15;  // rad
  double maneuver_trial_rpm = 22.0;      // approach speed for the zig-zag runs
  double maneuver_rudder = 0.30;        // rad, turning circle
  double maneuver_rot_per_rudder = 4.0;  // rad/min per rad, steady state
  double maneuver_response_seconds = 20.0;
  int maneuver_zigzag_half_period_frames = 4;
  int maneuver_zigzag_frames = 54;
  int maneuver_circle_frames = 12;
  double maneuver_sog_fraction = 0.6;
  double maneuver_sog_rudder_loss = 0.25;
  double maneuver_sog_response_seconds = 30.0;  // speed lags the helm program
};

struct LabeledSeries {
  FrameSeries series;
  std::vector<bool> truth;  // one flag per frame

  bool operator==(const LabeledSeries&) const = default;
};

// Deterministic anomaly-free telemetry for the scenario's duration (anomaly
// windows are ignored). One frame per cadence step.
LabeledSeries generate_normal(const ScenarioSpec& spec, const VesselProfile& profile = {});

// Overlays the scenario's anomaly windows on base. Frames outside windows are
// untouched; truth is set for active (non-null) frames inside windows.
LabeledSeries inject_anomalies(const LabeledSeries& base, const ScenarioSpec& spec,
                               const VesselProfile& profile = {});

// generate_normal followed by inject_anomalies.
LabeledSeries generate_scenario(const ScenarioSpec& spec, const VesselProfile& profile = {});

void validate_windows(const ScenarioSpec& spec);

// Truth sidecar: `timestamp,is_anomaly` with 0/1.
std::string format_truth(const LabeledSeries& labeled);

struct TruthEntry {
  Timestamp timestamp;
  bool anomalous;
};
std::vector<TruthEntry> parse_truth(std::string_view csv_text);

// The fixed benchmark: three days of normal operation for training and one
// subsequent day with one propeller failure and one stress-maneuver session.
struct Benchmark {
  ScenarioSpec train;
  ScenarioSpec test;
};
Benchmark benchmark_scenarios(std::uint64_t seed);

}  // namespace vad
