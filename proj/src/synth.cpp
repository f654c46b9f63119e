#include "vad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "vad/errors.hpp"
#include "vad/rng.hpp"

namespace vad {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class Activity { Active, Moored, Off };

Activity activity_at(const OperatingSchedule& schedule, Timestamp t) {
  if (schedule.always_active) return Activity::Active;
  const std::int64_t unix_s = micros_since_epoch(t) / 1'000'000;
  const std::int64_t sod = ((unix_s % 86400) + 86400) % 86400;
  const std::int64_t from = schedule.active_from_hour * 3600LL;
  const std::int64_t to = schedule.active_to_hour * 3600LL;
  const std::int64_t margin = schedule.moored_minutes * 60LL;
  if (sod >= from && sod < to) return Activity::Active;
  if ((sod >= from - margin && sod < from) || (sod >= to && sod < to + margin)) return Activity::Moored;
  return Activity::Off;
}

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

// Stationary first-order autoregressive step with the given stationary sd.
double ou_step(double x, double sigma, double tau, double dt, Rng& rng) {
  const double a = std::exp(-dt / tau);
  return a * x + sigma * std::sqrt(1.0 - a * a) * rng.normal();
}

bool is_active_frame(const SignalFrame& f) { return f[Signal::PortBattV].has_value() || f[Signal::StbdBattV].has_value(); }

void apply_propeller_failure(std::vector<SignalFrame*>& frames, const VesselProfile& p, Rng& rng) {
  for (SignalFrame* f : frames) {
    auto& stbd = (*f)[Signal::StbdRpm];
    auto& port = (*f)[Signal::PortRpm];
    auto& sog = (*f)[Signal::Sog];
    if (stbd) stbd = *stbd * p.failure_stbd_gain + p.failure_rpm_noise * rng.normal();
    if (port) port = *port * p.failure_port_gain + 0.5 * p.failure_rpm_noise * rng.normal();
    if (sog) sog = std::max(0.0, *sog * p.failure_sog_fraction + 0.05 * std::abs(rng.normal()));
  }
}

void apply_stress_maneuver(std::vector<SignalFrame*>& frames, double dt, const VesselProfile& p, Rng& rng) {
  const std::size_t m = frames.size();
  if (m == 0) return;

  // Helm program: zig-zag, then a turning circle, alternating circle direction.
  std::vector<double> rudder(m);
  std::vector<bool> in_circle(m, false);
  const std::size_t zig = static_cast<std::size_t>(std::max(1, p.maneuver_zigzag_frames));
  const std::size_t circle = static_cast<std::size_t>(std::max(1, p.maneuver_circle_frames));
  const std::size_t half = static_cast<std::size_t>(std::max(1, p.maneuver_zigzag_half_period_frames));
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t cycle = j / (zig + circle);
    const std::size_t in_cycle = j % (zig + circle);
    if (in_cycle < zig) {
      rudder[j] = ((in_cycle / half) % 2 == 0 ? 1.0 : -1.0) * p.maneuver_zigzag_rudder;
    } else {
      rudder[j] = (cycle % 2 == 0 ? 1.0 : -1.0) * p.maneuver_rudder;
      in_circle[j] = true;
    }
  }

  // Turn-rate response lags the helm.
  const double alpha = 1.0 - std::exp(-dt / p.maneuver_response_seconds);
  std::vector<double> extra_rot(m);
  double e = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    e += (p.maneuver_rot_per_rudder * rudder[j] - e) * alpha;
    extra_rot[j] = e;
  }
  // Close the heading excursion on a whole number of turns so the heading
  // rejoins the undisturbed track after the session.
  const double step = dt / 60.0;
  double total = 0.0;
  for (double r : extra_rot) total += r * step;
  const double target = std::round(total / kTwoPi) * kTwoPi;
  const double shift = (target - total) / (static_cast<double>(m) * step);
  for (double& r : extra_rot) r += shift;

  double offset = 0.0;
  double speed = 0.0;
  const double speed_alpha = 1.0 - std::exp(-dt / p.maneuver_sog_response_seconds);
  for (std::size_t j = 0; j < m; ++j) {
    SignalFrame& f = *frames[j];
    offset += extra_rot[j] * step;
    if (auto& h = f[Signal::HeadingTrue]) h = wrap_angle(*h + offset);
    if (auto& rot = f[Signal::RateOfTurn]) rot = *rot + extra_rot[j];
    // During the zig-zag the helm tracks the commanded swing rate the way it
    // does in ordinary turns; the circle is held hard over.
    if (auto& rud = f[Signal::RudderAngle]) rud = *rud + (in_circle[j] ? rudder[j] : p.rudder_per_rot * extra_rot[j]);
    if (auto& sog = f[Signal::Sog]) {
      // Hard-over turns bleed speed; the zig-zag runs at trial speed.
      double target = p.sog_per_rpm * p.maneuver_trial_rpm;
      if (in_circle[j]) {
        const double loss = p.maneuver_sog_rudder_loss * std::abs(rudder[j]) / p.maneuver_rudder;
        target = *sog * (p.maneuver_sog_fraction - loss);
      }
      if (j == 0) speed = *sog;
      speed += (target - speed) * speed_alpha;
      sog = std::max(0.0, speed + p.sog_noise * rng.normal());
    }
    if (!in_circle[j]) {
      if (auto& port = f[Signal::PortRpm]) port = p.maneuver_trial_rpm + p.rpm_noise * rng.normal();
      if (auto& stbd = f[Signal::StbdRpm]) stbd = p.maneuver_trial_rpm + p.rpm_noise * rng.normal();
    }
  }
}

std::size_t frame_count(const ScenarioSpec& spec) {
  return static_cast<std::size_t>(spec.duration_seconds / spec.cadence_seconds);
}

}  // namespace

std::string_view anomaly_kind_name(AnomalyKind kind) noexcept {
  switch (kind) {
    case AnomalyKind::PropellerFailure:
      return "propeller_failure";
    case AnomalyKind::StressManeuver:
      return "stress_maneuver";
  }
  return "unknown";
}

void validate_windows(const ScenarioSpec& spec) {
  std::vector<AnomalyWindow> sorted = spec.anomaly_windows;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.start_offset_seconds < b.start_offset_seconds; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& w = sorted[i];
    if (w.start_offset_seconds < 0 || w.length_seconds <= 0 ||
        w.start_offset_seconds + w.length_seconds > spec.duration_seconds) {
      throw SpecError("anomaly window at offset " + std::to_string(w.start_offset_seconds) +
                      "s lies outside the scenario duration");
    }
    if (i > 0 && sorted[i - 1].start_offset_seconds + sorted[i - 1].length_seconds > w.start_offset_seconds) {
      throw SpecError("anomaly windows overlap at offset " + std::to_string(w.start_offset_seconds) + "s");
    }
  }
}

LabeledSeries generate_normal(const ScenarioSpec& spec, const VesselProfile& p) {
  if (spec.cadence_seconds <= 0) throw ParameterError("cadence_seconds must be positive");
  if (spec.duration_seconds <= 0 || frame_count(spec) == 0) {
    throw EmptyInputError("scenario duration is zero");
  }
  const std::size_t n = frame_count(spec);
  const double dt = spec.cadence_seconds;
  Rng rng(spec.seed + seed_offset::kSynth);

  double rpm_dev = p.rpm_band_sigma * rng.normal();
  double port_drift = p.batt_drift_sigma * rng.normal();
  double stbd_drift = p.batt_drift_sigma * rng.normal();
  double heading = rng.uniform(0.0, kTwoPi);
  double wander = p.heading_wander_sigma * rng.normal();
  double next_turn_in = rng.uniform(p.course_change_min_interval_s, p.course_change_max_interval_s);
  std::deque<double> turn;

  LabeledSeries out;
  out.series.cadence_seconds = spec.cadence_seconds;
  out.series.frames.resize(n);
  out.truth.assign(n, false);

  for (std::size_t k = 0; k < n; ++k) {
    SignalFrame& f = out.series.frames[k];
    f.timestamp = spec.start + std::chrono::seconds{static_cast<std::int64_t>(k) * spec.cadence_seconds};

    rpm_dev = ou_step(rpm_dev, p.rpm_band_sigma, p.rpm_tau_seconds, dt, rng);
    port_drift = ou_step(port_drift, p.batt_drift_sigma, p.batt_tau_seconds, dt, rng);
    stbd_drift = ou_step(stbd_drift, p.batt_drift_sigma, p.batt_tau_seconds, dt, rng);

    switch (activity_at(spec.schedule, f.timestamp)) {
      case Activity::Active: {
        wander = ou_step(wander, p.heading_wander_sigma, p.heading_wander_tau_seconds, dt, rng);
        if (turn.empty()) {
          next_turn_in -= dt;
          if (next_turn_in <= 0.0) {
            const double angle = rng.uniform(std::numbers::pi / 3.0, std::numbers::pi);
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const double rate = rng.uniform(p.course_change_min_rate, p.course_change_max_rate);
            const double per_frame = rate * dt / 60.0;
            const double hold = std::max(0.0, std::round((angle - 2.0 * per_frame) / per_frame));
            for (double r : {1.0 / 3.0, 2.0 / 3.0}) turn.push_back(sign * rate * r);
            for (int i = 0; i < static_cast<int>(hold); ++i) turn.push_back(sign * rate);
            for (double r : {2.0 / 3.0, 1.0 / 3.0}) turn.push_back(sign * rate * r);
            next_turn_in = rng.uniform(p.course_change_min_interval_s, p.course_change_max_interval_s);
          }
        }
        double rot = wander;
        if (!turn.empty()) {
          rot += turn.front();
          turn.pop_front();
        }
        heading = wrap_angle(heading + rot * dt / 60.0);
        const double setpoint = p.cruise_rpm + rpm_dev;
        f[Signal::PortRpm] = setpoint + p.rpm_noise * rng.normal();
        f[Signal::StbdRpm] = setpoint + p.rpm_noise * rng.normal();
        f[Signal::PortBattV] = p.port_batt_v + port_drift + p.batt_noise * rng.normal();
        f[Signal::StbdBattV] = p.stbd_batt_v + stbd_drift + p.batt_noise * rng.normal();
        f[Signal::HeadingTrue] = heading;
        f[Signal::RateOfTurn] = rot;
        f[Signal::Sog] = std::max(0.0, p.sog_per_rpm * setpoint + p.sog_noise * rng.normal());
        f[Signal::RudderAngle] = p.rudder_per_rot * rot + p.rudder_noise * rng.normal();
        break;
      }
      case Activity::Moored:
        f[Signal::PortRpm] = 0.0;
        f[Signal::StbdRpm] = 0.0;
        f[Signal::HeadingTrue] = heading;
        f[Signal::RateOfTurn] = 0.0;
        f[Signal::Sog] = 0.01 * rng.uniform();
        f[Signal::RudderAngle] = 0.0;
        break;
      case Activity::Off:
        break;
    }
  }
  return out;
}

LabeledSeries inject_anomalies(const LabeledSeries& base, const ScenarioSpec& spec, const VesselProfile& p) {
  validate_windows(spec);
  LabeledSeries out = base;
  const std::int64_t dt = spec.cadence_seconds;
  for (std::size_t wi = 0; wi < spec.anomaly_windows.size(); ++wi) {
    const auto& w = spec.anomaly_windows[wi];
    Rng rng(spec.seed + 7919ULL * (wi + 1));
    const std::int64_t first = (w.start_offset_seconds + dt - 1) / dt;
    const std::int64_t last = (w.start_offset_seconds + w.length_seconds + dt - 1) / dt;
    std::vector<SignalFrame*> frames;
    for (std::int64_t k = first; k < last && k < static_cast<std::int64_t>(out.series.size()); ++k) {
      auto& f = out.series.frames[static_cast<std::size_t>(k)];
      if (!is_active_frame(f)) continue;
      frames.push_back(&f);
      out.truth[static_cast<std::size_t>(k)] = true;
    }
    if (w.kind == AnomalyKind::PropellerFailure) {
      apply_propeller_failure(frames, p, rng);
    } else {
      apply_stress_maneuver(frames, static_cast<double>(dt), p, rng);
    }
  }
  return out;
}

LabeledSeries generate_scenario(const ScenarioSpec& spec, const VesselProfile& profile) {
  validate_windows(spec);
  return inject_anomalies(generate_normal(spec, profile), spec, profile);
}

std::string format_truth(const LabeledSeries& labeled) {
  std::string out = "timestamp,is_anomaly\n";
  for (std::size_t i = 0; i < labeled.series.size(); ++i) {
    out += format_timestamp(labeled.series.frames[i].timestamp);
    out += labeled.truth[i] ? ",1\n" : ",0\n";
  }
  return out;
}

std::vector<TruthEntry> parse_truth(std::string_view csv_text) {
  std::vector<TruthEntry> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < csv_text.size()) {
    std::size_t eol = csv_text.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv_text.size();
    std::string_view line = csv_text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != "timestamp,is_anomaly") throw SchemaError("truth header must be 'timestamp,is_anomaly'");
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError(line_no, "expected two cells");
    const auto ts = parse_timestamp(line.substr(0, comma));
    if (!ts) throw ParseError(line_no, "malformed timestamp");
    const std::string_view flag = line.substr(comma + 1);
    if (flag != "0" && flag != "1") throw ParseError(line_no, "is_anomaly must be 0 or 1");
    out.push_back({*ts, flag == "1"});
  }
  if (line_no == 0) throw SchemaError("missing truth header");
  return out;
}

Benchmark benchmark_scenarios(std::uint64_t seed) {
  constexpr std::int64_t kDay = 86400;
  Benchmark b;
  b.train.duration_seconds = 3 * kDay;
  b.train.seed = seed;
  b.test.duration_seconds = kDay;
  b.test.seed = seed + seed_offset::kBenchmarkTest;
  b.test.start = b.train.start + std::chrono::seconds{3 * kDay};
  b.test.anomaly_windows = {
      {8 * 3600, 2 * 3600, AnomalyKind::PropellerFailure},
      {14 * 3600, 2 * 3600, AnomalyKind::StressManeuver},
  };
  return b;
}

}  // namespace vad
