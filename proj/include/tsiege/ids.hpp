#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tsiege/canbus.hpp"
#include "tsiege/firmware.hpp"
#include "tsiege/plant.hpp"

namespace tsiege {

enum class MitigationAction { LimpMode, CommBufferReset, Halt, PowerDerate };

inline const char* to_string(MitigationAction a) {
  switch (a) {
    case MitigationAction::LimpMode: return "limp_mode";
    case MitigationAction::CommBufferReset: return "comm_buffer_reset";
    case MitigationAction::Halt: return "halt";
    case MitigationAction::PowerDerate: return "power_derate";
  }
  return "?";
}

enum class IdsRule { SensorDeviation, FirmwareIntegrity, CanTiming, PowerCrossValidation };

inline const char* to_string(IdsRule r) {
  switch (r) {
    case IdsRule::SensorDeviation: return "sensor_deviation";
    case IdsRule::FirmwareIntegrity: return "firmware_integrity";
    case IdsRule::CanTiming: return "can_timing";
    case IdsRule::PowerCrossValidation: return "power_cross_validation";
  }
  return "?";
}

struct IdsConfig {
  bool enabled = true;
  double sensor_deviation_threshold = 0.10;  // fractional change that fires rule A
  double deviation_window_s = 0.100;         // s
  double can_period_nominal_s = 0.001;       // expected control-frame period
  double can_rate_factor = 3.0;              // observed/nominal rate multiplier that fires
  double power_mismatch_threshold = 0.25;    // fractional mech/elec power mismatch
  double runtime_hash_interval_s = 0.050;    // s between firmware re-checks
  double arming_time_s = 3.0;                // rules stay quiet until the loop has settled

  // Full-scale values the relative-floor terms are taken against.
  double torque_full_scale_nm = 100.0;
  double speed_full_scale_rad_s = 200.0;
  double power_full_scale_w = 80000.0;

  bool valid() const {
    return sensor_deviation_threshold > 0 && deviation_window_s > 0 &&
           can_period_nominal_s > 0 && can_rate_factor > 0 && power_mismatch_threshold > 0 &&
           runtime_hash_interval_s > 0 && arming_time_s >= 0 && torque_full_scale_nm > 0 &&
           speed_full_scale_rad_s > 0 && power_full_scale_w > 0;
  }
};

struct IdsEvent {
  IdsRule rule = IdsRule::SensorDeviation;
  double detected_at = 0.0;
  double trigger_value = 0.0;
  MitigationAction recommended_action = MitigationAction::LimpMode;
};

struct TimedReadings {
  double time = 0.0;
  SensorReadings readings;
};

namespace detail {

// Newest history entry at or before `t`; nullptr when history does not reach
// that far back.
inline const TimedReadings* at_or_before(const std::deque<TimedReadings>& h, double t) {
  const TimedReadings* best = nullptr;
  for (const auto& e : h) {
    if (e.time <= t) best = &e;
    else break;
  }
  return best;
}

inline double rel_change(double now_v, double past_v, double floor_v) {
  return std::abs(now_v - past_v) / std::max(std::abs(past_v), floor_v);
}

}  // namespace detail

// Rule A: two-point deviation check on the torque and speed channels. The
// newest reading is compared against the reading one full window ago; a
// slow ramp spread over several windows slips through (the rule's declared
// blind spot).
inline std::optional<IdsEvent> check_sensor_deviation(const IdsConfig& cfg,
                                                      const std::deque<TimedReadings>& history,
                                                      double now) {
  if (history.empty()) return std::nullopt;
  const TimedReadings* past = detail::at_or_before(history, now - cfg.deviation_window_s);
  if (!past) return std::nullopt;  // history does not cover the window yet
  const SensorReadings& cur = history.back().readings;

  const double torque_dev = detail::rel_change(cur.torque_nm, past->readings.torque_nm,
                                               0.01 * cfg.torque_full_scale_nm);
  const double speed_dev = detail::rel_change(cur.speed_rad_s, past->readings.speed_rad_s,
                                              0.01 * cfg.speed_full_scale_rad_s);
  const double worst = std::max(torque_dev, speed_dev);
  if (worst > cfg.sensor_deviation_threshold) {
    return IdsEvent{IdsRule::SensorDeviation, now, worst, MitigationAction::LimpMode};
  }
  return std::nullopt;
}

// Rule C inputs: delivery instants seen on the bus, plus the most recent
// control-frame delivery.
struct CanTimingInputs {
  const std::deque<double>* delivery_times = nullptr;  // all frames, time-ordered
  double last_control_delivery = -std::numeric_limits<double>::infinity();
};

// Rule C: message-period analysis. Fires when the observed frame rate over
// the last ten nominal periods exceeds the configured multiple of the nominal
// rate, or when the control-frame gap stretches past three nominal periods
// (the stand-in for delayed acknowledgements in a bus model without acks).
inline std::optional<IdsEvent> check_can_timing(const IdsConfig& cfg, const CanTimingInputs& in,
                                                double now) {
  const double window = 10.0 * cfg.can_period_nominal_s;
  if (now < window) return std::nullopt;

  if (in.delivery_times) {
    std::size_t count = 0;
    for (auto it = in.delivery_times->rbegin(); it != in.delivery_times->rend(); ++it) {
      if (*it <= now - window) break;
      ++count;
    }
    const double nominal_rate = 1.0 / cfg.can_period_nominal_s;
    const double observed_rate = static_cast<double>(count) / window;
    if (observed_rate > cfg.can_rate_factor * nominal_rate) {
      return IdsEvent{IdsRule::CanTiming, now, observed_rate / nominal_rate,
                      MitigationAction::CommBufferReset};
    }
  }
  const double gap = now - in.last_control_delivery;
  if (std::isfinite(in.last_control_delivery) && gap > 3.0 * cfg.can_period_nominal_s) {
    return IdsEvent{IdsRule::CanTiming, now, gap / cfg.can_period_nominal_s,
                    MitigationAction::CommBufferReset};
  }
  return std::nullopt;
}

// Rule D: cross-validation of the mechanical power estimate (torque * speed)
// against the electrical one (dc voltage * dc current). A spoofed speed or
// torque channel moves one estimate and not the other.
inline std::optional<IdsEvent> check_power_consistency(const IdsConfig& cfg,
                                                       const SensorReadings& r, double now) {
  const double p_mech = r.torque_nm * r.speed_rad_s;
  const double p_elec = r.dc_voltage_v * r.dc_current_a;
  const double floor_w = 0.01 * cfg.power_full_scale_w;
  const double mismatch = std::abs(p_mech - p_elec) / std::max(p_elec, floor_w);
  if (mismatch > cfg.power_mismatch_threshold) {
    return IdsEvent{IdsRule::PowerCrossValidation, now, mismatch, MitigationAction::PowerDerate};
  }
  return std::nullopt;
}

// Everything ids_step needs from the surrounding tick.
struct IdsInputs {
  double now = 0.0;
  const std::deque<TimedReadings>* history = nullptr;
  CanTimingInputs can;
  const FirmwareImage* image = nullptr;
  const Digest* trusted_baseline = nullptr;
  // While a mitigation is engaged the episode is still open: latched rules do
  // not re-arm, which keeps the attack-release transient from double-firing.
  bool mitigation_engaged = false;
};

// Latching and scheduling state. A rule fires once per attack episode and
// re-arms only after its condition has read normal for a full release window.
struct IdsState {
  static constexpr double kLatchRelease = 0.5;  // s of normal readings to re-arm

  struct RuleLatch {
    bool latched = false;
    double normal_since = 0.0;
  };
  RuleLatch latch[4];
  double last_hash_check = -std::numeric_limits<double>::infinity();
  bool integrity_latched = false;
};

namespace detail {

inline void update_latch(IdsState::RuleLatch& l, bool condition, double now,
                         bool fired_this_tick, bool release_allowed) {
  if (fired_this_tick) {
    l.latched = true;
    l.normal_since = now;
    return;
  }
  if (!l.latched) return;
  if (condition || !release_allowed) {
    l.normal_since = now;
  } else if (now - l.normal_since >= IdsState::kLatchRelease) {
    l.latched = false;
  }
}

}  // namespace detail

// Runs every applicable rule once per control period and returns the events
// that fired. Disabled or still-arming detectors return nothing.
inline std::vector<IdsEvent> ids_step(const IdsConfig& cfg, IdsState& st, const IdsInputs& in) {
  std::vector<IdsEvent> events;
  if (!cfg.enabled) return events;
  if (in.now < cfg.arming_time_s) return events;

  const bool release = !in.mitigation_engaged;

  if (in.history) {
    const auto ev = check_sensor_deviation(cfg, *in.history, in.now);
    auto& l = st.latch[static_cast<int>(IdsRule::SensorDeviation)];
    const bool fired = ev.has_value() && !l.latched;
    if (fired) events.push_back(*ev);
    detail::update_latch(l, ev.has_value(), in.now, fired, release);
  }

  if (in.image && in.trusted_baseline) {
    const auto v = runtime_integrity_check(*in.image, *in.trusted_baseline, in.now,
                                           st.last_hash_check, cfg.runtime_hash_interval_s);
    if (in.now - st.last_hash_check >= cfg.runtime_hash_interval_s) st.last_hash_check = in.now;
    if (v && !st.integrity_latched) {
      st.integrity_latched = true;  // one boot-critical event; never re-arms
      events.push_back(IdsEvent{IdsRule::FirmwareIntegrity, v->detected_at,
                                static_cast<double>(v->block_index), MitigationAction::Halt});
    }
  }

  {
    const auto ev = check_can_timing(cfg, in.can, in.now);
    auto& l = st.latch[static_cast<int>(IdsRule::CanTiming)];
    const bool fired = ev.has_value() && !l.latched;
    if (fired) events.push_back(*ev);
    detail::update_latch(l, ev.has_value(), in.now, fired, release);
  }

  if (in.history && !in.history->empty()) {
    const auto ev = check_power_consistency(cfg, in.history->back().readings, in.now);
    auto& l = st.latch[static_cast<int>(IdsRule::PowerCrossValidation)];
    const bool fired = ev.has_value() && !l.latched;
    if (fired) events.push_back(*ev);
    detail::update_latch(l, ev.has_value(), in.now, fired, release);
  }

  return events;
}

}  // namespace tsiege
