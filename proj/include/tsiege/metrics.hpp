#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "tsiege/attack.hpp"
#include "tsiege/canbus.hpp"
#include "tsiege/controller.hpp"
#include "tsiege/ids.hpp"

namespace tsiege {

struct TraceSample {
  double time = 0.0;
  double commanded_torque = 0.0;  // driver demand, N*m
  double measured_torque = 0.0;   // true plant torque, N*m
  double rotor_speed = 0.0;
  double peak_line_voltage = 0.0;
  ControllerMode controller_mode = ControllerMode::Normal;
  double command_issue_time = 0.0;
  double command_actuation_time = 0.0;
  double applied_torque_request = 0.0;  // modulation decoded at the inverter, N*m
  bool gate_enabled = false;
};

struct FrameRecord {
  CanFrame frame;
  bool dropped = false;
};

// Full record of one run; every metric is a pure function of this.
struct RunTrace {
  std::vector<TraceSample> samples;
  std::vector<IdsEvent> events;
  std::optional<AttackScenario> attack;
  std::vector<FrameRecord> frames;
  std::uint64_t seed = 0;
  double control_period = 0.001;
  double max_torque = 100.0;
  double duration = 0.0;
  double voltage_safe_envelope = 420.0;
  bool boot_blocked = false;
  std::uint16_t command_frame_id = 0x110;
  std::uint16_t emergency_frame_id = 0x000;
  std::string scenario_id;
  bool ids_enabled = false;
};

struct UndefinedMetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// [start, end) of the attack phase. Firmware tampering persists once applied,
// so its window runs to the end of the trace (and covers the whole run when
// applied at boot).
inline std::optional<std::pair<double, double>> attack_window(const RunTrace& t) {
  if (!t.attack) return std::nullopt;
  const AttackScenario& a = *t.attack;
  if (a.kind == AttackKind::FirmwareTamper) {
    const double begin = a.tamper.at_boot ? 0.0 : a.start_time;
    return std::make_pair(begin, t.duration + 1e-12);
  }
  return std::make_pair(a.start_time, a.start_time + a.duration);
}

inline bool in_window(double time, const std::pair<double, double>& w) {
  return time >= w.first && time < w.second;
}

// Worst-case relative torque error over the attack phase, percent.
inline double torque_deviation(const RunTrace& t) {
  const auto w = attack_window(t);
  if (!w) return 0.0;
  double worst = 0.0;
  bool commanded_nonzero = false;
  for (const TraceSample& s : t.samples) {
    if (!in_window(s.time, *w)) continue;
    if (s.commanded_torque != 0.0) {
      commanded_nonzero = true;
      worst = std::max(worst,
                       std::abs(s.measured_torque - s.commanded_torque) /
                           std::abs(s.commanded_torque));
    }
  }
  if (!commanded_nonzero)
    throw UndefinedMetric("torque_deviation: commanded torque is zero throughout the attack");
  return 100.0 * worst;
}

struct LatencyReport {
  double baseline_ms = 0.0;
  double during_ms = 0.0;
  double increase_ms = 0.0;
};

// Mean command transit time (issue to actuation) per phase; frames are
// assigned to phases by their issue instant.
inline LatencyReport response_latency(const RunTrace& t) {
  const auto w = attack_window(t);
  double base_sum = 0.0, during_sum = 0.0;
  std::size_t base_n = 0, during_n = 0;
  for (const FrameRecord& fr : t.frames) {
    const CanFrame& f = fr.frame;
    if (fr.dropped || !f.delivery_time) continue;
    if (f.id != t.command_frame_id && f.id != t.emergency_frame_id) continue;
    const double latency = *f.delivery_time - f.enqueue_time;
    if (w && in_window(f.enqueue_time, *w)) {
      during_sum += latency;
      during_n++;
    } else if (!w || f.enqueue_time < w->first) {
      base_sum += latency;
      base_n++;
    }
  }
  LatencyReport r;
  r.baseline_ms = base_n ? 1000.0 * base_sum / static_cast<double>(base_n) : 0.0;
  r.during_ms = during_n ? 1000.0 * during_sum / static_cast<double>(during_n) : r.baseline_ms;
  r.increase_ms = std::max(0.0, r.during_ms - r.baseline_ms);
  return r;
}

struct VoltageReport {
  double exceedance_v = 0.0;  // above the safe envelope; 0 when inside it
  double peak_v = 0.0;        // absolute worst peak over the run
};

inline VoltageReport voltage_anomaly(const RunTrace& t) {
  VoltageReport r;
  for (const TraceSample& s : t.samples) r.peak_v = std::max(r.peak_v, s.peak_line_voltage);
  r.exceedance_v = std::max(0.0, r.peak_v - t.voltage_safe_envelope);
  return r;
}

// Total time with propulsion absent: controller halted, or delivered torque
// below 2% of rated while at least 20% is being commanded.
inline double downtime(const RunTrace& t) {
  double total = 0.0;
  for (const TraceSample& s : t.samples) {
    const bool halted = s.controller_mode == ControllerMode::Halted;
    const bool absent = std::abs(s.measured_torque) < 0.02 * t.max_torque &&
                        s.commanded_torque >= 0.20 * t.max_torque;
    if (halted || absent) total += t.control_period;
  }
  return total;
}

struct DetectionReport {
  std::optional<double> ms;  // first event relative to attack onset
  bool at_boot = false;
};

inline DetectionReport detection_time(const RunTrace& t) {
  DetectionReport r;
  if (!t.attack) return r;
  if (t.boot_blocked) {
    r.at_boot = true;
    return r;
  }
  if (t.events.empty()) return r;
  double first = t.events.front().detected_at;
  for (const IdsEvent& e : t.events) first = std::min(first, e.detected_at);
  r.ms = 1000.0 * (first - t.attack->start_time);
  return r;
}

inline int false_positive_count(const RunTrace& t) {
  const auto w = attack_window(t);
  int n = 0;
  for (const IdsEvent& e : t.events) {
    if (!w || !in_window(e.detected_at, *w)) n++;
  }
  return n;
}

struct MetricsReport {
  double torque_deviation_pct = 0.0;
  double latency_increase_ms = 0.0;
  double voltage_anomaly_v = 0.0;
  double peak_line_voltage_v = 0.0;
  double downtime_s = 0.0;
  std::optional<double> ids_detection_ms;
  bool detected_at_boot = false;
  std::optional<MitigationAction> mitigation;
  int false_positive_count = 0;
  bool boot_blocked = false;
};

inline MetricsReport build_report(const RunTrace& t) {
  MetricsReport r;
  r.torque_deviation_pct = t.attack ? torque_deviation(t) : 0.0;
  r.latency_increase_ms = response_latency(t).increase_ms;
  const VoltageReport v = voltage_anomaly(t);
  r.voltage_anomaly_v = v.exceedance_v;
  r.peak_line_voltage_v = v.peak_v;
  r.downtime_s = downtime(t);
  const DetectionReport d = detection_time(t);
  r.ids_detection_ms = d.ms;
  r.detected_at_boot = d.at_boot;
  if (!t.events.empty()) {
    // Ties at equal timestamps break on rule order so the result does not
    // depend on event-log permutation.
    const IdsEvent* first = &t.events.front();
    for (const IdsEvent& e : t.events) {
      if (std::tie(e.detected_at, e.rule) < std::tie(first->detected_at, first->rule)) first = &e;
    }
    r.mitigation = first->recommended_action;
  }
  r.false_positive_count = false_positive_count(t);
  r.boot_blocked = t.boot_blocked;
  return r;
}

}  // namespace tsiege
