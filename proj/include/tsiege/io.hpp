#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsiege/metrics.hpp"
#include "tsiege/version.hpp"

namespace tsiege {

inline constexpr const char* kTraceSchemaLine = "#SCHEMA traction-siege-trace 1";

namespace detail {

// %.17g round-trips doubles exactly, which the report/trace cross-check
// relies on.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string hex_bytes(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0x0f]);
  }
  return s;
}

}  // namespace detail

inline std::string trace_to_csv(const RunTrace& t) {
  std::string out;
  out += kTraceSchemaLine;
  out += "\n";
  out +=
      "time_s,commanded_torque_nm,measured_torque_nm,rotor_speed_rad_s,peak_line_voltage_v,"
      "controller_mode,command_issue_time_s,command_actuation_time_s,applied_torque_request_nm,"
      "gate_enabled\n";
  for (const TraceSample& s : t.samples) {
    out += detail::fmt(s.time) + "," + detail::fmt(s.commanded_torque) + "," +
           detail::fmt(s.measured_torque) + "," + detail::fmt(s.rotor_speed) + "," +
           detail::fmt(s.peak_line_voltage) + "," + to_string(s.controller_mode) + "," +
           detail::fmt(s.command_issue_time) + "," + detail::fmt(s.command_actuation_time) + "," +
           detail::fmt(s.applied_torque_request) + "," + (s.gate_enabled ? "1" : "0") + "\n";
  }
  out += "#EVENTS\n";
  out += "detected_at_s,rule,trigger_value,action\n";
  for (const IdsEvent& e : t.events) {
    out += detail::fmt(e.detected_at) + "," + to_string(e.rule) + "," +
           detail::fmt(e.trigger_value) + "," + to_string(e.recommended_action) + "\n";
  }
  return out;
}

inline void write_trace_csv(const RunTrace& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << trace_to_csv(t);
}

// One row per delivered or dropped frame.
inline void write_frames_csv(const RunTrace& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "time_s,id_hex,source,payload_hex,latency_ms,dropped\n";
  for (const FrameRecord& fr : t.frames) {
    const CanFrame& frame = fr.frame;
    const double time = fr.dropped ? frame.enqueue_time : *frame.delivery_time;
    const double latency_ms =
        fr.dropped ? 0.0 : 1000.0 * (*frame.delivery_time - frame.enqueue_time);
    char idbuf[8];
    std::snprintf(idbuf, sizeof(idbuf), "0x%03x", frame.id);
    f << detail::fmt(time) << "," << idbuf << "," << frame.source_node << ","
      << detail::hex_bytes(frame.payload) << "," << detail::fmt(latency_ms) << ","
      << (fr.dropped ? "1" : "0") << "\n";
  }
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["schema_version"] = schema_version;
  j["torque_deviation_pct"] = r.torque_deviation_pct;
  j["latency_increase_ms"] = r.latency_increase_ms;
  j["voltage_anomaly_v"] = r.voltage_anomaly_v;
  j["peak_line_voltage_v"] = r.peak_line_voltage_v;
  j["downtime_s"] = r.downtime_s;
  if (r.detected_at_boot) {
    j["ids_detection_ms"] = "at-boot";
  } else if (r.ids_detection_ms) {
    j["ids_detection_ms"] = *r.ids_detection_ms;
  } else {
    j["ids_detection_ms"] = nullptr;
  }
  if (r.mitigation) {
    j["mitigation"] = to_string(*r.mitigation);
  } else if (r.boot_blocked) {
    j["mitigation"] = "startup_halted";
  } else {
    j["mitigation"] = nullptr;
  }
  j["false_positive_count"] = r.false_positive_count;
  j["boot_blocked"] = r.boot_blocked;
  return j;
}

inline void write_report_json(const MetricsReport& r, const RunTrace& t, const std::string& path) {
  nlohmann::json j = report_to_json(r);
  j["scenario_id"] = t.scenario_id;
  j["seed"] = t.seed;
  j["ids_enabled"] = t.ids_enabled;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << j.dump(2) << "\n";
}

// Minimal parsed view of a trace file, enough to recompute the sample-based
// metrics and feed the plot-data exporter.
struct ParsedTrace {
  std::vector<TraceSample> samples;
  std::vector<IdsEvent> events;
};

inline ControllerMode controller_mode_from(const std::string& s) {
  if (s == "normal") return ControllerMode::Normal;
  if (s == "limp") return ControllerMode::Limp;
  if (s == "safe_derate") return ControllerMode::SafeDerate;
  if (s == "halted") return ControllerMode::Halted;
  if (s == "comm_buffer_reset") return ControllerMode::CommBufferReset;
  throw std::runtime_error("unknown controller mode: " + s);
}

inline IdsRule ids_rule_from(const std::string& s) {
  if (s == "sensor_deviation") return IdsRule::SensorDeviation;
  if (s == "firmware_integrity") return IdsRule::FirmwareIntegrity;
  if (s == "can_timing") return IdsRule::CanTiming;
  if (s == "power_cross_validation") return IdsRule::PowerCrossValidation;
  throw std::runtime_error("unknown ids rule: " + s);
}

inline MitigationAction mitigation_from(const std::string& s) {
  if (s == "limp_mode") return MitigationAction::LimpMode;
  if (s == "comm_buffer_reset") return MitigationAction::CommBufferReset;
  if (s == "halt") return MitigationAction::Halt;
  if (s == "power_derate") return MitigationAction::PowerDerate;
  throw std::runtime_error("unknown mitigation: " + s);
}

namespace detail {

// strtod-based: accepts the full double range including subnormals.
inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::runtime_error("bad numeric cell: " + s);
  return v;
}

}  // namespace detail

inline ParsedTrace read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trace: " + path);
  std::string line;
  if (!std::getline(f, line) || line != kTraceSchemaLine) {
    throw std::runtime_error("trace schema mismatch in " + path);
  }
  if (!std::getline(f, line)) throw std::runtime_error("trace missing header: " + path);

  ParsedTrace out;
  bool in_events = false;
  bool events_header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line == "#EVENTS") {
      in_events = true;
      continue;
    }
    if (in_events && !events_header_seen) {
      events_header_seen = true;  // column header of the events section
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!in_events) {
      if (cells.size() != 10) throw std::runtime_error("bad trace row in " + path);
      TraceSample s;
      s.time = detail::parse_double(cells[0]);
      s.commanded_torque = detail::parse_double(cells[1]);
      s.measured_torque = detail::parse_double(cells[2]);
      s.rotor_speed = detail::parse_double(cells[3]);
      s.peak_line_voltage = detail::parse_double(cells[4]);
      s.controller_mode = controller_mode_from(cells[5]);
      s.command_issue_time = detail::parse_double(cells[6]);
      s.command_actuation_time = detail::parse_double(cells[7]);
      s.applied_torque_request = detail::parse_double(cells[8]);
      s.gate_enabled = cells[9] == "1";
      out.samples.push_back(s);
    } else {
      if (cells.size() != 4) throw std::runtime_error("bad event row in " + path);
      IdsEvent e;
      e.detected_at = detail::parse_double(cells[0]);
      e.rule = ids_rule_from(cells[1]);
      e.trigger_value = detail::parse_double(cells[2]);
      e.recommended_action = mitigation_from(cells[3]);
      out.events.push_back(e);
    }
  }
  return out;
}

}  // namespace tsiege
