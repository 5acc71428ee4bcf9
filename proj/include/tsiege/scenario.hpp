#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsiege/harness.hpp"
#include "tsiege/version.hpp"

namespace tsiege {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

// Strict object reader: every key must be consumed, unknown keys are errors.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ScenarioError(path_ + ": missing key '" + key + "'");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    try {
      return at(key).get<T>();
    } catch (const json::exception& e) {
      throw ScenarioError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return get<T>(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ScenarioError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<std::uint8_t> bytes_from_hex(const std::string& hex, const std::string& path) {
  if (hex.size() % 2 != 0) throw ScenarioError(path + ": hex string has odd length");
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ScenarioError(path + ": invalid hex digit");
  };
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  }
  return out;
}

inline AttackScenario attack_from_json(const json& j) {
  StrictObject o(j, "attack");
  AttackScenario a;
  const std::string kind = o.get<std::string>("kind");
  a.start_time = o.get<double>("start_s");
  if (kind == "sensor_spoofing") {
    a.kind = AttackKind::SensorSpoofing;
    a.duration = o.get<double>("duration_s");
    StrictObject p(o.at("params"), "attack.params");
    a.spoof.multiplier = p.get<double>("multiplier");
    a.spoof.additive_offset_nm = p.get_or<double>("additive_offset_nm", 0.0);
    p.finish();
  } else if (kind == "dos_flood") {
    a.kind = AttackKind::DoSFlood;
    a.duration = o.get<double>("duration_s");
    StrictObject p(o.at("params"), "attack.params");
    a.flood.flood_id = static_cast<std::uint16_t>(p.get<int>("flood_id"));
    a.flood.rate_fps = p.get<double>("rate_fps");
    a.flood.payload = bytes_from_hex(p.get_or<std::string>("payload_hex", "0000000000000000"),
                                     "attack.params.payload_hex");
    a.flood.attacker_node = p.get_or<int>("attacker_node", 9);
    p.finish();
  } else if (kind == "firmware_tamper") {
    a.kind = AttackKind::FirmwareTamper;
    a.duration = o.get_or<double>("duration_s", 0.0);
    StrictObject p(o.at("params"), "attack.params");
    a.tamper.block_index = p.get<int>("block_index");
    a.tamper.byte_offset = p.get<int>("byte_offset");
    a.tamper.xor_mask = static_cast<std::uint8_t>(p.get<int>("xor_mask"));
    a.tamper.at_boot = p.get<bool>("at_boot");
    p.finish();
  } else if (kind == "data_injection") {
    a.kind = AttackKind::DataInjection;
    a.duration = o.get<double>("duration_s");
    StrictObject p(o.at("params"), "attack.params");
    a.inject.injected_value_rad_s = p.get<double>("injected_value_rad_s");
    p.finish();
  } else {
    throw ScenarioError("attack.kind: unknown kind '" + kind + "'");
  }
  o.finish();
  return a;
}

}  // namespace detail

inline SimConfig scenario_from_json(const nlohmann::json& j) {
  detail::StrictObject o(j, "scenario");

  const int version = o.get<int>("schema_version");
  if (version != schema_version) {
    throw ScenarioError("unsupported schema_version " + std::to_string(version) +
                        " (this tool supports " + std::to_string(schema_version) + ")");
  }

  SimConfig cfg;
  cfg.scenario_id = o.get<std::string>("id");
  cfg.duration_s = o.get<double>("duration_s");
  cfg.seed = o.get<std::uint64_t>("seed");

  {
    detail::StrictObject p(o.at("plant"), "plant");
    cfg.plant.dc_nominal_voltage = p.get<double>("dc_nominal_voltage_v");
    cfg.plant.battery_internal_resistance = p.get<double>("battery_internal_resistance_ohm");
    cfg.plant.torque_constant = p.get<double>("torque_constant_nm_per_a");
    cfg.plant.rotor_inertia = p.get<double>("rotor_inertia_kgm2");
    cfg.plant.viscous_friction = p.get<double>("viscous_friction_nms_per_rad");
    cfg.plant.electrical_time_constant = p.get<double>("electrical_time_constant_s");
    cfg.plant.max_torque = p.get<double>("max_torque_nm");
    cfg.plant.overshoot_gain = p.get<double>("overshoot_gain_v");
    cfg.plant.voltage_safe_envelope = p.get<double>("voltage_safe_envelope_v");
    cfg.plant.drive_loss_resistance = p.get_or<double>("drive_loss_resistance_ohm", 0.02);
    p.finish();
  }
  {
    detail::StrictObject c(o.at("controller"), "controller");
    cfg.controller.kp = c.get<double>("kp");
    cfg.controller.ki = c.get<double>("ki");
    cfg.controller.control_period_s = c.get<double>("control_period_s");
    cfg.controller.limp_fraction = c.get<double>("limp_fraction");
    cfg.controller.derate_fraction = c.get<double>("derate_fraction");
    cfg.controller.runtime_hash_interval_s = c.get<double>("runtime_hash_interval_s");
    cfg.controller.overspeed_limit_rad_s = c.get<double>("overspeed_limit_rad_s");
    cfg.controller.overspeed_cap_fraction = c.get<double>("overspeed_cap_fraction");
    cfg.controller.actuation_stale_hold_s = c.get_or<double>("actuation_stale_hold_s", 0.003);
    c.finish();
  }
  {
    detail::StrictObject i(o.at("ids"), "ids");
    cfg.ids.enabled = i.get<bool>("enabled");
    cfg.ids.sensor_deviation_threshold = i.get<double>("sensor_deviation_threshold");
    cfg.ids.deviation_window_s = i.get<double>("deviation_window_s");
    cfg.ids.can_period_nominal_s = i.get<double>("can_period_nominal_s");
    cfg.ids.can_rate_factor = i.get<double>("can_rate_factor");
    cfg.ids.power_mismatch_threshold = i.get<double>("power_mismatch_threshold");
    cfg.ids.runtime_hash_interval_s = i.get<double>("runtime_hash_interval_s");
    cfg.ids.arming_time_s = i.get_or<double>("arming_time_s", 3.0);
    i.finish();
  }
  {
    detail::StrictObject b(o.at("bus"), "bus");
    cfg.bus.bitrate_bps = b.get<double>("bitrate_bps");
    cfg.bus.frame_overhead_bits = b.get<int>("frame_overhead_bits");
    cfg.bus.queue_capacity = b.get<std::size_t>("queue_capacity");
    cfg.telemetry_period_s = b.get_or<double>("telemetry_period_s", 0.01);
    b.finish();
  }
  {
    detail::StrictObject v(o.at("inverter"), "inverter");
    cfg.inverter.command_stale_age_s = v.get<double>("command_stale_age_s");
    cfg.inverter.derate_slew_per_s = v.get<double>("derate_slew_per_s");
    cfg.inverter.comm_reset_threshold_s = v.get<double>("comm_reset_threshold_s");
    cfg.inverter.comm_reset_duration_s = v.get<double>("comm_reset_duration_s");
    cfg.inverter.overvoltage_trip_time_s = v.get<double>("overvoltage_trip_time_s");
    v.finish();
  }
  {
    detail::StrictObject n(o.at("noise"), "noise");
    cfg.noise.torque_nm = n.get<double>("torque_nm");
    cfg.noise.speed_rad_s = n.get<double>("speed_rad_s");
    cfg.noise.dc_voltage_v = n.get<double>("dc_voltage_v");
    cfg.noise.q_current_a = n.get<double>("q_current_a");
    cfg.noise.dc_current_a = n.get<double>("dc_current_a");
    n.finish();
  }
  {
    cfg.drive_cycle.segments.clear();
    const auto& arr = o.at("drive_cycle");
    if (!arr.is_array() || arr.empty())
      throw ScenarioError("drive_cycle: expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      detail::StrictObject s(arr[i], "drive_cycle[" + std::to_string(i) + "]");
      DriveSegment seg;
      seg.start_s = s.get<double>("start_s");
      seg.torque_demand_fraction = s.get<double>("torque_demand_fraction");
      seg.load_torque_nm = s.get<double>("load_torque_nm");
      s.finish();
      cfg.drive_cycle.segments.push_back(seg);
    }
  }
  if (!o.at("attack").is_null()) {
    cfg.attack = detail::attack_from_json(o.at("attack"));
  }
  {
    // Full scales for the IDS relative floors, derived from the plant.
    cfg.ids.torque_full_scale_nm = cfg.plant.max_torque;
    cfg.ids.speed_full_scale_rad_s = 2.0 * cfg.plant.max_torque / cfg.plant.viscous_friction;
    cfg.ids.power_full_scale_w =
        cfg.plant.dc_nominal_voltage * cfg.plant.max_torque / cfg.plant.torque_constant;
  }
  o.finish();
  cfg.validate();
  return cfg;
}

inline SimConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace tsiege
