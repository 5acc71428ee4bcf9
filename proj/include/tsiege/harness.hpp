#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsiege/attack.hpp"
#include "tsiege/canbus.hpp"
#include "tsiege/controller.hpp"
#include "tsiege/ids.hpp"
#include "tsiege/metrics.hpp"
#include "tsiege/plant.hpp"
#include "tsiege/rng.hpp"

namespace tsiege {

// Node and frame identities on the shared bus. Safety-critical traffic gets
// the reserved lowest identifier, which is what the comm-buffer-reset
// mitigation falls back to.
inline constexpr int kSensorNode = 1;
inline constexpr int kControllerNode = 2;
inline constexpr int kInverterNode = 3;
inline constexpr std::uint16_t kEmergencyFrameId = 0x000;
inline constexpr std::uint16_t kCommandFrameId = 0x110;
inline constexpr std::uint16_t kTelemetryFrameId = 0x120;

struct DriveSegment {
  double start_s = 0.0;
  double torque_demand_fraction = 0.0;  // of max torque
  double load_torque_nm = 0.0;
};

struct DriveCycle {
  std::vector<DriveSegment> segments;

  bool valid() const {
    if (segments.empty()) return false;
    double prev = -1.0;
    for (const DriveSegment& s : segments) {
      if (s.start_s < prev) return false;
      if (s.torque_demand_fraction < 0.0 || s.torque_demand_fraction > 1.0) return false;
      prev = s.start_s;
    }
    return true;
  }

  const DriveSegment& at(double t) const {
    const DriveSegment* cur = &segments.front();
    for (const DriveSegment& s : segments) {
      if (s.start_s <= t) cur = &s;
      else break;
    }
    return *cur;
  }
};

// Fail-operational policy of the inverter node, independent of the IDS.
// While commands arriving from the bus are older than `command_stale_age_s`,
// the node progressively pulls its modulation authority toward zero instead
// of cutting torque on a moving vehicle. Once fresh commands resume after a
// long degraded interval, it performs a full resynchronisation (gates off for
// `comm_reset_duration_s`) before re-engaging drive. Sustained operation past
// the voltage envelope latches a hard shutdown.
struct InverterPolicy {
  double command_stale_age_s = 0.120;
  double derate_slew_per_s = 0.20;
  double comm_reset_threshold_s = 1.0;
  double comm_reset_duration_s = 2.2;
  double overvoltage_trip_time_s = 0.050;

  bool valid() const {
    return command_stale_age_s > 0 && derate_slew_per_s > 0 && comm_reset_threshold_s > 0 &&
           comm_reset_duration_s > 0 && overvoltage_trip_time_s > 0;
  }
};

struct SimConfig {
  std::string scenario_id = "unnamed";
  double duration_s = 30.0;
  std::uint64_t seed = 1;
  PlantParams plant;
  ControllerConfig controller;
  IdsConfig ids;
  BusConfig bus;
  InverterPolicy inverter;
  NoiseStd noise;
  double telemetry_period_s = 0.01;
  std::optional<AttackScenario> attack;
  DriveCycle drive_cycle{{DriveSegment{0.0, 0.5, 0.0}}};

  void validate() const {
    if (!(duration_s > 0)) throw std::invalid_argument("duration must be positive");
    if (!plant.valid()) throw std::invalid_argument("invalid plant parameters");
    if (!controller.valid()) throw std::invalid_argument("invalid controller config");
    if (!ids.valid()) throw std::invalid_argument("invalid ids config");
    if (!bus.valid()) throw std::invalid_argument("invalid bus config");
    if (!inverter.valid()) throw std::invalid_argument("invalid inverter policy");
    if (!noise.valid()) throw std::invalid_argument("noise std must be non-negative");
    if (!drive_cycle.valid()) throw std::invalid_argument("invalid drive cycle");
    if (!(telemetry_period_s > 0)) throw std::invalid_argument("telemetry period must be positive");
    if (attack) {
      if (attack->start_time < 0) throw std::invalid_argument("attack start must be >= 0");
      const bool runtime_kind = attack->kind != AttackKind::FirmwareTamper;
      if (runtime_kind && !(attack->duration > 0))
        throw std::invalid_argument("attack duration must be positive");
      if (runtime_kind && !(duration_s > attack->start_time + attack->duration))
        throw std::invalid_argument("run must outlast the attack");
    }
  }
};

namespace detail {

inline std::vector<std::uint8_t> encode_duty(const DutyCommand& cmd, std::uint8_t seq) {
  std::vector<std::uint8_t> p(8, 0);
  for (int i = 0; i < 3; ++i) {
    const long q = std::lround(std::clamp(cmd.duty[i], -7.9, 7.9) * 4096.0);
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    p[2 * i] = static_cast<std::uint8_t>(u & 0xff);
    p[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
  }
  p[6] = cmd.gate_enable ? 0x01 : 0x00;
  p[7] = seq;
  return p;
}

inline DutyCommand decode_duty(const std::vector<std::uint8_t>& p) {
  DutyCommand cmd;
  if (p.size() < 7) return cmd;
  for (int i = 0; i < 3; ++i) {
    const auto u = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
    cmd.duty[i] = static_cast<double>(static_cast<std::int16_t>(u)) / 4096.0;
  }
  cmd.gate_enable = (p[6] & 0x01) != 0;
  return cmd;
}

struct PendingCommand {
  double delivery_time = 0.0;
  double issue_time = 0.0;
  DutyCommand command;
};

struct InverterNodeState {
  DutyCommand applied{};
  double applied_issue_time = 0.0;
  bool has_command = false;
  double derate_factor = 1.0;
  bool degraded = false;
  double degraded_accum = 0.0;
  bool in_reset = false;
  double reset_until = 0.0;
  double ov_accum = 0.0;
  bool hard_shutdown = false;
  std::deque<PendingCommand> inbox;
};

// Advances the inverter node to sub-tick instant `t` and returns the duty it
// actually drives the bridge with.
inline DutyCommand inverter_node_step(InverterNodeState& inv, const InverterPolicy& pol, double t,
                                      double dt) {
  while (!inv.inbox.empty() && inv.inbox.front().delivery_time <= t) {
    const PendingCommand pc = inv.inbox.front();
    inv.inbox.pop_front();
    if (inv.in_reset) continue;  // resync in progress: commands are not applied
    inv.applied = pc.command;
    inv.applied_issue_time = pc.issue_time;
    inv.has_command = true;
  }

  if (inv.in_reset && t >= inv.reset_until) {
    inv.in_reset = false;
    inv.degraded = false;
    inv.degraded_accum = 0.0;
    inv.derate_factor = 1.0;
  }

  if (!inv.in_reset && inv.has_command) {
    const double age = t - inv.applied_issue_time;
    if (age > pol.command_stale_age_s) {
      inv.degraded = true;
      inv.degraded_accum += dt;
      inv.derate_factor = std::max(0.0, inv.derate_factor - pol.derate_slew_per_s * dt);
    } else if (inv.degraded) {
      if (inv.degraded_accum > pol.comm_reset_threshold_s) {
        inv.in_reset = true;
        inv.reset_until = t + pol.comm_reset_duration_s;
      } else {
        inv.degraded = false;
        inv.degraded_accum = 0.0;
        inv.derate_factor = 1.0;
      }
    }
  }

  DutyCommand eff = inv.applied;
  if (!inv.has_command || inv.in_reset || inv.hard_shutdown) {
    eff.duty = {0.5, 0.5, 0.5};
    eff.gate_enable = false;
  } else if (inv.derate_factor < 1.0) {
    for (double& d : eff.duty) d = 0.5 + inv.derate_factor * (d - 0.5);
  }
  return eff;
}

}  // namespace detail

// Pipeline stage identifiers, exposed so tests can probe ordering.
enum class Stage : int {
  Attack = 1,
  Sense = 2,
  Bus = 3,
  Controller = 4,
  Ids = 5,
  Plant = 6,
  Record = 7
};

inline constexpr int kPlantSubsteps = 10;

// Runs one scenario to completion. The per-tick pipeline order is fixed:
// (1) attack mutates bus/readings, (2) sensors sample (through the attack
// filter), (3) bus arbitrates and delivers, (4) controller steps, (5) IDS
// checks and mitigations apply, (6) plant advances ten sub-steps, (7) the
// trace records. Identical config and seed give a bit-identical trace.
//
// A failed secure boot still returns a (fully halted) trace so the metrics
// apply; callers can distinguish it via RunTrace::boot_blocked.
inline RunTrace run(const SimConfig& cfg, std::vector<int>* stage_probe = nullptr) {
  cfg.validate();

  Rng rng(cfg.seed);
  const double period = cfg.controller.control_period_s;
  const double dt = period / kPlantSubsteps;
  const auto ticks = static_cast<std::int64_t>(std::llround(cfg.duration_s / period));

  // Firmware: built from configured parameters; the trusted baseline lives in
  // the harness's store, never inside the image.
  const FirmwareImage pristine = build_image(cfg.controller.to_firmware());
  const Digest trusted_baseline = pristine.baseline_digest;
  FirmwareImage image = pristine;

  const bool protections_on = cfg.ids.enabled;
  bool boot_blocked = false;

  if (cfg.attack && cfg.attack->kind == AttackKind::FirmwareTamper && cfg.attack->tamper.at_boot) {
    image = tamper_firmware(*cfg.attack, image);
  }

  ControllerState ctl;
  if (protections_on) {
    const BootResult boot = secure_boot(image, trusted_baseline);
    if (!boot.running()) {
      boot_blocked = true;
      ctl.mode = ControllerMode::Halted;
    }
  }
  FirmwareParams fw = decode_params(image);

  PlantState plant;
  plant.dc_link_voltage = cfg.plant.dc_nominal_voltage;

  BusState bus;
  bus.cfg = cfg.bus;
  register_node(bus, kSensorNode);
  register_node(bus, kControllerNode);
  register_node(bus, kInverterNode);

  detail::InverterNodeState inv;
  IdsState ids_state;
  std::deque<TimedReadings> history;
  std::deque<double> delivery_times;
  double last_control_delivery = -std::numeric_limits<double>::infinity();
  double flood_carry = 0.0;
  bool runtime_tamper_applied = false;
  std::uint8_t cmd_seq = 0;
  const auto telemetry_every =
      std::max<std::int64_t>(1, std::llround(cfg.telemetry_period_s / period));

  RunTrace trace;
  trace.attack = cfg.attack;
  trace.seed = cfg.seed;
  trace.control_period = period;
  trace.max_torque = cfg.plant.max_torque;
  trace.duration = cfg.duration_s;
  trace.voltage_safe_envelope = cfg.plant.voltage_safe_envelope;
  trace.boot_blocked = boot_blocked;
  trace.command_frame_id = kCommandFrameId;
  trace.emergency_frame_id = kEmergencyFrameId;
  trace.scenario_id = cfg.scenario_id;
  trace.ids_enabled = cfg.ids.enabled;
  trace.samples.reserve(static_cast<std::size_t>(ticks));

  for (std::int64_t k = 0; k < ticks; ++k) {
    const double now = static_cast<double>(k) * period;
    const DriveSegment& seg = cfg.drive_cycle.at(now);
    const double demand = seg.torque_demand_fraction * cfg.plant.max_torque;

    // (1) attack
    if (stage_probe) stage_probe->push_back(static_cast<int>(Stage::Attack));
    if (cfg.attack) {
      if (cfg.attack->kind == AttackKind::FirmwareTamper && !cfg.attack->tamper.at_boot &&
          !runtime_tamper_applied && now >= cfg.attack->start_time) {
        image = tamper_firmware(*cfg.attack, image);
        fw = decode_params(image);
        runtime_tamper_applied = true;
      }
      emit_flood_frames(*cfg.attack, bus, now, period, flood_carry);
    }

    // (2) sense — the spoof/injection filter sits between the physical state
    // and everything downstream, so the IDS sees the same compromised values
    // the controller does.
    if (stage_probe) stage_probe->push_back(static_cast<int>(Stage::Sense));
    SensorReadings readings = sense(plant, cfg.noise, rng);
    if (cfg.attack) readings = mutate_readings(*cfg.attack, readings, now);
    readings.torque_nm *= fw.torque_sensor_scale;
    readings.speed_rad_s *= fw.speed_sensor_scale;
    history.push_back(TimedReadings{now, readings});
    while (!history.empty() && history.front().time < now - 1.0) history.pop_front();
    if (k % telemetry_every == 0) {
      CanFrame telem;
      telem.id = kTelemetryFrameId;
      telem.source_node = kSensorNode;
      telem.enqueue_time = now;
      telem.payload.resize(8, 0);
      const auto tq = static_cast<std::uint16_t>(
          std::lround(std::clamp(readings.torque_nm, 0.0, 255.0) * 256.0));
      const auto sp = static_cast<std::uint16_t>(
          std::lround(std::clamp(readings.speed_rad_s, 0.0, 255.0) * 256.0));
      telem.payload[0] = static_cast<std::uint8_t>(tq & 0xff);
      telem.payload[1] = static_cast<std::uint8_t>(tq >> 8);
      telem.payload[2] = static_cast<std::uint8_t>(sp & 0xff);
      telem.payload[3] = static_cast<std::uint8_t>(sp >> 8);
      enqueue(bus, std::move(telem));
    }

    // (3) bus
    if (stage_probe) stage_probe->push_back(static_cast<int>(Stage::Bus));
    for (const CanFrame& f : arbitrate_step(bus, now)) {
      delivery_times.push_back(*f.delivery_time);
      if (f.id == kCommandFrameId || f.id == kEmergencyFrameId) {
        last_control_delivery = *f.delivery_time;
        inv.inbox.push_back(
            detail::PendingCommand{*f.delivery_time, f.enqueue_time, detail::decode_duty(f.payload)});
        ctl.last_command_actuation_time = *f.delivery_time;
        ctl.last_actuated_issue_time = f.enqueue_time;
      }
    }
    while (!delivery_times.empty() && delivery_times.front() < now - 1.0)
      delivery_times.pop_front();

    // (4) controller
    if (stage_probe) stage_probe->push_back(static_cast<int>(Stage::Controller));
    ControlResult cr = control_step(fw, cfg.controller, ctl, readings, demand,
                                    cfg.plant.max_torque, now);
    ctl = cr.state;
    {
      CanFrame f;
      f.id = ctl.emergency_can_path ? kEmergencyFrameId : kCommandFrameId;
      f.source_node = kControllerNode;
      f.enqueue_time = now;
      f.payload = detail::encode_duty(cr.command, cmd_seq++);
      enqueue(bus, std::move(f));
    }

    // (5) ids + mitigation
    if (stage_probe) stage_probe->push_back(static_cast<int>(Stage::Ids));
    if (protections_on && !boot_blocked) {
      IdsInputs in;
      in.now = now;
      in.history = &history;
      in.can.delivery_times = &delivery_times;
      in.can.last_control_delivery = last_control_delivery;
      in.image = &image;
      in.trusted_baseline = &trusted_baseline;
      in.mitigation_engaged = ctl.mode != ControllerMode::Normal;
      for (const IdsEvent& e : ids_step(cfg.ids, ids_state, in)) {
        ctl = apply_mitigation(ctl, e.recommended_action);
        if (e.recommended_action == MitigationAction::CommBufferReset) {
          flush_receive_queue(bus, kControllerNode);
          ctl.comm_reset_until = now + period;
        }
        trace.events.push_back(e);
      }
    }

    // (6) plant, ten sub-steps per control period
    if (stage_probe) stage_probe->push_back(static_cast<int>(Stage::Plant));
    double peak_in_period = 0.0;
    DutyCommand effective;
    for (int sub = 0; sub < kPlantSubsteps; ++sub) {
      const double t_sub = now + static_cast<double>(sub) * dt;
      effective = detail::inverter_node_step(inv, cfg.inverter, t_sub, dt);
      if (ctl.mode == ControllerMode::Halted) effective.gate_enable = false;
      plant = step_plant(cfg.plant, plant, effective, seg.load_torque_nm, dt);
      peak_in_period = std::max(peak_in_period, plant.peak_line_voltage);
      if (plant.peak_line_voltage > cfg.plant.voltage_safe_envelope) {
        inv.ov_accum += dt;
        if (inv.ov_accum >= cfg.inverter.overvoltage_trip_time_s) inv.hard_shutdown = true;
      } else {
        inv.ov_accum = 0.0;
      }
    }
    if (inv.hard_shutdown && ctl.mode != ControllerMode::Halted) {
      // Dedicated fault line from the power stage; does not ride the bus.
      ctl.mode = ControllerMode::Halted;
      ctl.hmi_alert = "critical fault: hard shutdown";
    }

    // (7) record
    if (stage_probe) stage_probe->push_back(static_cast<int>(Stage::Record));
    TraceSample s;
    s.time = static_cast<double>(k + 1) * period;
    s.commanded_torque = demand;
    s.measured_torque = plant.electromagnetic_torque;
    s.rotor_speed = plant.rotor_speed;
    s.peak_line_voltage = peak_in_period;
    s.controller_mode = ctl.mode;
    s.command_issue_time = ctl.last_command_issue_time;
    s.command_actuation_time = ctl.last_command_actuation_time;
    s.applied_torque_request =
        inv.has_command
            ? std::clamp(inv.applied.duty[0] - inv.applied.duty[1], -1.0, 1.0) *
                  cfg.plant.max_torque
            : 0.0;
    // A trip on the final sub-step gates off from the next instant on.
    s.gate_enabled = effective.gate_enable && !inv.hard_shutdown;
    trace.samples.push_back(s);
  }

  // Let transmissions that fit before the end of the run complete; frames
  // still queued at that instant stay in flight and are not recorded.
  arbitrate_step(bus, cfg.duration_s);

  trace.frames.reserve(bus.delivered_log.size() + bus.dropped_log.size());
  for (const CanFrame& f : bus.delivered_log) trace.frames.push_back(FrameRecord{f, false});
  for (const CanFrame& f : bus.dropped_log) trace.frames.push_back(FrameRecord{f, true});
  return trace;
}

struct MatrixResult {
  std::string id;
  bool ok = false;
  std::string error;
  std::optional<MetricsReport> report;
};

// Runs each config independently; per-run failures are recorded without
// aborting the rest of the matrix.
inline std::vector<MatrixResult> run_matrix(const std::vector<SimConfig>& configs) {
  std::vector<MatrixResult> out;
  out.reserve(configs.size());
  for (const SimConfig& cfg : configs) {
    MatrixResult r;
    r.id = cfg.scenario_id;
    try {
      const RunTrace trace = run(cfg);
      r.report = build_report(trace);
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tsiege
