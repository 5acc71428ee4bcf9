#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "tsiege/firmware.hpp"
#include "tsiege/ids.hpp"
#include "tsiege/plant.hpp"

namespace tsiege {

enum class ControllerMode { Normal, Limp, SafeDerate, Halted, CommBufferReset };

inline const char* to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::Normal: return "normal";
    case ControllerMode::Limp: return "limp";
    case ControllerMode::SafeDerate: return "safe_derate";
    case ControllerMode::Halted: return "halted";
    case ControllerMode::CommBufferReset: return "comm_buffer_reset";
  }
  return "?";
}

// Configured values; these are what gets serialized into the firmware image,
// and the running controller reads them back from the (possibly tampered)
// image rather than from here.
struct ControllerConfig {
  double kp = 1.0;
  double ki = 50.0;
  double control_period_s = 0.001;
  double limp_fraction = 0.35;   // must sit in [0.30, 0.40]
  double derate_fraction = 0.5;
  double runtime_hash_interval_s = 0.05;
  double overspeed_limit_rad_s = 150.0;
  double overspeed_cap_fraction = 0.36;
  double actuation_stale_hold_s = 0.003;  // hold last command when feedback is older

  bool valid() const {
    return kp > 0 && ki > 0 && control_period_s > 0 && limp_fraction >= 0.30 &&
           limp_fraction <= 0.40 && derate_fraction > 0 && derate_fraction <= 1.0 &&
           runtime_hash_interval_s > 0 && overspeed_limit_rad_s > 0 &&
           overspeed_cap_fraction > 0 && actuation_stale_hold_s > 0;
  }

  FirmwareParams to_firmware() const {
    FirmwareParams p;
    p.kp = kp;
    p.ki = ki;
    p.limp_fraction = limp_fraction;
    p.derate_fraction = derate_fraction;
    p.overspeed_limit_rad_s = overspeed_limit_rad_s;
    p.overspeed_cap_fraction = overspeed_cap_fraction;
    return p;
  }
};

struct ControllerState {
  ControllerMode mode = ControllerMode::Normal;
  double integrator = 0.0;  // per-unit accumulated error
  double last_command_issue_time = 0.0;
  double last_command_actuation_time = 0.0;
  double last_actuated_issue_time = 0.0;  // issue instant of the newest echoed command
  std::optional<std::string> hmi_alert;
  bool regen_enabled = true;
  bool emergency_can_path = false;  // backup control logic after a comm reset
  double comm_reset_until = -std::numeric_limits<double>::infinity();
  DutyCommand last_command{};
  bool has_commanded = false;
};

// Severity order used when stacking mitigations; a lower-severity action
// never downgrades the mode.
inline int mode_severity(ControllerMode m) {
  switch (m) {
    case ControllerMode::Halted: return 4;
    case ControllerMode::Limp: return 3;
    case ControllerMode::SafeDerate: return 2;
    case ControllerMode::CommBufferReset: return 1;
    case ControllerMode::Normal: return 0;
  }
  return 0;
}

// Applies an IDS-recommended action to the mode machine. Transitions are
// idempotent.
inline ControllerState apply_mitigation(ControllerState st, MitigationAction action) {
  switch (action) {
    case MitigationAction::LimpMode:
      if (mode_severity(ControllerMode::Limp) > mode_severity(st.mode)) {
        st.mode = ControllerMode::Limp;
      }
      if (st.mode == ControllerMode::Limp) {
        st.regen_enabled = false;
        st.hmi_alert = "intrusion detected: limp mode engaged";
      }
      break;
    case MitigationAction::CommBufferReset:
      if (mode_severity(ControllerMode::CommBufferReset) > mode_severity(st.mode)) {
        st.mode = ControllerMode::CommBufferReset;
      }
      st.emergency_can_path = true;
      st.hmi_alert = "intrusion detected: communication buffer reset";
      break;
    case MitigationAction::Halt:
      st.mode = ControllerMode::Halted;
      st.hmi_alert = "critical fault: traction halted";
      break;
    case MitigationAction::PowerDerate:
      if (mode_severity(ControllerMode::SafeDerate) > mode_severity(st.mode)) {
        st.mode = ControllerMode::SafeDerate;
      }
      st.hmi_alert = "intrusion detected: power derated";
      break;
  }
  return st;
}

inline double mode_cap_fraction(const FirmwareParams& fw, ControllerMode mode) {
  switch (mode) {
    case ControllerMode::Limp: return fw.limp_fraction;
    case ControllerMode::SafeDerate: return fw.derate_fraction;
    case ControllerMode::Halted: return 0.0;
    default: return 1.0;
  }
}

struct ControlResult {
  DutyCommand command;
  ControllerState state;
};

// One control period: PI on the torque error mapped to a symmetric
// modulation depth through the firmware's PWM table, clipped by the active
// mode cap with integrator anti-windup at that cap.
//
// Two firmware-level guards run ahead of the PI law: an overspeed fold-back
// that caps the request when the speed channel reads past the limit, and a
// hold-last-command rule that freezes the loop (including the integrator)
// while actuation feedback from the bus is stale, so the controller does not
// integrate blind during communication loss.
inline ControlResult control_step(const FirmwareParams& fw, const ControllerConfig& cfg,
                                  ControllerState st, const SensorReadings& readings,
                                  double torque_demand_nm, double max_torque_nm, double now) {
  ControlResult out;

  if (st.mode == ControllerMode::CommBufferReset && now >= st.comm_reset_until) {
    st.mode = ControllerMode::Normal;
  }

  if (st.mode == ControllerMode::Halted) {
    DutyCommand cmd;
    cmd.duty = {0.5, 0.5, 0.5};
    cmd.gate_enable = false;
    st.last_command = cmd;
    st.last_command_issue_time = now;
    out.command = cmd;
    out.state = st;
    return out;
  }

  double cap = mode_cap_fraction(fw, st.mode);
  if (readings.speed_rad_s > fw.overspeed_limit_rad_s) {
    cap = std::min(cap, fw.overspeed_cap_fraction);
  }

  // The transmitter hears its own frames on the wire, so the issue instant of
  // the newest echoed command measures the transport delay its commands are
  // currently suffering.
  const bool stale =
      st.has_commanded && (now - st.last_actuated_issue_time > cfg.actuation_stale_hold_s);

  DutyCommand cmd;
  if (stale) {
    cmd = st.last_command;  // integrator frozen while the channel is degraded
  } else {
    const double error_pu = (torque_demand_nm - readings.torque_nm) / max_torque_nm;
    st.integrator = std::clamp(st.integrator + fw.ki * error_pu * cfg.control_period_s, -cap, cap);
    const double u = std::clamp(fw.kp * error_pu + st.integrator, -cap, cap);
    cmd.duty = {fw.duty_center[0] + fw.duty_gain * u, fw.duty_center[1] - fw.duty_gain * u,
                fw.duty_center[2]};
    cmd.gate_enable = true;
    st.last_command = cmd;
  }

  st.last_command_issue_time = now;
  st.has_commanded = true;
  out.command = cmd;
  out.state = st;
  return out;
}

}  // namespace tsiege
