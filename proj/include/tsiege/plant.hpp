#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "tsiege/rng.hpp"

namespace tsiege {

// Physical parameters of the battery / inverter / motor chain.
struct PlantParams {
  double dc_nominal_voltage = 400.0;           // V
  double battery_internal_resistance = 0.05;   // ohm
  double torque_constant = 0.5;                // N*m per A
  double rotor_inertia = 0.5;                  // kg*m^2
  double viscous_friction = 0.5;               // N*m*s per rad
  double electrical_time_constant = 0.002;     // s
  double max_torque = 100.0;                   // N*m
  double overshoot_gain = 150.0;               // V per unit of duty violation
  double voltage_safe_envelope = 420.0;        // V
  double drive_loss_resistance = 0.02;         // ohm, series loss in the dc power balance

  bool valid() const {
    const double v[] = {dc_nominal_voltage,    battery_internal_resistance,
                        torque_constant,       rotor_inertia,
                        viscous_friction,      electrical_time_constant,
                        max_torque,            overshoot_gain,
                        voltage_safe_envelope, drive_loss_resistance};
    for (double x : v) {
      if (!(x > 0.0)) return false;
    }
    return voltage_safe_envelope > dc_nominal_voltage;
  }

  double max_current() const { return max_torque / torque_constant; }
};

// Per-phase duty fractions plus the gate flag. A healthy controller emits
// duties in [0, 1]; corrupted firmware may not, and that is the attack
// surface the overshoot model exists for.
struct DutyCommand {
  std::array<double, 3> duty{0.5, 0.5, 0.5};
  bool gate_enable = true;
};

struct PlantState {
  double rotor_speed = 0.0;             // rad/s
  double electromagnetic_torque = 0.0;  // N*m
  double q_axis_current = 0.0;          // A
  double dc_link_voltage = 400.0;       // V
  std::array<double, 3> phase_voltages{0.0, 0.0, 0.0};
  double peak_line_voltage = 0.0;       // V
  double dc_link_current = 0.0;         // A
  double tick_time = 0.0;               // s
};

struct InverterOutput {
  std::array<double, 3> phase_voltages{0.0, 0.0, 0.0};
  double peak_line_voltage = 0.0;
};

// Average-value inverter. Each phase tracks (duty - 0.5) * Vdc while the gate
// is enabled. The reported peak line voltage is the worst pairwise phase
// difference plus an overshoot term proportional to how far the duties sit
// outside [0, 1]; that term stands in for the switching-transient spikes a
// real drive produces under duty violations.
inline InverterOutput inverter_output(const PlantParams& params, double dc_voltage,
                                      const DutyCommand& cmd) {
  InverterOutput out;
  if (!cmd.gate_enable) return out;
  for (int i = 0; i < 3; ++i) out.phase_voltages[i] = (cmd.duty[i] - 0.5) * dc_voltage;

  double max_diff = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      max_diff = std::max(max_diff, std::abs(out.phase_voltages[i] - out.phase_voltages[j]));
    }
  }
  double violation = 0.0;
  for (double d : cmd.duty) violation += std::max({0.0, d - 1.0, -d});
  out.peak_line_voltage = max_diff + params.overshoot_gain * violation;
  return out;
}

// Torque-producing current implied by the commanded modulation depth. The
// depth is the a-b duty asymmetry; it saturates at the machine's current
// ceiling so electromagnetic torque can never exceed max_torque.
inline double current_target(const PlantParams& params, const DutyCommand& cmd) {
  if (!cmd.gate_enable) return 0.0;
  const double modulation = std::clamp(cmd.duty[0] - cmd.duty[1], -1.0, 1.0);
  return modulation * params.max_current();
}

// One forward-Euler step: first-order electrical lag toward the commanded
// current, rigid-body mechanical update, dc-link power balance.
inline PlantState step_plant(const PlantParams& params, const PlantState& state,
                             const DutyCommand& cmd, double load_torque, double dt) {
  if (!(dt > 0.0) || dt > 1e-3) throw std::invalid_argument("step_plant: dt must be in (0, 1ms]");

  PlantState next = state;
  const double i_max = params.max_current();
  const double target = current_target(params, cmd);
  const double alpha = 1.0 - std::exp(-dt / params.electrical_time_constant);
  next.q_axis_current =
      std::clamp(state.q_axis_current + (target - state.q_axis_current) * alpha, -i_max, i_max);
  if (std::abs(next.q_axis_current) < 1e-9) next.q_axis_current = 0.0;  // no sub-nanoamp tails
  next.electromagnetic_torque = params.torque_constant * next.q_axis_current;

  const double accel = (next.electromagnetic_torque - load_torque -
                        params.viscous_friction * state.rotor_speed) /
                       params.rotor_inertia;
  next.rotor_speed = state.rotor_speed + dt * accel;

  const InverterOutput inv = inverter_output(params, state.dc_link_voltage, cmd);
  next.phase_voltages = inv.phase_voltages;
  next.peak_line_voltage = inv.peak_line_voltage;

  const double p_mech = next.electromagnetic_torque * next.rotor_speed;
  const double p_loss =
      next.q_axis_current * next.q_axis_current * params.drive_loss_resistance;
  next.dc_link_current = (p_mech + p_loss) / std::max(state.dc_link_voltage, 1.0);
  next.dc_link_voltage =
      params.dc_nominal_voltage - params.battery_internal_resistance * next.dc_link_current;

  next.tick_time = state.tick_time + dt;
  return next;
}

// What the feedback loop reports to the controller.
struct SensorReadings {
  double torque_nm = 0.0;
  double speed_rad_s = 0.0;
  double dc_voltage_v = 0.0;
  double q_current_a = 0.0;
  double dc_current_a = 0.0;
};

// Per-channel absolute standard deviations.
struct NoiseStd {
  double torque_nm = 0.0;
  double speed_rad_s = 0.0;
  double dc_voltage_v = 0.0;
  double q_current_a = 0.0;
  double dc_current_a = 0.0;

  bool valid() const {
    return torque_nm >= 0 && speed_rad_s >= 0 && dc_voltage_v >= 0 && q_current_a >= 0 &&
           dc_current_a >= 0;
  }
};

// Gaussian measurement noise on top of the true state. Zero stds give the
// exact values; the draw order per call is fixed so a seed replays a run.
inline SensorReadings sense(const PlantState& state, const NoiseStd& noise, Rng& rng) {
  SensorReadings r;
  r.torque_nm = state.electromagnetic_torque + noise.torque_nm * rng.gaussian();
  r.speed_rad_s = state.rotor_speed + noise.speed_rad_s * rng.gaussian();
  r.dc_voltage_v = state.dc_link_voltage + noise.dc_voltage_v * rng.gaussian();
  r.q_current_a = state.q_axis_current + noise.q_current_a * rng.gaussian();
  r.dc_current_a = state.dc_link_current + noise.dc_current_a * rng.gaussian();
  return r;
}

}  // namespace tsiege
