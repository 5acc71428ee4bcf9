#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsiege/canbus.hpp"
#include "tsiege/firmware.hpp"
#include "tsiege/plant.hpp"

namespace tsiege {

enum class AttackKind { SensorSpoofing, DoSFlood, FirmwareTamper, DataInjection };

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::SensorSpoofing: return "sensor_spoofing";
    case AttackKind::DoSFlood: return "dos_flood";
    case AttackKind::FirmwareTamper: return "firmware_tamper";
    case AttackKind::DataInjection: return "data_injection";
  }
  return "?";
}

// Spurious torque feedback: reading <- reading * multiplier + offset.
struct SpoofParams {
  double multiplier = 1.0;
  double additive_offset_nm = 0.0;
};

// High-frequency frames from a dedicated attacker node.
struct FloodParams {
  std::uint16_t flood_id = 0x001;
  double rate_fps = 5000.0;  // frames per second
  std::vector<std::uint8_t> payload = std::vector<std::uint8_t>(8, 0);
  int attacker_node = 9;
};

// One byte of one firmware block XOR'ed; stored digests are left alone
// because the attacker cannot forge the trusted baseline.
struct TamperParams {
  int block_index = 0;
  int byte_offset = 0;
  std::uint8_t xor_mask = 0xff;
  bool at_boot = true;
};

// Absolute overwrite of the speed channel.
struct InjectParams {
  double injected_value_rad_s = 400.0;
};

// Exactly one attack kind per scenario run; vectors are evaluated in
// isolation. FirmwareTamper uses start_time only when applied at boot.
struct AttackScenario {
  AttackKind kind = AttackKind::SensorSpoofing;
  double start_time = 0.0;
  double duration = 0.0;
  SpoofParams spoof;
  FloodParams flood;
  TamperParams tamper;
  InjectParams inject;
};

inline bool is_active(const AttackScenario& s, double now) {
  if (s.kind == AttackKind::FirmwareTamper) {
    // At-boot tampering is "active" only during image preparation.
    if (s.tamper.at_boot) return false;
    return now >= s.start_time;
  }
  return now >= s.start_time && now < s.start_time + s.duration;
}

// Applies the reading-channel vectors. Identity when inactive or when the
// scenario targets another subsystem.
inline SensorReadings mutate_readings(const AttackScenario& s, SensorReadings r, double now) {
  if (!is_active(s, now)) return r;
  switch (s.kind) {
    case AttackKind::SensorSpoofing:
      r.torque_nm = r.torque_nm * s.spoof.multiplier + s.spoof.additive_offset_nm;
      break;
    case AttackKind::DataInjection:
      r.speed_rad_s = s.inject.injected_value_rad_s;
      break;
    default:
      break;
  }
  return r;
}

// Enqueues floor(rate * dt) frames plus a deterministic fractional carry.
// Queue overflow at the attacker node turns into silent drops, which is what
// a saturating flood looks like in practice.
inline int emit_flood_frames(const AttackScenario& s, BusState& bus, double now, double dt,
                             double& carry) {
  if (s.kind != AttackKind::DoSFlood || !is_active(s, now)) return 0;
  carry += s.flood.rate_fps * dt;
  const int n = static_cast<int>(std::floor(carry));
  carry -= n;
  for (int i = 0; i < n; ++i) {
    CanFrame f;
    f.id = s.flood.flood_id;
    f.payload = s.flood.payload;
    f.source_node = s.flood.attacker_node;
    f.enqueue_time = now;
    enqueue(bus, std::move(f));
  }
  return n;
}

// XOR involution on one image byte. Recomputing digests is deliberately NOT
// done here; the mismatch against the trusted baseline is the detection
// surface.
inline FirmwareImage tamper_firmware(const AttackScenario& s, FirmwareImage image) {
  if (s.kind != AttackKind::FirmwareTamper)
    throw std::invalid_argument("tamper_firmware: scenario is not a tamper attack");
  const auto& t = s.tamper;
  if (t.block_index < 0 || static_cast<std::size_t>(t.block_index) >= image.blocks.size())
    throw std::out_of_range("tamper_firmware: block index out of range");
  auto& block = image.blocks[static_cast<std::size_t>(t.block_index)];
  if (t.byte_offset < 0 || static_cast<std::size_t>(t.byte_offset) >= block.size())
    throw std::out_of_range("tamper_firmware: byte offset out of range");
  block[static_cast<std::size_t>(t.byte_offset)] ^= t.xor_mask;
  return image;
}

}  // namespace tsiege
