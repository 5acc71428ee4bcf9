#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsiege/digest.hpp"

namespace tsiege {

// The controller's "firmware" is a declarative parameter table: control
// gains, safety caps, the PWM mapping table and sensor calibration. Tampering
// flips bytes that deserialize into corrupted parameters, which gives an
// attack concrete semantics without executing foreign code.
struct FirmwareParams {
  double kp = 1.0;
  double ki = 50.0;
  double limp_fraction = 0.35;
  double derate_fraction = 0.5;
  double overspeed_limit_rad_s = 150.0;
  double overspeed_cap_fraction = 0.36;
  // PWM map: duty_i = center_i +/- gain * u (phase c carries no modulation).
  double duty_center[3] = {0.5, 0.5, 0.5};
  double duty_gain = 0.5;
  double torque_sensor_scale = 1.0;
  double speed_sensor_scale = 1.0;
};

struct FirmwareImage {
  std::vector<std::vector<std::uint8_t>> blocks;
  std::vector<Digest> block_digests;
  Digest baseline_digest{};
  std::string version;
};

namespace detail {

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline double get_f64(const std::vector<std::uint8_t>& b, std::size_t off) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[off + i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void put_i16(std::vector<std::uint8_t>& out, std::int16_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  out.push_back(static_cast<std::uint8_t>(u & 0xff));
  out.push_back(static_cast<std::uint8_t>(u >> 8));
}

inline std::int16_t get_i16(const std::vector<std::uint8_t>& b, std::size_t off) {
  const auto u = static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
  return static_cast<std::int16_t>(u);
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace detail

// Q12 fixed point for the PWM map, the usual embedded representation.
inline std::int16_t to_q12(double v) {
  return static_cast<std::int16_t>(std::lround(v * 4096.0));
}
inline double from_q12(std::int16_t v) { return static_cast<double>(v) / 4096.0; }

inline Digest baseline_of(const std::vector<Digest>& block_digests) {
  std::vector<std::uint8_t> cat;
  cat.reserve(block_digests.size() * 32);
  for (const Digest& d : block_digests) cat.insert(cat.end(), d.begin(), d.end());
  return sha256(cat);
}

inline void refresh_digests(FirmwareImage& image) {
  image.block_digests.clear();
  for (const auto& b : image.blocks) image.block_digests.push_back(sha256(b));
  image.baseline_digest = baseline_of(image.block_digests);
}

// Block layout (all little-endian):
//   0: f64 kp, f64 ki
//   1: f64 limp_fraction, f64 derate_fraction, f64 overspeed_limit,
//      f64 overspeed_cap_fraction
//   2: i16 q12 duty_center[a,b,c], i16 q12 duty_gain
//   3: f64 torque_sensor_scale, f64 speed_sensor_scale
inline FirmwareImage build_image(const FirmwareParams& p, std::string version = "1") {
  FirmwareImage img;
  img.version = std::move(version);
  img.blocks.resize(4);
  detail::put_f64(img.blocks[0], p.kp);
  detail::put_f64(img.blocks[0], p.ki);
  detail::put_f64(img.blocks[1], p.limp_fraction);
  detail::put_f64(img.blocks[1], p.derate_fraction);
  detail::put_f64(img.blocks[1], p.overspeed_limit_rad_s);
  detail::put_f64(img.blocks[1], p.overspeed_cap_fraction);
  for (double c : p.duty_center) detail::put_i16(img.blocks[2], to_q12(c));
  detail::put_i16(img.blocks[2], to_q12(p.duty_gain));
  detail::put_f64(img.blocks[3], p.torque_sensor_scale);
  detail::put_f64(img.blocks[3], p.speed_sensor_scale);
  refresh_digests(img);
  return img;
}

// Deserializes whatever the blocks currently hold. Deliberately tolerant:
// corrupted bytes decode into corrupted parameters, never into a parse error.
inline FirmwareParams decode_params(const FirmwareImage& img) {
  FirmwareParams p;
  if (img.blocks.size() != 4) throw std::invalid_argument("decode_params: expected 4 blocks");
  p.kp = detail::get_f64(img.blocks[0], 0);
  p.ki = detail::get_f64(img.blocks[0], 8);
  p.limp_fraction = detail::get_f64(img.blocks[1], 0);
  p.derate_fraction = detail::get_f64(img.blocks[1], 8);
  p.overspeed_limit_rad_s = detail::get_f64(img.blocks[1], 16);
  p.overspeed_cap_fraction = detail::get_f64(img.blocks[1], 24);
  for (int i = 0; i < 3; ++i) p.duty_center[i] = from_q12(detail::get_i16(img.blocks[2], 2 * i));
  p.duty_gain = from_q12(detail::get_i16(img.blocks[2], 6));
  p.torque_sensor_scale = detail::get_f64(img.blocks[3], 0);
  p.speed_sensor_scale = detail::get_f64(img.blocks[3], 8);
  return p;
}

// Container format, bit-exact so tamper tests can flip chosen offsets:
// [u32 block count][per block: u32 length + bytes][32-byte digest per block]
// [32-byte baseline digest]; all lengths little-endian.
inline std::vector<std::uint8_t> serialize_image(const FirmwareImage& img) {
  std::vector<std::uint8_t> out;
  detail::put_u32(out, static_cast<std::uint32_t>(img.blocks.size()));
  for (const auto& b : img.blocks) {
    detail::put_u32(out, static_cast<std::uint32_t>(b.size()));
    out.insert(out.end(), b.begin(), b.end());
  }
  for (const Digest& d : img.block_digests) out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), img.baseline_digest.begin(), img.baseline_digest.end());
  return out;
}

inline FirmwareImage parse_image(const std::vector<std::uint8_t>& bytes) {
  FirmwareImage img;
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw std::runtime_error("firmware image truncated");
  };
  auto read_u32 = [&]() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return v;
  };
  const std::uint32_t count = read_u32();
  if (count > 1024) throw std::runtime_error("firmware image: implausible block count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = read_u32();
    need(len);
    img.blocks.emplace_back(bytes.begin() + pos, bytes.begin() + pos + len);
    pos += len;
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    need(32);
    Digest d{};
    std::memcpy(d.data(), bytes.data() + pos, 32);
    img.block_digests.push_back(d);
    pos += 32;
  }
  need(32);
  std::memcpy(img.baseline_digest.data(), bytes.data() + pos, 32);
  pos += 32;
  if (pos != bytes.size()) throw std::runtime_error("firmware image: trailing bytes");
  return img;
}

inline void save_image(const FirmwareImage& img, const std::string& path) {
  const auto bytes = serialize_image(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

inline FirmwareImage load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_image(bytes);
}

// --- Attestation ------------------------------------------------------------

struct BootResult {
  enum class Status { Running, Halted } status = Status::Running;
  enum class Reason { None, BlockMismatch, BaselineMismatch } reason = Reason::None;
  int block_index = -1;

  bool running() const { return status == Status::Running; }
};

// Recomputes every block digest and the aggregate against a baseline obtained
// from a trusted store, never from the image itself. Any mismatch halts boot
// with the offending block index.
inline BootResult secure_boot(const FirmwareImage& image, const Digest& trusted_baseline) {
  BootResult r;
  for (std::size_t i = 0; i < image.blocks.size(); ++i) {
    if (i >= image.block_digests.size() || sha256(image.blocks[i]) != image.block_digests[i]) {
      r.status = BootResult::Status::Halted;
      r.reason = BootResult::Reason::BlockMismatch;
      r.block_index = static_cast<int>(i);
      return r;
    }
  }
  if (baseline_of(image.block_digests) != trusted_baseline) {
    r.status = BootResult::Status::Halted;
    r.reason = BootResult::Reason::BaselineMismatch;
  }
  return r;
}

struct IntegrityViolation {
  double detected_at = 0.0;
  int block_index = -1;
};

// Periodic runtime re-check of the same digests. No-op until `interval` has
// elapsed since the last check, which is also the rule's blind spot: a
// tamper-and-restore between two checks is invisible.
inline std::optional<IntegrityViolation> runtime_integrity_check(
    const FirmwareImage& image, const Digest& trusted_baseline, double now, double last_check,
    double interval) {
  if (!(interval > 0.0)) throw std::invalid_argument("runtime_integrity_check: interval <= 0");
  if (now - last_check < interval) return std::nullopt;
  const BootResult r = secure_boot(image, trusted_baseline);
  if (r.running()) return std::nullopt;
  return IntegrityViolation{now, r.block_index};
}

}  // namespace tsiege
