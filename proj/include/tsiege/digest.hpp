#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include <openssl/evp.h>

namespace tsiege {

// 256-bit digest. SHA-256 provides the contract the attestation layer needs:
// deterministic, collision resistant, avalanching.
using Digest = std::array<std::uint8_t, 32>;

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  static const std::uint8_t empty = 0;
  const std::uint8_t* ptr = data.empty() ? &empty : data.data();
  EVP_Digest(ptr, data.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

inline Digest sha256(const std::string& s) {
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline std::string to_hex(const Digest& d) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : d) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0x0f]);
  }
  return s;
}

}  // namespace tsiege
