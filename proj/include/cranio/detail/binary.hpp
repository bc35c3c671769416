// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Little-endian scalar encoding shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace cranio::detail {

inline void put_le(std::ostream& out, std::uint64_t bits, int n) {
  char buf[8];
  for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, n);
}
inline void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v, 4); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v, 8); }
inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v), 4); }
inline void put_f64(std::ostream& out, double v) {
  put_le(out, std::bit_cast<std::uint64_t>(v), 8);
}

/// Reads n little-endian bytes; returns false on a short read.
inline bool get_le(std::istream& in, std::uint64_t& bits, int n) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), n)) return false;
  bits = 0;
  for (int i = 0; i < n; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return true;
}
inline bool get_u32(std::istream& in, std::uint32_t& v) {
  std::uint64_t b = 0;
  if (!get_le(in, b, 4)) return false;
  v = static_cast<std::uint32_t>(b);
  return true;
}
inline bool get_u64(std::istream& in, std::uint64_t& v) { return get_le(in, v, 8); }
inline bool get_f32(std::istream& in, float& v) {
  std::uint64_t b = 0;
  if (!get_le(in, b, 4)) return false;
  v = std::bit_cast<float>(static_cast<std::uint32_t>(b));
  return true;
}
inline bool get_f64(std::istream& in, double& v) {
  std::uint64_t b = 0;
  if (!get_le(in, b, 8)) return false;
  v = std::bit_cast<double>(b);
  return true;
}

}  // namespace cranio::detail
