#pragma once

// Little-endian primitives shared by the graph dump and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace hgdr::detail {

inline void write_u32(std::ostream& out, std::uint64_t value) {
  if (value > std::numeric_limits<std::uint32_t>::max())
    throw std::overflow_error("value does not fit in u32");
  const auto v = static_cast<std::uint32_t>(value);
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated file");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= std::uint32_t{b[k]} << (8 * k);
  return v;
}

inline void write_f64(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated file");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= std::uint64_t{b[k]} << (8 * k);
  return std::bit_cast<double>(bits);
}

}  // namespace hgdr::detail
