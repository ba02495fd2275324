#pragma once

// Little-endian fixed-width serialization used by the checkpoint formats.
// Byte order is explicit so checkpoints are portable across hosts.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "bh/errors.hpp"

namespace bh::detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

// `offset` tracks the byte position for error reporting and advances on
// success; `label` names the record kind in the truncation message.
inline std::uint64_t read_u64(std::istream& in, std::size_t* offset,
                              const char* label) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw FormatError(std::string("truncated ") + label, *offset);
  *offset += 8;
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline double read_f64(std::istream& in, std::size_t* offset,
                       const char* label) {
  const std::uint64_t bits = read_u64(in, offset, label);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace bh::detail
