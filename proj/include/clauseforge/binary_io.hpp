#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "clauseforge/errors.hpp"

// Little-endian primitives shared by the CREB, index snapshot and checkpoint
// formats.
namespace clauseforge::binio {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f32(std::ostream& out, float v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_bytes(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (in.gcount() != static_cast<std::streamsize>(sizeof v)) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return v;
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  return read_pod<std::uint32_t>(in, what);
}

inline std::string read_bytes(std::istream& in, const char* what,
                              std::uint32_t max_len = 1u << 20) {
  const auto n = read_u32(in, what);
  if (n > max_len) throw FormatError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return s;
}

}  // namespace clauseforge::binio
