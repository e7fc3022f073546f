#pragma once

// Little-endian primitive readers/writers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "trajsv/error.hpp"

namespace trajsv::bin {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("unexpected end of binary file");
  return v;
}

inline std::uint32_t read_u32(std::istream& in) { return read_pod<std::uint32_t>(in); }
inline std::uint64_t read_u64(std::istream& in) { return read_pod<std::uint64_t>(in); }
inline double read_f64(std::istream& in) { return read_pod<double>(in); }

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1ULL << 30) {
  const auto n = read_u64(in);
  if (n > max_len) throw DataError("string length in binary file is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("unexpected end of binary file");
  return s;
}

}  // namespace trajsv::bin
