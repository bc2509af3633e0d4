#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "qma/field.hpp"

namespace qma {

/// QMAF field container: magic "QMAF", little-endian header
/// (version u32, n u32, N u32, dtype u8 in {0: real64, 1: complex128})
/// followed by the row-major payload.
namespace qmaf {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kReal64 = 0;
constexpr std::uint8_t kComplex128 = 1;

namespace detail {

inline void write_header(std::ofstream& out, const GridSpec& grid, std::uint8_t dtype) {
  out.write("QMAF", 4);
  const std::uint32_t version = kVersion;
  const std::uint32_t n = static_cast<std::uint32_t>(grid.n);
  const std::uint32_t N = static_cast<std::uint32_t>(grid.points_per_axis);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&N), 4);
  out.write(reinterpret_cast<const char*>(&dtype), 1);
}

} // namespace detail

inline void write(const std::string& path, const RealField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("qmaf: cannot open for writing: " + path);
  detail::write_header(out, f.grid(), kReal64);
  out.write(reinterpret_cast<const char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!out) throw std::runtime_error("qmaf: write failed: " + path);
}

inline void write(const std::string& path, const ComplexField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("qmaf: cannot open for writing: " + path);
  detail::write_header(out, f.grid(), kComplex128);
  out.write(reinterpret_cast<const char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(cplx)));
  if (!out) throw std::runtime_error("qmaf: write failed: " + path);
}

using AnyField = std::variant<RealField, ComplexField>;

inline AnyField read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("qmaf: cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "QMAF", 4) != 0)
    throw std::runtime_error("qmaf: bad magic in " + path);
  std::uint32_t version = 0, n = 0, N = 0;
  std::uint8_t dtype = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&N), 4);
  in.read(reinterpret_cast<char*>(&dtype), 1);
  if (!in || version != kVersion)
    throw std::runtime_error("qmaf: unsupported version in " + path);
  const GridSpec grid(static_cast<int>(n), static_cast<int>(N));
  if (dtype == kReal64) {
    RealField f(grid);
    in.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(double)));
    if (!in) throw std::runtime_error("qmaf: truncated payload in " + path);
    return f;
  }
  if (dtype == kComplex128) {
    ComplexField f(grid);
    in.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(cplx)));
    if (!in) throw std::runtime_error("qmaf: truncated payload in " + path);
    return f;
  }
  throw std::runtime_error("qmaf: unknown dtype in " + path);
}

inline RealField read_real(const std::string& path) {
  AnyField any = read(path);
  if (auto* r = std::get_if<RealField>(&any)) return std::move(*r);
  throw std::runtime_error("qmaf: expected a real64 field in " + path);
}

} // namespace qmaf
} // namespace qma
