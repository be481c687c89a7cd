#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridloc/grid.hpp"

namespace gridloc {

static_assert(std::endian::native == std::endian::little,
              "grid files are little-endian");

namespace detail {

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw std::runtime_error("grid file truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

/// Serializes a grid: "GRD1", u32 column count, u32 row count, f64 cell size,
/// f64 origin x, f64 origin y, then one f32 per cell in column-major order
/// (unavailable cells as 0.0f), then the availability bitmask packed LSB-first
/// (bit n = cell n).
[[nodiscard]] inline std::string encode_grid(const MaskedGrid& g) {
  std::string buf;
  buf.reserve(4 + 8 + 24 + g.size() * 4 + (g.size() + 7) / 8);
  buf.append("GRD1", 4);
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(g.nx()));
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(g.ny()));
  detail::put<double>(buf, g.cell_size());
  detail::put<double>(buf, g.origin_x());
  detail::put<double>(buf, g.origin_y());
  for (std::size_t n = 0; n < g.size(); ++n) {
    detail::put<float>(buf, g.available(n) ? static_cast<float>(g.value(n)) : 0.0f);
  }
  std::vector<std::uint8_t> bits((g.size() + 7) / 8, 0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (g.available(n)) bits[n / 8] |= static_cast<std::uint8_t>(1u << (n % 8));
  }
  buf.append(reinterpret_cast<const char*>(bits.data()), bits.size());
  return buf;
}

[[nodiscard]] inline MaskedGrid decode_grid(const std::string& buf) {
  if (buf.size() < 4 || buf.compare(0, 4, "GRD1") != 0) {
    throw std::runtime_error("not a grid file: bad magic");
  }
  std::size_t pos = 4;
  const auto nx = detail::take<std::uint32_t>(buf, pos);
  const auto ny = detail::take<std::uint32_t>(buf, pos);
  const auto cell = detail::take<double>(buf, pos);
  const auto ox = detail::take<double>(buf, pos);
  const auto oy = detail::take<double>(buf, pos);
  MaskedGrid g(nx, ny, cell, ox, oy);
  std::vector<float> vals(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) vals[n] = detail::take<float>(buf, pos);
  const std::size_t mask_bytes = (g.size() + 7) / 8;
  if (pos + mask_bytes > buf.size()) throw std::runtime_error("grid file truncated");
  for (std::size_t n = 0; n < g.size(); ++n) {
    const std::uint8_t byte = static_cast<std::uint8_t>(buf[pos + n / 8]);
    if (byte & (1u << (n % 8))) g.set(n, static_cast<double>(vals[n]));
  }
  return g;
}

inline void write_grid(const std::string& path, const MaskedGrid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::string buf = encode_grid(g);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

[[nodiscard]] inline MaskedGrid read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open grid file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return decode_grid(buf);
}

/// 8-bit binary PGM preview, north up (row j = ny-1 on top). Unavailable
/// cells render as 0; available values are min-max scaled onto [0, 255]
/// (a constant field renders as 255).
[[nodiscard]] inline std::string encode_pgm(const MaskedGrid& g) {
  double lo = 0.0;
  double hi = 0.0;
  const bool any = g.available_count() > 0;
  if (any) g.minmax(lo, hi);
  const double span = hi - lo;
  std::string buf = "P5\n" + std::to_string(g.nx()) + " " +
                    std::to_string(g.ny()) + "\n255\n";
  buf.reserve(buf.size() + g.size());
  for (std::size_t r = 0; r < g.ny(); ++r) {
    const std::size_t j = g.ny() - 1 - r;
    for (std::size_t i = 0; i < g.nx(); ++i) {
      const std::size_t n = g.index(i, j);
      unsigned char px = 0;
      if (g.available(n)) {
        px = span > 0.0 ? static_cast<unsigned char>(
                              std::lround(255.0 * (g.value(n) - lo) / span))
                        : 255;
      }
      buf.push_back(static_cast<char>(px));
    }
  }
  return buf;
}

inline void write_pgm(const std::string& path, const MaskedGrid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::string buf = encode_pgm(g);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gridloc
