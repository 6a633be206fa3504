#pragma once

// Binary PGM (P5) images and raw potential dumps.
//
// Images are written top row first, so image row 0 is the top electrode
// (lattice row n-1). Raw dumps keep lattice order: row-major, row 0 at the
// bottom electrode, little-endian IEEE-754 doubles.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cpm/contour.hpp"
#include "cpm/grid.hpp"
#include "cpm/raster.hpp"

namespace cpm {

inline void write_pgm(std::ostream& os, const Grid2D<std::uint8_t>& gray) {
  const std::size_t n = gray.n();
  os << "P5\n" << n << ' ' << n << "\n255\n";
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = gray.row(n - 1 - r);
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(n));
  }
}

inline Grid2D<std::uint8_t> read_pgm(std::istream& is) {
  auto token = [&is]() {
    std::string t;
    while (is >> t) {
      if (t[0] != '#') return t;
      std::string rest;
      std::getline(is, rest);
    }
    throw std::runtime_error("pgm: unexpected end of header");
  };
  if (token() != "P5") throw std::runtime_error("pgm: only binary P5 images are supported");
  const auto w = std::stoul(token()), h = std::stoul(token()), maxval = std::stoul(token());
  if (w != h) throw std::runtime_error("pgm: image must be square");
  if (maxval == 0 || maxval > 255) throw std::runtime_error("pgm: only 8-bit images are supported");
  is.get();  // single whitespace after maxval
  Grid2D<std::uint8_t> g(w, 0);
  for (std::size_t r = 0; r < h; ++r) {
    auto row = g.row(h - 1 - r);
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(w)))
      throw std::runtime_error("pgm: truncated pixel data");
  }
  return g;
}

inline Grid2D<std::uint8_t> conductivity_image(const ConductivityGrid& sigma) {
  Grid2D<std::uint8_t> g(sigma.n(), 0);
  for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] = sigma.cells.data()[k] ? 255 : 0;
  return g;
}

inline Grid2D<std::uint8_t> potential_image(const Grid2D<double>& phi) {
  Grid2D<std::uint8_t> g(phi.n(), 0);
  for (std::size_t k = 0; k < g.size(); ++k)
    g.data()[k] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(phi.data()[k], 0.0, 1.0)));
  return g;
}

// Contour cells black on white.
inline Grid2D<std::uint8_t> contour_image(const ContourMask& mask) {
  Grid2D<std::uint8_t> g(mask.n(), 255);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (mask.cells.data()[k]) g.data()[k] = 0;
  return g;
}

// Any non-zero pixel is set.
inline ContourMask mask_from_image(const Grid2D<std::uint8_t>& gray, bool set_is_dark = false) {
  ContourMask m{Grid2D<std::uint8_t>(gray.n(), 0)};
  for (std::size_t k = 0; k < gray.size(); ++k) {
    const bool on = set_is_dark ? gray.data()[k] == 0 : gray.data()[k] != 0;
    m.cells.data()[k] = on ? 1 : 0;
  }
  return m;
}

inline void write_raw(std::ostream& os, const Grid2D<double>& phi) {
  for (double v : phi.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
  }
}

inline Grid2D<double> read_raw(std::istream& is, std::size_t n) {
  Grid2D<double> phi(n, 0.0);
  for (auto& v : phi.data()) {
    char buf[8];
    if (!is.read(buf, 8)) throw std::runtime_error("raw potential: truncated data");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
  return phi;
}

}  // namespace cpm
