#pragma once

#include <cstdint>
#include <stdexcept>

#include "cpm/geometry.hpp"
#include "cpm/grid.hpp"

namespace cpm {

// Binary local conductivity field: particle cells carry sigma_mat, the
// background sigma_inf.
struct ConductivityGrid {
  Grid2D<std::uint8_t> cells;  // 1 = conductive particle material
  double sigma_mat = 1.0;
  double sigma_inf = 1e-4;

  ConductivityGrid() = default;
  explicit ConductivityGrid(std::size_t n, double mat = 1.0, double inf = 1e-4)
      : cells(n, 0), sigma_mat(mat), sigma_inf(inf) {
    validate();
  }

  std::size_t n() const { return cells.n(); }
  double value(std::size_t i, std::size_t j) const { return cells(i, j) ? sigma_mat : sigma_inf; }

  std::size_t conductive_count() const {
    std::size_t c = 0;
    for (auto v : cells.data()) c += v ? 1 : 0;
    return c;
  }
  double conductive_fraction() const {
    return static_cast<double>(conductive_count()) / static_cast<double>(cells.size());
  }

  void validate() const {
    if (!(sigma_inf > 0.0) || !(sigma_mat > sigma_inf))
      throw std::invalid_argument("conductivities must satisfy sigma_mat > sigma_inf > 0");
  }
};

inline ConductivityGrid rasterize(const Configuration& config, double sigma_mat = 1.0,
                                  double sigma_inf = 1e-4) {
  const long n = config.box.lattice_size;
  ConductivityGrid g(static_cast<std::size_t>(n), sigma_mat, sigma_inf);
  const double h = config.box.spacing();
  for (const auto& d : config.disks)
    for_each_covered_cell(d, config.radius, h, n, [&](long i, long j) {
      g.cells(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 1;
    });
  return g;
}

}  // namespace cpm
