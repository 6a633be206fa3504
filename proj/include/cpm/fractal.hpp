#pragma once

// Box-counting dimension of lattice masks.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cpm/contour.hpp"
#include "cpm/errors.hpp"
#include "cpm/geometry.hpp"
#include "cpm/transport.hpp"

namespace cpm {

struct BoxCountSeries {
  std::size_t grid_n = 0;
  std::vector<std::size_t> box_sizes;
  std::vector<std::size_t> counts;
};

struct FractalResult {
  double dimension = 0.0;
  double fit_intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::size_t> sizes_used;
};

// Powers of two from 1 to n/8 (at least size 1).
inline std::vector<std::size_t> default_box_sizes(std::size_t n) {
  std::vector<std::size_t> sizes;
  for (std::size_t s = 1; s <= std::max<std::size_t>(1, n / 8); s *= 2) sizes.push_back(s);
  return sizes;
}

inline BoxCountSeries box_count(const ContourMask& mask, const std::vector<std::size_t>& sizes) {
  const std::size_t n = mask.n();
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const auto s = sizes[k];
    if (!is_power_of_two(static_cast<long>(s)) || n % s != 0)
      throw std::invalid_argument("box sizes must be powers of two dividing the grid size");
    if (k > 0 && !(s > sizes[k - 1])) throw std::invalid_argument("box sizes must be strictly increasing");
  }
  std::vector<std::pair<std::size_t, std::size_t>> set;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (mask.cells(i, j)) set.emplace_back(i, j);
  if (set.empty()) throw EmptyMask("box_count: mask has no set cells");
  BoxCountSeries out{n, sizes, {}};
  for (const auto s : sizes) {
    const std::size_t tiles = n / s;
    std::vector<std::uint8_t> hit(tiles * tiles, 0);
    std::size_t count = 0;
    for (const auto& [i, j] : set) {
      auto& h = hit[(j / s) * tiles + i / s];
      if (!h) {
        h = 1;
        ++count;
      }
    }
    out.counts.push_back(count);
  }
  return out;
}

inline BoxCountSeries box_count(const ContourMask& mask) { return box_count(mask, default_box_sizes(mask.n())); }

// A scale is saturated when more than half of its boxes are occupied and its
// occupied fraction is over twice that of the finest scale. Sets that are
// dense already at the finest scale (filled regions, carpets) therefore keep
// every scale.
inline bool saturated(const BoxCountSeries& series, std::size_t k) {
  auto fill = [&](std::size_t idx) {
    const double tiles = static_cast<double>(series.grid_n / series.box_sizes[idx]);
    return static_cast<double>(series.counts[idx]) / (tiles * tiles);
  };
  const double f = fill(k);
  return f > 0.5 && f > 2.0 * fill(0);
}

inline FractalResult dimension(const BoxCountSeries& series, std::size_t min_scales = 4) {
  if (series.box_sizes.size() != series.counts.size()) throw std::invalid_argument("malformed box-count series");
  std::vector<double> xs, ys;
  FractalResult out;
  for (std::size_t k = 0; k < series.box_sizes.size(); ++k) {
    if (series.counts[k] == 0 || saturated(series, k)) continue;
    xs.push_back(-std::log(static_cast<double>(series.box_sizes[k])));
    ys.push_back(std::log(static_cast<double>(series.counts[k])));
    out.sizes_used.push_back(series.box_sizes[k]);
  }
  if (xs.size() < min_scales) {
    std::ostringstream os;
    os << "only " << xs.size() << " unsaturated box sizes, need " << min_scales;
    throw InsufficientScales(os.str());
  }
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  out.dimension = sxy / sxx;
  out.fit_intercept = my - out.dimension * mx;
  out.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return out;
}

inline FractalResult mask_dimension(const ContourMask& mask) { return dimension(box_count(mask)); }

// Dimension of each level on its own, for diagnosing the pooled estimate.
inline std::vector<FractalResult> dimension_per_level(const ContourSet& contours) {
  std::vector<FractalResult> out;
  for (std::size_t li = 0; li < contours.levels.size(); ++li)
    out.push_back(mask_dimension(rasterize_contours(contours.only_level(li))));
  return out;
}

// phi = 0.1, 0.2, ..., 0.9
inline std::vector<double> default_levels() {
  std::vector<double> v;
  for (int k = 1; k <= 9; ++k) v.push_back(k / 10.0);
  return v;
}

// Pooled dimension of all contour levels of a solved potential.
inline FractalResult contour_dimension(const Grid2D<double>& phi, const std::vector<double>& levels) {
  return mask_dimension(rasterize_contours(extract_levels(phi, levels)));
}

struct DimensionPoint {
  double p = 0.0;
  double dimension = 0.0;
  double r_squared = 0.0;
};

inline std::vector<DimensionPoint> dimension_curve(std::uint64_t seed, const BoxSpec& box,
                                                   const std::vector<double>& p_grid,
                                                   const std::vector<double>& levels = default_levels(),
                                                   const SolverSettings& settings = {},
                                                   const SweepOptions& opts = {}) {
  validate_p_grid(p_grid);
  const auto configs = nested_configurations(seed, box, p_grid, opts.deposit);
  std::vector<DimensionPoint> out;
  for (std::size_t k = 0; k < p_grid.size(); ++k) {
    try {
      const auto sigma = rasterize(configs[k], opts.sigma_mat, opts.sigma_inf);
      const auto phi = solve(sigma, settings);
      const auto r = contour_dimension(phi.phi, levels);
      out.push_back({p_grid[k], r.dimension, r.r_squared});
    } catch (const Error& e) {
      throw SweepPointError(p_grid[k], e.what());
    }
  }
  return out;
}

inline void write_dimension_header(std::ostream& os) { os << "p,D,r_squared,seed,N,levels\n"; }

inline void write_dimension_row(std::ostream& os, const DimensionPoint& d, std::uint64_t seed, int lattice_size,
                                std::size_t level_count) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17) << d.p << ',' << d.dimension << ',' << d.r_squared << ',' << seed << ','
     << lattice_size << ',' << level_count << '\n';
  os.flags(flags);
  os.precision(prec);
}

}  // namespace cpm
