#pragma once

// Equipotential curves by marching squares, their rasterisation onto the
// lattice, and flat-potential region segmentation.
//
// Contour coordinates are in cell units: cell (i, j) occupies
// [i, i+1) x [j, j+1) and its potential sample sits at (i + 0.5, j + 0.5).
// Marching squares runs over the (n-1) x (n-1) squares whose corners are
// those sample points.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cpm/grid.hpp"

namespace cpm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct ContourSegment {
  std::size_t level = 0;  // index into ContourSet::levels
  Point2 a;
  Point2 b;
};

struct ContourSet {
  std::vector<double> levels;
  std::vector<ContourSegment> segments;
  std::size_t grid_n = 0;

  double length(std::size_t level) const {
    double s = 0.0;
    for (const auto& seg : segments)
      if (seg.level == level) s += std::hypot(seg.b.x - seg.a.x, seg.b.y - seg.a.y);
    return s;
  }

  // Subset holding only the segments of one level (levels list kept intact).
  ContourSet only_level(std::size_t level) const {
    ContourSet out{levels, {}, grid_n};
    for (const auto& seg : segments)
      if (seg.level == level) out.segments.push_back(seg);
    return out;
  }
};

enum class SaddleRule {
  CellMean,   // compare the mean of the four corners with the level
  AlwaysLow,  // treat the centre as below the level
};

namespace detail {

// Marching-square edges: 0 bottom, 1 right, 2 top, 3 left.
inline Point2 edge_point(int edge, std::size_t i, std::size_t j, const std::array<double, 4>& v, double level) {
  const double x0 = static_cast<double>(i) + 0.5, y0 = static_cast<double>(j) + 0.5;
  auto lerp = [level](double a, double b) { return (level - a) / (b - a); };
  switch (edge) {
    case 0: return {x0 + lerp(v[0], v[1]), y0};
    case 1: return {x0 + 1.0, y0 + lerp(v[1], v[2])};
    case 2: return {x0 + lerp(v[3], v[2]), y0 + 1.0};
    default: return {x0, y0 + lerp(v[0], v[3])};
  }
}

}  // namespace detail

inline ContourSet extract_levels(const Grid2D<double>& phi, const std::vector<double>& levels,
                                 SaddleRule rule = SaddleRule::CellMean) {
  for (double lv : levels)
    if (!(lv > 0.0 && lv < 1.0)) throw std::invalid_argument("contour levels must lie strictly inside (0, 1)");
  ContourSet out{levels, {}, phi.n()};
  const std::size_t n = phi.n();
  if (n < 2) return out;
  // Edge pairs for each corner-classification case (bit k set when corner k
  // is at or above the level; corners counter-clockwise from bottom-left).
  static constexpr std::array<std::array<int, 2>, 16> kSingle = {{{-1, -1},
                                                                  {3, 0},
                                                                  {0, 1},
                                                                  {3, 1},
                                                                  {1, 2},
                                                                  {-1, -1},
                                                                  {0, 2},
                                                                  {3, 2},
                                                                  {2, 3},
                                                                  {0, 2},
                                                                  {-1, -1},
                                                                  {1, 2},
                                                                  {3, 1},
                                                                  {0, 1},
                                                                  {3, 0},
                                                                  {-1, -1}}};
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double lv = levels[li];
    for (std::size_t j = 0; j + 1 < n; ++j)
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::array<double, 4> v{phi(i, j), phi(i + 1, j), phi(i + 1, j + 1), phi(i, j + 1)};
        const int c = (v[0] >= lv) | ((v[1] >= lv) << 1) | ((v[2] >= lv) << 2) | ((v[3] >= lv) << 3);
        if (c == 0 || c == 15) continue;
        auto emit = [&](int e0, int e1) {
          out.segments.push_back({li, detail::edge_point(e0, i, j, v, lv), detail::edge_point(e1, i, j, v, lv)});
        };
        if (c == 5 || c == 10) {
          const bool centre_high = rule == SaddleRule::CellMean && 0.25 * (v[0] + v[1] + v[2] + v[3]) >= lv;
          // Corners 0 and 2 high (case 5) joined through a high centre leave
          // corners 1 and 3 cut off, and symmetrically for case 10.
          if ((c == 5) == centre_high) {
            emit(0, 1);
            emit(2, 3);
          } else {
            emit(3, 0);
            emit(1, 2);
          }
          continue;
        }
        emit(kSingle[c][0], kSingle[c][1]);
      }
  }
  return out;
}

struct ContourMask {
  Grid2D<std::uint8_t> cells;

  std::size_t n() const { return cells.n(); }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto v : cells.data()) c += v ? 1 : 0;
    return c;
  }
};

// Marks every lattice cell a segment passes through. Each segment is split
// at integer grid lines and the cell containing the midpoint of every piece
// is marked, so a segment lying exactly on a grid line marks the cells above
// it.
inline void mark_segment(Grid2D<std::uint8_t>& cells, const Point2& a, const Point2& b) {
  const long n = static_cast<long>(cells.n());
  auto mark = [&](double x, double y) {
    const long i = std::clamp(static_cast<long>(std::floor(x)), 0L, n - 1);
    const long j = std::clamp(static_cast<long>(std::floor(y)), 0L, n - 1);
    cells(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 1;
  };
  std::vector<double> ts{0.0, 1.0};
  auto crossings = [&](double u0, double u1) {
    if (u0 == u1) return;
    const double lo = std::min(u0, u1), hi = std::max(u0, u1);
    for (double g = std::ceil(lo); g <= hi; g += 1.0) {
      const double t = (g - u0) / (u1 - u0);
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
  };
  crossings(a.x, b.x);
  crossings(a.y, b.y);
  std::sort(ts.begin(), ts.end());
  if (a.x == b.x && a.y == b.y) {
    mark(a.x, a.y);
    return;
  }
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double tm = 0.5 * (ts[k] + ts[k + 1]);
    mark(a.x + tm * (b.x - a.x), a.y + tm * (b.y - a.y));
  }
}

inline ContourMask rasterize_contours(const ContourSet& contours) {
  ContourMask mask{Grid2D<std::uint8_t>(contours.grid_n, 0)};
  for (const auto& seg : contours.segments) mark_segment(mask.cells, seg.a, seg.b);
  return mask;
}

inline void write_segments_csv(std::ostream& os, const ContourSet& cs) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << "level,x0,y0,x1,y1\n" << std::setprecision(17);
  for (const auto& s : cs.segments)
    os << cs.levels[s.level] << ',' << s.a.x << ',' << s.a.y << ',' << s.b.x << ',' << s.b.y << '\n';
  os.flags(flags);
  os.precision(prec);
}

// Regions of nearly constant potential. Label 0 never appears in the output;
// mean_potential[k] belongs to label k + 1.
struct QuasiClusterLabeling {
  Grid2D<int> labels;
  std::vector<double> mean_potential;

  std::size_t n() const { return labels.n(); }
  std::size_t count() const { return mean_potential.size(); }
};

// Greedy flood fill: seeds are taken in row-major order (bottom row first);
// each region grows through 4-neighbours as long as its running
// max - min potential stays within epsilon.
inline QuasiClusterLabeling segment_quasi_clusters(const Grid2D<double>& phi, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  const std::size_t n = phi.n();
  QuasiClusterLabeling out{Grid2D<int>(n, 0), {}};
  std::deque<std::pair<std::size_t, std::size_t>> queue;
  for (std::size_t j0 = 0; j0 < n; ++j0)
    for (std::size_t i0 = 0; i0 < n; ++i0) {
      if (out.labels(i0, j0) != 0) continue;
      const int label = static_cast<int>(out.mean_potential.size()) + 1;
      double lo = phi(i0, j0), hi = lo, sum = 0.0;
      std::size_t members = 0;
      out.labels(i0, j0) = label;
      queue.emplace_back(i0, j0);
      while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        sum += phi(i, j);
        ++members;
        auto visit = [&](std::size_t a, std::size_t b) {
          if (out.labels(a, b) != 0) return;
          const double v = phi(a, b);
          const double nlo = std::min(lo, v), nhi = std::max(hi, v);
          if (nhi - nlo > epsilon) return;
          lo = nlo;
          hi = nhi;
          out.labels(a, b) = label;
          queue.emplace_back(a, b);
        };
        if (i > 0) visit(i - 1, j);
        if (i + 1 < n) visit(i + 1, j);
        if (j > 0) visit(i, j - 1);
        if (j + 1 < n) visit(i, j + 1);
      }
      out.mean_potential.push_back(sum / static_cast<double>(members));
    }
  return out;
}

}  // namespace cpm
