#pragma once

// Least-squares fit of the threshold power law
//
//   sigma(p) = ((p - p_c) / (1 - p_c))^t   for p >= p_c,   0 otherwise
//
// over the whole sampled range [0, 1]. The kink at p_c makes the objective
// non-smooth, so the minimiser is found by exhaustive grid search followed by
// three rounds of tenfold local refinement.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "cpm/errors.hpp"
#include "cpm/transport.hpp"

namespace cpm {

inline double model(double p, double p_c, double t) {
  if (p < p_c) return 0.0;
  return std::pow((p - p_c) / (1.0 - p_c), t);
}

struct FitResult {
  double p_c = 0.0;
  double t = 0.0;
  double sse = 0.0;
  std::uint64_t seed = 0;
  std::size_t points = 0;
};

struct FitDomain {
  double p_c_min = 0.05, p_c_max = 0.95, p_c_step = 0.005;
  double t_min = 0.2, t_max = 5.0, t_step = 0.01;
  int refinement_rounds = 3;
};

namespace detail {

inline double sse(std::span<const double> p, std::span<const double> s, double p_c, double t) {
  const double inv = 1.0 / (1.0 - p_c);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double m = p[k] < p_c ? 0.0 : std::pow((p[k] - p_c) * inv, t);
    const double d = s[k] - m;
    acc += d * d;
  }
  return acc;
}

struct GridBest {
  double p_c, t, sse;
};

// Scans p_c = lo_p + a * dp, t = lo_t + b * dt (inclusive of the upper ends,
// clipped to the domain). Ties go to the smallest p_c, then the smallest t.
inline GridBest scan(std::span<const double> p, std::span<const double> s, double lo_p, double hi_p, double dp,
                     double lo_t, double hi_t, double dt) {
  GridBest best{lo_p, lo_t, std::numeric_limits<double>::infinity()};
  const long na = static_cast<long>(std::floor((hi_p - lo_p) / dp + 1e-9));
  const long nb = static_cast<long>(std::floor((hi_t - lo_t) / dt + 1e-9));
  for (long a = 0; a <= na; ++a) {
    const double pc = lo_p + static_cast<double>(a) * dp;
    for (long b = 0; b <= nb; ++b) {
      const double t = lo_t + static_cast<double>(b) * dt;
      const double e = sse(p, s, pc, t);
      if (e < best.sse) best = {pc, t, e};
    }
  }
  return best;
}

}  // namespace detail

// Rejects curves with no conducting regime or a clear decrease in sigma.
inline void check_fit_input(const ConductivityCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 5) throw DegenerateData("fit needs at least 5 curve points");
  bool signal = false;
  for (const auto& pt : pts)
    if (std::abs(pt.sigma_total - curve.sigma_inf) > 1e-6) signal = true;
  if (!signal) throw DegenerateData("curve never leaves the background conductivity");
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (!(pts[k].p > pts[k - 1].p)) throw DegenerateData("curve p values are not strictly increasing");
    const double prev = pts[k - 1].sigma_total;
    if (pts[k].sigma_total < prev - (1e-3 * std::abs(prev) + 1e-9))
      throw DegenerateData("curve decreases beyond the noise bound");
  }
}

inline FitResult fit(const ConductivityCurve& curve, const FitDomain& dom = {}) {
  check_fit_input(curve);
  std::vector<double> p, s;
  for (const auto& pt : curve.points) {
    p.push_back(pt.p);
    s.push_back(pt.sigma_total);
  }
  auto best = detail::scan(p, s, dom.p_c_min, dom.p_c_max, dom.p_c_step, dom.t_min, dom.t_max, dom.t_step);
  double dp = dom.p_c_step, dt = dom.t_step;
  for (int round = 0; round < dom.refinement_rounds; ++round) {
    const double lo_p = std::max(dom.p_c_min, best.p_c - dp), hi_p = std::min(dom.p_c_max, best.p_c + dp);
    const double lo_t = std::max(dom.t_min, best.t - dt), hi_t = std::min(dom.t_max, best.t + dt);
    dp /= 10.0;
    dt /= 10.0;
    const auto refined = detail::scan(p, s, lo_p, hi_p, dp, lo_t, hi_t, dt);
    if (refined.sse <= best.sse) best = refined;
  }
  return {best.p_c, best.t, best.sse, curve.seed, curve.points.size()};
}

inline void write_fit_header(std::ostream& os) { os << "seed,N,p_c,t,sse,points\n"; }

inline void write_fit_row(std::ostream& os, const FitResult& r, int lattice_size) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << r.seed << ',' << lattice_size << ',' << std::setprecision(17) << r.p_c << ',' << r.t << ',' << r.sse << ','
     << r.points << '\n';
  os.flags(flags);
  os.precision(prec);
}

}  // namespace cpm
