#pragma once

// Finite-volume solve of div(sigma grad phi) = 0 on the cell-centred lattice.
//
// The bottom cell row is pinned to phi = 0 and the top row to phi = 1
// (electrodes). Side walls are insulating: the faces at x = 0 and x = L carry
// no flux. Neighbouring cells couple through the harmonic mean of their
// conductivities, which keeps the flux continuous across a binary interface.
// The remaining n * (n - 2) unknowns form an SPD system.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/raster.hpp"

namespace cpm {

inline double face_conductance(double sigma_a, double sigma_b) {
  if (!(sigma_a > 0.0) || !(sigma_b > 0.0))
    throw std::invalid_argument("face_conductance: conductivities must be positive");
  if (sigma_a == sigma_b) return sigma_a;
  return 2.0 * sigma_a * sigma_b / (sigma_a + sigma_b);
}

// Cut currents of an accepted solve agree to this many tolerances.
inline constexpr double kFluxFactor = 10.0;

enum class SolverMethod { ConjugateGradient, SOR };

inline std::string to_string(SolverMethod m) {
  return m == SolverMethod::ConjugateGradient ? "pcg-jacobi" : "sor";
}

struct SolverSettings {
  double tolerance = 1e-8;
  long max_iterations = 1'000'000;
  SolverMethod method = SolverMethod::ConjugateGradient;
  // Also require every horizontal cut current to lie within
  // kFluxFactor * tolerance * |mean cut current| of the mean before stopping.
  bool require_flux_balance = true;

  void validate() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
    if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
  }
};

struct PotentialGrid {
  Grid2D<double> phi;
  long iterations = 0;
  double final_residual = 0.0;  // ||b - A x||_2 / ||b||_2, true residual
  double tolerance = 0.0;       // tolerance the solve was run to
  double flux_spread = 0.0;     // max_k |I_k - mean| / |mean| across cuts

  std::size_t n() const { return phi.n(); }
};

// Face conductances of a lattice. gx(i, j) couples (i, j)-(i+1, j) and is 0
// in the last column (insulating wall); gy(i, j) couples (i, j)-(i, j+1) and
// is 0 in the last row.
struct FaceConductances {
  Grid2D<double> gx;
  Grid2D<double> gy;

  explicit FaceConductances(const ConductivityGrid& sigma) : gx(sigma.n(), 0.0), gy(sigma.n(), 0.0) {
    const std::size_t n = sigma.n();
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n) gx(i, j) = face_conductance(sigma.value(i, j), sigma.value(i + 1, j));
        if (j + 1 < n) gy(i, j) = face_conductance(sigma.value(i, j), sigma.value(i, j + 1));
      }
  }
};

// Vertical current through each of the n-1 horizontal cuts (between rows k
// and k+1), positive in the direction of decreasing potential.
inline std::vector<double> cut_currents(const Grid2D<double>& phi, const Grid2D<double>& gy) {
  const std::size_t n = phi.n();
  std::vector<double> cuts(n > 0 ? n - 1 : 0, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += gy(i, k) * (phi(i, k + 1) - phi(i, k));
    cuts[k] = s;
  }
  return cuts;
}

inline double relative_spread(const std::vector<double>& cuts) {
  if (cuts.empty()) return 0.0;
  double mean = 0.0;
  for (double c : cuts) mean += c;
  mean /= static_cast<double>(cuts.size());
  double worst = 0.0;
  for (double c : cuts) worst = std::max(worst, std::abs(c - mean));
  return mean != 0.0 ? worst / std::abs(mean) : (worst == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
}

namespace detail {

// Working state shared by both iteration schemes.
class LaplaceSystem {
 public:
  explicit LaplaceSystem(const ConductivityGrid& sigma)
      : n_(sigma.n()), faces_(sigma), diag_(n_ * n_, 0.0) {
    const auto& gx = faces_.gx.data();
    const auto& gy = faces_.gy.data();
    for (std::size_t j = 1; j + 1 < n_; ++j)
      for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t k = j * n_ + i;
        double d = gx[k] + gy[k] + gy[k - n_];
        if (i > 0) d += gx[k - 1];
        diag_[k] = d;
      }
    double bb = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double g = gy[(n_ - 2) * n_ + i];
      bb += g * g;
    }
    b_norm_ = std::sqrt(bb);
  }

  std::size_t n() const { return n_; }
  const FaceConductances& faces() const { return faces_; }
  const std::vector<double>& diag() const { return diag_; }
  double b_norm() const { return b_norm_; }
  std::size_t first() const { return n_; }
  std::size_t last() const { return n_ * (n_ - 1); }

  // out = A v on the unknown rows; v must be zero on both Dirichlet rows.
  void apply(const std::vector<double>& v, std::vector<double>& out) const {
    const double* gx = faces_.gx.data().data();
    const double* gy = faces_.gy.data().data();
    const double* d = diag_.data();
    const double* p = v.data();
    double* y = out.data();
    const std::size_t n = n_;
    for (std::size_t k = first(); k < last(); ++k)
      y[k] = d[k] * p[k] - gx[k - 1] * p[k - 1] - gx[k] * p[k + 1] - gy[k - n] * p[k - n] - gy[k] * p[k + n];
  }

  // out = net inflow at each unknown cell for the full field phi (Dirichlet
  // rows included), i.e. b - A x.
  void residual(const std::vector<double>& phi, std::vector<double>& out) const {
    const double* gx = faces_.gx.data().data();
    const double* gy = faces_.gy.data().data();
    const double* d = diag_.data();
    const double* f = phi.data();
    double* r = out.data();
    const std::size_t n = n_;
    for (std::size_t k = first(); k < last(); ++k)
      r[k] = gx[k - 1] * f[k - 1] + gx[k] * f[k + 1] + gy[k - n] * f[k - n] + gy[k] * f[k + n] - d[k] * f[k];
  }

  double norm(const std::vector<double>& v) const {
    double s = 0.0;
    for (std::size_t k = first(); k < last(); ++k) s += v[k] * v[k];
    return std::sqrt(s);
  }

 private:
  std::size_t n_;
  FaceConductances faces_;
  std::vector<double> diag_;
  double b_norm_ = 0.0;
};

inline Grid2D<double> linear_profile(std::size_t n) {
  Grid2D<double> phi(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double v = static_cast<double>(j) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) phi(i, j) = v;
  }
  for (std::size_t i = 0; i < n; ++i) phi(i, n - 1) = 1.0;
  return phi;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t k = lo; k < hi; ++k) s += a[k] * b[k];
  return s;
}

class ConvergenceCheck {
 public:
  ConvergenceCheck(const LaplaceSystem& sys, const SolverSettings& s) : sys_(sys), s_(s) {}

  // Evaluates the true residual and, if requested, the cut balance of phi.
  bool accept(const std::vector<double>& phi, std::vector<double>& scratch) {
    sys_.residual(phi, scratch);
    residual_ = sys_.norm(scratch) / sys_.b_norm();
    Grid2D<double> view(sys_.n());
    view.data() = phi;
    spread_ = relative_spread(cut_currents(view, sys_.faces().gy));
    return residual_ <= s_.tolerance && (!s_.require_flux_balance || spread_ <= kFluxFactor * s_.tolerance);
  }

  double residual() const { return residual_; }
  double spread() const { return spread_; }

  // Distance from acceptance in units of the tolerance (<= 1 when accepted).
  double excess() const {
    const double e = residual_ / s_.tolerance;
    return s_.require_flux_balance ? std::max(e, spread_ / (kFluxFactor * s_.tolerance)) : e;
  }

 private:
  const LaplaceSystem& sys_;
  const SolverSettings& s_;
  double residual_ = std::numeric_limits<double>::infinity();
  double spread_ = std::numeric_limits<double>::infinity();
};

inline void clamp_unit(std::vector<double>& phi) {
  for (auto& v : phi) v = std::clamp(v, 0.0, 1.0);
}

[[noreturn]] inline void fail(long iters, double residual, double spread) {
  std::ostringstream os;
  os << "solver did not converge after " << iters << " iterations (relative residual " << residual
     << ", cut spread " << spread << ")";
  throw NonConvergence(os.str(), iters, residual);
}

inline PotentialGrid solve_pcg(const LaplaceSystem& sys, const SolverSettings& settings) {
  const std::size_t n = sys.n();
  const std::size_t lo = sys.first(), hi = sys.last();
  PotentialGrid out;
  out.tolerance = settings.tolerance;
  out.phi = linear_profile(n);
  auto& x = out.phi.data();

  std::vector<double> r(n * n, 0.0), z(n * n, 0.0), p(n * n, 0.0), q(n * n, 0.0), scratch(n * n, 0.0);
  std::vector<double> inv_diag(n * n, 0.0);
  for (std::size_t k = lo; k < hi; ++k) inv_diag[k] = 1.0 / sys.diag()[k];

  ConvergenceCheck check(sys, settings);
  const double b_norm = sys.b_norm();
  sys.residual(x, r);

  auto restart = [&] {
    for (std::size_t k = lo; k < hi; ++k) z[k] = inv_diag[k] * r[k];
    p = z;
    return dot(r, z, lo, hi);
  };
  double rz = restart();

  long it = 0;
  // Iterations between full convergence checks once the recursive residual
  // has met the tolerance.
  constexpr long kRefresh = 25;
  long next_check = 0;
  constexpr int kStallChecks = 200;
  int stalled = 0;
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    const double rn = sys.norm(r) / b_norm;
    if (rn <= settings.tolerance && it >= next_check) {
      if (check.accept(x, scratch)) break;
      next_check = it + kRefresh;
      // Give up once neither the true residual nor the cut balance improves:
      // a target below the rounding floor would otherwise spin to
      // max_iterations.
      if (check.excess() < 0.9 * best) {
        best = check.excess();
        stalled = 0;
      } else if (++stalled >= kStallChecks) {
        fail(it, check.residual(), check.spread());
      }
    }
    if (it >= settings.max_iterations) {
      check.accept(x, scratch);
      fail(it, check.residual(), check.spread());
    }
    sys.apply(p, q);
    const double pq = dot(p, q, lo, hi);
    if (!(pq > 0.0)) {
      // Direction collapsed in floating point: restart from the true residual.
      sys.residual(x, r);
      rz = restart();
      ++it;
      continue;
    }
    const double alpha = rz / pq;
    for (std::size_t k = lo; k < hi; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * q[k];
      z[k] = inv_diag[k] * r[k];
    }
    const double rz_new = dot(r, z, lo, hi);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = lo; k < hi; ++k) p[k] = z[k] + beta * p[k];
    ++it;
  }
  out.iterations = it;
  out.final_residual = check.residual();
  out.flux_spread = check.spread();
  return out;
}

inline PotentialGrid solve_sor(const LaplaceSystem& sys, const SolverSettings& settings) {
  const std::size_t n = sys.n();
  PotentialGrid out;
  out.tolerance = settings.tolerance;
  out.phi = linear_profile(n);
  auto& f = out.phi.data();
  const double* gx = sys.faces().gx.data().data();
  const double* gy = sys.faces().gy.data().data();
  const auto& d = sys.diag();
  const double omega = 2.0 / (1.0 + std::sin(std::numbers::pi / static_cast<double>(n)));

  ConvergenceCheck check(sys, settings);
  std::vector<double> scratch(n * n, 0.0);
  constexpr long kCheckEvery = 10;
  long it = 0;
  while (!(it % kCheckEvery == 0 && check.accept(f, scratch))) {
    if (it >= settings.max_iterations) fail(it, check.residual(), check.spread());
    for (std::size_t k = sys.first(); k < sys.last(); ++k) {
      const double gs = (gx[k - 1] * f[k - 1] + gx[k] * f[k + 1] + gy[k - n] * f[k - n] + gy[k] * f[k + n]) / d[k];
      f[k] += omega * (gs - f[k]);
    }
    ++it;
  }
  out.iterations = it;
  out.final_residual = check.residual();
  out.flux_spread = check.spread();
  return out;
}

}  // namespace detail

inline PotentialGrid solve(const ConductivityGrid& sigma, const SolverSettings& settings = {}) {
  sigma.validate();
  settings.validate();
  if (sigma.n() < 3) throw std::invalid_argument("solve: lattice needs at least 3 rows");
  detail::LaplaceSystem sys(sigma);
  PotentialGrid out = settings.method == SolverMethod::ConjugateGradient ? detail::solve_pcg(sys, settings)
                                                                         : detail::solve_sor(sys, settings);
  detail::clamp_unit(out.phi.data());
  return out;
}

}  // namespace cpm
