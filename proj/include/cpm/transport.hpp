#pragma once

// Total conductivity from a solved potential, and conductivity-vs-fraction
// sweeps over nested configurations of one seed.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpm/errors.hpp"
#include "cpm/geometry.hpp"
#include "cpm/raster.hpp"
#include "cpm/solver.hpp"

namespace cpm {

struct CurvePoint {
  double p = 0.0;
  double sigma_total = 0.0;
  long iterations = 0;
  double residual = 0.0;
};

struct ConductivityCurve {
  std::vector<CurvePoint> points;
  std::uint64_t seed = 0;
  BoxSpec box;
  double sigma_inf = 1e-4;
};

struct TotalConductivity {
  double sigma_total = 0.0;
  double spread = 0.0;  // max |I_k - mean| / |mean|
};

// Mean vertical current over all n-1 horizontal cuts, scaled by (n-1)/n so a
// homogeneous lattice of conductivity s reports exactly s. Throws
// InconsistentFlux when the cut currents spread by more than
// 10 * tolerance * |mean|.
inline TotalConductivity measure_total_conductivity(const PotentialGrid& phi, const ConductivityGrid& sigma) {
  if (phi.n() != sigma.n()) throw std::invalid_argument("potential and conductivity grids differ in size");
  const FaceConductances faces(sigma);
  const auto cuts = cut_currents(phi.phi, faces.gy);
  double mean = 0.0;
  for (double c : cuts) mean += c;
  mean /= static_cast<double>(cuts.size());
  const double spread = relative_spread(cuts);
  const double bound = kFluxFactor * phi.tolerance;
  if (!(spread <= bound)) {
    std::ostringstream os;
    os << "cut currents spread by " << spread << " of the mean (bound " << bound << ")";
    throw InconsistentFlux(os.str(), spread);
  }
  const double n = static_cast<double>(sigma.n());
  return {mean * (n - 1.0) / n, spread};
}

inline double total_conductivity(const PotentialGrid& phi, const ConductivityGrid& sigma) {
  return measure_total_conductivity(phi, sigma).sigma_total;
}

// Configurations for every target in an ascending grid, drawn from a single
// deposition stream so each is a prefix of the next.
inline std::vector<Configuration> nested_configurations(std::uint64_t seed, const BoxSpec& box,
                                                        const std::vector<double>& p_grid,
                                                        const DepositOptions& opts = {}) {
  if (!std::is_sorted(p_grid.begin(), p_grid.end()))
    throw std::invalid_argument("p grid must be sorted ascending");
  Depositor dep(seed, box, opts);
  std::vector<Configuration> out;
  out.reserve(p_grid.size());
  for (double p : p_grid) {
    dep.advance_past(p);
    out.push_back(dep.snapshot());
  }
  return out;
}

inline void validate_p_grid(const std::vector<double>& p_grid) {
  if (p_grid.empty()) throw std::invalid_argument("p grid is empty");
  for (std::size_t k = 0; k < p_grid.size(); ++k) {
    if (!(p_grid[k] >= 0.0 && p_grid[k] <= 1.0)) throw std::invalid_argument("p grid values must lie in [0, 1]");
    if (k > 0 && !(p_grid[k] > p_grid[k - 1])) throw std::invalid_argument("p grid must be strictly increasing");
  }
}

struct SweepOptions {
  double sigma_mat = 1.0;
  double sigma_inf = 1e-4;
  DepositOptions deposit;
};

// One curve point: rasterise, solve, measure.
inline CurvePoint measure_point(double p, const Configuration& config, const SolverSettings& settings,
                                const SweepOptions& opts) {
  try {
    const auto sigma = rasterize(config, opts.sigma_mat, opts.sigma_inf);
    const auto phi = solve(sigma, settings);
    return {p, total_conductivity(phi, sigma), phi.iterations, phi.final_residual};
  } catch (const Error& e) {
    throw SweepPointError(p, e.what());
  }
}

inline ConductivityCurve sweep_curve(std::uint64_t seed, const BoxSpec& box, const std::vector<double>& p_grid,
                                     const SolverSettings& settings = {}, const SweepOptions& opts = {}) {
  validate_p_grid(p_grid);
  const auto configs = nested_configurations(seed, box, p_grid, opts.deposit);
  ConductivityCurve curve{{}, seed, box, opts.sigma_inf};
  curve.points.reserve(p_grid.size());
  for (std::size_t k = 0; k < p_grid.size(); ++k)
    curve.points.push_back(measure_point(p_grid[k], configs[k], settings, opts));
  return curve;
}

inline void write_curve_header(std::ostream& os) { os << "p,sigma_total,iterations,residual,seed,N,L\n"; }

inline void write_curve_row(std::ostream& os, const CurvePoint& pt, std::uint64_t seed, const BoxSpec& box) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17) << pt.p << ',' << pt.sigma_total << ',' << pt.iterations << ',' << pt.residual
     << ',' << seed << ',' << box.lattice_size << ',' << box.side_length << '\n';
  os.flags(flags);
  os.precision(prec);
}

inline void write_curve_csv(std::ostream& os, const ConductivityCurve& curve) {
  write_curve_header(os);
  for (const auto& pt : curve.points) write_curve_row(os, pt, curve.seed, curve.box);
}

// Reads the CSV written by write_curve_csv.
inline ConductivityCurve read_curve_csv(std::istream& is, double sigma_inf = 1e-4) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("curve csv: empty input");
  ConductivityCurve curve;
  curve.sigma_inf = sigma_inf;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    CurvePoint pt;
    if (!(ls >> pt.p >> pt.sigma_total >> pt.iterations >> pt.residual >> curve.seed >> curve.box.lattice_size >>
          curve.box.side_length))
      throw std::runtime_error("curve csv: malformed row: " + line);
    curve.points.push_back(pt);
  }
  return curve;
}

}  // namespace cpm
