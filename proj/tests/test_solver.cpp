#include <gtest/gtest.h>

#include <algorithm>

#include "cpm/errors.hpp"
#include "cpm/geometry.hpp"
#include "cpm/raster.hpp"
#include "cpm/solver.hpp"
#include "dense_oracle.hpp"

using namespace cpm;
using fixtures::dense_solve;
using fixtures::max_abs_diff;
using fixtures::random_binary;

namespace {

ConductivityGrid uniform(std::size_t n) {
  ConductivityGrid g(n);
  for (auto& c : g.cells.data()) c = 1;
  return g;
}

SolverSettings sor() {
  SolverSettings s;
  s.method = SolverMethod::SOR;
  return s;
}

}  // namespace

TEST(FaceConductance, Values) {
  EXPECT_EQ(face_conductance(1.0, 1.0), 1.0);
  EXPECT_NEAR(face_conductance(1.0, 1e-4), 2e-4 / 1.0001, 1e-18);
  for (double s : {1e-6, 0.3, 7.0}) EXPECT_EQ(face_conductance(s, s), s);
  EXPECT_EQ(face_conductance(2.0, 0.5), face_conductance(0.5, 2.0));
  EXPECT_THROW(face_conductance(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(face_conductance(1.0, -1.0), std::invalid_argument);
}

TEST(Solve, UniformGridIsLinear) {
  for (auto method : {SolverMethod::ConjugateGradient, SolverMethod::SOR}) {
    SolverSettings s;
    s.method = method;
    const auto phi = solve(uniform(64), s);
    EXPECT_LE(max_abs_diff(phi.phi, detail::linear_profile(64)), 1e-12);
    EXPECT_LE(phi.final_residual, 1e-12);
  }
}

TEST(Solve, MatchesDenseOracle) {
  for (std::size_t n : {8u, 16u})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto g = random_binary(n, seed);
      const auto ref = dense_solve(g);
      SolverSettings s;
      s.tolerance = 1e-10;
      EXPECT_LE(max_abs_diff(solve(g, s).phi, ref), 1e-10) << "n=" << n << " seed=" << seed;
      auto t = sor();
      t.tolerance = 1e-10;
      EXPECT_LE(max_abs_diff(solve(g, t).phi, ref), 1e-8) << "sor n=" << n << " seed=" << seed;
    }
}

TEST(Solve, SeriesInterfacePotential) {
  const std::size_t n = 64;
  const double sb = 1.0, st = 1e-4;
  ConductivityGrid g(n, 1.0, 1e-4);
  for (std::size_t j = 0; j < n / 2; ++j)
    for (std::size_t i = 0; i < n; ++i) g.cells(i, j) = 1;
  SolverSettings s;
  s.tolerance = 1e-10;
  const auto phi = solve(g, s);
  // Per-column 1-D resistor chain.
  const double half = static_cast<double>(n / 2 - 1);
  const double resistance = half / sb + half / st + (sb + st) / (2.0 * sb * st);
  const double current = 1.0 / resistance;
  for (std::size_t i = 0; i < n; i += 9) {
    const double below = phi.phi(i, n / 2 - 1);
    EXPECT_NEAR(below, current * half / sb, 1e-8);
    EXPECT_NEAR(below + current / (2.0 * sb), st / (st + sb), 1e-8);
  }
}

TEST(Solve, MaximumPrinciple) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto c = deposit_until(0.2 * static_cast<double>(seed), seed, BoxSpec{2.56, 64});
    const auto phi = solve(rasterize(c));
    const auto [lo, hi] = std::minmax_element(phi.phi.data().begin(), phi.phi.data().end());
    EXPECT_GE(*lo, 0.0);
    EXPECT_LE(*hi, 1.0);
    for (std::size_t i = 0; i < 64; ++i) {
      EXPECT_EQ(phi.phi(i, 0), 0.0);
      EXPECT_EQ(phi.phi(i, 63), 1.0);
    }
  }
}

TEST(Solve, MirrorSymmetry) {
  const auto c = deposit_until(0.55, 21, BoxSpec{2.56, 64});
  const auto g = rasterize(c);
  ConductivityGrid m = g;
  m.cells = mirror_x(g.cells);
  SolverSettings s;
  s.tolerance = 1e-10;
  const auto a = solve(g, s), b = solve(m, s);
  EXPECT_LE(max_abs_diff(mirror_x(a.phi), b.phi), 1e-8);
}

TEST(Solve, FluxBalancedOnStop) {
  const auto c = deposit_until(0.6, 2, BoxSpec{2.56, 64});
  const auto g = rasterize(c);
  for (auto method : {SolverMethod::ConjugateGradient, SolverMethod::SOR}) {
    SolverSettings s;
    s.method = method;
    const auto phi = solve(g, s);
    const FaceConductances f(g);
    EXPECT_LE(relative_spread(cut_currents(phi.phi, f.gy)), kFluxFactor * s.tolerance);
    EXPECT_LE(phi.final_residual, s.tolerance);
    EXPECT_EQ(phi.tolerance, s.tolerance);
  }
}

TEST(Solve, SorAgreesWithConjugateGradient) {
  const auto c = deposit_until(0.7, 5, BoxSpec{2.56, 64});
  const auto g = rasterize(c);
  SolverSettings s;
  s.tolerance = 1e-10;
  auto t = sor();
  t.tolerance = 1e-10;
  EXPECT_LE(max_abs_diff(solve(g, s).phi, solve(g, t).phi), 1e-8);
}

TEST(Solve, NonConvergence) {
  const auto g = random_binary(32, 3);
  SolverSettings s;
  s.max_iterations = 3;
  try {
    solve(g, s);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_LE(e.iterations(), 3 + 25);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(Solve, RejectsBadInput) {
  SolverSettings s;
  s.tolerance = 0.0;
  EXPECT_THROW(solve(uniform(16), s), std::invalid_argument);
  EXPECT_THROW(solve(uniform(2)), std::invalid_argument);
}

TEST(CutCurrents, UniformGrid) {
  const auto g = uniform(16);
  const auto phi = solve(g);
  const auto cuts = cut_currents(phi.phi, FaceConductances(g).gy);
  ASSERT_EQ(cuts.size(), 15u);
  for (double c : cuts) EXPECT_NEAR(c, 16.0 / 15.0, 1e-12);
}
