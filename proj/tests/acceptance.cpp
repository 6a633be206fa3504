// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [work_dir]
//
// Criterion 8 (N = 1024, six seeds) takes hours and only runs when
// CPM_EXTENDED=1 is set; otherwise it prints SKIP.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cpm/fitting.hpp"
#include "cpm/fractal.hpp"
#include "cpm/geometry.hpp"
#include "cpm/pipeline.hpp"
#include "cpm/raster.hpp"
#include "cpm/solver.hpp"
#include "cpm/transport.hpp"
#include "dense_oracle.hpp"
#include "fractal_shapes.hpp"

using namespace cpm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const char* tag = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
  if (!o.skipped && !o.pass) ++failures;
  std::printf("[%s] %2d %s: %s (%.1fs)\n", tag, id, name.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::map<std::string, std::string> csv_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv") {
      std::ifstream is(e.path(), std::ios::binary);
      std::ostringstream os;
      os << is.rdbuf();
      out[fs::relative(e.path(), root).generic_string()] = os.str();
    }
  return out;
}

RunSpec desk_spec(const fs::path& dir, unsigned workers) {
  RunSpec spec;
  spec.boxes = {BoxSpec{10.24, 256}};
  spec.seeds = {1, 2, 3, 4, 5, 6};
  spec.output_dir = dir;
  spec.workers = workers;
  return spec;
}

const FitResult* fit_of(const SeedReport& s) { return s.fit ? &*s.fit : nullptr; }

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::create_directories(work);
  const bool extended = [] {
    const char* v = std::getenv("CPM_EXTENDED");
    return v && std::string(v) == "1";
  }();

  report(1, "homogeneous medium is solved exactly", [] {
    const auto t0 = Clock::now();
    const auto config = deposit_until(1.0, 1, BoxSpec{10.24, 256});
    const auto sigma = rasterize(config);
    const auto phi = solve(sigma);
    const double err = fixtures::max_abs_diff(phi.phi, detail::linear_profile(256));
    const double s = total_conductivity(phi, sigma);
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = sigma.conductive_count() == sigma.cells.size() && err <= 1e-8 && std::abs(s - 1.0) <= 1e-6 && t < 5.0;
    o.detail = "max|phi-linear|=" + fmt("%.2e", err) + " sigma_total=" + fmt("%.12f", s) + " time=" + fmt("%.2fs", t);
    return o;
  });

  report(2, "iterative solve matches dense direct solve", [] {
    const auto t0 = Clock::now();
    SolverSettings settings;
    settings.tolerance = 1e-10;
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const std::size_t n = k < 25 ? 8 : 16;
      const auto g = fixtures::random_binary(n, 1000 + static_cast<std::uint64_t>(k));
      worst = std::max(worst, fixtures::max_abs_diff(solve(g, settings).phi, fixtures::dense_solve(g)));
    }
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = worst <= 1e-8 && t < 10.0;
    o.detail = "50 grids (25 at 8x8, 25 at 16x16) at tol 1e-10, worst max-norm=" + fmt("%.2e", worst) + " time=" + fmt("%.2fs", t);
    return o;
  });

  report(3, "series and parallel two-layer composites", [] {
    const std::size_t n = 256;
    const double s1 = 1.0, s2 = 1e-4;
    ConductivityGrid series(n, s1, s2), parallel(n, s1, s2);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        series.cells(i, j) = j < n / 2;
        parallel.cells(i, j) = i < n / 2;
      }
    const double ss = total_conductivity(solve(series), series);
    const double sp = total_conductivity(solve(parallel), parallel);
    const double es = 2 * s1 * s2 / (s1 + s2), ep = (s1 + s2) / 2;
    const double rs = std::abs(ss - es) / es, rp = std::abs(sp - ep) / ep;
    Outcome o;
    o.pass = rs <= 5e-3 && rp <= 5e-3;
    o.detail = "series " + fmt("%.6e", ss) + " (rel err " + fmt("%.1e", rs) + "), parallel " + fmt("%.6f", sp) +
               " (rel err " + fmt("%.1e", rp) + ")";
    return o;
  });

  report(4, "fit recovers noiseless power-law parameters", [] {
    ConductivityCurve c;
    for (int k = 0; k <= 20; ++k) {
      const double p = k / 20.0;
      c.points.push_back({p, model(p, 0.6763, 1.3333), 0, 0.0});
    }
    const auto t0 = Clock::now();
    const auto r = fit(c);
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = std::abs(r.p_c - 0.6763) <= 1e-3 && std::abs(r.t - 1.3333) <= 1e-2 && t < 1.0;
    o.detail = "p_c=" + fmt("%.5f", r.p_c) + " t=" + fmt("%.4f", r.t) + " time=" + fmt("%.3fs", t);
    return o;
  });

  // Criteria 5, 7 and 9 share the desk-scale runs.
  RunReport desk;
  double desk_time = 0.0;
  std::string desk_error;
  const fs::path dir_a = work / "desk_w1", dir_b = work / "desk_w2";
  try {
    fs::remove_all(dir_a);
    const auto t0 = Clock::now();
    desk = run(desk_spec(dir_a, 1));
    desk_time = seconds_since(t0);
  } catch (const std::exception& e) {
    desk_error = e.what();
  }

  report(5, "desk-scale threshold and exponent", [&] {
    Outcome o;
    if (!desk_error.empty()) {
      o.detail = "run failed: " + desk_error;
      return o;
    }
    bool ok = desk_time < 1800.0 && desk.seeds.size() == 6;
    double sum = 0.0;
    std::ostringstream os;
    for (const auto& s : desk.seeds) {
      const auto* f = fit_of(s);
      if (!f) {
        ok = false;
        os << "seed " << s.seed << " unfitted; ";
        continue;
      }
      sum += f->p_c;
      ok = ok && f->p_c >= 0.58 && f->p_c <= 0.76 && f->t >= 0.8 && f->t <= 2.2;
      os << "seed " << s.seed << " p_c=" << fmt("%.4f", f->p_c) << " t=" << fmt("%.3f", f->t) << "; ";
    }
    const double avg = sum / 6.0;
    ok = ok && std::abs(avg - 0.67) <= 0.04;
    os << "average p_c=" << fmt("%.4f", avg) << " run time=" << fmt("%.0fs", desk_time);
    o.pass = ok;
    o.detail = os.str();
    return o;
  });

  report(6, "box-counting calibration shapes", [] {
    const double koch = mask_dimension(fixtures::koch_mask(5, 243.0, 256)).dimension;
    const double carpet = mask_dimension(fixtures::carpet_fill(5, 256)).dimension;
    ContourMask line{Grid2D<std::uint8_t>(256, 0)};
    for (std::size_t i = 0; i < 256; ++i) line.cells(i, 128) = 1;
    const double l = mask_dimension(line).dimension;
    const double sq = mask_dimension(ContourMask{Grid2D<std::uint8_t>(256, 1)}).dimension;
    Outcome o;
    o.pass = std::abs(koch - 1.262) <= 0.05 && std::abs(carpet - 1.893) <= 0.05 && std::abs(l - 1.0) <= 0.02 &&
             std::abs(sq - 2.0) <= 0.02;
    o.detail = "koch=" + fmt("%.4f", koch) + " carpet=" + fmt("%.4f", carpet) + " line=" + fmt("%.4f", l) +
               " square=" + fmt("%.4f", sq);
    return o;
  });

  report(7, "D(p) curve shape at desk scale", [&] {
    Outcome o;
    if (!desk_error.empty()) {
      o.detail = "run failed: " + desk_error;
      return o;
    }
    bool ok = desk.seeds.size() == 6;
    std::ostringstream os;
    for (const auto& s : desk.seeds) {
      const auto& d = s.dimensions;
      auto at = [&](double p) {
        for (const auto& x : d)
          if (std::abs(x.p - p) < 1e-12) return x.dimension;
        return std::numeric_limits<double>::quiet_NaN();
      };
      if (d.empty()) {
        ok = false;
        os << "seed " << s.seed << " no D data; ";
        continue;
      }
      const auto peak = *std::max_element(d.begin(), d.end(),
                                          [](const auto& a, const auto& b) { return a.dimension < b.dimension; });
      // Dominance: away from the peak (|p - p_peak| > 0.1) D rises at most
      // half as far above 1 as the peak does.
      double side = 0.0;
      for (const auto& x : d)
        if (std::abs(x.p - peak.p) > 0.1) side = std::max(side, x.dimension);
      const bool dominant = side - 1.0 <= 0.5 * (peak.dimension - 1.0);
      const auto* f = fit_of(s);
      const bool located = f && std::abs(peak.p - f->p_c) <= 0.05;
      const double d05 = at(0.05), d1 = at(1.0);
      const bool ends = d05 <= 1.05 && d1 <= 1.02;
      const bool value = peak.dimension >= 1.10 && peak.dimension <= 1.35;
      ok = ok && dominant && located && ends && value;
      os << "seed " << s.seed << " D(0.05)=" << fmt("%.3f", d05) << " D(1)=" << fmt("%.3f", d1) << " peak "
         << fmt("%.3f", peak.dimension) << "@" << fmt("%.3f", peak.p) << (dominant ? "" : " not-dominant")
         << (located ? "" : " off-p_c") << (value ? "" : " out-of-range") << "; ";
    }
    o.pass = ok;
    o.detail = os.str();
    return o;
  });

  report(8, "full-scale reproduction at N=1024 (extended)", [&] {
    Outcome o;
    if (!extended) {
      o.skipped = true;
      o.detail = "extended criterion; set CPM_EXTENDED=1 to run (multi-hour)";
      return o;
    }
    RunSpec spec;
    spec.boxes = {BoxSpec{40.96, 1024}};
    spec.seeds = {1, 2, 3, 4, 5, 6};
    spec.output_dir = work / "full_scale";
    fs::remove_all(spec.output_dir);
    const auto r = run(spec);
    const auto& b = r.boxes.at(0);
    o.pass = b.fitted == 6 && std::abs(b.p_c_average - 0.669) <= 0.02 && std::abs(b.t_average - 1.23) <= 0.15;
    o.detail = "fitted=" + std::to_string(b.fitted) + " p_c avg=" + fmt("%.4f", b.p_c_average) +
               " t avg=" + fmt("%.4f", b.t_average);
    return o;
  });

  report(9, "desk-scale runs identical across worker counts", [&] {
    Outcome o;
    if (!desk_error.empty()) {
      o.detail = "first run failed: " + desk_error;
      return o;
    }
    fs::remove_all(dir_b);
    run(desk_spec(dir_b, 2));
    const auto a = csv_files(dir_a), b = csv_files(dir_b);
    std::size_t differing = 0;
    for (const auto& [k, v] : a) {
      const auto it = b.find(k);
      if (it == b.end() || it->second != v) ++differing;
    }
    o.pass = !a.empty() && a.size() == b.size() && differing == 0;
    o.detail = std::to_string(a.size()) + " CSV files (1 worker) vs " + std::to_string(b.size()) +
               " (2 workers), " + std::to_string(differing) + " differ";
    return o;
  });

  report(10, "conservation, monotonicity and maximum principle", [] {
    const BoxSpec box{10.24, 256};
    const std::vector<double> ps{0.2, 0.4, 0.6, 0.7, 0.8};
    const SolverSettings settings;
    double worst_spread = 0.0;
    bool monotone = true, bounded = true;
    int solves = 0;
    for (std::uint64_t seed = 101; seed <= 104; ++seed) {
      const auto configs = nested_configurations(seed, box, ps);
      double prev = 0.0;
      for (const auto& c : configs) {
        const auto sigma = rasterize(c);
        const auto phi = solve(sigma, settings);
        ++solves;
        const auto cuts = cut_currents(phi.phi, FaceConductances(sigma).gy);
        worst_spread = std::max(worst_spread, relative_spread(cuts));
        for (double v : phi.phi.data()) bounded = bounded && v >= 0.0 && v <= 1.0;
        const double s = measure_total_conductivity(phi, sigma).sigma_total;
        // Solver noise allowance: 10 * tolerance relative.
        if (s < prev * (1.0 - 10.0 * settings.tolerance)) monotone = false;
        prev = s;
      }
    }
    Outcome o;
    o.pass = worst_spread <= 10.0 * settings.tolerance && monotone && bounded;
    o.detail = std::to_string(solves) + " solves, worst cut spread=" + fmt("%.2e", worst_spread) +
               (monotone ? " monotone" : " NOT monotone") + (bounded ? ", 0<=phi<=1" : ", phi out of [0,1]");
    return o;
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
