#pragma once

// Multi-box, multi-seed experiment driver.
//
// Every (box, seed, p) point is an independent job: rasterise the nested
// configuration, solve, measure the total conductivity, extract the
// equipotential curves and box-count them. Jobs run on a small worker pool;
// all reductions happen afterwards in (box, seed, p) order, so the files
// written are a pure function of the RunSpec and do not depend on the
// number of workers.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpm/contour.hpp"
#include "cpm/errors.hpp"
#include "cpm/fitting.hpp"
#include "cpm/fractal.hpp"
#include "cpm/geometry.hpp"
#include "cpm/pnm.hpp"
#include "cpm/raster.hpp"
#include "cpm/rng.hpp"
#include "cpm/solver.hpp"
#include "cpm/transport.hpp"

namespace cpm {

// 0 to 1 in steps of 0.025, with steps of 0.005 on [0.55, 0.75].
inline std::vector<double> default_p_grid() {
  std::set<int> ks;
  for (int k = 0; k <= 200; k += 5) ks.insert(k);
  for (int k = 110; k <= 150; ++k) ks.insert(k);
  std::vector<double> out;
  for (int k : ks) out.push_back(k / 200.0);
  return out;
}

// Parses "start:stop:step" (inclusive) or a comma separated list.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) || b < a)
      throw std::invalid_argument("bad range '" + text + "', expected start:stop:step");
    const long count = std::lround(std::floor((b - a) / step + 1e-9)) + 1;
    for (long k = 0; k < count; ++k) {
      double v = a + static_cast<double>(k) * step;
      v = std::round(v * 1e12) / 1e12;
      out.push_back(v);
    }
    return out;
  }
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
  }
  if (out.empty()) throw std::invalid_argument("empty value list");
  return out;
}

struct RunSpec {
  std::vector<BoxSpec> boxes;
  std::vector<std::uint64_t> seeds;
  std::vector<double> p_grid = default_p_grid();
  std::vector<double> levels = default_levels();
  SolverSettings solver;
  double sigma_mat = 1.0;
  double sigma_inf = 1e-4;
  std::filesystem::path output_dir;
  unsigned workers = 1;
  bool write_images = true;
  double cluster_epsilon = 0.0125;

  void validate() const {
    if (boxes.empty()) throw std::invalid_argument("run spec needs at least one box");
    if (seeds.empty()) throw std::invalid_argument("run spec needs at least one seed");
    if (levels.empty()) throw std::invalid_argument("run spec needs at least one contour level");
    for (const auto& b : boxes) cpm::validate(b);
    validate_p_grid(p_grid);
    solver.validate();
    ConductivityGrid(1, sigma_mat, sigma_inf).validate();
    if (output_dir.empty()) throw std::invalid_argument("run spec needs an output directory");
  }
};

struct RunFailure {
  BoxSpec box;
  std::uint64_t seed = 0;
  double p = std::numeric_limits<double>::quiet_NaN();  // NaN for seed-level failures
  std::string stage;
  std::string cause;
};

struct SeedReport {
  BoxSpec box;
  std::uint64_t seed = 0;
  ConductivityCurve curve;
  std::optional<FitResult> fit;
  std::vector<DimensionPoint> dimensions;
  std::vector<std::pair<double, std::size_t>> clusters;  // (p, quasi-cluster count)
};

struct BoxAggregate {
  BoxSpec box;
  std::size_t fitted = 0;
  double p_c_average = 0, p_c_max_min = 0;
  double t_average = 0, t_max_min = 0;
};

struct DimensionAggregate {
  double p = 0;
  double mean = 0, min = 0, max = 0;
  std::size_t seeds = 0;
};

struct RunReport {
  std::vector<SeedReport> seeds;
  std::vector<BoxAggregate> boxes;
  std::vector<std::vector<DimensionAggregate>> dimension_averages;  // per box
  std::vector<RunFailure> failures;
  std::vector<std::pair<std::string, std::string>> files;  // (relative path, sha256)
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 digest failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
  return os.str();
}

inline std::string box_name(const BoxSpec& b) {
  std::ostringstream os;
  os << "N" << b.lattice_size << "_L" << b.side_length;
  return os.str();
}

inline std::string p_tag(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%.4f", p);
  return buf;
}

// Runs f(k) for k in [0, count) on `workers` threads. f must not throw.
template <typename F>
void parallel_for(std::size_t count, unsigned workers, F&& f) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < count;) f(k);
  };
  if (workers <= 1 || count <= 1) {
    body();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, count); ++w) pool.emplace_back(body);
}

namespace detail {

class OutputWriter {
 public:
  explicit OutputWriter(std::filesystem::path root) : root_(std::move(root)) {}

  // Writes content to root/rel and returns its hash entry.
  std::pair<std::string, std::string> write(const std::filesystem::path& rel, const std::string& content) const {
    const auto full = root_ / rel;
    std::filesystem::create_directories(full.parent_path());
    std::ofstream os(full, std::ios::binary);
    os << content;
    if (!os) throw std::runtime_error("cannot write " + full.string());
    return {rel.generic_string(), sha256_hex(content)};
  }

 private:
  std::filesystem::path root_;
};

struct JobOutcome {
  std::optional<CurvePoint> point;
  std::optional<DimensionPoint> dimension;
  std::size_t clusters = 0;
  std::vector<RunFailure> failures;
  std::vector<std::pair<std::string, std::string>> files;
};

template <typename Image>
std::string pgm_bytes(const Image& img) {
  std::ostringstream os(std::ios::binary);
  write_pgm(os, img);
  return os.str();
}

inline JobOutcome run_job(const RunSpec& spec, const Configuration& config, double p,
                          const std::filesystem::path& seed_dir, const OutputWriter& out) {
  JobOutcome res;
  auto failure = [&](const std::string& stage, const std::string& cause) {
    res.failures.push_back({config.box, config.seed, p, stage, cause});
  };
  try {
    const auto sigma = rasterize(config, spec.sigma_mat, spec.sigma_inf);
    if (spec.write_images)
      res.files.push_back(out.write(seed_dir / "images" / ("config_" + p_tag(p) + ".pgm"),
                                    pgm_bytes(conductivity_image(sigma))));
    PotentialGrid phi;
    try {
      phi = solve(sigma, spec.solver);
      res.point = CurvePoint{p, total_conductivity(phi, sigma), phi.iterations, phi.final_residual};
    } catch (const Error& e) {
      failure("solve", e.what());
      return res;
    }
    if (spec.write_images)
      res.files.push_back(out.write(seed_dir / "images" / ("potential_" + p_tag(p) + ".pgm"),
                                    pgm_bytes(potential_image(phi.phi))));
    res.clusters = segment_quasi_clusters(phi.phi, spec.cluster_epsilon).count();
    const auto mask = rasterize_contours(extract_levels(phi.phi, spec.levels));
    if (spec.write_images)
      res.files.push_back(out.write(seed_dir / "images" / ("contours_" + p_tag(p) + ".pgm"),
                                    pgm_bytes(contour_image(mask))));
    try {
      const auto d = mask_dimension(mask);
      res.dimension = DimensionPoint{p, d.dimension, d.r_squared};
    } catch (const Error& e) {
      failure("dimension", e.what());
    }
  } catch (const std::exception& e) {
    failure("job", e.what());
  }
  return res;
}

inline std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

inline RunReport run(const RunSpec& spec) {
  spec.validate();
  const detail::OutputWriter out(spec.output_dir);
  RunReport report;

  struct SeedJobs {
    BoxSpec box;
    std::uint64_t seed;
    std::filesystem::path dir;
    std::vector<Configuration> configs;  // empty if deposition failed
  };
  std::vector<SeedJobs> seeds;
  for (const auto& box : spec.boxes)
    for (const auto seed : spec.seeds) {
      SeedJobs sj{box, seed, std::filesystem::path(box_name(box)) / std::to_string(seed), {}};
      try {
        sj.configs = nested_configurations(seed, box, spec.p_grid);
      } catch (const Error& e) {
        report.failures.push_back({box, seed, std::numeric_limits<double>::quiet_NaN(), "deposit", e.what()});
      }
      seeds.push_back(std::move(sj));
    }

  struct Job {
    std::size_t seed_index;
    std::size_t p_index;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < seeds.size(); ++s)
    for (std::size_t k = 0; k < seeds[s].configs.size(); ++k) jobs.push_back({s, k});

  std::vector<detail::JobOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), spec.workers, [&](std::size_t j) {
    const auto& sj = seeds[jobs[j].seed_index];
    const auto k = jobs[j].p_index;
    outcomes[j] = detail::run_job(spec, sj.configs[k], spec.p_grid[k], sj.dir, out);
  });

  // Sequential reduction in (box, seed, p) order.
  std::size_t j = 0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto& sj = seeds[s];
    SeedReport sr{sj.box, sj.seed, ConductivityCurve{{}, sj.seed, sj.box, spec.sigma_inf}, std::nullopt, {}, {}};
    for (std::size_t k = 0; k < sj.configs.size(); ++k, ++j) {
      auto& o = outcomes[j];
      if (o.point) {
        sr.curve.points.push_back(*o.point);
        sr.clusters.emplace_back(o.point->p, o.clusters);
      }
      if (o.dimension) sr.dimensions.push_back(*o.dimension);
      for (auto& f : o.failures) report.failures.push_back(std::move(f));
      for (auto& f : o.files) report.files.push_back(std::move(f));
    }
    if (!sj.configs.empty()) {
      std::ostringstream curve_csv, fit_csv, dim_csv, cl_csv;
      write_curve_csv(curve_csv, sr.curve);
      write_fit_header(fit_csv);
      try {
        sr.fit = fit(sr.curve);
        write_fit_row(fit_csv, *sr.fit, sj.box.lattice_size);
      } catch (const Error& e) {
        report.failures.push_back({sj.box, sj.seed, std::numeric_limits<double>::quiet_NaN(), "fit", e.what()});
      }
      write_dimension_header(dim_csv);
      for (const auto& d : sr.dimensions)
        write_dimension_row(dim_csv, d, sj.seed, sj.box.lattice_size, spec.levels.size());
      cl_csv << "p,clusters,epsilon\n";
      for (const auto& [p, c] : sr.clusters) cl_csv << detail::fmt17(p) << ',' << c << ',' << spec.cluster_epsilon << '\n';
      report.files.push_back(out.write(sj.dir / "curve.csv", curve_csv.str()));
      report.files.push_back(out.write(sj.dir / "fit.csv", fit_csv.str()));
      report.files.push_back(out.write(sj.dir / "dimension.csv", dim_csv.str()));
      report.files.push_back(out.write(sj.dir / "clusters.csv", cl_csv.str()));
    }
    report.seeds.push_back(std::move(sr));
  }

  // Per-box aggregates: threshold/exponent table and averaged curves.
  std::ostringstream agg;
  agg << "box,N,L,seeds_fitted,p_c_average,p_c_max_min,t_average,t_max_min\n";
  for (const auto& box : spec.boxes) {
    BoxAggregate ba{box};
    double pc_lo = 1e300, pc_hi = -1e300, t_lo = 1e300, t_hi = -1e300;
    std::vector<const SeedReport*> members;
    for (const auto& sr : report.seeds)
      if (sr.box == box) members.push_back(&sr);
    for (const auto* sr : members) {
      if (!sr->fit) continue;
      ++ba.fitted;
      ba.p_c_average += sr->fit->p_c;
      ba.t_average += sr->fit->t;
      pc_lo = std::min(pc_lo, sr->fit->p_c);
      pc_hi = std::max(pc_hi, sr->fit->p_c);
      t_lo = std::min(t_lo, sr->fit->t);
      t_hi = std::max(t_hi, sr->fit->t);
    }
    if (ba.fitted > 0) {
      ba.p_c_average /= static_cast<double>(ba.fitted);
      ba.t_average /= static_cast<double>(ba.fitted);
      ba.p_c_max_min = pc_hi - pc_lo;
      ba.t_max_min = t_hi - t_lo;
    }
    agg << box_name(box) << ',' << box.lattice_size << ',' << detail::fmt17(box.side_length) << ',' << ba.fitted
        << ',' << detail::fmt17(ba.p_c_average) << ',' << detail::fmt17(ba.p_c_max_min) << ','
        << detail::fmt17(ba.t_average) << ',' << detail::fmt17(ba.t_max_min) << '\n';
    report.boxes.push_back(ba);

    std::ostringstream curve_avg, dim_avg;
    curve_avg << "p,sigma_mean,sigma_min,sigma_max,seeds\n";
    dim_avg << "p,D_mean,D_min,D_max,seeds\n";
    std::vector<DimensionAggregate> dims;
    for (const double p : spec.p_grid) {
      double ss = 0, slo = 1e300, shi = -1e300;
      std::size_t sc = 0;
      DimensionAggregate da{p, 0, 1e300, -1e300, 0};
      for (const auto* sr : members) {
        for (const auto& pt : sr->curve.points)
          if (pt.p == p) {
            ss += pt.sigma_total;
            slo = std::min(slo, pt.sigma_total);
            shi = std::max(shi, pt.sigma_total);
            ++sc;
          }
        for (const auto& d : sr->dimensions)
          if (d.p == p) {
            da.mean += d.dimension;
            da.min = std::min(da.min, d.dimension);
            da.max = std::max(da.max, d.dimension);
            ++da.seeds;
          }
      }
      if (sc > 0)
        curve_avg << detail::fmt17(p) << ',' << detail::fmt17(ss / static_cast<double>(sc)) << ','
                  << detail::fmt17(slo) << ',' << detail::fmt17(shi) << ',' << sc << '\n';
      if (da.seeds > 0) {
        da.mean /= static_cast<double>(da.seeds);
        dim_avg << detail::fmt17(p) << ',' << detail::fmt17(da.mean) << ',' << detail::fmt17(da.min) << ','
                << detail::fmt17(da.max) << ',' << da.seeds << '\n';
        dims.push_back(da);
      }
    }
    report.dimension_averages.push_back(std::move(dims));
    report.files.push_back(out.write(std::filesystem::path(box_name(box)) / "curve_average.csv", curve_avg.str()));
    report.files.push_back(
        out.write(std::filesystem::path(box_name(box)) / "dimension_average.csv", dim_avg.str()));
  }
  report.files.push_back(out.write("aggregate.csv", agg.str()));

  std::sort(report.files.begin(), report.files.end());
  std::ostringstream man;
  man << "rng=" << SplitMix64::name << '\n'
      << "solver=" << to_string(spec.solver.method) << '\n'
      << "tolerance=" << detail::fmt17(spec.solver.tolerance) << '\n'
      << "max_iterations=" << spec.solver.max_iterations << '\n'
      << "flux_balance=" << (spec.solver.require_flux_balance ? "on" : "off") << '\n'
      << "sigma_mat=" << detail::fmt17(spec.sigma_mat) << '\n'
      << "sigma_inf=" << detail::fmt17(spec.sigma_inf) << '\n'
      << "radius=1\n"
      << "cluster_epsilon=" << detail::fmt17(spec.cluster_epsilon) << '\n';
  man << "boxes=";
  for (std::size_t k = 0; k < spec.boxes.size(); ++k) man << (k ? " " : "") << box_name(spec.boxes[k]);
  man << "\nseeds=";
  for (std::size_t k = 0; k < spec.seeds.size(); ++k) man << (k ? " " : "") << spec.seeds[k];
  man << "\np_grid=";
  for (std::size_t k = 0; k < spec.p_grid.size(); ++k) man << (k ? "," : "") << detail::fmt17(spec.p_grid[k]);
  man << "\nlevels=";
  for (std::size_t k = 0; k < spec.levels.size(); ++k) man << (k ? "," : "") << detail::fmt17(spec.levels[k]);
  man << "\nfailures=" << report.failures.size() << '\n';
  for (const auto& f : report.failures) {
    man << "failure " << box_name(f.box) << " seed=" << f.seed << " p=";
    if (std::isnan(f.p))
      man << '-';
    else
      man << detail::fmt17(f.p);
    man << " stage=" << f.stage << " cause=" << f.cause << '\n';
  }
  man << "files=" << report.files.size() << '\n';
  for (const auto& [path, hash] : report.files) man << hash << "  " << path << '\n';
  out.write("manifest.txt", man.str());
  return report;
}

}  // namespace cpm
