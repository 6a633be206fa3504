// Command-line front end for the continuum percolation toolkit.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cpm/contour.hpp"
#include "cpm/fitting.hpp"
#include "cpm/fractal.hpp"
#include "cpm/geometry.hpp"
#include "cpm/pipeline.hpp"
#include "cpm/pnm.hpp"
#include "cpm/raster.hpp"
#include "cpm/solver.hpp"
#include "cpm/transport.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::vector<int> sizes{256};
  std::vector<double> box_lengths;  // default: 0.04 per cell
  std::vector<std::uint64_t> seeds{1};
  std::string p_grid;
  double sigma_inf = 1e-4;
  double tol = 1e-8;
  std::string levels = "0.1:0.9:0.1";
  unsigned workers = 1;
  std::string out;
  std::string method = "cg";
  bool no_images = false;

  double p = 0.5;
  std::string input;
  double epsilon = 0.0125;
};

std::vector<cpm::BoxSpec> boxes(const Options& o) {
  if (!o.box_lengths.empty() && o.box_lengths.size() != 1 && o.box_lengths.size() != o.sizes.size())
    throw std::invalid_argument("--box-length must be given once or once per --size");
  std::vector<cpm::BoxSpec> out;
  for (std::size_t k = 0; k < o.sizes.size(); ++k) {
    double l = 0.04 * o.sizes[k];
    if (!o.box_lengths.empty()) l = o.box_lengths.size() == 1 ? o.box_lengths[0] : o.box_lengths[k];
    cpm::BoxSpec b{l, o.sizes[k]};
    cpm::validate(b);
    out.push_back(b);
  }
  return out;
}

cpm::SolverSettings settings(const Options& o) {
  cpm::SolverSettings s;
  s.tolerance = o.tol;
  if (o.method == "sor")
    s.method = cpm::SolverMethod::SOR;
  else if (o.method != "cg")
    throw std::invalid_argument("--method must be cg or sor");
  s.validate();
  return s;
}

std::vector<double> p_grid(const Options& o) {
  return o.p_grid.empty() ? cpm::default_p_grid() : cpm::parse_grid(o.p_grid);
}

// Writes to the named file, or stdout when the name is empty or "-".
template <typename F>
void emit(const std::string& path, F&& f) {
  if (path.empty() || path == "-") {
    f(std::cout);
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  f(os);
}

std::ifstream open_input(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--input is required");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return is;
}

cpm::Configuration configuration(const Options& o) {
  if (!o.input.empty()) {
    auto is = open_input(o.input);
    return cpm::read_configuration(is);
  }
  return cpm::deposit_until(o.p, o.seeds.front(), boxes(o).front());
}

int cmd_deposit(const Options& o) {
  const auto c = configuration(o);
  emit(o.out, [&](std::ostream& os) { cpm::write_configuration(os, c); });
  std::cerr << "disks=" << c.disks.size() << " achieved=" << c.achieved_fraction << '\n';
  return 0;
}

int cmd_solve(const Options& o) {
  const auto c = configuration(o);
  const auto sigma = cpm::rasterize(c, 1.0, o.sigma_inf);
  const auto phi = cpm::solve(sigma, settings(o));
  const auto sum = cpm::measure_total_conductivity(phi, sigma);
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    std::ofstream raw(dir / "potential.raw", std::ios::binary);
    cpm::write_raw(raw, phi.phi);
    std::ofstream pgm(dir / "potential.pgm", std::ios::binary);
    cpm::write_pgm(pgm, cpm::potential_image(phi.phi));
    std::ofstream cfg(dir / "config.pgm", std::ios::binary);
    cpm::write_pgm(cfg, cpm::conductivity_image(sigma));
  }
  std::cout << std::setprecision(17) << "p=" << c.achieved_fraction << " N=" << c.box.lattice_size
            << " sigma_total=" << sum.sigma_total << " iterations=" << phi.iterations
            << " residual=" << phi.final_residual << " flux_spread=" << sum.spread << '\n';
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto grid = p_grid(o);
  const auto s = settings(o);
  cpm::SweepOptions opts;
  opts.sigma_inf = o.sigma_inf;
  const auto bs = boxes(o);
  bool header = true;
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty() && o.out != "-") {
    if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
    file.open(o.out);
    if (!file) throw std::runtime_error("cannot open " + o.out);
    os = &file;
  }
  for (const auto& b : bs)
    for (const auto seed : o.seeds) {
      const auto curve = cpm::sweep_curve(seed, b, grid, s, opts);
      if (header) cpm::write_curve_header(*os);
      header = false;
      for (const auto& pt : curve.points) cpm::write_curve_row(*os, pt, seed, b);
    }
  return 0;
}

// A sweep file may hold several (box, seed) curves; each is fitted on its own.
int cmd_fit(const Options& o) {
  auto is = open_input(o.input);
  std::string line, header;
  std::getline(is, header);
  std::vector<std::string> chunk;
  std::string key;
  std::vector<cpm::FitResult> fits;
  std::vector<int> sizes;
  auto flush = [&] {
    if (chunk.empty()) return;
    std::istringstream cs(header + '\n' + [&] {
      std::string s;
      for (const auto& l : chunk) s += l + '\n';
      return s;
    }());
    const auto curve = cpm::read_curve_csv(cs, o.sigma_inf);
    fits.push_back(cpm::fit(curve));
    sizes.push_back(curve.box.lattice_size);
    chunk.clear();
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cut = line.find(',', line.find(',', line.find(',', line.find(',') + 1) + 1) + 1);
    const std::string k = cut == std::string::npos ? "" : line.substr(cut + 1);
    if (k != key) flush();
    key = k;
    chunk.push_back(line);
  }
  flush();
  emit(o.out, [&](std::ostream& os) {
    cpm::write_fit_header(os);
    for (std::size_t k = 0; k < fits.size(); ++k) cpm::write_fit_row(os, fits[k], sizes[k]);
  });
  return 0;
}

cpm::Grid2D<double> potential(const Options& o) {
  if (!o.input.empty()) {
    auto is = open_input(o.input);
    return cpm::read_raw(is, static_cast<std::size_t>(o.sizes.front()));
  }
  const auto c = configuration(o);
  return cpm::solve(cpm::rasterize(c, 1.0, o.sigma_inf), settings(o)).phi;
}

int cmd_contours(const Options& o) {
  const auto phi = potential(o);
  const auto cs = cpm::extract_levels(phi, cpm::parse_grid(o.levels));
  const auto mask = cpm::rasterize_contours(cs);
  if (o.out.empty() || o.out == "-") {
    cpm::write_segments_csv(std::cout, cs);
    return 0;
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::ofstream seg(dir / "segments.csv");
  cpm::write_segments_csv(seg, cs);
  std::ofstream img(dir / "contours.pgm", std::ios::binary);
  cpm::write_pgm(img, cpm::contour_image(mask));
  std::ofstream cl(dir / "clusters.csv");
  const auto q = cpm::segment_quasi_clusters(phi, o.epsilon);
  cl << "label,mean_potential\n" << std::setprecision(17);
  for (std::size_t k = 0; k < q.count(); ++k) cl << k + 1 << ',' << q.mean_potential[k] << '\n';
  std::cout << "segments=" << cs.segments.size() << " cells=" << mask.count() << " clusters=" << q.count()
            << '\n';
  return 0;
}

// Box-counts a PGM image (dark pixels form the set, as written by
// `contours`), or the pooled contours of a freshly solved configuration.
int cmd_boxdim(const Options& o) {
  cpm::ContourMask mask;
  if (!o.input.empty() && fs::path(o.input).extension() == ".pgm") {
    auto is = open_input(o.input);
    mask = cpm::mask_from_image(cpm::read_pgm(is), true);
  } else {
    mask = cpm::rasterize_contours(cpm::extract_levels(potential(o), cpm::parse_grid(o.levels)));
  }
  const auto series = cpm::box_count(mask);
  const auto r = cpm::dimension(series);
  std::cout << "size,count\n";
  for (std::size_t k = 0; k < series.box_sizes.size(); ++k)
    std::cout << series.box_sizes[k] << ',' << series.counts[k] << '\n';
  std::cout << std::setprecision(17) << "D=" << r.dimension << " r_squared=" << r.r_squared
            << " scales=" << r.sizes_used.size() << '\n';
  return 0;
}

int cmd_run(const Options& o) {
  cpm::RunSpec spec;
  spec.boxes = boxes(o);
  spec.seeds = o.seeds;
  spec.p_grid = p_grid(o);
  spec.levels = cpm::parse_grid(o.levels);
  spec.solver = settings(o);
  spec.sigma_inf = o.sigma_inf;
  spec.output_dir = o.out.empty() ? fs::path("run_output") : fs::path(o.out);
  spec.workers = o.workers;
  spec.write_images = !o.no_images;
  spec.cluster_epsilon = o.epsilon;
  const auto report = cpm::run(spec);
  for (const auto& b : report.boxes)
    std::cout << cpm::box_name(b.box) << " fitted=" << b.fitted << " p_c=" << b.p_c_average << " (max-min "
              << b.p_c_max_min << ") t=" << b.t_average << " (max-min " << b.t_max_min << ")\n";
  for (const auto& f : report.failures)
    std::cerr << "failed: " << cpm::box_name(f.box) << " seed " << f.seed << " p " << f.p << " [" << f.stage
              << "] " << f.cause << '\n';
  std::cout << "wrote " << report.files.size() << " files to " << spec.output_dir.string() << '\n';
  return report.failures.empty() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuum percolation: deposition, conductivity, contours and box counting"};
  app.set_config("--config", "", "flat key=value file with option defaults (flags override it)");
  app.fallthrough();
  app.require_subcommand(1);
  Options o;

  app.add_option("--size", o.sizes, "lattice size N, a power of two (repeatable)")->capture_default_str();
  app.add_option("--box-length", o.box_lengths, "box side L (default 0.04 * N; once, or once per --size)");
  app.add_option("--seed", o.seeds, "random seed (repeatable)")->capture_default_str();
  app.add_option("--p-grid", o.p_grid, "volume fractions, start:stop:step or a,b,c (default dense near 0.66)");
  app.add_option("--sigma-inf", o.sigma_inf, "background conductivity")->capture_default_str();
  app.add_option("--tol", o.tol, "solver relative tolerance")->capture_default_str();
  app.add_option("--levels", o.levels, "contour levels, a,b,c or start:stop:step")->capture_default_str();
  app.add_option("--workers", o.workers, "worker threads for `run`")->capture_default_str();
  app.add_option("--out", o.out, "output file or directory");
  app.add_option("--method", o.method, "solver: cg or sor")->capture_default_str();
  app.add_option("--epsilon", o.epsilon, "quasi-cluster potential spread")->capture_default_str();
  app.add_option("--input", o.input, "input file");
  app.add_option("--p", o.p, "target volume fraction for single-configuration commands")->capture_default_str();
  app.add_flag("--no-images", o.no_images, "skip PGM output in `run`");

  int (*action)(const Options&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*f)(const Options&)) {
    app.add_subcommand(name, help)->callback([&action, f] { action = f; });
  };
  sub("deposit", "deposit disks to a target fraction and write the configuration", cmd_deposit);
  sub("solve", "solve the potential of one configuration and report sigma_total", cmd_solve);
  sub("sweep", "conductivity curve over a p grid (CSV)", cmd_sweep);
  sub("fit", "fit threshold and exponent to a curve CSV", cmd_fit);
  sub("contours", "equipotential segments, contour image and quasi-clusters", cmd_contours);
  sub("boxdim", "box-counting dimension of a PGM mask or of solved contours", cmd_boxdim);
  sub("run", "full multi-seed experiment with aggregate tables and manifest", cmd_run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
