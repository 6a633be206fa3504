// Deposits disks to p = 0.7 at desk scale, solves the potential and prints
// the total conductivity and contour dimension.

#include <iostream>

#include "cpm/fractal.hpp"
#include "cpm/geometry.hpp"
#include "cpm/raster.hpp"
#include "cpm/solver.hpp"
#include "cpm/transport.hpp"

int main() {
  const cpm::BoxSpec box{10.24, 256};
  const auto config = cpm::deposit_until(0.7, 1, box);
  const auto sigma = cpm::rasterize(config);
  const auto phi = cpm::solve(sigma);
  const auto d = cpm::contour_dimension(phi.phi, cpm::default_levels());
  std::cout << "disks " << config.disks.size() << ", p " << config.achieved_fraction << ", sigma_total "
            << cpm::total_conductivity(phi, sigma) << ", D " << d.dimension << '\n';
}
