#pragma once

// Random soft-core disk deposition in a square box [0, L]^2.
//
// Disks are dropped one at a time with centres uniform in the box; overlaps
// are allowed and the part of a disk outside the box is discarded. The
// covered area is measured on the simulation lattice: a cell counts as
// covered when its centre lies inside some disk. Deposition stops at the
// first disk that pushes the covered fraction strictly above the target, so
// a configuration for a smaller target is always a prefix of one for a
// larger target with the same seed.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpm/errors.hpp"
#include "cpm/rng.hpp"

namespace cpm {

struct Disk {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Disk&) const = default;
};

struct BoxSpec {
  double side_length = 10.24;
  int lattice_size = 256;

  double spacing() const { return side_length / lattice_size; }
  bool operator==(const BoxSpec&) const = default;
};

inline bool is_power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

inline void validate(const BoxSpec& box) {
  if (!(box.side_length > 0.0) || !std::isfinite(box.side_length))
    throw std::invalid_argument("box side length must be positive");
  if (!is_power_of_two(box.lattice_size))
    throw std::invalid_argument("lattice size must be a power of two");
}

struct Configuration {
  BoxSpec box;
  std::uint64_t seed = 0;
  double radius = 1.0;
  std::vector<Disk> disks;
  double achieved_fraction = 0.0;
};

// Centre coordinate of lattice cell k for spacing h. Every coverage test in
// the library goes through this so that deposition, rasterisation and
// union_fraction agree bit-for-bit.
inline double cell_center(long k, double h) { return (static_cast<double>(k) + 0.5) * h; }

// Calls f(i, j) for every cell of an n x n lattice of spacing h whose centre
// lies within `radius` of the disk centre.
template <typename F>
void for_each_covered_cell(const Disk& d, double radius, double h, long n, F&& f) {
  const double r2 = radius * radius;
  auto lo = [&](double c) { return std::max(0L, static_cast<long>(std::floor((c - radius) / h - 0.5))); };
  auto hi = [&](double c) { return std::min(n - 1, static_cast<long>(std::ceil((c + radius) / h - 0.5))); };
  const long i0 = lo(d.x), i1 = hi(d.x), j0 = lo(d.y), j1 = hi(d.y);
  for (long j = j0; j <= j1; ++j) {
    const double dy = cell_center(j, h) - d.y;
    for (long i = i0; i <= i1; ++i) {
      const double dx = cell_center(i, h) - d.x;
      if (dx * dx + dy * dy <= r2) f(i, j);
    }
  }
}

struct DepositOptions {
  double radius = 1.0;
  // Abort threshold on the number of disks; defaults to
  // 10 * L^2 / (pi r^2) * ln(1e4) when unset.
  std::optional<std::size_t> max_disks;
};

inline std::size_t default_max_disks(const BoxSpec& box, double radius) {
  const double per_cover = box.side_length * box.side_length / (std::numbers::pi * radius * radius);
  return static_cast<std::size_t>(std::ceil(10.0 * per_cover * std::log(1e4)));
}

// Incremental deposition that can be advanced to successively larger targets.
// Keeps a covered-cell mask so each new disk costs O(r^2) cell tests.
class Depositor {
 public:
  Depositor(std::uint64_t seed, BoxSpec box, DepositOptions opts = {})
      : box_(box), seed_(seed), opts_(opts), rng_(seed) {
    validate(box_);
    if (!(opts_.radius > 0.0)) throw std::invalid_argument("disk radius must be positive");
    n_ = box_.lattice_size;
    h_ = box_.spacing();
    covered_.assign(static_cast<std::size_t>(n_ * n_), 0);
    max_disks_ = opts_.max_disks.value_or(default_max_disks(box_, opts_.radius));
  }

  double fraction() const {
    return static_cast<double>(covered_count_) / static_cast<double>(n_ * n_);
  }
  std::size_t disk_count() const { return disks_.size(); }
  const std::vector<Disk>& disks() const { return disks_; }

  // Cells newly covered by the most recently added disk.
  std::size_t last_increment() const { return last_increment_; }

  // Adds disks until the covered fraction exceeds `target` (or reaches 1 when
  // target >= 1). Does nothing if the current state already satisfies it.
  void advance_past(double target) {
    if (!(target >= 0.0 && target <= 1.0))
      throw std::invalid_argument("target fraction must lie in [0, 1]");
    const std::size_t total = static_cast<std::size_t>(n_ * n_);
    auto done = [&] {
      if (disks_.empty()) return false;
      return target >= 1.0 ? covered_count_ == total : fraction() > target;
    };
    while (!done()) {
      if (disks_.size() >= max_disks_) {
        std::ostringstream os;
        os << "deposition saturated at " << disks_.size() << " disks with fraction " << fraction()
           << " below target " << target;
        throw SaturationError(os.str());
      }
      add_disk();
    }
  }

  Configuration snapshot() const {
    return Configuration{box_, seed_, opts_.radius, disks_, fraction()};
  }

 private:
  void add_disk() {
    // x first, then y: part of the replay contract.
    const double x = rng_.uniform() * box_.side_length;
    const double y = rng_.uniform() * box_.side_length;
    const Disk d{x, y};
    std::size_t added = 0;
    for_each_covered_cell(d, opts_.radius, h_, n_, [&](long i, long j) {
      auto& c = covered_[static_cast<std::size_t>(j * n_ + i)];
      if (!c) {
        c = 1;
        ++added;
      }
    });
    covered_count_ += added;
    last_increment_ = added;
    disks_.push_back(d);
  }

  BoxSpec box_;
  std::uint64_t seed_;
  DepositOptions opts_;
  SplitMix64 rng_;
  long n_ = 0;
  double h_ = 0.0;
  std::size_t max_disks_ = 0;
  std::vector<std::uint8_t> covered_;
  std::size_t covered_count_ = 0;
  std::size_t last_increment_ = 0;
  std::vector<Disk> disks_;
};

inline Configuration deposit_until(double target_fraction, std::uint64_t seed, const BoxSpec& box,
                                   const DepositOptions& opts = {}) {
  Depositor dep(seed, box, opts);
  dep.advance_past(target_fraction);
  return dep.snapshot();
}

// Covered fraction sampled at the cell centres of a resolution x resolution grid.
inline double union_fraction(const Configuration& config, long resolution) {
  if (resolution < config.box.lattice_size)
    throw std::invalid_argument("resolution must be at least the lattice size");
  const double h = config.box.side_length / static_cast<double>(resolution);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(resolution * resolution), 0);
  std::size_t count = 0;
  for (const auto& d : config.disks) {
    for_each_covered_cell(d, config.radius, h, resolution, [&](long i, long j) {
      auto& c = mask[static_cast<std::size_t>(j * resolution + i)];
      if (!c) {
        c = 1;
        ++count;
      }
    });
  }
  return static_cast<double>(count) / static_cast<double>(resolution * resolution);
}

// Text form: header "L N seed achieved_fraction disk_count", then one "x y"
// line per disk in deposition order. A sixth header field carries the radius
// when it differs from 1.
inline void write_configuration(std::ostream& os, const Configuration& c) {
  const auto old_flags = os.flags();
  const auto old_prec = os.precision();
  os << std::setprecision(17) << c.box.side_length << ' ' << c.box.lattice_size << ' ' << c.seed
     << ' ' << c.achieved_fraction << ' ' << c.disks.size();
  if (c.radius != 1.0) os << ' ' << c.radius;
  os << '\n';
  for (const auto& d : c.disks) os << d.x << ' ' << d.y << '\n';
  os.flags(old_flags);
  os.precision(old_prec);
}

inline Configuration read_configuration(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("configuration: missing header");
  std::istringstream hs(header);
  Configuration c;
  std::size_t count = 0;
  if (!(hs >> c.box.side_length >> c.box.lattice_size >> c.seed >> c.achieved_fraction >> count))
    throw std::runtime_error("configuration: malformed header");
  double r = 1.0;
  if (hs >> r) c.radius = r;
  validate(c.box);
  c.disks.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Disk d;
    if (!(is >> d.x >> d.y)) throw std::runtime_error("configuration: truncated disk list");
    c.disks.push_back(d);
  }
  return c;
}

}  // namespace cpm
