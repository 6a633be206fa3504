#pragma once

#include <cstdint>
#include <string_view>

namespace cpm {

// SplitMix64 (Steele, Lea & Flood 2014). The output sequence for a given seed
// is fixed by the algorithm, so configurations replay bit-for-bit on any
// platform. Its name is written into every output manifest.
class SplitMix64 {
 public:
  static constexpr std::string_view name = "splitmix64";

  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Independent child stream; the parent advances by one draw.
  constexpr SplitMix64 split() { return SplitMix64(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace cpm
