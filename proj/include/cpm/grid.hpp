#pragma once

// Dense row-major N x N lattice storage shared by every stage of the pipeline.
//
// Index convention: grid(i, j) addresses column i (x direction) and row j
// (y direction). Row 0 is the bottom of the box, row n-1 the top electrode.
// Image writers flip rows so that row 0 of an exported picture is the top.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cpm {

template <typename T>
class Grid2D {
 public:
  using value_type = T;

  Grid2D() = default;
  explicit Grid2D(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}

  std::size_t n() const { return n_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[j * n_ + i]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[j * n_ + i]; }

  T& at(std::size_t i, std::size_t j) {
    check(i, j);
    return (*this)(i, j);
  }
  const T& at(std::size_t i, std::size_t j) const {
    check(i, j);
    return (*this)(i, j);
  }

  std::span<T> row(std::size_t j) { return {data_.data() + j * n_, n_}; }
  std::span<const T> row(std::size_t j) const { return {data_.data() + j * n_, n_}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid2D&) const = default;

 private:
  void check(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw std::out_of_range("Grid2D index out of range");
  }

  std::size_t n_ = 0;
  std::vector<T> data_;
};

// Left-right mirror image (column i maps to column n-1-i).
template <typename T>
Grid2D<T> mirror_x(const Grid2D<T>& g) {
  Grid2D<T> out(g.n());
  for (std::size_t j = 0; j < g.n(); ++j)
    for (std::size_t i = 0; i < g.n(); ++i) out(g.n() - 1 - i, j) = g(i, j);
  return out;
}

}  // namespace cpm
