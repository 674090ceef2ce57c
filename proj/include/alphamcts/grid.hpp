#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace alphamcts {

/// Dense row-major grid. Rows are trading days, columns are instruments.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;
using MaskGrid = Grid<std::uint8_t>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Values plus a validity mask. Invalid cells are never read by consumers;
/// valid cells always hold finite values.
struct MaskedGrid {
  RealGrid values;
  MaskGrid valid;

  MaskedGrid() = default;
  MaskedGrid(std::size_t rows, std::size_t cols) : values(rows, cols, kNaN), valid(rows, cols, 0) {}

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }

  bool is_valid(std::size_t r, std::size_t c) const { return valid(r, c) != 0; }

  /// Stores `v`, marking the cell invalid when `v` is not finite.
  void set(std::size_t r, std::size_t c, double v) {
    if (std::isfinite(v)) {
      values(r, c) = v;
      valid(r, c) = 1;
    } else {
      values(r, c) = kNaN;
      valid(r, c) = 0;
    }
  }

  void invalidate(std::size_t r, std::size_t c) {
    values(r, c) = kNaN;
    valid(r, c) = 0;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v != 0;
    return n;
  }

  /// Equal masks and bit-identical values on valid cells.
  friend bool operator==(const MaskedGrid& a, const MaskedGrid& b) {
    if (a.valid != b.valid) return false;
    auto av = a.values.data();
    auto bv = b.values.data();
    for (std::size_t k = 0; k < av.size(); ++k)
      if (a.valid.data()[k] && av[k] != bv[k]) return false;
    return true;
  }
};

/// T×n alpha values v_t for every day; invalid during warm-up and wherever
/// inputs were masked or arithmetic was undefined.
using AlphaMatrix = MaskedGrid;

}  // namespace alphamcts
