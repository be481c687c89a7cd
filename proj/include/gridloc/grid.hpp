#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gridloc {

/// Regular 2-D grid of cells that each hold either a finite value or are
/// marked unavailable. Cells are vectorized column-wise: cell (i, j) of
/// column i in [0, nx) and row j in [0, ny) lives at index n = i*ny + j.
/// Columns advance along world +x, rows along world +y. No arithmetic or
/// reduction ever reads the value of an unavailable cell.
class MaskedGrid {
 public:
  MaskedGrid() = default;

  /// Builds an all-unavailable grid. Throws std::invalid_argument on empty
  /// dimensions or non-positive cell size.
  MaskedGrid(std::size_t nx, std::size_t ny, double cell_size,
             double origin_x = 0.0, double origin_y = 0.0)
      : nx_(nx),
        ny_(ny),
        cell_(cell_size),
        ox_(origin_x),
        oy_(origin_y),
        values_(nx * ny, 0.0),
        avail_(nx * ny, 0) {
    if (nx == 0 || ny == 0) throw std::invalid_argument("grid dimensions must be positive");
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");
  }

  [[nodiscard]] std::size_t nx() const { return nx_; }
  [[nodiscard]] std::size_t ny() const { return ny_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] double cell_size() const { return cell_; }
  [[nodiscard]] double origin_x() const { return ox_; }
  [[nodiscard]] double origin_y() const { return oy_; }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const {
    return i * ny_ + j;
  }
  [[nodiscard]] std::size_t col(std::size_t n) const { return n / ny_; }
  [[nodiscard]] std::size_t row(std::size_t n) const { return n % ny_; }

  [[nodiscard]] bool available(std::size_t n) const { return avail_[n] != 0; }
  [[nodiscard]] double value(std::size_t n) const { return values_[n]; }

  void set(std::size_t n, double v) {
    values_[n] = v;
    avail_[n] = 1;
  }
  void set_unavailable(std::size_t n) { avail_[n] = 0; }

  /// Writes a raw value without touching availability. Tests use this to
  /// poison masked cells and prove reductions never read them.
  void set_raw_value(std::size_t n, double v) { values_[n] = v; }

  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] const std::vector<std::uint8_t>& mask() const { return avail_; }

  /// World coordinates of the center of cell (i, j).
  void cell_center(std::size_t i, std::size_t j, double& x, double& y) const {
    x = ox_ + (static_cast<double>(i) + 0.5) * cell_;
    y = oy_ + (static_cast<double>(j) + 0.5) * cell_;
  }

  /// Cell containing the world point, or false when outside the grid.
  [[nodiscard]] bool world_to_cell(double x, double y, std::size_t& i,
                                   std::size_t& j) const {
    const double fi = std::floor((x - ox_) / cell_);
    const double fj = std::floor((y - oy_) / cell_);
    if (fi < 0.0 || fj < 0.0 || fi >= static_cast<double>(nx_) ||
        fj >= static_cast<double>(ny_)) {
      return false;
    }
    i = static_cast<std::size_t>(fi);
    j = static_cast<std::size_t>(fj);
    return true;
  }

  [[nodiscard]] std::size_t available_count() const {
    std::size_t c = 0;
    for (const auto a : avail_) c += a != 0;
    return c;
  }

  [[nodiscard]] std::vector<double> available_values() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t n = 0; n < size(); ++n) {
      if (avail_[n]) out.push_back(values_[n]);
    }
    return out;
  }

  /// Minimum and maximum over available cells. Throws std::runtime_error on
  /// an all-unavailable grid.
  void minmax(double& lo, double& hi) const {
    bool any = false;
    lo = std::numeric_limits<double>::infinity();
    hi = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < size(); ++n) {
      if (!avail_[n]) continue;
      any = true;
      lo = std::min(lo, values_[n]);
      hi = std::max(hi, values_[n]);
    }
    if (!any) throw std::runtime_error("minmax over all-unavailable grid");
  }

  /// Percentile (0..100, linear interpolation) over available cells. Throws
  /// std::runtime_error on an all-unavailable grid.
  [[nodiscard]] double percentile(double q) const {
    std::vector<double> v = available_values();
    if (v.empty()) throw std::runtime_error("percentile over all-unavailable grid");
    std::sort(v.begin(), v.end());
    const double rank = std::clamp(q, 0.0, 100.0) / 100.0 *
                        static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  }

  [[nodiscard]] bool same_geometry(const MaskedGrid& other) const {
    return nx_ == other.nx_ && ny_ == other.ny_ && cell_ == other.cell_ &&
           ox_ == other.ox_ && oy_ == other.oy_;
  }

  /// Bitwise equality of geometry, masks, and available-cell values.
  /// Values of unavailable cells are excluded by design.
  [[nodiscard]] bool equals(const MaskedGrid& other) const {
    if (!same_geometry(other) || avail_ != other.avail_) return false;
    for (std::size_t n = 0; n < size(); ++n) {
      if (avail_[n] && values_[n] != other.values_[n]) return false;
    }
    return true;
  }

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  double cell_ = 1.0;
  double ox_ = 0.0;
  double oy_ = 0.0;
  std::vector<double> values_;
  std::vector<std::uint8_t> avail_;
};

/// Horizontal and vertical forward-difference components on a shared cell
/// geometry. Component masks are independent: a cell may carry dx without dy.
struct GradientField {
  MaskedGrid dx;
  MaskedGrid dy;
};

}  // namespace gridloc
