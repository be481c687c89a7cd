#pragma once

#include <cmath>

#include "gridloc/grid.hpp"

namespace gridloc {

/// Geometry of a grid without its contents.
struct GridShape {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double cell_size = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  [[nodiscard]] static GridShape of(const MaskedGrid& g) {
    return GridShape{g.nx(), g.ny(), g.cell_size(), g.origin_x(), g.origin_y()};
  }
  [[nodiscard]] double center_x() const {
    return origin_x + 0.5 * static_cast<double>(nx) * cell_size;
  }
  [[nodiscard]] double center_y() const {
    return origin_y + 0.5 * static_cast<double>(ny) * cell_size;
  }
};

/// Forward differences toward the next column (dx) and the next row (dy).
/// A component is available only where the cell and its forward neighbor are
/// both available; the last column has no dx, the last row no dy.
[[nodiscard]] inline GradientField gradient(const MaskedGrid& g) {
  GradientField out{
      MaskedGrid(g.nx(), g.ny(), g.cell_size(), g.origin_x(), g.origin_y()),
      MaskedGrid(g.nx(), g.ny(), g.cell_size(), g.origin_x(), g.origin_y())};
  const std::size_t ny = g.ny();
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!g.available(n)) continue;
    const std::size_t i = g.col(n);
    const std::size_t j = g.row(n);
    if (i + 1 < g.nx() && g.available(n + ny)) {
      out.dx.set(n, g.value(n + ny) - g.value(n));
    }
    if (j + 1 < ny && g.available(n + 1)) {
      out.dy.set(n, g.value(n + 1) - g.value(n));
    }
  }
  return out;
}

/// Five-point Laplacian; available only where the cell and all four 4-connected
/// neighbors are available, so every border cell is unavailable.
[[nodiscard]] inline MaskedGrid laplacian(const MaskedGrid& g) {
  MaskedGrid out(g.nx(), g.ny(), g.cell_size(), g.origin_x(), g.origin_y());
  const std::size_t ny = g.ny();
  for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
    for (std::size_t j = 1; j + 1 < ny; ++j) {
      const std::size_t n = g.index(i, j);
      if (!g.available(n) || !g.available(n - 1) || !g.available(n + 1) ||
          !g.available(n - ny) || !g.available(n + ny)) {
        continue;
      }
      out.set(n, -4.0 * g.value(n) + g.value(n + 1) + g.value(n - 1) +
                     g.value(n + ny) + g.value(n - ny));
    }
  }
  return out;
}

/// Euclidean norm of the two gradient components; available only where both
/// components are.
[[nodiscard]] inline MaskedGrid magnitude(const GradientField& f) {
  MaskedGrid out(f.dx.nx(), f.dx.ny(), f.dx.cell_size(), f.dx.origin_x(),
                 f.dx.origin_y());
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (!f.dx.available(n) || !f.dy.available(n)) continue;
    out.set(n, std::hypot(f.dx.value(n), f.dy.value(n)));
  }
  return out;
}

/// Rigid map from destination-frame points to source-frame points: rotation
/// by `dh` about the pivot followed by the translation (tx, ty). Registration
/// search and resample share this arithmetic so their cell lookups agree
/// bitwise.
struct CellTransform {
  double cos_h = 1.0;
  double sin_h = 0.0;
  double pivot_x = 0.0;
  double pivot_y = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  [[nodiscard]] static CellTransform about(double pivot_x, double pivot_y,
                                           double tx, double ty, double dh) {
    return CellTransform{std::cos(dh), std::sin(dh), pivot_x, pivot_y, tx, ty};
  }

  void apply(double x, double y, double& ox, double& oy) const {
    const double ex = x - pivot_x;
    const double ey = y - pivot_y;
    ox = cos_h * ex - sin_h * ey + pivot_x + tx;
    oy = sin_h * ex + cos_h * ey + pivot_y + ty;
  }
};

/// Nearest-cell resample of `src` onto the `dst` shape: each destination cell
/// takes the value of the source cell containing its transformed center, and
/// is unavailable when that point leaves the source grid or lands on an
/// unavailable cell.
[[nodiscard]] inline MaskedGrid resample(const MaskedGrid& src,
                                         const GridShape& dst,
                                         const CellTransform& t) {
  MaskedGrid out(dst.nx, dst.ny, dst.cell_size, dst.origin_x, dst.origin_y);
  for (std::size_t i = 0; i < dst.nx; ++i) {
    for (std::size_t j = 0; j < dst.ny; ++j) {
      double cx = 0.0;
      double cy = 0.0;
      out.cell_center(i, j, cx, cy);
      double px = 0.0;
      double py = 0.0;
      t.apply(cx, cy, px, py);
      std::size_t si = 0;
      std::size_t sj = 0;
      if (!src.world_to_cell(px, py, si, sj)) continue;
      const std::size_t sn = src.index(si, sj);
      if (!src.available(sn)) continue;
      out.set(out.index(i, j), src.value(sn));
    }
  }
  return out;
}

/// Resample under a pure pose offset, rotating about the destination center.
[[nodiscard]] inline MaskedGrid resample(const MaskedGrid& src,
                                         const GridShape& dst, double tx,
                                         double ty, double dh) {
  return resample(src, dst,
                  CellTransform::about(dst.center_x(), dst.center_y(), tx, ty, dh));
}

}  // namespace gridloc
