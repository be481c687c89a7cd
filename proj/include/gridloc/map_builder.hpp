#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "gridloc/grid.hpp"
#include "gridloc/grid_ops.hpp"
#include "gridloc/pose.hpp"
#include "gridloc/sim.hpp"

namespace gridloc {

/// Per-laser accumulation grids. Each laser keeps an exact running sum and
/// hit count per cell; means are formed only on demand, so scan batches can
/// be added and removed in any order without drift.
class PerspectiveStack {
 public:
  PerspectiveStack() = default;

  PerspectiveStack(const GridShape& shape, std::size_t laser_count)
      : shape_(shape), sums_(laser_count), counts_(laser_count) {
    if (laser_count == 0) throw std::invalid_argument("laser count must be positive");
    if (shape.nx == 0 || shape.ny == 0 || !(shape.cell_size > 0.0)) {
      throw std::invalid_argument("invalid stack shape");
    }
    for (std::size_t b = 0; b < laser_count; ++b) {
      sums_[b].assign(shape.nx * shape.ny, 0.0);
      counts_[b].assign(shape.nx * shape.ny, 0);
    }
  }

  [[nodiscard]] const GridShape& shape() const { return shape_; }
  [[nodiscard]] std::size_t laser_count() const { return sums_.size(); }
  [[nodiscard]] std::size_t cell_count() const { return shape_.nx * shape_.ny; }

  [[nodiscard]] bool world_to_index(double x, double y, std::size_t& n) const {
    const double fi = std::floor((x - shape_.origin_x) / shape_.cell_size);
    const double fj = std::floor((y - shape_.origin_y) / shape_.cell_size);
    if (fi < 0.0 || fj < 0.0 || fi >= static_cast<double>(shape_.nx) ||
        fj >= static_cast<double>(shape_.ny)) {
      return false;
    }
    n = static_cast<std::size_t>(fi) * shape_.ny + static_cast<std::size_t>(fj);
    return true;
  }

  void add(std::size_t laser, double x, double y, double reflectivity) {
    std::size_t n = 0;
    if (laser >= sums_.size() || !world_to_index(x, y, n)) return;
    sums_[laser][n] += reflectivity;
    counts_[laser][n] += 1;
  }

  void remove(std::size_t laser, double x, double y, double reflectivity) {
    std::size_t n = 0;
    if (laser >= sums_.size() || !world_to_index(x, y, n)) return;
    sums_[laser][n] -= reflectivity;
    counts_[laser][n] -= 1;
  }

  void add_scan(const Scan& scan) {
    for (const Return& r : scan.returns) add(r.laser, r.x, r.y, r.reflectivity);
  }
  void remove_scan(const Scan& scan) {
    for (const Return& r : scan.returns) remove(r.laser, r.x, r.y, r.reflectivity);
  }

  [[nodiscard]] const std::vector<double>& sums(std::size_t laser) const {
    return sums_[laser];
  }
  [[nodiscard]] const std::vector<std::uint32_t>& counts(std::size_t laser) const {
    return counts_[laser];
  }

  /// Mean reflectivity seen by one laser; cells it never hit are unavailable.
  [[nodiscard]] MaskedGrid mean_grid(std::size_t laser) const {
    MaskedGrid g(shape_.nx, shape_.ny, shape_.cell_size, shape_.origin_x,
                 shape_.origin_y);
    const auto& s = sums_[laser];
    const auto& c = counts_[laser];
    for (std::size_t n = 0; n < s.size(); ++n) {
      if (c[n] > 0) g.set(n, s[n] / static_cast<double>(c[n]));
    }
    return g;
  }

  /// Mean over the returns of all lasers pooled together.
  [[nodiscard]] MaskedGrid pooled_mean_grid() const {
    MaskedGrid g(shape_.nx, shape_.ny, shape_.cell_size, shape_.origin_x,
                 shape_.origin_y);
    for (std::size_t n = 0; n < cell_count(); ++n) {
      double s = 0.0;
      double c = 0.0;
      for (std::size_t b = 0; b < sums_.size(); ++b) {
        s += sums_[b][n];
        c += static_cast<double>(counts_[b][n]);
      }
      if (c > 0.0) g.set(n, s / c);
    }
    return g;
  }

 private:
  GridShape shape_{};
  std::vector<std::vector<double>> sums_;
  std::vector<std::vector<std::uint32_t>> counts_;
};

/// Fused gradient field plus its magnitude. The edge grid is available
/// exactly where both fused components are.
struct EdgeMap {
  GradientField grad;
  MaskedGrid edge;
};

/// Fuses per-laser gradients: each laser that observed both cells of a
/// forward difference contributes its own mean difference, and the fused
/// component is the average over those contributors. Differences are formed
/// as (s2*c1 - s1*c2)/(c1*c2) so that with integer reflectivities a constant
/// per-laser offset cancels in exact integer arithmetic, leaving the fused
/// map bit-identical.
[[nodiscard]] inline EdgeMap fuse(const PerspectiveStack& stack) {
  const GridShape& sh = stack.shape();
  const std::size_t ny = sh.ny;
  const std::size_t total = stack.cell_count();
  const std::size_t lasers = stack.laser_count();

  std::vector<double> acc_dx(total, 0.0);
  std::vector<double> acc_dy(total, 0.0);
  std::vector<std::uint16_t> k_dx(total, 0);
  std::vector<std::uint16_t> k_dy(total, 0);

  for (std::size_t b = 0; b < lasers; ++b) {
    const auto& s = stack.sums(b);
    const auto& c = stack.counts(b);
    for (std::size_t n = 0; n < total; ++n) {
      const std::uint32_t c1 = c[n];
      if (c1 == 0) continue;
      const double s1 = s[n];
      const double d1 = static_cast<double>(c1);
      if (n + ny < total && c[n + ny] != 0) {
        const double d2 = static_cast<double>(c[n + ny]);
        acc_dx[n] += (s[n + ny] * d1 - s1 * d2) / (d1 * d2);
        k_dx[n] += 1;
      }
      if ((n + 1) % ny != 0 && c[n + 1] != 0) {
        const double d2 = static_cast<double>(c[n + 1]);
        acc_dy[n] += (s[n + 1] * d1 - s1 * d2) / (d1 * d2);
        k_dy[n] += 1;
      }
    }
  }

  EdgeMap out{GradientField{MaskedGrid(sh.nx, sh.ny, sh.cell_size, sh.origin_x,
                                       sh.origin_y),
                            MaskedGrid(sh.nx, sh.ny, sh.cell_size, sh.origin_x,
                                       sh.origin_y)},
              MaskedGrid(sh.nx, sh.ny, sh.cell_size, sh.origin_x, sh.origin_y)};
  for (std::size_t n = 0; n < total; ++n) {
    if (k_dx[n] > 0) {
      out.grad.dx.set(n, acc_dx[n] / static_cast<double>(k_dx[n]));
    }
    if (k_dy[n] > 0) {
      out.grad.dy.set(n, acc_dy[n] / static_cast<double>(k_dy[n]));
    }
    if (k_dx[n] > 0 && k_dy[n] > 0) {
      out.edge.set(n, std::hypot(out.grad.dx.value(n), out.grad.dy.value(n)));
    }
  }
  return out;
}

/// Accumulates every scan into a fresh stack over `shape` and fuses it.
[[nodiscard]] inline EdgeMap build_global_map(const std::vector<Scan>& scans,
                                              const GridShape& shape,
                                              std::size_t laser_count,
                                              PerspectiveStack* stack_out = nullptr) {
  PerspectiveStack stack(shape, laser_count);
  for (const Scan& s : scans) stack.add_scan(s);
  EdgeMap map = fuse(stack);
  if (stack_out != nullptr) *stack_out = std::move(stack);
  return map;
}

/// Rolling vehicle-centered map over the most recent scans. Returns are
/// stored in the body frame with the pose estimate used at insertion; the
/// grid origin stays on the global cell lattice and is re-snapped around the
/// vehicle (whole cells only) when it drifts beyond the recenter margin.
class LocalMapper {
 public:
  struct Params {
    double extent = 40.0;
    double cell_size = 0.1;
    std::size_t window = 8;
    std::size_t laser_count = 8;
    double recenter_margin = 4.0;
  };

  explicit LocalMapper(const Params& p) : p_(p) {
    if (p.window == 0) throw std::invalid_argument("window must be positive");
    if (!(p.extent > 0.0) || !(p.cell_size > 0.0)) {
      throw std::invalid_argument("invalid local map geometry");
    }
    const auto n = static_cast<std::size_t>(std::ceil(p.extent / p.cell_size));
    shape_ = GridShape{n, n, p.cell_size, 0.0, 0.0};
  }

  /// Returns expressed in the body frame of `pose_estimate`.
  void insert(const std::vector<Return>& body_returns,
              const Pose2& pose_estimate) {
    entries_.push_back(Entry{body_returns, pose_estimate});
    anchor_ = pose_estimate;
    if (!snapped_ || needs_recenter(pose_estimate)) {
      snap_to(pose_estimate);
      rebuild();
      return;
    }
    if (entries_.size() > p_.window) {
      apply(entries_.front(), /*sign=*/-1);
      entries_.pop_front();
    }
    apply(entries_.back(), /*sign=*/+1);
  }

  [[nodiscard]] EdgeMap edge_map() const { return fuse(stack_); }
  [[nodiscard]] const PerspectiveStack& stack() const { return stack_; }
  [[nodiscard]] const Pose2& anchor() const { return anchor_; }
  [[nodiscard]] const GridShape& shape() const { return shape_; }
  [[nodiscard]] std::size_t window_fill() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<Return> body;
    Pose2 pose;
  };

  [[nodiscard]] bool needs_recenter(const Pose2& pose) const {
    const double cx = shape_.center_x();
    const double cy = shape_.center_y();
    return std::abs(pose.x - cx) > p_.recenter_margin ||
           std::abs(pose.y - cy) > p_.recenter_margin;
  }

  void snap_to(const Pose2& pose) {
    const double half = 0.5 * static_cast<double>(shape_.nx) * p_.cell_size;
    shape_.origin_x = std::floor((pose.x - half) / p_.cell_size) * p_.cell_size;
    shape_.origin_y = std::floor((pose.y - half) / p_.cell_size) * p_.cell_size;
    snapped_ = true;
  }

  void rebuild() {
    while (entries_.size() > p_.window) entries_.pop_front();
    stack_ = PerspectiveStack(shape_, p_.laser_count);
    for (const Entry& e : entries_) apply(e, +1);
  }

  void apply(const Entry& e, int sign) {
    for (const Return& r : e.body) {
      double wx = 0.0;
      double wy = 0.0;
      body_to_world(e.pose, r.x, r.y, wx, wy);
      if (sign > 0) {
        stack_.add(r.laser, wx, wy, r.reflectivity);
      } else {
        stack_.remove(r.laser, wx, wy, r.reflectivity);
      }
    }
  }

  Params p_;
  GridShape shape_{};
  PerspectiveStack stack_;
  std::deque<Entry> entries_;
  Pose2 anchor_{};
  bool snapped_ = false;
};

/// Converts the world-frame returns of a simulated scan into the body frame
/// of the pose that produced them, as a real sensor would report them.
[[nodiscard]] inline std::vector<Return> to_body_frame(const Scan& scan,
                                                       const Pose2& true_pose) {
  std::vector<Return> out;
  out.reserve(scan.returns.size());
  for (const Return& r : scan.returns) {
    double bx = 0.0;
    double by = 0.0;
    world_to_body(true_pose, r.x, r.y, bx, by);
    out.push_back(Return{bx, by, r.reflectivity, r.laser});
  }
  return out;
}

/// Per-laser intensity correction table: level v of laser b maps to the mean
/// cross-laser cell mean observed where laser b reported v.
struct CalibrationTable {
  std::vector<std::array<double, 256>> map;
  std::vector<std::uint8_t> laser_observed;  // 0 when the identity row was used

  [[nodiscard]] double apply(std::size_t laser, double v) const {
    const long idx = std::lround(std::min(255.0, std::max(0.0, v)));
    return map[laser][static_cast<std::size_t>(idx)];
  }
};

[[nodiscard]] inline CalibrationTable build_lut(const std::vector<Scan>& scans,
                                                const GridShape& shape,
                                                std::size_t laser_count) {
  PerspectiveStack pooled(shape, 1);
  for (const Scan& s : scans) {
    for (const Return& r : s.returns) pooled.add(0, r.x, r.y, r.reflectivity);
  }
  const MaskedGrid cell_mean = pooled.pooled_mean_grid();

  std::vector<std::array<double, 256>> acc(laser_count);
  std::vector<std::array<std::uint32_t, 256>> cnt(laser_count);
  for (std::size_t b = 0; b < laser_count; ++b) {
    acc[b].fill(0.0);
    cnt[b].fill(0);
  }
  for (const Scan& s : scans) {
    for (const Return& r : s.returns) {
      if (r.laser >= laser_count) continue;
      std::size_t i = 0;
      std::size_t j = 0;
      if (!cell_mean.world_to_cell(r.x, r.y, i, j)) continue;
      const std::size_t n = cell_mean.index(i, j);
      if (!cell_mean.available(n)) continue;
      const long v = std::lround(std::min(255.0f, std::max(0.0f, r.reflectivity)));
      acc[r.laser][static_cast<std::size_t>(v)] += cell_mean.value(n);
      cnt[r.laser][static_cast<std::size_t>(v)] += 1;
    }
  }

  CalibrationTable table;
  table.map.resize(laser_count);
  table.laser_observed.assign(laser_count, 0);
  for (std::size_t b = 0; b < laser_count; ++b) {
    std::vector<int> seen;
    for (int v = 0; v < 256; ++v) {
      if (cnt[b][v] > 0) {
        table.map[b][v] = acc[b][v] / static_cast<double>(cnt[b][v]);
        seen.push_back(v);
      }
    }
    if (seen.empty()) {
      for (int v = 0; v < 256; ++v) table.map[b][v] = static_cast<double>(v);
      continue;
    }
    table.laser_observed[b] = 1;
    // Constant extension below the first and above the last observed level,
    // linear interpolation between observed neighbors.
    for (int v = 0; v < seen.front(); ++v) table.map[b][v] = table.map[b][seen.front()];
    for (int v = seen.back() + 1; v < 256; ++v) table.map[b][v] = table.map[b][seen.back()];
    for (std::size_t k = 0; k + 1 < seen.size(); ++k) {
      const int lo = seen[k];
      const int hi = seen[k + 1];
      for (int v = lo + 1; v < hi; ++v) {
        const double f = static_cast<double>(v - lo) / static_cast<double>(hi - lo);
        table.map[b][v] = table.map[b][lo] * (1.0 - f) + table.map[b][hi] * f;
      }
    }
  }
  return table;
}

/// Cell-wise mean of calibrated reflectivities pooled over all lasers.
[[nodiscard]] inline MaskedGrid calibrated_mean_grid(
    const std::vector<Scan>& scans, const GridShape& shape,
    const CalibrationTable& table) {
  MaskedGrid g(shape.nx, shape.ny, shape.cell_size, shape.origin_x,
               shape.origin_y);
  std::vector<double> sum(g.size(), 0.0);
  std::vector<std::uint32_t> cnt(g.size(), 0);
  for (const Scan& s : scans) {
    for (const Return& r : s.returns) {
      if (r.laser >= table.map.size()) continue;
      std::size_t i = 0;
      std::size_t j = 0;
      if (!g.world_to_cell(r.x, r.y, i, j)) continue;
      const std::size_t n = g.index(i, j);
      sum[n] += table.apply(r.laser, r.reflectivity);
      cnt[n] += 1;
    }
  }
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (cnt[n] > 0) g.set(n, sum[n] / static_cast<double>(cnt[n]));
  }
  return g;
}

}  // namespace gridloc
