#pragma once

// Normalized-mutual-information registration of a local edge grid against a
// global edge grid over an exhaustive pose lattice, plus a covariance fit of
// the score surface for downstream fusion.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gridloc/grid.hpp"
#include "gridloc/grid_ops.hpp"
#include "gridloc/pose.hpp"

namespace gridloc {

/// How edge values are quantized into histogram bins.
enum class BinMode {
  kSharedRange,   ///< one linear range shared by both grids
  kQuantileRank,  ///< each grid binned by its own value ranks
};

struct HistogramSpec {
  std::size_t bins = 64;
  BinMode mode = BinMode::kSharedRange;
  double lo = 0.0;  ///< shared-range lower edge (values below clamp in)
  double hi = 0.0;  ///< shared-range upper edge (values above clamp in)
  std::size_t min_overlap = 100;  ///< fewer co-available cells -> no score

  /// Shared linear range spanning the robust interior of `reference` values
  /// (1st to 99th percentile), so outlier edges cannot stretch the bins.
  [[nodiscard]] static HistogramSpec shared_range(const MaskedGrid& reference,
                                                  std::size_t bins = 64) {
    HistogramSpec s;
    s.bins = bins;
    s.mode = BinMode::kSharedRange;
    s.lo = reference.percentile(1.0);
    s.hi = reference.percentile(99.0);
    return s;
  }

  [[nodiscard]] static HistogramSpec quantile_rank(std::size_t bins = 64) {
    HistogramSpec s;
    s.bins = bins;
    s.mode = BinMode::kQuantileRank;
    return s;
  }
};

/// Bin index per cell, -1 where unavailable. Quantile mode depends only on
/// the ordering of the grid's own values, so any strictly increasing
/// relabeling of the values leaves the output identical.
[[nodiscard]] inline std::vector<std::int32_t> bin_values(
    const MaskedGrid& g, const HistogramSpec& spec) {
  if (spec.bins == 0) throw std::invalid_argument("histogram needs bins > 0");
  std::vector<std::int32_t> out(g.size(), -1);
  const auto last_bin = static_cast<std::int32_t>(spec.bins - 1);
  if (spec.mode == BinMode::kSharedRange) {
    const double width = spec.hi - spec.lo;
    for (std::size_t n = 0; n < g.size(); ++n) {
      if (!g.available(n)) continue;
      if (!(width > 0.0)) {
        out[n] = 0;
        continue;
      }
      const double f = (g.value(n) - spec.lo) / width;
      const auto b = static_cast<std::int32_t>(
          std::floor(f * static_cast<double>(spec.bins)));
      out[n] = std::clamp(b, std::int32_t{0}, last_bin);
    }
    return out;
  }
  std::vector<double> sorted = g.available_values();
  if (sorted.empty()) return out;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t count = sorted.size();
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!g.available(n)) continue;
    const auto rank = static_cast<std::size_t>(
        std::upper_bound(sorted.begin(), sorted.end(), g.value(n)) -
        sorted.begin() - 1);
    out[n] = std::min(static_cast<std::int32_t>(rank * spec.bins / count),
                      last_bin);
  }
  return out;
}

struct NmiResult {
  double value = 1.0;      ///< in [1, 2]; 2 means fully dependent
  std::size_t overlap = 0; ///< co-available cell pairs scored
};

namespace detail {

/// Shannon entropy in bits of a count vector, via sum of c*log2(c) terms
/// accumulated in index order.
[[nodiscard]] inline double entropy_bits(const std::vector<std::uint32_t>& c,
                                         double total);

/// Memoized v*log2(v) for every v up to max_value: registration scores the
/// same small counts millions of times, and each table entry is the identical
/// double the direct expression produces. Callers hoist the returned
/// reference so the per-term cost is one indexed load.
[[nodiscard]] inline const std::vector<double>& vlog2v_table(
    std::size_t max_value) {
  static thread_local std::vector<double> lut{0.0, 0.0};  // 0 and 1 score 0
  if (max_value >= lut.size()) {
    const std::size_t old = lut.size();
    lut.resize(std::max(max_value + 1, old * 2));
    for (std::size_t n = old; n < lut.size(); ++n) {
      lut[n] = static_cast<double>(n) * std::log2(static_cast<double>(n));
    }
  }
  return lut;
}

inline double entropy_bits(const std::vector<std::uint32_t>& c, double total) {
  const std::vector<double>& lut = vlog2v_table(static_cast<std::size_t>(total));
  double s = 0.0;
  for (const std::uint32_t v : c) s += lut[v];
  return std::log2(total) - s / total;
}

/// NMI from a joint count matrix (row-major, rows = first grid). The joint
/// entropy accumulates the diagonal first and then each off-diagonal pair
/// (i,j)/(j,i) adjacently, so transposing the matrix changes only the operand
/// order of commutative additions: nmi(A,B) equals nmi(B,A) bit for bit.
[[nodiscard]] inline double nmi_from_joint(
    const std::vector<std::uint32_t>& joint, std::size_t bins,
    double total) {
  std::vector<std::uint32_t> ca(bins, 0);
  std::vector<std::uint32_t> cb(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) {
    for (std::size_t j = 0; j < bins; ++j) {
      const std::uint32_t v = joint[i * bins + j];
      ca[i] += v;
      cb[j] += v;
    }
  }
  const std::vector<double>& lut = vlog2v_table(static_cast<std::size_t>(total));
  const auto term = [&lut](std::uint32_t v) { return lut[v]; };
  double s = 0.0;
  for (std::size_t i = 0; i < bins; ++i) s += term(joint[i * bins + i]);
  for (std::size_t i = 0; i < bins; ++i) {
    for (std::size_t j = i + 1; j < bins; ++j) {
      s += term(joint[i * bins + j]) + term(joint[j * bins + i]);
    }
  }
  const double h_joint = std::log2(total) - s / total;
  if (h_joint <= 0.0) return 2.0;  // one occupied joint bin: fully dependent
  const double h_sum = entropy_bits(ca, total) + entropy_bits(cb, total);
  return std::clamp(h_sum / h_joint, 1.0, 2.0);
}

}  // namespace detail

/// NMI between two same-geometry grids over their co-available cells.
/// Returns nothing when fewer than spec.min_overlap cells are shared.
[[nodiscard]] inline std::optional<NmiResult> nmi(const MaskedGrid& a,
                                                  const MaskedGrid& b,
                                                  const HistogramSpec& spec) {
  if (!a.same_geometry(b)) {
    throw std::invalid_argument("nmi: grids must share geometry");
  }
  const std::vector<std::int32_t> ba = bin_values(a, spec);
  const std::vector<std::int32_t> bb = bin_values(b, spec);
  std::vector<std::uint32_t> joint(spec.bins * spec.bins, 0);
  std::size_t overlap = 0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (ba[n] < 0 || bb[n] < 0) continue;
    ++joint[static_cast<std::size_t>(ba[n]) * spec.bins +
            static_cast<std::size_t>(bb[n])];
    ++overlap;
  }
  if (overlap < spec.min_overlap) return std::nullopt;
  return NmiResult{detail::nmi_from_joint(joint, spec.bins,
                                          static_cast<double>(overlap)),
                   overlap};
}

/// Pose lattice centered on `center`: 2*half+1 samples per axis would need
/// half to be a multiple of step, so the counts round to the nearest odd
/// lattice containing the center exactly.
struct SearchWindow {
  Pose2 center;
  double half_x = 1.0;
  double half_y = 1.0;
  double half_h = 0.026;
  double step_x = 0.2;
  double step_y = 0.2;
  double step_h = 0.0087;

  [[nodiscard]] std::size_t count_x() const { return axis_count(half_x, step_x); }
  [[nodiscard]] std::size_t count_y() const { return axis_count(half_y, step_y); }
  [[nodiscard]] std::size_t count_h() const { return axis_count(half_h, step_h); }

 private:
  [[nodiscard]] static std::size_t axis_count(double half, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("search step must be > 0");
    const auto side = static_cast<std::size_t>(
        std::llround(std::max(0.0, half) / step));
    return 2 * side + 1;
  }
};

struct Candidate {
  double x = 0.0;
  double y = 0.0;
  double h = 0.0;
  double nmi = 0.0;
  std::size_t overlap = 0;
  bool valid = false;  ///< met the minimum-overlap requirement
};

struct SearchResult {
  std::vector<Candidate> candidates;  ///< lexicographic in (x, y, h)
  std::size_t count_x = 0;
  std::size_t count_y = 0;
  std::size_t count_h = 0;
  std::size_t best_index = 0;
  bool has_measurement = false;  ///< at least one candidate was valid
};

/// Exhaustive NMI scoring of every pose on the window lattice. The local
/// grid's cells were placed assuming the vehicle stood at `anchor`; candidate
/// pose p therefore moves each local cell center c through the rigid map
/// R(p.h - anchor.h) about anchor plus the translation (p - anchor), and the
/// moved point is looked up in the global grid by nearest cell. The
/// arithmetic matches resample()/CellTransform exactly, so scoring a
/// candidate equals resampling the global map into the local frame and
/// computing nmi() on the pair.
[[nodiscard]] inline SearchResult search(
    const MaskedGrid& local_edge, const MaskedGrid& global_edge,
    const Pose2& anchor, const SearchWindow& window, const HistogramSpec& spec,
    const std::vector<std::int32_t>* global_bins_cache = nullptr) {
  const std::vector<std::int32_t> local_bins = bin_values(local_edge, spec);
  // Binning the (large, unchanging) global grid dominates small searches, so
  // repeat callers may pass bin_values(global_edge, spec) computed once.
  std::vector<std::int32_t> global_scratch;
  if (global_bins_cache == nullptr) {
    global_scratch = bin_values(global_edge, spec);
  }
  const std::vector<std::int32_t>& global_bins =
      global_bins_cache != nullptr ? *global_bins_cache : global_scratch;

  struct LocalCell {
    double cx;
    double cy;
    std::int32_t bin;
  };
  std::vector<LocalCell> cells;
  cells.reserve(local_edge.available_count());
  for (std::size_t n = 0; n < local_edge.size(); ++n) {
    if (local_bins[n] < 0) continue;
    double cx = 0.0;
    double cy = 0.0;
    local_edge.cell_center(local_edge.col(n), local_edge.row(n), cx, cy);
    cells.push_back(LocalCell{cx, cy, local_bins[n]});
  }

  SearchResult result;
  result.count_x = window.count_x();
  result.count_y = window.count_y();
  result.count_h = window.count_h();
  result.candidates.resize(result.count_x * result.count_y * result.count_h);

  const auto mid_x = static_cast<std::ptrdiff_t>(result.count_x / 2);
  const auto mid_y = static_cast<std::ptrdiff_t>(result.count_y / 2);
  const auto mid_h = static_cast<std::ptrdiff_t>(result.count_h / 2);

  std::vector<double> base_x(cells.size());
  std::vector<double> base_y(cells.size());
  std::vector<std::uint32_t> joint(spec.bins * spec.bins, 0);

  double best_nmi = -1.0;
  double best_dist2 = std::numeric_limits<double>::infinity();

  const auto finalize = [&](std::ptrdiff_t kx, std::ptrdiff_t ky,
                            std::ptrdiff_t kh, double x, double y, double h,
                            std::size_t overlap) {
    Candidate c;
    c.x = x;
    c.y = y;
    c.h = h;
    c.overlap = overlap;
    c.valid = overlap >= spec.min_overlap;
    if (c.valid) {
      c.nmi = detail::nmi_from_joint(joint, spec.bins,
                                     static_cast<double>(overlap));
    }
    const std::size_t index =
        (static_cast<std::size_t>(kx) * result.count_y +
         static_cast<std::size_t>(ky)) *
            result.count_h +
        static_cast<std::size_t>(kh);
    result.candidates[index] = c;
    if (c.valid) {
      const double ddx = x - window.center.x;
      const double ddy = y - window.center.y;
      const double ddh = h - window.center.h;
      const double dist2 = ddx * ddx + ddy * ddy + ddh * ddh;
      const bool better =
          !result.has_measurement || c.nmi > best_nmi ||
          (c.nmi == best_nmi &&
           (dist2 < best_dist2 ||
            (dist2 == best_dist2 && index < result.best_index)));
      if (better) {
        best_nmi = c.nmi;
        best_dist2 = dist2;
        result.best_index = index;
        result.has_measurement = true;
      }
    }
  };

  // When both translation steps are whole numbers of global cells, a rotated
  // local cell quantizes once per heading plane and every translation becomes
  // an integer cell shift. floor(q) + k == floor(q + k) exactly for integer
  // k, so this scores the same lattice the plain path would, one fdiv and one
  // floor per cell per plane instead of per candidate.
  const double gcell = global_edge.cell_size();
  const auto shift_x = static_cast<std::ptrdiff_t>(std::llround(window.step_x / gcell));
  const auto shift_y = static_cast<std::ptrdiff_t>(std::llround(window.step_y / gcell));
  const bool integer_steps =
      spec.bins <= 255 &&
      std::abs(window.step_x - static_cast<double>(shift_x) * gcell) < 1e-9 * gcell &&
      std::abs(window.step_y - static_cast<double>(shift_y) * gcell) < 1e-9 * gcell;

  const auto generic_plane = [&](std::ptrdiff_t kh, double h) {
    for (std::ptrdiff_t kx = 0;
         kx < static_cast<std::ptrdiff_t>(result.count_x); ++kx) {
      const double x =
          window.center.x + static_cast<double>(kx - mid_x) * window.step_x;
      const double tx = x - anchor.x;
      for (std::ptrdiff_t ky = 0;
           ky < static_cast<std::ptrdiff_t>(result.count_y); ++ky) {
        const double y =
            window.center.y + static_cast<double>(ky - mid_y) * window.step_y;
        const double ty = y - anchor.y;

        std::fill(joint.begin(), joint.end(), 0);
        std::size_t overlap = 0;
        for (std::size_t k = 0; k < cells.size(); ++k) {
          std::size_t gi = 0;
          std::size_t gj = 0;
          if (!global_edge.world_to_cell(base_x[k] + tx, base_y[k] + ty, gi,
                                         gj)) {
            continue;
          }
          const std::int32_t gb = global_bins[global_edge.index(gi, gj)];
          if (gb < 0) continue;
          ++joint[static_cast<std::size_t>(cells[k].bin) * spec.bins +
                  static_cast<std::size_t>(gb)];
          ++overlap;
        }
        finalize(kx, ky, kh, x, y, h, overlap);
      }
    }
  };

  // Heading outermost so the rotated bases are reused across translations;
  // candidate storage stays lexicographic via explicit index math.
  for (std::ptrdiff_t kh = 0; kh < static_cast<std::ptrdiff_t>(result.count_h);
       ++kh) {
    const double h =
        window.center.h + static_cast<double>(kh - mid_h) * window.step_h;
    const CellTransform rot =
        CellTransform::about(anchor.x, anchor.y, 0.0, 0.0, h - anchor.h);
    for (std::size_t k = 0; k < cells.size(); ++k) {
      rot.apply(cells[k].cx, cells[k].cy, base_x[k], base_y[k]);
    }

    if (integer_steps && !cells.empty()) {
      // Quantize each rotated cell at the lattice minimum translation.
      const double tx0 = window.center.x -
                         static_cast<double>(mid_x) * window.step_x - anchor.x;
      const double ty0 = window.center.y -
                         static_cast<double>(mid_y) * window.step_y - anchor.y;
      const auto count = cells.size();
      std::vector<std::ptrdiff_t> gi0(count);
      std::vector<std::ptrdiff_t> gj0(count);
      std::vector<std::uint32_t> lrow(count);
      std::ptrdiff_t lo_i = std::numeric_limits<std::ptrdiff_t>::max();
      std::ptrdiff_t lo_j = lo_i;
      std::ptrdiff_t hi_i = std::numeric_limits<std::ptrdiff_t>::min();
      std::ptrdiff_t hi_j = hi_i;
      for (std::size_t k = 0; k < count; ++k) {
        gi0[k] = static_cast<std::ptrdiff_t>(std::floor(
            (base_x[k] + tx0 - global_edge.origin_x()) / gcell));
        gj0[k] = static_cast<std::ptrdiff_t>(std::floor(
            (base_y[k] + ty0 - global_edge.origin_y()) / gcell));
        lrow[k] = static_cast<std::uint32_t>(cells[k].bin) *
                  static_cast<std::uint32_t>(spec.bins);
        lo_i = std::min(lo_i, gi0[k]);
        lo_j = std::min(lo_j, gj0[k]);
        hi_i = std::max(hi_i, gi0[k]);
        hi_j = std::max(hi_j, gj0[k]);
      }
      hi_i += static_cast<std::ptrdiff_t>(result.count_x - 1) * shift_x;
      hi_j += static_cast<std::ptrdiff_t>(result.count_y - 1) * shift_y;
      if ((hi_i - lo_i + 1) * (hi_j - lo_j + 1) > (std::ptrdiff_t{1} << 26)) {
        generic_plane(kh, h);  // oversized span; stay on the direct path
        continue;
      }

      // Gather the spanned global bins into a compact byte patch (0xFF means
      // unavailable or off the map) so the candidate loops below read cache-
      // resident memory. The patch covers every shifted position, so lookups
      // only need bounds checks against the patch box.
      const auto gnx = static_cast<std::ptrdiff_t>(global_edge.nx());
      const auto gny = static_cast<std::ptrdiff_t>(global_edge.ny());
      const std::ptrdiff_t wi = hi_i - lo_i + 1;
      const std::ptrdiff_t wj = hi_j - lo_j + 1;
      std::vector<std::uint8_t> patch(
          static_cast<std::size_t>(wi) * static_cast<std::size_t>(wj), 0xFF);
      {
        const std::ptrdiff_t ci0 = std::max<std::ptrdiff_t>(lo_i, 0);
        const std::ptrdiff_t ci1 = std::min<std::ptrdiff_t>(hi_i, gnx - 1);
        const std::ptrdiff_t cj0 = std::max<std::ptrdiff_t>(lo_j, 0);
        const std::ptrdiff_t cj1 = std::min<std::ptrdiff_t>(hi_j, gny - 1);
        for (std::ptrdiff_t gi = ci0; gi <= ci1; ++gi) {
          const std::int32_t* src =
              global_bins.data() + static_cast<std::size_t>(gi) * gny;
          std::uint8_t* dst = patch.data() +
                              static_cast<std::size_t>(gi - lo_i) * wj +
                              static_cast<std::size_t>(cj0 - lo_j);
          for (std::ptrdiff_t gj = cj0; gj <= cj1; ++gj, ++dst) {
            const std::int32_t gb = src[gj];
            *dst = gb < 0 ? 0xFF : static_cast<std::uint8_t>(gb);
          }
        }
      }
      for (std::size_t k = 0; k < count; ++k) {
        gi0[k] -= lo_i;
        gj0[k] -= lo_j;
      }
      for (std::ptrdiff_t kx = 0;
           kx < static_cast<std::ptrdiff_t>(result.count_x); ++kx) {
        const double x =
            window.center.x + static_cast<double>(kx - mid_x) * window.step_x;
        const std::ptrdiff_t di = kx * shift_x;
        for (std::ptrdiff_t ky = 0;
             ky < static_cast<std::ptrdiff_t>(result.count_y); ++ky) {
          const double y = window.center.y +
                           static_cast<double>(ky - mid_y) * window.step_y;
          const std::ptrdiff_t dj = ky * shift_y;
          std::fill(joint.begin(), joint.end(), 0);
          std::size_t overlap = 0;
          const std::uint8_t* pp = patch.data();
          for (std::size_t k = 0; k < count; ++k) {
            const std::size_t pi = static_cast<std::size_t>(gi0[k] + di);
            const std::size_t pj = static_cast<std::size_t>(gj0[k] + dj);
            const std::uint8_t gb =
                pp[pi * static_cast<std::size_t>(wj) + pj];
            if (gb == 0xFF) continue;
            ++joint[lrow[k] + gb];
            ++overlap;
          }
          finalize(kx, ky, kh, x, y, h, overlap);
        }
      }
      continue;
    }

    generic_plane(kh, h);
  }
  return result;
}

/// Pose measurement with a covariance fitted from the score surface.
struct Registration {
  Pose2 pose;          ///< best candidate on the lattice
  Pose2 surface_mean;  ///< weight-averaged pose; resolves below the lattice
  std::array<std::array<double, 3>, 3> cov{};
  double nmi = 0.0;
  std::size_t overlap = 0;
  bool on_boundary = false;  ///< best sat on the window face; cov inflated
  bool boundary_x = false;   ///< which axes put it there
  bool boundary_y = false;
  bool boundary_h = false;
};

/// Fit a covariance to the scored lattice: candidates are weighted by
/// exp(kappa*(nmi - max)) with kappa chosen so the weakest included candidate
/// weighs 1/100, and the weighted second moment is taken about the weighted
/// mean. `fit_radius_xy` / `fit_radius_h` > 0 restrict the fit to candidates
/// within that many lattice steps of the best along the translation / heading
/// axes, so the result describes the peak itself rather than the size of the
/// window it was found in; 0 leaves that axis unrestricted. Translation peaks
/// are typically unimodal and deserve a tight neighborhood, while heading
/// surfaces are often multimodal, where an unrestricted fit lets rival lobes
/// inflate the heading variance honestly. Each diagonal is floored at
/// (step/2)^2 so a perfectly peaked surface still reports quantization-level
/// uncertainty; a best pose on the window boundary inflates the whole matrix
/// tenfold and raises on_boundary.
[[nodiscard]] inline std::optional<Registration> fit_registration(
    const SearchResult& r, const SearchWindow& window, int fit_radius_xy = 0,
    int fit_radius_h = 0) {
  if (!r.has_measurement) return std::nullopt;
  const Candidate& best = r.candidates[r.best_index];

  const std::size_t bx = r.best_index / (r.count_y * r.count_h);
  const std::size_t by = (r.best_index / r.count_h) % r.count_y;
  const std::size_t bh = r.best_index % r.count_h;
  const auto gap = [](std::size_t a, std::size_t b) {
    return a > b ? a - b : b - a;
  };
  const auto included = [&](std::size_t index) {
    const Candidate& c = r.candidates[index];
    if (!c.valid) return false;
    const std::size_t ix = index / (r.count_y * r.count_h);
    const std::size_t iy = (index / r.count_h) % r.count_y;
    const std::size_t ih = index % r.count_h;
    if (fit_radius_xy > 0) {
      const std::size_t radius = static_cast<std::size_t>(fit_radius_xy);
      if (gap(ix, bx) > radius || gap(iy, by) > radius) return false;
    }
    if (fit_radius_h > 0 &&
        gap(ih, bh) > static_cast<std::size_t>(fit_radius_h)) {
      return false;
    }
    return true;
  };

  double lo = best.nmi;
  double hi = best.nmi;
  for (std::size_t n = 0; n < r.candidates.size(); ++n) {
    if (!included(n)) continue;
    const Candidate& c = r.candidates[n];
    lo = std::min(lo, c.nmi);
    hi = std::max(hi, c.nmi);
  }
  const double kappa = hi > lo ? std::log(100.0) / (hi - lo) : 0.0;

  double wsum = 0.0;
  double mx = 0.0;
  double my = 0.0;
  double mh = 0.0;
  for (std::size_t n = 0; n < r.candidates.size(); ++n) {
    if (!included(n)) continue;
    const Candidate& c = r.candidates[n];
    const double w = std::exp(kappa * (c.nmi - hi));
    wsum += w;
    mx += w * c.x;
    my += w * c.y;
    mh += w * c.h;
  }
  mx /= wsum;
  my /= wsum;
  mh /= wsum;

  std::array<std::array<double, 3>, 3> cov{};
  for (std::size_t n = 0; n < r.candidates.size(); ++n) {
    if (!included(n)) continue;
    const Candidate& c = r.candidates[n];
    const double w = std::exp(kappa * (c.nmi - hi));
    const std::array<double, 3> d{c.x - mx, c.y - my, c.h - mh};
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        cov[a][b] += w * d[a] * d[b];
      }
    }
  }
  for (auto& row : cov) {
    for (double& v : row) v /= wsum;
  }

  const std::array<double, 3> floors{
      0.25 * window.step_x * window.step_x,
      0.25 * window.step_y * window.step_y,
      0.25 * window.step_h * window.step_h,
  };
  for (std::size_t a = 0; a < 3; ++a) {
    cov[a][a] = std::max(cov[a][a], floors[a]);
  }

  Registration out;
  out.pose = Pose2{best.x, best.y, wrap_angle(best.h)};
  out.surface_mean = Pose2{mx, my, wrap_angle(mh)};
  out.nmi = best.nmi;
  out.overlap = best.overlap;

  // Boundary: the best candidate sits on an extreme lattice plane of an axis
  // that actually has extent.
  const bool edge_x = r.count_x > 1 && (bx == 0 || bx + 1 == r.count_x);
  const bool edge_y = r.count_y > 1 && (by == 0 || by + 1 == r.count_y);
  const bool edge_h = r.count_h > 1 && (bh == 0 || bh + 1 == r.count_h);
  out.boundary_x = edge_x;
  out.boundary_y = edge_y;
  out.boundary_h = edge_h;
  out.on_boundary = edge_x || edge_y || edge_h;
  if (out.on_boundary) {
    for (auto& row : cov) {
      for (double& v : row) v *= 10.0;
    }
  }
  out.cov = cov;
  return out;
}

}  // namespace gridloc
