#pragma once

// Pose filter: an extended Kalman filter over (x, y, heading) driven by body
// odometry, corrected by grid-registration measurements, plus the localizer
// loop that schedules coarse-to-fine registration of a rolling local map
// against the global map.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "gridloc/map_builder.hpp"
#include "gridloc/pose.hpp"
#include "gridloc/registration.hpp"

namespace gridloc {

/// Diagonal floor applied to measurement covariances so the innovation
/// covariance stays invertible.
inline constexpr double kMeasurementVarianceFloor = 1e-9;

struct PoseBelief {
  Pose2 mean;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
};

/// Propagate the belief through one body-frame odometry increment with
/// additive body-frame noise covariance `q`. The mean composes the poses; the
/// covariance maps through the composition Jacobians.
inline void predict(PoseBelief& b, const Twist2& d, const Eigen::Matrix3d& q) {
  const double c = std::cos(b.mean.h);
  const double s = std::sin(b.mean.h);
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  f(0, 2) = -s * d.dx - c * d.dy;
  f(1, 2) = c * d.dx - s * d.dy;
  Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
  g(0, 0) = c;
  g(0, 1) = -s;
  g(1, 0) = s;
  g(1, 1) = c;
  b.mean = compose(b.mean, d);
  const Eigen::Matrix3d propagated =
      f * b.cov * f.transpose() + g * q * g.transpose();
  b.cov = 0.5 * (propagated + propagated.transpose());
}

struct UpdateOutcome {
  bool accepted = false;
  double mahalanobis2 = std::numeric_limits<double>::infinity();
};

/// Fuse a direct pose measurement (identity observation model) using the
/// Joseph-form covariance update, which keeps the covariance symmetric
/// positive semidefinite under roundoff. The innovation heading is wrapped.
/// Measurements whose covariance is not positive definite after symmetrizing
/// and flooring, or whose squared Mahalanobis distance exceeds `gate2`, are
/// rejected and leave the belief untouched.
inline UpdateOutcome update(PoseBelief& b, const Pose2& z,
                            const Eigen::Matrix3d& r_in, double gate2 = 16.0) {
  Eigen::Matrix3d r = 0.5 * (r_in + r_in.transpose());
  for (int i = 0; i < 3; ++i) {
    r(i, i) = std::max(r(i, i), kMeasurementVarianceFloor);
  }
  const Eigen::LLT<Eigen::Matrix3d> llt(r);
  if (llt.info() != Eigen::Success) return UpdateOutcome{};

  const Eigen::Vector3d nu(z.x - b.mean.x, z.y - b.mean.y,
                           wrap_angle(z.h - b.mean.h));
  const Eigen::Matrix3d s = b.cov + r;
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(s);
  if (ldlt.info() != Eigen::Success) return UpdateOutcome{};
  const double d2 = nu.dot(ldlt.solve(nu));
  if (!(d2 <= gate2)) return UpdateOutcome{false, d2};

  const Eigen::Matrix3d k = b.cov * ldlt.solve(Eigen::Matrix3d::Identity());
  const Eigen::Vector3d dx = k * nu;
  b.mean.x += dx(0);
  b.mean.y += dx(1);
  b.mean.h = wrap_angle(b.mean.h + dx(2));
  const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - k;
  const Eigen::Matrix3d joseph =
      a * b.cov * a.transpose() + k * r * k.transpose();
  b.cov = 0.5 * (joseph + joseph.transpose());
  return UpdateOutcome{true, d2};
}

/// One filter step's outward-facing record.
struct StepResult {
  PoseBelief belief;
  Pose2 predicted;          ///< belief mean after the motion update, before fusion
  bool attempted = false;   ///< a registration search was run
  bool accepted = false;    ///< its measurement passed the gate and was fused
  bool coasted = true;      ///< prediction only (no accepted measurement)
  Pose2 measurement;        ///< valid when attempted and a candidate scored
  bool has_measurement = false;
  Eigen::Matrix3d meas_cov = Eigen::Matrix3d::Zero();  ///< fitted measurement covariance
  double nmi = 0.0;
  std::size_t overlap = 0;
  bool on_boundary = false;
  bool boundary_x = false;
  bool boundary_y = false;
  bool boundary_h = false;
  double mahalanobis2 = 0.0;
  double window_half_x = 0.0;
  double window_half_y = 0.0;
  double window_half_h = 0.0;
};

/// Full localization loop: rolling local edge map, coarse-to-fine NMI
/// registration against a fixed global edge map, EKF fusion.
class Localizer {
 public:
  struct Params {
    LocalMapper::Params mapper;
    Eigen::Vector3d odo_sigma{0.02, 0.02, 0.2 * std::numbers::pi / 180.0};  ///< per step
    double gate2 = 16.0;
    // Coarse window: +/- 3 sigma, clamped to the bounds below.
    double min_half_xy = 1.0;
    double max_half_xy = 4.0;
    double min_half_h = 1.5 * std::numbers::pi / 180.0;
    double max_half_h = 10.0 * std::numbers::pi / 180.0;
    double coarse_step_xy = 0.6;
    double coarse_step_h = 1.5 * std::numbers::pi / 180.0;
    // Fine window: fixed extents around the coarse best.
    double fine_half_xy = 1.0;
    double fine_half_h = 3.0 * std::numbers::pi / 180.0;
    double fine_step_xy = 0.2;
    double fine_step_h = 0.5 * std::numbers::pi / 180.0;
    // Covariance/mean fit neighborhood, in fine lattice steps around the
    // peak. Fitting near the peak makes R describe the peak's sharpness
    // instead of the search window's size, which would otherwise dominate
    // the second moment on plateau-heavy surfaces. Heading is left
    // unrestricted: its surface is typically multimodal with razor-thin
    // contrast between lobes, and the full-range fit prices that ambiguity
    // into the heading variance instead of reporting the confident width of
    // whichever lobe won.
    int fit_radius_xy = 2;
    int fit_radius_h = 0;
    // Inner refinement iterations per registration: each one re-anchors the
    // scan window at the latest corrected pose and searches again, so the
    // content's placement error cannot hold the correction short. Iteration
    // stops early once the correction moves less than half a fine step.
    int max_iterations = 3;
    std::size_t register_every = 1;   ///< run the search every k-th step
    std::size_t min_map_cells = 200;  ///< skip search on thinner local maps
    std::size_t min_overlap = 100;
    std::size_t bins = 64;  ///< joint-histogram resolution for the searches
    double min_insert_travel = 0.05;  ///< meters; smaller steps drop the scan
    double min_insert_turn = 0.005;   ///< radians; either threshold admits it
    // Consistency tolerance between consecutive stationary-step measurements.
    // A frozen window registered against the same map is a deterministic
    // function of the search center, so a healthy surface reproduces the same
    // pose from step to step; scattering answers expose a speckle surface
    // whose peaks are artifacts and must not be fused.
    double frozen_tol_xy = 0.10;  ///< meters
    double frozen_tol_h = 0.25 * std::numbers::pi / 180.0;  ///< radians
    // Fading-memory factor applied to the predicted covariance. Successive
    // registrations share most of their scan window, so their errors are
    // strongly correlated; fusing them as independent collapses the belief
    // covariance far below the real error. Inflating the prediction keeps
    // the filter's confidence (and with it the 3-sigma search window and
    // the Kalman gain) honest under that correlation.
    double fading = 1.0;
    bool enable_registration = true;  ///< false = open-loop dead reckoning
  };

  Localizer(MaskedGrid global_edge, const PoseBelief& init, const Params& p)
      : global_(std::move(global_edge)),
        spec_(HistogramSpec::shared_range(global_, p.bins)),
        belief_(init),
        params_(p) {
    spec_.min_overlap = p.min_overlap;
    global_bins_ = bin_values(global_, spec_);
  }

  [[nodiscard]] const PoseBelief& belief() const { return belief_; }
  [[nodiscard]] const HistogramSpec& histogram_spec() const { return spec_; }

  /// Local map stacked from the stored scan window, rigidly re-anchored so
  /// the newest scan sits at the current belief mean and every older scan is
  /// placed by walking the odometry increments backwards from there. The
  /// window's placement error is then exactly the belief's current error — a
  /// single rigid transform the search lattice can invert — so the argmax
  /// measures the current pose. Freezing each scan at the belief it was
  /// inserted under instead turns the content into a patchwork of historical
  /// errors that no candidate can undo, and the measurement degenerates into
  /// the window's average past error: a self-confirming feedback loop.
  [[nodiscard]] LocalMapper local_map() const { return local_map(belief_.mean); }

  /// Same rigid re-anchoring, with the newest scan pinned to an arbitrary
  /// pose hypothesis instead of the belief mean.
  [[nodiscard]] LocalMapper local_map(const Pose2& newest) const {
    LocalMapper mapper(params_.mapper);
    std::vector<Pose2> poses(window_.size());
    Pose2 p = newest;
    {
      // The newest stored scan predates any dropped steps; unwind them first.
      const double hp = wrap_angle(p.h - pending_.dh);
      const double c = std::cos(hp);
      const double s = std::sin(hp);
      p = Pose2{p.x - (c * pending_.dx - s * pending_.dy),
                p.y - (s * pending_.dx + c * pending_.dy), hp};
    }
    for (std::size_t k = window_.size(); k-- > 0;) {
      poses[k] = p;
      const Twist2& d = window_[k].odo;
      const double hp = wrap_angle(p.h - d.dh);
      const double c = std::cos(hp);
      const double s = std::sin(hp);
      p = Pose2{p.x - (c * d.dx - s * d.dy), p.y - (s * d.dx + c * d.dy), hp};
    }
    for (std::size_t k = 0; k < window_.size(); ++k) {
      mapper.insert(window_[k].returns, poses[k]);
    }
    return mapper;
  }

  /// Advance one step: predict through the odometry increment, append the
  /// body-frame returns to the scan window, and (on schedule) register the
  /// re-anchored local map against the global map to correct the belief.
  StepResult step(const Twist2& odo, const std::vector<Return>& body_returns) {
    const Eigen::Matrix3d q = params_.odo_sigma.cwiseProduct(params_.odo_sigma)
                                  .asDiagonal();
    predict(belief_, odo, q);
    belief_.cov *= params_.fading * params_.fading;

    // Compose this step's increment onto any increments whose scans were
    // dropped, so the stored window chain still spans every step.
    {
      const double c = std::cos(pending_.dh);
      const double sn = std::sin(pending_.dh);
      pending_ = Twist2{pending_.dx + c * odo.dx - sn * odo.dy,
                        pending_.dy + sn * odo.dx + c * odo.dy,
                        wrap_angle(pending_.dh + odo.dh)};
    }
    // A scan taken while (nearly) stationary repeats the previous one's view.
    // Inserting it would evict a scan that still adds perspective, and a few
    // seconds at rest would drain the window down to a single viewpoint whose
    // ring content is rotation-invariant, leaving heading unobservable. Keep
    // the stale-but-diverse window instead; the widening search window covers
    // the extra drift.
    const bool moved =
        std::hypot(odo.dx, odo.dy) >= params_.min_insert_travel ||
        std::abs(odo.dh) >= params_.min_insert_turn;
    const bool inserted = moved || window_.empty();
    if (inserted) {
      window_.push_back(ScanRecord{body_returns, pending_});
      pending_ = Twist2{};
      while (window_.size() > params_.mapper.window) window_.pop_front();
    }
    ++step_count_;

    StepResult out;
    out.belief = belief_;
    out.predicted = belief_.mean;
    if (!params_.enable_registration ||
        step_count_ % params_.register_every != 0) {
      return out;
    }

    LocalMapper mapper = local_map();
    EdgeMap local = mapper.edge_map();
    if (local.edge.available_count() < params_.min_map_cells) return out;
    out.attempted = true;

    // 3-sigma windows, re-expanded while recent fits kept hitting the window
    // boundary: a boundary best means the true peak may sit outside the
    // searched lattice, and the filter's own sigma cannot be trusted to grow
    // fast enough to recapture it once overconfident.
    const double half_x = std::min(
        std::clamp(3.0 * std::sqrt(belief_.cov(0, 0)), params_.min_half_xy,
                   params_.max_half_xy) *
            expand_xy_,
        params_.max_half_xy);
    const double half_y = std::min(
        std::clamp(3.0 * std::sqrt(belief_.cov(1, 1)), params_.min_half_xy,
                   params_.max_half_xy) *
            expand_xy_,
        params_.max_half_xy);
    const double half_h = std::min(
        std::clamp(3.0 * std::sqrt(belief_.cov(2, 2)), params_.min_half_h,
                   params_.max_half_h) *
            expand_h_,
        params_.max_half_h);
    out.window_half_x = half_x;
    out.window_half_y = half_y;
    out.window_half_h = half_h;

    // Iterated registration. The window content is placed from the belief,
    // so its placement error equals the belief's error; the score surface
    // built from erroneous content recovers only part of that error (the
    // misplaced content drags the optimum toward the belief). Re-anchoring
    // the window at the corrected pose and registering again contracts the
    // placement error geometrically within the step, instead of letting the
    // shortfall persist as a self-confirming bias across steps. Healthy
    // steps converge immediately and pay for a single search.
    Pose2 center = belief_.mean;
    std::optional<Registration> reg;
    for (int iter = 0;;) {
      // The coarse pass always runs: the window is sized by the belief's own
      // covariance, which understates the error whenever weak measurements
      // have let the pose drift, so the fine window centered on the raw
      // belief could strand the true peak on (or beyond) its boundary.
      const Pose2 anchor_i = mapper.anchor();
      Pose2 fine_center = center;
      SearchWindow coarse;
      coarse.center = center;
      coarse.half_x = half_x;
      coarse.half_y = half_y;
      coarse.half_h = half_h;
      coarse.step_x = params_.coarse_step_xy;
      coarse.step_y = params_.coarse_step_xy;
      coarse.step_h = params_.coarse_step_h;
      const SearchResult cr =
          search(local.edge, global_, anchor_i, coarse, spec_, &global_bins_);
      if (cr.has_measurement) {
        const Candidate& cb = cr.candidates[cr.best_index];
        fine_center = Pose2{cb.x, cb.y, cb.h};
      }

      SearchWindow fine;
      fine.center = fine_center;
      fine.half_x = params_.fine_half_xy;
      fine.half_y = params_.fine_half_xy;
      fine.half_h = params_.fine_half_h;
      fine.step_x = params_.fine_step_xy;
      fine.step_y = params_.fine_step_xy;
      fine.step_h = params_.fine_step_h;
      const SearchResult fr =
          search(local.edge, global_, anchor_i, fine, spec_, &global_bins_);
      auto fitted = fit_registration(fr, fine, params_.fit_radius_xy,
                                     params_.fit_radius_h);
      if (!fitted.has_value()) break;
      const Pose2 prev = center;
      reg = std::move(fitted);
      center = reg->surface_mean;
      ++iter;
      if (iter >= params_.max_iterations) break;
      const double moved_xy = std::hypot(center.x - prev.x, center.y - prev.y);
      const double moved_h = std::abs(wrap_angle(center.h - prev.h));
      if (moved_xy < 0.5 * params_.fine_step_xy &&
          moved_h < 0.5 * params_.fine_step_h) {
        break;
      }
      mapper = local_map(center);
      local = mapper.edge_map();
      if (local.edge.available_count() < params_.min_map_cells) break;
    }
    if (!reg.has_value()) return out;

    // Fuse the converged surface mean, not the raw lattice argmax: the
    // argmax is quantized to the fine step, so whenever the prior error is
    // below half a step it returns the prior itself and the innovation is
    // identically zero. The mean of the same fitted distribution that
    // produces R moves continuously with the surface and preserves the
    // sub-lattice signal the filter needs to hold against drift.
    out.has_measurement = true;
    out.measurement = center;
    out.nmi = reg->nmi;
    out.overlap = reg->overlap;
    out.on_boundary = reg->on_boundary;
    out.boundary_x = reg->boundary_x;
    out.boundary_y = reg->boundary_y;
    out.boundary_h = reg->boundary_h;

    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) r(i, j) = reg->cov[i][j];
    }
    out.meas_cov = r;

    if (reg->boundary_x || reg->boundary_y) {
      expand_xy_ = std::min(expand_xy_ * 2.0, 8.0);
    } else {
      expand_xy_ = 1.0;
    }
    if (reg->boundary_h) {
      expand_h_ = std::min(expand_h_ * 2.0, 8.0);
    } else {
      expand_h_ = 1.0;
    }

    // Stationary steps re-register frozen content, so the result should be
    // reproducible; require agreement with the previous stationary
    // measurement before fusing, and coast when they scatter. The reference
    // always advances to the latest measurement so a single outlier cannot
    // lock fusion out for the rest of the stop.
    if (!inserted) {
      const bool consistent =
          have_frozen_meas_ &&
          std::abs(center.x - frozen_meas_.x) <= params_.frozen_tol_xy &&
          std::abs(center.y - frozen_meas_.y) <= params_.frozen_tol_xy &&
          std::abs(wrap_angle(center.h - frozen_meas_.h)) <=
              params_.frozen_tol_h;
      frozen_meas_ = center;
      have_frozen_meas_ = true;
      if (!consistent) {
        out.coasted = true;
        out.belief = belief_;
        return out;
      }
    } else {
      have_frozen_meas_ = false;
    }

    const Eigen::Matrix3d p_before = belief_.cov;
    const UpdateOutcome u = update(belief_, center, r, params_.gate2);
    if (u.accepted && !inserted) {
      // A stationary step reuses the frozen window: its registration error is
      // the same constant as last step's, not a fresh draw. Refund the
      // information the update subtracted so repeated fusions keep pinning
      // the mean against odometry drift without collapsing the covariance
      // below the frozen error's own variance.
      const Eigen::Matrix3d kg = p_before * (p_before + r).inverse();
      belief_.cov += kg * r * kg.transpose();
      belief_.cov = 0.5 * (belief_.cov + belief_.cov.transpose()).eval();
    }
    out.mahalanobis2 = u.mahalanobis2;
    out.accepted = u.accepted;
    out.coasted = !u.accepted;
    out.belief = belief_;
    return out;
  }

 private:
  struct ScanRecord {
    std::vector<Return> returns;
    Twist2 odo;  ///< increment from the previous step's pose to this scan's
  };

  MaskedGrid global_;
  HistogramSpec spec_;
  std::vector<std::int32_t> global_bins_;  ///< bin_values(global_, spec_)
  PoseBelief belief_;
  Params params_;
  std::size_t step_count_ = 0;
  Twist2 pending_{};  ///< composed increments of dropped scans
  double expand_xy_ = 1.0;  ///< boundary-triggered window re-expansion
  double expand_h_ = 1.0;
  std::deque<ScanRecord> window_;
};

}  // namespace gridloc
