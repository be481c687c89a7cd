#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "gridloc/grid.hpp"
#include "gridloc/pose.hpp"
#include "gridloc/rng.hpp"

namespace gridloc {

/// Ground-surface material classes of the synthetic world.
enum class Region : std::uint8_t { kAsphalt = 0, kMarking = 1, kBoundary = 2 };

/// Procedural flat-ground world: dark asphalt with brighter lane stripes
/// running along +x, optional cross bars along +y, and spatially correlated
/// speckle. Cell values are integers in [0, 255] so exact-arithmetic
/// invariants hold downstream.
struct WorldParams {
  double extent_x = 60.0;
  double extent_y = 60.0;
  double cell_size = 0.1;
  double asphalt_mean = 25.0;
  double stripe_mean = 90.0;
  double lane_spacing = 3.5;
  double stripe_width = 0.2;
  double dash_length = 3.0;
  double dash_period = 9.0;  // <= dash_length means solid stripes
  double bar_spacing = 40.0;  // 0 disables cross bars
  double bar_width = 0.3;
  double speckle_sigma = 4.0;
  int speckle_blur_radius = 2;
  // Smooths the final reflectivity field, modelling worn paint boundaries
  // and the footprint a real beam integrates over. Edges become short ramps
  // spanning a few cells, which is what makes alignment scores fall off
  // gradually instead of collapsing one cell away from the optimum.
  int paint_blur_radius = 1;
};

struct World {
  MaskedGrid truth;            // latent reflectivity, every cell available
  std::vector<Region> region;  // per-cell material label, same indexing
  WorldParams params;

  [[nodiscard]] bool in_bounds(double x, double y) const {
    std::size_t i = 0;
    std::size_t j = 0;
    return truth.world_to_cell(x, y, i, j);
  }
};

namespace detail {

/// True where the paint layout covers the point. Intervals are half-open
/// ([lo, hi)) so painted cell counts match the analytic areas exactly when
/// the layout aligns with the cell lattice.
[[nodiscard]] inline bool on_marking(const WorldParams& p, double x, double y) {
  if (p.stripe_width > 0.0) {
    const double line0 = 0.5 * p.lane_spacing;
    const double rel = y - line0;
    const double d = rel - std::round(rel / p.lane_spacing) * p.lane_spacing;
    if (d >= -0.5 * p.stripe_width && d < 0.5 * p.stripe_width) {
      if (p.dash_period <= p.dash_length) return true;
      const double phase = x - std::floor(x / p.dash_period) * p.dash_period;
      if (phase < p.dash_length) return true;
    }
  }
  if (p.bar_spacing > 0.0 && p.bar_width > 0.0) {
    const double bar0 = 0.5 * p.bar_spacing;
    const double brel = x - bar0;
    const double d = brel - std::round(brel / p.bar_spacing) * p.bar_spacing;
    if (d >= -0.5 * p.bar_width && d < 0.5 * p.bar_width) return true;
  }
  return false;
}

/// Separable box blur, one pass per axis, reflecting at the borders.
inline void box_blur(std::vector<double>& v, std::size_t nx, std::size_t ny,
                     int radius) {
  if (radius <= 0) return;
  const auto clampi = [](long a, long lo, long hi) {
    return a < lo ? lo : (a > hi ? hi : a);
  };
  std::vector<double> tmp(v.size());
  const double inv = 1.0 / (2 * radius + 1);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const long jj = clampi(static_cast<long>(j) + d, 0, static_cast<long>(ny) - 1);
        acc += v[i * ny + static_cast<std::size_t>(jj)];
      }
      tmp[i * ny + j] = acc * inv;
    }
  }
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const long ii = clampi(static_cast<long>(i) + d, 0, static_cast<long>(nx) - 1);
        acc += tmp[static_cast<std::size_t>(ii) * ny + j];
      }
      v[i * ny + j] = acc * inv;
    }
  }
}

}  // namespace detail

[[nodiscard]] inline World generate_world(const WorldParams& p,
                                          std::uint64_t seed) {
  if (p.extent_x <= 0.0 || p.extent_y <= 0.0) {
    throw std::invalid_argument("world extent must be positive");
  }
  const auto nx = static_cast<std::size_t>(std::ceil(p.extent_x / p.cell_size));
  const auto ny = static_cast<std::size_t>(std::ceil(p.extent_y / p.cell_size));
  World w{MaskedGrid(nx, ny, p.cell_size, 0.0, 0.0),
          std::vector<Region>(nx * ny, Region::kAsphalt), p};

  std::vector<double> speckle(nx * ny);
  Rng rng = make_rng(seed, 0);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& s : speckle) s = unit(rng);
  detail::box_blur(speckle, nx, ny, p.speckle_blur_radius);
  // Rescale the blurred field back to the requested speckle deviation.
  double ss = 0.0;
  for (const double s : speckle) ss += s * s;
  const double measured = std::sqrt(ss / static_cast<double>(speckle.size()));
  const double scale = measured > 0.0 ? p.speckle_sigma / measured : 0.0;

  std::vector<std::uint8_t> paint(nx * ny, 0);
  std::vector<double> field(nx * ny, 0.0);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      double cx = 0.0;
      double cy = 0.0;
      w.truth.cell_center(i, j, cx, cy);
      const std::size_t n = w.truth.index(i, j);
      paint[n] = detail::on_marking(p, cx, cy) ? 1 : 0;
      const double base = paint[n] ? p.stripe_mean : p.asphalt_mean;
      field[n] = base + scale * speckle[n];
    }
  }
  detail::box_blur(field, nx, ny, p.paint_blur_radius);
  for (std::size_t n = 0; n < field.size(); ++n) {
    const double v = std::round(field[n]);
    w.truth.set(n, std::min(255.0, std::max(0.0, v)));
  }
  // Painted cells are markings; unpainted cells touching paint are the
  // transition band; everything else is asphalt.
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t n = w.truth.index(i, j);
      if (paint[n]) {
        w.region[n] = Region::kMarking;
        continue;
      }
      bool near_paint = false;
      if (i > 0) near_paint |= paint[n - ny] != 0;
      if (i + 1 < nx) near_paint |= paint[n + ny] != 0;
      if (j > 0) near_paint |= paint[n - 1] != 0;
      if (j + 1 < ny) near_paint |= paint[n + 1] != 0;
      w.region[n] = near_paint ? Region::kBoundary : Region::kAsphalt;
    }
  }
  return w;
}

/// One beam of the simulated multi-laser scanner. On flat ground a beam with
/// incidence theta (from the surface normal) and slant range r sweeps a ring
/// of radius r*sin(theta) around the sensor.
struct LaserModel {
  double incidence = 1.0;  // radians, in [0, pi/2)
  double range = 10.0;     // meters, > 0
  double gain = 1.0;
  double offset = 0.0;
  double noise_sigma = 0.0;

  [[nodiscard]] double ring_radius() const {
    return range * std::sin(incidence);
  }
};

/// Response parameters shared by all lasers: reference range and the
/// incidence / range falloff exponents.
struct ResponseParams {
  double r0 = 10.0;
  double p = 1.0;
  double q = 1.0;
};

inline void validate(const LaserModel& m) {
  if (!(m.incidence >= 0.0) || !(m.incidence < std::numbers::pi / 2.0)) {
    throw std::invalid_argument("laser incidence must lie in [0, pi/2)");
  }
  if (!(m.range > 0.0)) throw std::invalid_argument("laser range must be positive");
}

/// Evenly spreads `count` beams between the two incidence angles at a fixed
/// sensor height, drawing gains and offsets uniformly from the given ranges.
[[nodiscard]] inline std::vector<LaserModel> make_lasers(
    std::size_t count, double incidence_lo, double incidence_hi,
    double sensor_height, double gain_lo, double gain_hi, double offset_lo,
    double offset_hi, double noise_sigma, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("laser count must be positive");
  std::vector<LaserModel> out(count);
  Rng rng = make_rng(seed, 1);
  std::uniform_real_distribution<double> gain(gain_lo, gain_hi);
  std::uniform_real_distribution<double> offset(offset_lo, offset_hi);
  for (std::size_t b = 0; b < count; ++b) {
    const double f = count > 1 ? static_cast<double>(b) /
                                     static_cast<double>(count - 1)
                               : 0.5;
    LaserModel m;
    m.incidence = incidence_lo + f * (incidence_hi - incidence_lo);
    m.range = sensor_height / std::cos(m.incidence);
    m.gain = gain(rng);
    m.offset = offset(rng);
    m.noise_sigma = noise_sigma;
    validate(m);
    out[b] = m;
  }
  return out;
}

struct Return {
  double x = 0.0;
  double y = 0.0;
  float reflectivity = 0.0f;  // integer-valued, in [0, 255]
  std::uint16_t laser = 0;
};

struct Scan {
  double t = 0.0;
  std::vector<Return> returns;
};

/// Samples one revolution: every laser sweeps its ground ring at `az_count`
/// evenly spaced azimuths. Points leaving the world are dropped; a pose
/// outside the world yields an empty scan. The per-return response is
///   clamp(round(gain * truth * cos(incidence)^p * (r0/range)^q + offset + noise), 0, 255).
[[nodiscard]] inline Scan scan_once(const World& world,
                                    const std::vector<LaserModel>& lasers,
                                    const ResponseParams& resp, const Pose2& pose,
                                    std::size_t az_count, std::uint64_t seed,
                                    double t = 0.0) {
  Scan scan;
  scan.t = t;
  if (!world.in_bounds(pose.x, pose.y)) return scan;
  scan.returns.reserve(lasers.size() * az_count);
  Rng rng{seed};
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t b = 0; b < lasers.size(); ++b) {
    const LaserModel& m = lasers[b];
    const double rho = m.ring_radius();
    const double shape = m.gain * std::pow(std::cos(m.incidence), resp.p) *
                         std::pow(resp.r0 / m.range, resp.q);
    for (std::size_t k = 0; k < az_count; ++k) {
      const double az = pose.h + 2.0 * std::numbers::pi *
                                     static_cast<double>(k) /
                                     static_cast<double>(az_count);
      const double px = pose.x + rho * std::cos(az);
      const double py = pose.y + rho * std::sin(az);
      std::size_t i = 0;
      std::size_t j = 0;
      if (!world.truth.world_to_cell(px, py, i, j)) continue;
      double v = shape * world.truth.value(world.truth.index(i, j)) + m.offset;
      if (m.noise_sigma > 0.0) v += m.noise_sigma * unit(rng);
      v = std::round(v);
      v = std::min(255.0, std::max(0.0, v));
      scan.returns.push_back(Return{px, py, static_cast<float>(v),
                                    static_cast<std::uint16_t>(b)});
    }
  }
  return scan;
}

enum class TrajectoryKind { kStraight, kCurvy, kLoop, kStopAndGo };

struct TrajectoryParams {
  TrajectoryKind kind = TrajectoryKind::kLoop;
  double duration = 60.0;  // seconds
  double speed = 3.0;      // meters/second cruise speed
  double rate = 10.0;      // poses per second
  Pose2 start{};
  double radius = 0.0;          // loop radius; 0 derives one full lap
  double serpentine_amp = 0.6;  // radians of heading sway (curvy)
  double serpentine_period = 15.0;  // seconds (curvy)
  double stop_period = 25.0;    // seconds between stops (stop-and-go)
  double stop_hold = 3.0;       // seconds at rest
  double ramp = 2.0;            // seconds to brake / pull away
  double odo_sigma_xy = 0.0;    // odometry noise per step, meters
  double odo_sigma_h = 0.0;     // odometry noise per step, radians
};

struct TimedPose {
  double t = 0.0;
  Pose2 pose{};
  Twist2 odo{};  // noisy body-frame increment from the previous pose
};

using Trajectory = std::vector<TimedPose>;

namespace detail {

/// Speed profile for stop-and-go driving: cruise, brake, rest, pull away.
[[nodiscard]] inline double stop_and_go_speed(const TrajectoryParams& p,
                                              double t) {
  const double cycle = p.stop_period;
  const double tau = t - std::floor(t / cycle) * cycle;
  const double cruise_end = cycle - p.stop_hold - 2.0 * p.ramp;
  if (tau < cruise_end) return p.speed;
  if (tau < cruise_end + p.ramp) {
    return p.speed * (1.0 - (tau - cruise_end) / p.ramp);
  }
  if (tau < cruise_end + p.ramp + p.stop_hold) return 0.0;
  return p.speed * (tau - cruise_end - p.ramp - p.stop_hold) / p.ramp;
}

}  // namespace detail

/// Deterministic pose stream plus noisy body-frame odometry increments.
/// Zero-noise odometry integrates back to the true poses.
[[nodiscard]] inline Trajectory generate_trajectory(const TrajectoryParams& p,
                                                    std::uint64_t seed) {
  if (p.duration <= 0.0 || p.rate <= 0.0) {
    throw std::invalid_argument("trajectory duration and rate must be positive");
  }
  const auto steps = static_cast<std::size_t>(std::llround(p.duration * p.rate));
  if (steps == 0) throw std::invalid_argument("trajectory too short for one step");
  const double dt = 1.0 / p.rate;

  Trajectory out;
  out.reserve(steps);
  const double lap_radius =
      p.radius > 0.0 ? p.radius
                     : p.speed * p.duration / (2.0 * std::numbers::pi);

  // Arc length along the path at each output time, by fine substepping for
  // the speed-modulated kinds.
  const int substeps = 32;
  double arc = 0.0;
  double serp_heading_int = 0.0;  // integral terms for the curvy kind
  double serp_x = p.start.x;
  double serp_y = p.start.y;

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    Pose2 pose;
    switch (p.kind) {
      case TrajectoryKind::kStraight: {
        const double s = p.speed * t;
        pose = Pose2{p.start.x + s * std::cos(p.start.h),
                     p.start.y + s * std::sin(p.start.h), p.start.h};
        break;
      }
      case TrajectoryKind::kCurvy: {
        // Integrated numerically; state carried across steps.
        if (k > 0) {
          const double t0 = static_cast<double>(k - 1) * dt;
          for (int s = 0; s < substeps; ++s) {
            const double ts = t0 + (static_cast<double>(s) + 0.5) * dt / substeps;
            const double h = p.start.h +
                             p.serpentine_amp *
                                 std::sin(2.0 * std::numbers::pi * ts /
                                          p.serpentine_period);
            serp_x += p.speed * std::cos(h) * dt / substeps;
            serp_y += p.speed * std::sin(h) * dt / substeps;
          }
        }
        serp_heading_int = p.start.h +
                           p.serpentine_amp *
                               std::sin(2.0 * std::numbers::pi * t /
                                        p.serpentine_period);
        pose = Pose2{serp_x, serp_y, wrap_angle(serp_heading_int)};
        break;
      }
      case TrajectoryKind::kLoop:
      case TrajectoryKind::kStopAndGo: {
        if (p.kind == TrajectoryKind::kLoop) {
          arc = p.speed * t;
        } else if (k > 0) {
          const double t0 = static_cast<double>(k - 1) * dt;
          for (int s = 0; s < substeps; ++s) {
            const double ts = t0 + (static_cast<double>(s) + 0.5) * dt / substeps;
            arc += detail::stop_and_go_speed(p, ts) * dt / substeps;
          }
        }
        const double r = lap_radius;
        const double phi = arc / r;
        const double cx = p.start.x - r * std::sin(p.start.h);
        const double cy = p.start.y + r * std::cos(p.start.h);
        pose = Pose2{cx + r * std::sin(p.start.h + phi),
                     cy - r * std::cos(p.start.h + phi),
                     wrap_angle(p.start.h + phi)};
        break;
      }
    }
    out.push_back(TimedPose{t, pose, Twist2{}});
  }

  Rng rng = make_rng(seed, 2);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 1; k < out.size(); ++k) {
    Twist2 d = relative(out[k - 1].pose, out[k].pose);
    if (p.odo_sigma_xy > 0.0) {
      d.dx += p.odo_sigma_xy * unit(rng);
      d.dy += p.odo_sigma_xy * unit(rng);
    }
    if (p.odo_sigma_h > 0.0) d.dh += p.odo_sigma_h * unit(rng);
    out[k].odo = d;
  }
  return out;
}

}  // namespace gridloc
