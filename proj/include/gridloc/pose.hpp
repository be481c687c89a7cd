#pragma once

#include <cmath>
#include <numbers>

namespace gridloc {

/// Wraps an angle to the half-open interval (-pi, pi].
[[nodiscard]] inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Planar pose: position in meters, heading in radians, wrapped to (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double h = 0.0;
};

/// Body-frame increment applied on top of a pose (forward, left, turn).
struct Twist2 {
  double dx = 0.0;
  double dy = 0.0;
  double dh = 0.0;
};

/// Composes a body-frame increment onto a pose.
[[nodiscard]] inline Pose2 compose(const Pose2& p, const Twist2& d) {
  const double c = std::cos(p.h);
  const double s = std::sin(p.h);
  return Pose2{p.x + c * d.dx - s * d.dy,
               p.y + s * d.dx + c * d.dy,
               wrap_angle(p.h + d.dh)};
}

/// Expresses the motion from `a` to `b` as a body-frame increment of `a`.
[[nodiscard]] inline Twist2 relative(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.h);
  const double s = std::sin(a.h);
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  return Twist2{c * ex + s * ey, -s * ex + c * ey, wrap_angle(b.h - a.h)};
}

/// Maps a point from the body frame of `p` into the world frame.
inline void body_to_world(const Pose2& p, double bx, double by, double& wx,
                          double& wy) {
  const double c = std::cos(p.h);
  const double s = std::sin(p.h);
  wx = p.x + c * bx - s * by;
  wy = p.y + s * bx + c * by;
}

/// Maps a world point into the body frame of `p`.
inline void world_to_body(const Pose2& p, double wx, double wy, double& bx,
                          double& by) {
  const double c = std::cos(p.h);
  const double s = std::sin(p.h);
  const double ex = wx - p.x;
  const double ey = wy - p.y;
  bx = c * ex + s * ey;
  by = -s * ex + c * ey;
}

}  // namespace gridloc
