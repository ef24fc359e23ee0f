#pragma once

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <string>

namespace panograph {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Wrap to (-pi, pi]; the -pi boundary maps to +pi.
inline double wrap_angle(double x) {
  double w = std::remainder(x, kTwoPi);
  if (w <= -kPi) w = kPi;
  return w;
}

inline double deg_from_rad(double rad) { return rad * (180.0 / kPi); }

// Planar rotation stored as a unit vector (cos, sin).
struct Rot2 {
  double c = 1.0;
  double s = 0.0;

  static Rot2 from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

  double angle() const { return wrap_angle(std::atan2(s, c)); }
  Vec2 vec() const { return {c, s}; }
  double norm() const { return std::hypot(c, s); }

  Rot2 inverse() const { return {c, -s}; }

  Rot2 normalized() const {
    const double n = norm();
    return {c / n, s / n};
  }

  // Composition renormalizes so chained products do not drift off the circle.
  Rot2 operator*(const Rot2& o) const {
    return Rot2{c * o.c - s * o.s, s * o.c + c * o.s}.normalized();
  }

  Vec2 operator*(const Vec2& v) const {
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
  }
};

// Rigid planar pose, world-from-camera: maps camera-frame points to world.
// The origin panorama of a cluster carries the identity pose.
struct Pose2 {
  Rot2 r;
  Vec2 t{0.0, 0.0};

  static Pose2 identity() { return {}; }
  static Pose2 from_angle(double theta, const Vec2& t = Vec2::Zero()) {
    return {Rot2::from_angle(theta), t};
  }

  double theta() const { return r.angle(); }
};

// a then b as rigid maps: apply b first, then a.
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  return {a.r * b.r, a.r * b.t + a.t};
}

inline Pose2 inverse(const Pose2& p) {
  const Rot2 ri = p.r.inverse();
  return {ri, -(ri * p.t)};
}

// Pose of camera j expressed in camera i's frame.
inline Pose2 relative(const Pose2& world_from_i, const Pose2& world_from_j) {
  return compose(inverse(world_from_i), world_from_j);
}

inline Vec2 apply(const Pose2& p, const Vec2& point) { return p.r * point + p.t; }

using PoseMap = std::map<std::string, Pose2>;

}  // namespace panograph
