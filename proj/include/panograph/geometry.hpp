#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "panograph/errors.hpp"
#include "panograph/pose2.hpp"

namespace panograph {

using Segment = std::pair<Vec2, Vec2>;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double polygon_signed_area(std::span<const Vec2> poly) {
  double twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    twice += cross2(poly[i], poly[(i + 1) % n]);
  }
  return 0.5 * twice;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double u = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + u * ab)).norm();
}

// Proper or touching intersection of closed segments [a,b] and [c,d].
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = cross2(q - p, r - p);
    return (v > 0.0) - (v < 0.0);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  const auto on = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x(), r.x()) <= q.x() && q.x() <= std::max(p.x(), r.x()) &&
           std::min(p.y(), r.y()) <= q.y() && q.y() <= std::max(p.y(), r.y());
  };
  if (o1 == 0 && on(a, c, b)) return true;
  if (o2 == 0 && on(a, d, b)) return true;
  if (o3 == 0 && on(c, a, d)) return true;
  if (o4 == 0 && on(c, b, d)) return true;
  return false;
}

// No two non-adjacent edges may intersect; adjacent edges only at the shared
// vertex (checked implicitly by excluding them).
inline bool polygon_is_simple(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[i] - poly[(i + 1) % n]).norm() < 1e-12) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

// Strict interior test: points on (or within eps of) the boundary are out.
inline bool point_strictly_inside(std::span<const Vec2> poly, const Vec2& p, double eps = 1e-12) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (point_segment_distance(p, poly[i], poly[(i + 1) % n]) <= eps) return false;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

inline Vec2 polygon_centroid(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  double twice_area = 0.0;
  Vec2 c(0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double w = cross2(a, b);
    twice_area += w;
    c += w * (a + b);
  }
  return c / (3.0 * twice_area);
}

inline double distance_to_boundary(std::span<const Vec2> poly, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % n]));
  }
  return best;
}

struct RayHit {
  Vec2 point;
  double distance = 0.0;
};

// Nearest intersection of the ray origin + t*dir (t > 0) with the polygon
// boundary. dir must be unit length so distance equals t.
inline std::optional<RayHit> cast_ray(std::span<const Vec2> poly, const Vec2& origin,
                                      const Vec2& dir) {
  const std::size_t n = poly.size();
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2 e = poly[(i + 1) % n] - a;
    const double denom = cross2(dir, e);
    if (std::abs(denom) < 1e-15) continue;  // parallel; endpoints test via neighbors
    const Vec2 ao = a - origin;
    const double t = cross2(ao, e) / denom;
    const double u = cross2(ao, dir) / denom;
    if (t > 1e-12 && u >= -1e-9 && u <= 1.0 + 1e-9) {
      best_t = std::min(best_t, t);
    }
  }
  if (!std::isfinite(best_t)) return std::nullopt;
  return RayHit{origin + best_t * dir, best_t};
}

// True when any occluder edge blocks the open segment a->b. The interior
// parameter range excludes both endpoints so a boundary point at b does not
// occlude itself; grazing an edge endpoint counts as blocked.
inline bool segment_blocked(std::span<const Segment> occluders, const Vec2& a, const Vec2& b,
                            double eps = 1e-9) {
  const Vec2 d = b - a;
  for (const auto& [p, q] : occluders) {
    const Vec2 e = q - p;
    const double denom = cross2(d, e);
    const Vec2 ap = p - a;
    if (std::abs(denom) < 1e-15) {
      // Parallel. A collinear overlap that reaches into the open segment blocks it.
      if (std::abs(cross2(ap, d)) > eps * d.norm() * std::max(1.0, e.norm())) continue;
      const double len2 = d.squaredNorm();
      if (len2 == 0.0) continue;
      double t0 = (p - a).dot(d) / len2;
      double t1 = (q - a).dot(d) / len2;
      if (t0 > t1) std::swap(t0, t1);
      if (t1 > eps && t0 < 1.0 - eps) return true;
      continue;
    }
    const double t = cross2(ap, e) / denom;
    const double u = cross2(ap, d) / denom;
    if (t > eps && t < 1.0 - eps && u >= -eps && u <= 1.0 + eps) return true;
  }
  return false;
}

}  // namespace panograph
