#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "panograph/errors.hpp"
#include "panograph/pose2.hpp"
#include "panograph/solvers.hpp"

namespace panograph {

// Rigid 2D transform T minimizing sum ||T(pred_k) - gt_k||^2 (rotation and
// translation, no scale): rotation from the cross-covariance of the centered
// point sets, translation aligning the centroids.
inline Pose2 align_2d(std::span<const Vec2> pred, std::span<const Vec2> gt) {
  if (pred.size() != gt.size()) throw ShapeError("align_2d: point counts differ");
  const std::size_t n = pred.size();
  if (n < 2) throw DegenerateError("align_2d: need at least 2 points");
  Vec2 pc = Vec2::Zero(), gc = Vec2::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    pc += pred[k];
    gc += gt[k];
  }
  pc /= static_cast<double>(n);
  gc /= static_cast<double>(n);

  double dot = 0.0, cross = 0.0, p_spread = 0.0, g_spread = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 p = pred[k] - pc;
    const Vec2 g = gt[k] - gc;
    dot += p.dot(g);
    cross += p.x() * g.y() - p.y() * g.x();
    p_spread += p.squaredNorm();
    g_spread += g.squaredNorm();
  }
  if (p_spread < 1e-20 || g_spread < 1e-20) {
    throw DegenerateError("align_2d: all points coincident, rotation unidentifiable");
  }
  const Rot2 rot = Rot2::from_angle(std::atan2(cross, dot));
  return {rot, gc - rot * pc};
}

// Per-panorama errors after optimal rigid alignment.
struct AlignedErrors {
  std::vector<std::string> node_ids;
  std::vector<double> translation_m;  // >= 0
  std::vector<double> rotation_rad;   // in [0, pi]
  Pose2 alignment;
};

inline AlignedErrors evaluate(const Solution& pred, const PoseMap& gt) {
  AlignedErrors out;
  std::vector<Vec2> pred_pos, gt_pos;
  for (const auto& [id, gt_pose] : gt) {
    const auto it = pred.poses.find(id);
    if (it == pred.poses.end()) throw ShapeError("evaluate: prediction missing node '" + id + "'");
    out.node_ids.push_back(id);
    pred_pos.push_back(it->second.t);
    gt_pos.push_back(gt_pose.t);
  }
  out.alignment = align_2d(pred_pos, gt_pos);
  for (std::size_t k = 0; k < out.node_ids.size(); ++k) {
    const auto& id = out.node_ids[k];
    out.translation_m.push_back((apply(out.alignment, pred_pos[k]) - gt_pos[k]).norm());
    const double rot_err = wrap_angle(pred.poses.at(id).theta() + out.alignment.theta() -
                                      gt.at(id).theta());
    out.rotation_rad.push_back(std::abs(rot_err));
  }
  return out;
}

// Table-style statistics row: rotation in degrees, translation in meters.
struct MetricSummary {
  int group_size = 0;
  std::string connectivity;
  std::string method;
  double rot_mean_deg = 0.0;
  double rot_med_deg = 0.0;
  double rot_std_deg = 0.0;
  double tr_mean_m = 0.0;
  double tr_med_m = 0.0;
  double tr_std_m = 0.0;
  std::size_t count = 0;
};

namespace detail {

struct Stats {
  double mean = 0.0, median = 0.0, stddev = 0.0;
};

// Median of an even pool is the midpoint of the central pair; std is the
// population deviation (divide by N).
inline Stats pooled_stats(std::vector<double> values) {
  if (values.empty()) throw ValidationError("summarize: empty error pool");
  Stats s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

}  // namespace detail

inline MetricSummary summarize(std::span<const double> rotation_rad,
                               std::span<const double> translation_m, int group_size,
                               const std::string& method, const std::string& connectivity) {
  if (rotation_rad.size() != translation_m.size()) {
    throw ShapeError("summarize: rotation/translation pools differ in size");
  }
  std::vector<double> rot_deg;
  rot_deg.reserve(rotation_rad.size());
  for (double r : rotation_rad) rot_deg.push_back(deg_from_rad(r));
  const detail::Stats rot = detail::pooled_stats(rot_deg);
  const detail::Stats tr =
      detail::pooled_stats({translation_m.begin(), translation_m.end()});
  MetricSummary row;
  row.group_size = group_size;
  row.connectivity = connectivity;
  row.method = method;
  row.rot_mean_deg = rot.mean;
  row.rot_med_deg = rot.median;
  row.rot_std_deg = rot.stddev;
  row.tr_mean_m = tr.mean;
  row.tr_med_m = tr.median;
  row.tr_std_m = tr.stddev;
  row.count = rotation_rad.size();
  return row;
}

// Column order mirrors the rotation-then-translation statistics layout.
inline std::string metrics_csv_header() {
  return "group_size,connectivity,method,rot_mean_deg,rot_med_deg,rot_std_deg,"
         "tr_mean_m,tr_med_m,tr_std_m";
}

inline std::string metrics_csv_row(const MetricSummary& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", row.group_size,
                row.connectivity.c_str(), row.method.c_str(), row.rot_mean_deg, row.rot_med_deg,
                row.rot_std_deg, row.tr_mean_m, row.tr_med_m, row.tr_std_m);
  return buf;
}

}  // namespace panograph
