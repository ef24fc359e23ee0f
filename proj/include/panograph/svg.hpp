#pragma once

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "panograph/fsio.hpp"
#include "panograph/scene.hpp"
#include "panograph/solvers.hpp"

namespace panograph {

// Static top-down render of room boundaries, ground-truth cameras, and one or
// more estimated pose sets (each drawn in its own color, anchored to the
// ground-truth origin so frames coincide).
inline std::string render_svg(const Scene& scene, const Cluster& cluster,
                              const std::vector<std::pair<std::string, Solution>>& solutions) {
  Vec2 lo(1e30, 1e30), hi(-1e30, -1e30);
  std::vector<const Layout*> rooms;
  {
    std::set<std::string> room_ids;
    for (const auto& id : cluster.pano_ids) room_ids.insert(scene.camera(id).room_id);
    for (const auto& rid : room_ids) rooms.push_back(&scene.rooms.at(rid));
  }
  for (const Layout* room : rooms) {
    for (const auto& v : room->vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  const double pad = 0.5;
  lo -= Vec2(pad, pad);
  hi += Vec2(pad, pad);

  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  // Flip y so the render reads like a floor plan.
  const auto px = [&](const Vec2& p) {
    return num(p.x()) + "," + num(hi.y() - (p.y() - lo.y()));
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" + num(lo.x()) + " " + num(lo.y()) +
         " " + num(hi.x() - lo.x()) + " " + num(hi.y() - lo.y()) + "\">\n";
  for (const Layout* room : rooms) {
    svg += "  <polygon points=\"";
    for (const auto& v : room->vertices) svg += px(v) + " ";
    svg += "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"0.04\"/>\n";
  }

  const Pose2 gt_origin = world_from_camera(scene.camera(cluster.origin()));
  const std::vector<std::string> palette = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
  std::size_t color = 0;

  // Ground truth in black, estimates re-expressed in the world frame through
  // the ground-truth origin.
  const auto draw_pose = [&](const Pose2& world_pose, const std::string& stroke) {
    const Vec2 tip = world_pose.t + 0.35 * world_pose.r.vec();
    svg += "  <circle cx=\"" + num(world_pose.t.x()) + "\" cy=\"" +
           num(hi.y() - (world_pose.t.y() - lo.y())) + "\" r=\"0.09\" fill=\"" + stroke +
           "\"/>\n";
    svg += "  <line x1=\"" + num(world_pose.t.x()) + "\" y1=\"" +
           num(hi.y() - (world_pose.t.y() - lo.y())) + "\" x2=\"" + num(tip.x()) + "\" y2=\"" +
           num(hi.y() - (tip.y() - lo.y())) + "\" stroke=\"" + stroke +
           "\" stroke-width=\"0.04\"/>\n";
  };
  for (const auto& id : cluster.pano_ids) {
    draw_pose(world_from_camera(scene.camera(id)), "#000000");
  }
  for (const auto& [label, solution] : solutions) {
    const std::string stroke = palette[color++ % palette.size()];
    svg += "  <!-- " + label + " -->\n";
    for (const auto& id : cluster.pano_ids) {
      draw_pose(compose(gt_origin, solution.poses.at(id)), stroke);
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline void save_svg(const std::string& svg, const std::filesystem::path& path) {
  write_file_atomic(path, svg);
}

}  // namespace panograph
