#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panograph/errors.hpp"
#include "panograph/fsio.hpp"
#include "panograph/geometry.hpp"
#include "panograph/pose2.hpp"
#include "panograph/rng.hpp"

namespace panograph {

// Room boundary: CCW simple polygon, implicitly closed, meters.
struct Layout {
  std::vector<Vec2> vertices;

  void validate(const std::string& id) const {
    if (vertices.size() < 3) {
      throw ValidationError("room '" + id + "': fewer than 3 vertices");
    }
    if (!polygon_is_simple(vertices)) {
      throw ValidationError("room '" + id + "': polygon self-intersects");
    }
    if (polygon_signed_area(vertices) <= 0.0) {
      throw ValidationError("room '" + id + "': vertices not counter-clockwise");
    }
  }
};

struct Camera {
  Vec2 position{0, 0};
  double yaw = 0.0;     // radians
  double height = 1.0;  // meters above the floor
  std::string room_id;
};

// World-from-camera pose of a panorama under planar motion.
inline Pose2 world_from_camera(const Camera& cam) {
  return {Rot2::from_angle(cam.yaw), cam.position};
}

struct Scene {
  std::map<std::string, Layout> rooms;
  std::map<std::string, Camera> panos;
  std::vector<std::vector<std::string>> clusters;

  const Layout& room_of(const std::string& pano_id) const {
    const auto& cam = camera(pano_id);
    const auto it = rooms.find(cam.room_id);
    if (it == rooms.end()) {
      throw ValidationError("pano '" + pano_id + "': unknown room '" + cam.room_id + "'");
    }
    return it->second;
  }

  const Camera& camera(const std::string& pano_id) const {
    const auto it = panos.find(pano_id);
    if (it == panos.end()) throw ValidationError("unknown pano '" + pano_id + "'");
    return it->second;
  }

  void validate() const {
    if (rooms.empty()) throw ValidationError("scene has no rooms");
    for (const auto& [id, layout] : rooms) layout.validate(id);
    for (const auto& [id, cam] : panos) {
      const auto it = rooms.find(cam.room_id);
      if (it == rooms.end()) {
        throw ValidationError("pano '" + id + "': unknown room '" + cam.room_id + "'");
      }
      if (!point_strictly_inside(it->second.vertices, cam.position)) {
        throw ValidationError("pano '" + id + "': position outside room '" + cam.room_id + "'");
      }
      if (!(cam.height > 0.0)) {
        throw ValidationError("pano '" + id + "': height must be positive");
      }
    }
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const auto& ids = clusters[c];
      const std::string tag = "cluster " + std::to_string(c);
      if (ids.size() < 2) throw ValidationError(tag + ": needs at least 2 panos");
      std::set<std::string> seen;
      for (const auto& id : ids) {
        if (!panos.count(id)) throw ValidationError(tag + ": unknown pano '" + id + "'");
        if (!seen.insert(id).second) throw ValidationError(tag + ": duplicate pano '" + id + "'");
      }
    }
  }
};

// Ordered pano group; the member at origin_index anchors the shared frame.
struct Cluster {
  std::vector<std::string> pano_ids;
  int origin_index = 0;

  int size() const { return static_cast<int>(pano_ids.size()); }
  const std::string& origin() const { return pano_ids.at(origin_index); }

  void validate(int max_size = 5) const {
    if (size() < 2) throw ValidationError("cluster needs at least 2 panos");
    if (size() > max_size) {
      throw ValidationError("cluster exceeds maximum size " + std::to_string(max_size));
    }
    std::set<std::string> seen(pano_ids.begin(), pano_ids.end());
    if (static_cast<int>(seen.size()) != size()) {
      throw ValidationError("cluster has duplicate pano ids");
    }
    if (origin_index < 0 || origin_index >= size()) {
      throw ValidationError("cluster origin_index out of range");
    }
  }
};

// ---------------------------------------------------------------------------
// Scene file (.scene.json)

namespace detail {

inline Vec2 parse_vec2(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(what + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
T require_field(const nlohmann::json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw ParseError(what + ": missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(what + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  if (!j.is_object()) throw ParseError("scene: top level must be an object");
  const auto rooms = detail::require_field<nlohmann::json>(j, "rooms", "scene");
  if (!rooms.is_array()) throw ParseError("scene: 'rooms' must be an array");
  for (const auto& jr : rooms) {
    const auto id = detail::require_field<std::string>(jr, "id", "room");
    const auto verts = detail::require_field<nlohmann::json>(jr, "vertices", "room '" + id + "'");
    if (!verts.is_array()) throw ParseError("room '" + id + "': 'vertices' must be an array");
    Layout layout;
    for (const auto& v : verts) {
      layout.vertices.push_back(detail::parse_vec2(v, "room '" + id + "' vertex"));
    }
    if (!scene.rooms.emplace(id, std::move(layout)).second) {
      throw ParseError("duplicate room id '" + id + "'");
    }
  }
  const auto panos = detail::require_field<nlohmann::json>(j, "panos", "scene");
  if (!panos.is_array()) throw ParseError("scene: 'panos' must be an array");
  for (const auto& jp : panos) {
    const auto id = detail::require_field<std::string>(jp, "id", "pano");
    const std::string what = "pano '" + id + "'";
    Camera cam;
    cam.room_id = detail::require_field<std::string>(jp, "room_id", what);
    cam.position = detail::parse_vec2(detail::require_field<nlohmann::json>(jp, "position", what),
                                      what + " position");
    cam.yaw = detail::require_field<double>(jp, "yaw_rad", what);
    cam.height = detail::require_field<double>(jp, "height_m", what);
    if (!scene.panos.emplace(id, std::move(cam)).second) {
      throw ParseError("duplicate pano id '" + id + "'");
    }
  }
  if (j.contains("clusters")) {
    const auto& jc = j.at("clusters");
    if (!jc.is_array()) throw ParseError("scene: 'clusters' must be an array");
    for (const auto& group : jc) {
      if (!group.is_array()) throw ParseError("scene: each cluster must be an array of ids");
      std::vector<std::string> ids;
      for (const auto& id : group) {
        if (!id.is_string()) throw ParseError("scene: cluster ids must be strings");
        ids.push_back(id.get<std::string>());
      }
      scene.clusters.push_back(std::move(ids));
    }
  }
  scene.validate();
  return scene;
}

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["version"] = 1;
  j["rooms"] = nlohmann::json::array();
  for (const auto& [id, layout] : scene.rooms) {
    nlohmann::json jr;
    jr["id"] = id;
    jr["vertices"] = nlohmann::json::array();
    for (const auto& v : layout.vertices) jr["vertices"].push_back({v.x(), v.y()});
    j["rooms"].push_back(std::move(jr));
  }
  j["panos"] = nlohmann::json::array();
  for (const auto& [id, cam] : scene.panos) {
    nlohmann::json jp;
    jp["id"] = id;
    jp["room_id"] = cam.room_id;
    jp["position"] = {cam.position.x(), cam.position.y()};
    jp["yaw_rad"] = cam.yaw;
    jp["height_m"] = cam.height;
    j["panos"].push_back(std::move(jp));
  }
  j["clusters"] = scene.clusters;
  return j;
}

inline Scene load_scene(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

inline void save_scene(const Scene& scene, const std::filesystem::path& path) {
  write_file_atomic(path, scene_to_json(scene).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthParams {
  int rooms = 1;
  int cameras_per_room = 3;
  double size_min = 4.0;  // room diameter range, meters
  double size_max = 8.0;
  int notched_rooms = 0;  // how many rooms get a rectangular notch (occluder)
  double camera_margin = 0.2;
  // When > 0, cameras are confined to a disc of this fraction of the mean
  // centroid-to-vertex distance around the room centroid.
  double central_radius_frac = 0.0;
  double height_min = 1.3;
  double height_max = 1.7;
};

namespace detail {

inline Layout make_convex_room(Rng& rng, const Vec2& center, double size_min, double size_max) {
  const int k = 4 + rng.uniform_int(5);  // 4..8 vertices
  const double radius = 0.5 * rng.uniform(size_min, size_max);
  const double phase = rng.uniform(0.0, kTwoPi);
  Layout layout;
  layout.vertices.reserve(k);
  // Jittered angles on a circle: constant radius keeps the polygon convex.
  for (int m = 0; m < k; ++m) {
    const double jitter = 0.3 * rng.uniform(-1.0, 1.0);
    const double ang = phase + kTwoPi * (m + jitter) / k;
    layout.vertices.push_back(center + radius * Vec2(std::cos(ang), std::sin(ang)));
  }
  return layout;
}

inline Layout make_notched_room(Rng& rng, const Vec2& center, double size_min, double size_max) {
  const double w = rng.uniform(size_min, size_max);
  const double h = rng.uniform(size_min, size_max);
  const double nx = w * rng.uniform(0.35, 0.65);
  const double ny = h * rng.uniform(0.35, 0.65);
  const Vec2 o = center - Vec2(w / 2, h / 2);
  Layout layout;
  layout.vertices = {o + Vec2(0, 0),  o + Vec2(w, 0),  o + Vec2(w, h),
                     o + Vec2(nx, h), o + Vec2(nx, ny), o + Vec2(0, ny)};
  return layout;
}

inline Vec2 sample_interior(Rng& rng, const Layout& layout, double margin,
                            double central_radius_frac = 0.0) {
  Vec2 lo = layout.vertices.front();
  Vec2 hi = lo;
  for (const auto& v : layout.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  double central_radius = std::numeric_limits<double>::infinity();
  Vec2 centroid(0, 0);
  if (central_radius_frac > 0.0) {
    centroid = polygon_centroid(layout.vertices);
    double mean_r = 0.0;
    for (const auto& v : layout.vertices) mean_r += (v - centroid).norm();
    central_radius = central_radius_frac * mean_r / layout.vertices.size();
  }
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Vec2 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()));
    if (point_strictly_inside(layout.vertices, p) &&
        distance_to_boundary(layout.vertices, p) >= margin &&
        (p - centroid).norm() <= central_radius) {
      return p;
    }
  }
  throw GenerationError("could not place a camera with margin " + std::to_string(margin));
}

}  // namespace detail

// Deterministic per seed: the same (seed, params) always produces the same
// scene, field for field.
inline Scene synth_scene(std::uint64_t seed, const SynthParams& params = {}) {
  if (params.rooms <= 0 || params.cameras_per_room <= 0 || params.size_min <= 0 ||
      params.size_max < params.size_min) {
    throw ValidationError("synth_scene: params must be positive and size_max >= size_min");
  }
  Rng rng(seed);
  Scene scene;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(params.rooms))));
  const double pitch = params.size_max + 2.0;
  for (int r = 0; r < params.rooms; ++r) {
    const Vec2 center(pitch * (r % cols), pitch * (r / cols));
    const std::string room_id = "room_" + std::to_string(r);
    Layout layout = r < params.notched_rooms
                        ? detail::make_notched_room(rng, center, params.size_min, params.size_max)
                        : detail::make_convex_room(rng, center, params.size_min, params.size_max);
    layout.validate(room_id);
    scene.rooms.emplace(room_id, std::move(layout));

    std::vector<std::string> cluster;
    for (int c = 0; c < params.cameras_per_room; ++c) {
      Camera cam;
      cam.room_id = room_id;
      cam.position = detail::sample_interior(rng, scene.rooms.at(room_id), params.camera_margin,
                                             params.central_radius_frac);
      cam.yaw = rng.uniform(-kPi, kPi);
      cam.height = rng.uniform(params.height_min, params.height_max);
      const std::string pano_id = "pano_" + std::to_string(r) + "_" + std::to_string(c);
      scene.panos.emplace(pano_id, std::move(cam));
      cluster.push_back(pano_id);
    }
    if (cluster.size() >= 2) scene.clusters.push_back(std::move(cluster));
  }
  scene.validate();
  return scene;
}

// ---------------------------------------------------------------------------
// Cluster sampling and training-time augmentation

// Draw clusters of the requested sizes from each space (= scene cluster
// group), without replacement inside a draw. Spaces smaller than a requested
// size are skipped for that size. Fresh samples every call; vary the seed to
// vary the draw.
inline std::vector<Cluster> sample_clusters(const Scene& scene, std::uint64_t seed,
                                            const std::set<int>& sizes, int per_space = 1) {
  for (int s : sizes) {
    if (s < 2) throw ValidationError("sample_clusters: sizes must be >= 2");
  }
  Rng rng(seed);
  std::vector<Cluster> out;
  for (const auto& group : scene.clusters) {
    for (int size : sizes) {
      if (static_cast<int>(group.size()) < size) continue;
      for (int n = 0; n < per_space; ++n) {
        std::vector<std::string> ids = group;
        rng.shuffle(ids);
        ids.resize(size);
        out.push_back(Cluster{std::move(ids), 0});
      }
    }
  }
  return out;
}

// Scene-file clusters as Cluster values; groups beyond max_size are
// down-sampled rather than rejected.
inline std::vector<Cluster> clusters_from_scene(const Scene& scene, std::uint64_t seed,
                                                int max_size = 5) {
  Rng rng(seed);
  std::vector<Cluster> out;
  for (const auto& group : scene.clusters) {
    std::vector<std::string> ids = group;
    if (static_cast<int>(ids.size()) > max_size) {
      rng.shuffle(ids);
      ids.resize(max_size);
    }
    Cluster cluster{std::move(ids), 0};
    cluster.validate(max_size);
    out.push_back(std::move(cluster));
  }
  return out;
}

// Per-pano horizontal shift: column shift s maps to a yaw increase of
// 2*pi*s/W, and consumers circularly shift the pano's cue rows by s.
struct RotationAugment {
  std::map<std::string, int> shifts;
  std::map<std::string, double> yaws;  // adjusted absolute yaws
};

inline RotationAugment rotate_augment(const std::map<std::string, Pose2>& cluster_poses, int width,
                                      std::uint64_t seed) {
  if (width <= 0) throw ValidationError("rotate_augment: width must be positive");
  Rng rng(seed);
  RotationAugment aug;
  for (const auto& [id, pose] : cluster_poses) {
    const int s = rng.uniform_int(width);
    aug.shifts[id] = s;
    aug.yaws[id] = wrap_angle(pose.theta() + kTwoPi * s / width);
  }
  return aug;
}

// Random origin: permute the node ordering and anchor at position 0.
inline Cluster permute_origin(const Cluster& cluster, std::uint64_t seed) {
  if (cluster.size() < 2) throw ValidationError("permute_origin: cluster needs >= 2 panos");
  Rng rng(seed);
  Cluster out = cluster;
  rng.shuffle(out.pano_ids);
  out.origin_index = 0;
  return out;
}

}  // namespace panograph
