#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panograph/errors.hpp"
#include "panograph/fsio.hpp"
#include "panograph/geometry.hpp"
#include "panograph/scene.hpp"

namespace panograph {

// Sentinel for angular correspondence outside the co-visible region. Sits
// outside (-pi, pi] so masked entries cannot collide with real angles.
inline constexpr double kMaskedAlpha = 4.0;

// Column-wise ground-truth cues for the ordered pano pair src -> dst:
//   phi    floor-wall boundary angle of src, in (0, pi/2)
//   alpha  azimuth of src's boundary point in dst's frame, or kMaskedAlpha
//   covis  1 when dst has line of sight to that boundary point ({0,1} for
//          ground truth, [0,1] when predicted)
struct CueSet {
  std::string src;
  std::string dst;
  int width = 0;
  std::vector<double> phi;
  std::vector<double> alpha;
  std::vector<double> covis;

  void validate() const {
    if (width <= 0) throw ValidationError("cue set: width must be positive");
    const auto w = static_cast<std::size_t>(width);
    if (phi.size() != w || alpha.size() != w || covis.size() != w) {
      throw ValidationError("cue set: row lengths disagree with width");
    }
    for (int k = 0; k < width; ++k) {
      const bool masked = alpha[k] == kMaskedAlpha;
      if ((covis[k] == 0.0) != masked) {
        throw ValidationError("cue set: covis/alpha mask mismatch at column " +
                              std::to_string(k));
      }
    }
  }
};

// Azimuth of column k sampled at the column center, CCW positive.
inline double column_azimuth(int k, int width) {
  return -kPi + kTwoPi * (k + 0.5) / width;
}

inline int wrap_column(int k, int width) {
  const int m = k % width;
  return m < 0 ? m + width : m;
}

struct BoundaryHit {
  Vec2 point;
  double distance = 0.0;
};

// Nearest wall intersection of the horizontal ray leaving the camera at the
// given azimuth (camera frame; world direction is yaw + azimuth).
inline BoundaryHit boundary_hit(const Camera& cam, const Layout& layout, double azimuth) {
  const double world = cam.yaw + azimuth;
  const Vec2 dir(std::cos(world), std::sin(world));
  const auto hit = cast_ray(layout.vertices, cam.position, dir);
  if (!hit) throw GeometryError("boundary ray escaped the room polygon");
  return {hit->point, hit->distance};
}

// Boundary angles for all columns. column_shift implements rotation
// augmentation exactly: column k of the shifted pano reads the base pano's
// column (k + shift) mod width, so shifted rows are bit-identical circular
// shifts of unshifted rows.
inline std::vector<double> boundary_angle_row(const Camera& cam, const Layout& layout, int width,
                                              int column_shift = 0) {
  if (width <= 0) throw ValidationError("boundary_angle_row: width must be positive");
  std::vector<double> phi(width);
  for (int k = 0; k < width; ++k) {
    const int col = wrap_column(k + column_shift, width);
    const BoundaryHit hit = boundary_hit(cam, layout, column_azimuth(col, width));
    phi[k] = std::atan2(cam.height, hit.distance);
  }
  return phi;
}

namespace detail {

// Wall segments that can occlude sight lines between the two panos' rooms.
inline std::vector<Segment> occluder_edges(const Scene& scene, const std::string& src,
                                           const std::string& dst) {
  std::vector<Segment> edges;
  const auto add_room = [&edges](const Layout& layout) {
    const std::size_t n = layout.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      edges.emplace_back(layout.vertices[i], layout.vertices[(i + 1) % n]);
    }
  };
  add_room(scene.room_of(src));
  if (scene.camera(src).room_id != scene.camera(dst).room_id) {
    add_room(scene.room_of(dst));
  }
  return edges;
}

}  // namespace detail

// Ground-truth cues for the ordered pair src -> dst. src_shift/dst_shift
// apply rotation augmentation: src_shift reindexes src's columns (exact row
// permutation), dst_shift adds 2*pi*shift/width to dst's yaw before alpha is
// expressed in dst's frame.
inline CueSet correspondence_and_covis(const Scene& scene, const std::string& src,
                                       const std::string& dst, int width, int src_shift = 0,
                                       int dst_shift = 0) {
  if (width <= 0) throw ValidationError("correspondence_and_covis: width must be positive");
  const Camera& cam_i = scene.camera(src);
  const Camera& cam_j = scene.camera(dst);
  const Layout& room_i = scene.room_of(src);
  const std::vector<Segment> occluders = detail::occluder_edges(scene, src, dst);
  const double yaw_j = cam_j.yaw + kTwoPi * dst_shift / width;

  CueSet cue;
  cue.src = src;
  cue.dst = dst;
  cue.width = width;
  cue.phi.resize(width);
  cue.alpha.resize(width);
  cue.covis.resize(width);
  for (int k = 0; k < width; ++k) {
    const int col = wrap_column(k + src_shift, width);
    const BoundaryHit hit = boundary_hit(cam_i, room_i, column_azimuth(col, width));
    cue.phi[k] = std::atan2(cam_i.height, hit.distance);
    const bool visible = !segment_blocked(occluders, cam_j.position, hit.point);
    cue.covis[k] = visible ? 1.0 : 0.0;
    if (visible) {
      const Vec2 d = hit.point - cam_j.position;
      cue.alpha[k] = wrap_angle(std::atan2(d.y(), d.x()) - yaw_j);
    } else {
      cue.alpha[k] = kMaskedAlpha;
    }
  }
  return cue;
}

inline double edge_covis_score(const CueSet& cue) {
  if (cue.covis.empty()) throw ValidationError("edge_covis_score: empty cue set");
  double sum = 0.0;
  for (double v : cue.covis) sum += v;
  return sum / static_cast<double>(cue.covis.size());
}

// ---------------------------------------------------------------------------
// Cue dump (.cues.json) and flat binary (.cues.bin)

inline nlohmann::json cues_to_json(const CueSet& cue) {
  nlohmann::json j;
  j["src"] = cue.src;
  j["dst"] = cue.dst;
  j["width"] = cue.width;
  j["phi"] = cue.phi;
  j["alpha"] = nlohmann::json::array();
  for (double a : cue.alpha) {
    if (a == kMaskedAlpha) {
      j["alpha"].push_back(nullptr);
    } else {
      j["alpha"].push_back(a);
    }
  }
  j["covis"] = cue.covis;
  return j;
}

inline CueSet cues_from_json(const nlohmann::json& j) {
  CueSet cue;
  cue.src = detail::require_field<std::string>(j, "src", "cues");
  cue.dst = detail::require_field<std::string>(j, "dst", "cues");
  cue.width = detail::require_field<int>(j, "width", "cues");
  cue.phi = detail::require_field<std::vector<double>>(j, "phi", "cues");
  const auto alpha = detail::require_field<nlohmann::json>(j, "alpha", "cues");
  for (const auto& a : alpha) {
    cue.alpha.push_back(a.is_null() ? kMaskedAlpha : a.get<double>());
  }
  cue.covis = detail::require_field<std::vector<double>>(j, "covis", "cues");
  cue.validate();
  return cue;
}

inline void save_cues_json(const CueSet& cue, const std::filesystem::path& path) {
  write_file_atomic(path, cues_to_json(cue).dump(2) + "\n");
}

inline CueSet load_cues_json(const std::filesystem::path& path) {
  try {
    return cues_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline constexpr char kCueMagic[4] = {'P', 'G', 'C', 'V'};
inline constexpr std::uint32_t kCueBinaryVersion = 1;

// Header (magic, version u32, width u32) then phi, alpha, covis as 64-bit
// floats, little-endian; masked alpha keeps the sentinel value.
inline void save_cues_binary(const CueSet& cue, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(12 + 3 * sizeof(double) * cue.width);
  buf.append(kCueMagic, 4);
  const auto put_u32 = [&buf](std::uint32_t v) {
    char raw[4];
    std::memcpy(raw, &v, 4);
    buf.append(raw, 4);
  };
  put_u32(kCueBinaryVersion);
  put_u32(static_cast<std::uint32_t>(cue.width));
  const auto put_row = [&buf](const std::vector<double>& row) {
    const char* raw = reinterpret_cast<const char*>(row.data());
    buf.append(raw, row.size() * sizeof(double));
  };
  put_row(cue.phi);
  put_row(cue.alpha);
  put_row(cue.covis);
  write_file_atomic(path, buf);
}

inline CueSet load_cues_binary(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), kCueMagic, 4) != 0) {
    throw ParseError(path.string() + ": not a PGCV cue file");
  }
  std::uint32_t version = 0, width = 0;
  std::memcpy(&version, buf.data() + 4, 4);
  std::memcpy(&width, buf.data() + 8, 4);
  if (version != kCueBinaryVersion) {
    throw ParseError(path.string() + ": unsupported cue file version");
  }
  const std::size_t row_bytes = width * sizeof(double);
  if (buf.size() != 12 + 3 * row_bytes) {
    throw ParseError(path.string() + ": truncated cue file");
  }
  CueSet cue;
  cue.width = static_cast<int>(width);
  const auto get_row = [&buf, row_bytes](std::size_t index) {
    std::vector<double> row(row_bytes / sizeof(double));
    std::memcpy(row.data(), buf.data() + 12 + index * row_bytes, row_bytes);
    return row;
  };
  cue.phi = get_row(0);
  cue.alpha = get_row(1);
  cue.covis = get_row(2);
  return cue;
}

}  // namespace panograph
