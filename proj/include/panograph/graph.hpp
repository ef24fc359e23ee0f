#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "panograph/cues.hpp"
#include "panograph/errors.hpp"
#include "panograph/pose2.hpp"
#include "panograph/rng.hpp"
#include "panograph/scene.hpp"

namespace panograph {

// Directed relative-pose observation: dst expressed in src's frame.
struct EdgeObservation {
  std::string src;
  std::string dst;
  Pose2 rel_pose;
  double covis_score = 0.0;
  std::optional<CueSet> cues;
};

using EdgeKey = std::pair<std::string, std::string>;

struct PoseGraph {
  std::vector<std::string> nodes;
  int origin_index = 0;
  std::map<EdgeKey, EdgeObservation> edges;

  int size() const { return static_cast<int>(nodes.size()); }
  const std::string& origin() const { return nodes.at(origin_index); }

  const EdgeObservation& edge(const std::string& src, const std::string& dst) const {
    const auto it = edges.find({src, dst});
    if (it == edges.end()) throw ValidationError("no edge " + src + " -> " + dst);
    return it->second;
  }

  bool has_edge(const std::string& src, const std::string& dst) const {
    return edges.count({src, dst}) > 0;
  }

  // Observation for an unordered pair: the direction with higher co-visibility
  // wins; ties go to the lexicographically smaller (src, dst).
  const EdgeObservation& preferred_edge(const std::string& a, const std::string& b) const {
    const auto fwd = edges.find({a, b});
    const auto bwd = edges.find({b, a});
    if (fwd == edges.end() && bwd == edges.end()) {
      throw ValidationError("no edge between " + a + " and " + b);
    }
    if (fwd == edges.end()) return bwd->second;
    if (bwd == edges.end()) return fwd->second;
    if (fwd->second.covis_score != bwd->second.covis_score) {
      return fwd->second.covis_score > bwd->second.covis_score ? fwd->second : bwd->second;
    }
    return fwd->first < bwd->first ? fwd->second : bwd->second;
  }

  double pair_score(const std::string& a, const std::string& b) const {
    double best = -1.0;
    if (const auto it = edges.find({a, b}); it != edges.end()) {
      best = std::max(best, it->second.covis_score);
    }
    if (const auto it = edges.find({b, a}); it != edges.end()) {
      best = std::max(best, it->second.covis_score);
    }
    if (best < 0.0) throw ValidationError("no edge between " + a + " and " + b);
    return best;
  }
};

// Gaussian perturbation of relative-pose observations; the optional outlier
// multiplies the noise on the lowest-covisibility pair.
struct NoisePerturbation {
  double sigma_t = 0.0;      // meters, per translation axis
  double sigma_theta = 0.0;  // radians
  bool outlier = false;
  double outlier_factor = 10.0;
};

// Synthesize the observations a pairwise front-end would supply: ground-truth
// relative poses with co-visibility scores from ray casting, optionally noise
// perturbed. The same seed with and without the outlier flag draws identical
// base noise, so enabling the outlier changes only the targeted pair.
inline PoseGraph build_graph(const Cluster& cluster, const Scene& scene, int width,
                             const std::optional<NoisePerturbation>& noise, std::uint64_t seed,
                             bool keep_cues = false) {
  cluster.validate(cluster.size());
  PoseGraph graph;
  graph.nodes = cluster.pano_ids;
  graph.origin_index = cluster.origin_index;

  std::map<std::string, Pose2> world;
  for (const auto& id : graph.nodes) world[id] = world_from_camera(scene.camera(id));

  for (const auto& src : graph.nodes) {
    for (const auto& dst : graph.nodes) {
      if (src == dst) continue;
      EdgeObservation obs;
      obs.src = src;
      obs.dst = dst;
      obs.rel_pose = relative(world.at(src), world.at(dst));
      CueSet cue = correspondence_and_covis(scene, src, dst, width);
      obs.covis_score = edge_covis_score(cue);
      if (keep_cues) obs.cues = std::move(cue);
      graph.edges.emplace(EdgeKey{src, dst}, std::move(obs));
    }
  }

  if (noise && (noise->sigma_t > 0.0 || noise->sigma_theta > 0.0)) {
    EdgeKey outlier_pair{"", ""};
    if (noise->outlier) {
      double lowest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < graph.nodes.size(); ++j) {
          const double score = graph.pair_score(graph.nodes[i], graph.nodes[j]);
          const EdgeKey key{std::min(graph.nodes[i], graph.nodes[j]),
                            std::max(graph.nodes[i], graph.nodes[j])};
          if (score < lowest || (score == lowest && key < outlier_pair)) {
            lowest = score;
            outlier_pair = key;
          }
        }
      }
    }
    Rng rng(seed);
    for (auto& [key, obs] : graph.edges) {
      // Draw unconditionally to keep the stream aligned across outlier on/off.
      const double n_theta = rng.normal();
      const double n_x = rng.normal();
      const double n_y = rng.normal();
      const bool is_outlier = noise->outlier && std::min(key.first, key.second) == outlier_pair.first &&
                              std::max(key.first, key.second) == outlier_pair.second;
      const double factor = is_outlier ? noise->outlier_factor : 1.0;
      obs.rel_pose = Pose2::from_angle(
          wrap_angle(obs.rel_pose.theta() + factor * noise->sigma_theta * n_theta),
          obs.rel_pose.t + factor * noise->sigma_t * Vec2(n_x, n_y));
    }
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Connectivity classification

struct ConnectivityClass {
  enum class Label { Fully, Partially };
  Label label = Label::Fully;
  double threshold = 0.1;
  std::vector<EdgeKey> below_threshold;  // unordered pairs, (min,max) keyed

  const char* name() const { return label == Label::Fully ? "fully" : "partially"; }
};

// A pair counts as connected when either direction reaches the threshold
// (inclusive: a score exactly at the threshold stays connected).
inline ConnectivityClass classify_connectivity(const PoseGraph& graph, double threshold = 0.1) {
  ConnectivityClass result;
  result.threshold = threshold;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.nodes.size(); ++j) {
      const std::string& a = graph.nodes[i];
      const std::string& b = graph.nodes[j];
      if (graph.pair_score(a, b) < threshold) {
        result.below_threshold.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  result.label = result.below_threshold.empty() ? ConnectivityClass::Label::Fully
                                                : ConnectivityClass::Label::Partially;
  return result;
}

// ---------------------------------------------------------------------------
// Graph file (.graph.json)

inline nlohmann::json graph_to_json(const PoseGraph& graph) {
  nlohmann::json j;
  j["nodes"] = graph.nodes;
  j["origin"] = graph.origin();
  j["edges"] = nlohmann::json::array();
  for (const auto& [key, obs] : graph.edges) {
    nlohmann::json je;
    je["src"] = obs.src;
    je["dst"] = obs.dst;
    je["rel"] = {{"theta", obs.rel_pose.theta()},
                 {"t", {obs.rel_pose.t.x(), obs.rel_pose.t.y()}}};
    je["covis"] = obs.covis_score;
    j["edges"].push_back(std::move(je));
  }
  return j;
}

inline PoseGraph graph_from_json(const nlohmann::json& j) {
  PoseGraph graph;
  graph.nodes = detail::require_field<std::vector<std::string>>(j, "nodes", "graph");
  if (std::set<std::string>(graph.nodes.begin(), graph.nodes.end()).size() !=
      graph.nodes.size()) {
    throw ParseError("graph: duplicate node ids");
  }
  const auto origin = detail::require_field<std::string>(j, "origin", "graph");
  const auto it = std::find(graph.nodes.begin(), graph.nodes.end(), origin);
  if (it == graph.nodes.end()) throw ParseError("graph: origin '" + origin + "' not in nodes");
  graph.origin_index = static_cast<int>(it - graph.nodes.begin());
  const auto edges = detail::require_field<nlohmann::json>(j, "edges", "graph");
  for (const auto& je : edges) {
    EdgeObservation obs;
    obs.src = detail::require_field<std::string>(je, "src", "graph edge");
    obs.dst = detail::require_field<std::string>(je, "dst", "graph edge");
    const auto rel = detail::require_field<nlohmann::json>(je, "rel", "graph edge");
    const double theta = detail::require_field<double>(rel, "theta", "graph edge rel");
    const Vec2 t = detail::parse_vec2(detail::require_field<nlohmann::json>(rel, "t", "graph edge rel"),
                                      "graph edge rel t");
    obs.rel_pose = Pose2::from_angle(theta, t);
    obs.covis_score = detail::require_field<double>(je, "covis", "graph edge");
    if (obs.src == obs.dst) throw ParseError("graph edge: src == dst '" + obs.src + "'");
    if (obs.covis_score < 0.0 || obs.covis_score > 1.0) {
      throw ParseError("graph edge " + obs.src + "->" + obs.dst + ": covis outside [0,1]");
    }
    const EdgeKey key{obs.src, obs.dst};
    if (!graph.edges.emplace(key, std::move(obs)).second) {
      throw ParseError("duplicate graph edge " + key.first + "->" + key.second);
    }
  }
  return graph;
}

inline void save_graph(const PoseGraph& graph, const std::filesystem::path& path) {
  write_file_atomic(path, graph_to_json(graph).dump(2) + "\n");
}

inline PoseGraph load_graph(const std::filesystem::path& path) {
  try {
    return graph_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace panograph
