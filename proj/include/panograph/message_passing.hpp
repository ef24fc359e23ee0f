#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "panograph/errors.hpp"
#include "panograph/losses.hpp"
#include "panograph/pose2.hpp"
#include "panograph/rng.hpp"

namespace panograph {

using VecX = Eigen::VectorXd;

struct NodeState {
  VecX features;
  bool is_origin = false;
};

struct EdgeState {
  VecX features;
};

struct DenseRows {
  std::vector<double> phi;
  std::vector<double> alpha;
  std::vector<double> covis;
};

// Pluggable per-layer update functions. The engine fixes only the dataflow:
// deterministic implementations stand in for the learned modules, and a
// neural implementation can slot in behind the same signatures.
//
//   edge_update    new edge features from old ones
//   message        message into `target` from the concatenation of the source
//                  features, the source origin flag, and the updated edge
//   pose_decoder   node features -> raw 4-parameter pose
//   dense_decoder  edge features -> column-wise (phi, alpha, covis); the edge
//                  endpoints are passed so oracle decoders can look cues up
struct UpdateFunctions {
  std::function<VecX(const VecX&)> edge_update;
  std::function<VecX(const NodeState& target, const VecX& source_with_edge)> message;
  std::function<PosePrediction(const NodeState&)> pose_decoder;
  std::function<DenseRows(int src, int dst, const VecX&)> dense_decoder;
};

struct MpGraph {
  std::vector<NodeState> nodes;
  std::map<std::pair<int, int>, EdgeState> edges;  // directed, keyed (i, j)
  int layers = 6;

  int size() const { return static_cast<int>(nodes.size()); }

  // Complete digraph with edge (i, j) initialized to the concatenation of the
  // endpoint features.
  static MpGraph complete(const std::vector<VecX>& features, int origin_index, int layers = 6) {
    if (features.size() < 2) throw ValidationError("mp graph needs >= 2 nodes");
    if (origin_index < 0 || origin_index >= static_cast<int>(features.size())) {
      throw ValidationError("mp graph origin index out of range");
    }
    MpGraph g;
    g.layers = layers;
    for (std::size_t i = 0; i < features.size(); ++i) {
      g.nodes.push_back({features[i], static_cast<int>(i) == origin_index});
    }
    const int n = g.size();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        VecX concat(features[i].size() + features[j].size());
        concat << features[i], features[j];
        g.edges.emplace(std::make_pair(i, j), EdgeState{std::move(concat)});
      }
    }
    return g;
  }

  void validate() const {
    if (layers < 1) throw ValidationError("mp graph needs >= 1 layer");
    if (nodes.empty()) throw ValidationError("mp graph has no nodes");
    const auto dim = nodes.front().features.size();
    for (const auto& node : nodes) {
      if (node.features.size() != dim) throw DimensionError("node feature dims disagree");
      if (!node.features.allFinite()) throw NumericalError("non-finite node features");
    }
    for (const auto& [key, edge] : edges) {
      const auto [i, j] = key;
      if (i < 0 || j < 0 || i >= size() || j >= size() || i == j) {
        throw ValidationError("mp edge endpoints out of range");
      }
      if (!edges.count({j, i})) throw ValidationError("mp adjacency must be symmetric as a pair set");
      if (!edge.features.allFinite()) throw NumericalError("non-finite edge features");
    }
  }
};

// Mean over a multiset of message vectors, computed coordinate-wise over
// sorted values with a running mean. The result depends only on the multiset
// (iteration order cannot leak in) and a multiset of identical messages
// aggregates to that message bitwise.
inline VecX mean_messages(const std::vector<VecX>& messages) {
  if (messages.empty()) throw DimensionError("mean_messages: no messages");
  const auto dim = messages.front().size();
  for (const auto& m : messages) {
    if (m.size() != dim) throw DimensionError("mean_messages: message dims disagree");
  }
  VecX out(dim);
  std::vector<double> values(messages.size());
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (std::size_t m = 0; m < messages.size(); ++m) values[m] = messages[m](c);
    std::sort(values.begin(), values.end());
    double mean = 0.0;
    for (std::size_t m = 0; m < values.size(); ++m) {
      mean += (values[m] - mean) / static_cast<double>(m + 1);
    }
    out(c) = mean;
  }
  return out;
}

// One synchronous message-passing layer: every edge updates, then every
// directed edge (i, j) carries a message from j into i, then nodes take the
// mean over incoming messages. All reads see the pre-step states.
inline MpGraph step(const MpGraph& g, const UpdateFunctions& fns) {
  g.validate();
  MpGraph out = g;
  for (auto& [key, edge] : out.edges) {
    edge.features = fns.edge_update(g.edges.at(key).features);
  }
  std::vector<std::vector<VecX>> incoming(g.size());
  for (const auto& [key, edge] : out.edges) {
    const auto [i, j] = key;
    const NodeState& source = g.nodes[j];
    VecX source_with_edge(source.features.size() + 1 + edge.features.size());
    source_with_edge << source.features, (source.is_origin ? 1.0 : 0.0), edge.features;
    incoming[i].push_back(fns.message(g.nodes[i], source_with_edge));
  }
  for (int i = 0; i < g.size(); ++i) {
    if (incoming[i].empty()) continue;  // isolated node keeps its features
    out.nodes[i].features = mean_messages(incoming[i]);
  }
  return out;
}

struct RunOutput {
  MpGraph graph;
  std::vector<PosePrediction> poses;                // theta_P per node
  std::map<std::pair<int, int>, DenseRows> dense;   // theta_DC per directed edge
};

// L layers of message passing, then decode every node and every edge. Pass
// either one UpdateFunctions (shared across layers) or exactly one per layer.
inline RunOutput run(const MpGraph& g, const std::vector<UpdateFunctions>& per_layer) {
  if (g.layers < 1) throw ValidationError("run: layer count must be >= 1");
  if (per_layer.empty()) throw ValidationError("run: no update functions");
  if (per_layer.size() != 1 && static_cast<int>(per_layer.size()) != g.layers) {
    throw ValidationError("run: need one UpdateFunctions or one per layer");
  }
  MpGraph cur = g;
  for (int l = 0; l < g.layers; ++l) {
    cur = step(cur, per_layer.size() == 1 ? per_layer.front() : per_layer[l]);
  }
  RunOutput out;
  const UpdateFunctions& last = per_layer.back();
  out.poses.reserve(cur.size());
  for (const auto& node : cur.nodes) out.poses.push_back(last.pose_decoder(node));
  for (const auto& [key, edge] : cur.edges) {
    out.dense.emplace(key, last.dense_decoder(key.first, key.second, edge.features));
  }
  out.graph = std::move(cur);
  return out;
}

inline RunOutput run(const MpGraph& g, const UpdateFunctions& fns) {
  return run(g, std::vector<UpdateFunctions>{fns});
}

inline Pose2 pose_from_prediction(const PosePrediction& pred) {
  const double n = pred.r_hat.norm();
  if (n < 1e-9) throw DegenerateError("pose_from_prediction: rotation vector is ~zero");
  return {Rot2{pred.r_hat.x() / n, pred.r_hat.y() / n}, pred.t_hat};
}

// Mean predicted co-visibility over the origin's outgoing edges.
inline double origin_covis_score(const RunOutput& out, int origin) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [key, rows] : out.dense) {
    if (key.first != origin) continue;
    double row_sum = 0.0;
    for (double v : rows.covis) row_sum += v;
    if (!rows.covis.empty()) {
      sum += row_sum / static_cast<double>(rows.covis.size());
      ++count;
    }
  }
  if (count == 0) throw ValidationError("origin_covis_score: origin has no outgoing edges");
  return sum / count;
}

struct OriginSelection {
  int origin = 0;
  std::vector<Pose2> poses;            // re-anchored so the origin is identity
  std::vector<double> origin_scores;   // one per candidate origin
  RunOutput best;
};

// Run the full pipeline once per candidate origin (the origin flag moves with
// the candidate) and keep the run whose origin scores the highest mean
// co-visibility toward its neighbors; ties go to the lowest node index.
inline OriginSelection infer_with_origin_selection(
    const std::vector<VecX>& features, const UpdateFunctions& fns, int layers = 6,
    const std::function<double(const RunOutput&, int)>& scorer = origin_covis_score) {
  if (features.size() < 2) throw ValidationError("origin selection needs >= 2 nodes");
  OriginSelection sel;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int candidate = 0; candidate < static_cast<int>(features.size()); ++candidate) {
    RunOutput out = run(MpGraph::complete(features, candidate, layers), fns);
    const double score = scorer(out, candidate);
    sel.origin_scores.push_back(score);
    if (score > best_score) {
      best_score = score;
      sel.origin = candidate;
      sel.best = std::move(out);
    }
  }
  std::vector<Pose2> raw;
  raw.reserve(features.size());
  for (const auto& pred : sel.best.poses) raw.push_back(pose_from_prediction(pred));
  const Pose2 anchor = inverse(raw[sel.origin]);
  for (const auto& pose : raw) sel.poses.push_back(compose(anchor, pose));
  sel.poses[sel.origin] = Pose2::identity();
  return sel;
}

// ---------------------------------------------------------------------------
// Reference update functions: fixed seeded near-identity linear maps. They
// exercise the dataflow deterministically; swap in learned modules through
// the same UpdateFunctions surface.

namespace detail {

inline Eigen::MatrixXd seeded_matrix(Rng& rng, int rows, int cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

}  // namespace detail

inline UpdateFunctions make_reference_functions(std::uint64_t seed, int node_dim, int width) {
  Rng rng(seed);
  const int edge_dim = 2 * node_dim;
  const int concat_dim = node_dim + 1 + edge_dim;

  const Eigen::MatrixXd w_edge = Eigen::MatrixXd::Identity(edge_dim, edge_dim) +
                                 detail::seeded_matrix(rng, edge_dim, edge_dim,
                                                       0.15 / std::sqrt(double(edge_dim)));
  const Eigen::MatrixXd w_target =
      detail::seeded_matrix(rng, node_dim, node_dim + 1, 0.35 / std::sqrt(double(node_dim + 1)));
  const Eigen::MatrixXd w_source =
      detail::seeded_matrix(rng, node_dim, concat_dim, 0.35 / std::sqrt(double(concat_dim)));
  const Eigen::MatrixXd w_rot =
      detail::seeded_matrix(rng, 2, node_dim + 1, 0.3 / std::sqrt(double(node_dim + 1)));
  const Eigen::MatrixXd w_trans =
      detail::seeded_matrix(rng, 2, node_dim + 1, 1.0 / std::sqrt(double(node_dim + 1)));
  const Eigen::MatrixXd w_phi =
      detail::seeded_matrix(rng, width, edge_dim, 1.0 / std::sqrt(double(edge_dim)));
  const Eigen::MatrixXd w_alpha =
      detail::seeded_matrix(rng, width, edge_dim, 1.0 / std::sqrt(double(edge_dim)));
  const Eigen::MatrixXd w_covis =
      detail::seeded_matrix(rng, width, edge_dim, 1.0 / std::sqrt(double(edge_dim)));

  const auto with_flag = [](const NodeState& node) {
    VecX v(node.features.size() + 1);
    v << node.features, (node.is_origin ? 1.0 : 0.0);
    return v;
  };

  UpdateFunctions fns;
  fns.edge_update = [w_edge](const VecX& e) -> VecX { return w_edge * e; };
  fns.message = [w_target, w_source, with_flag](const NodeState& target,
                                                const VecX& source_with_edge) -> VecX {
    return w_target * with_flag(target) + w_source * source_with_edge;
  };
  fns.pose_decoder = [w_rot, w_trans, with_flag](const NodeState& node) {
    const VecX v = with_flag(node);
    PosePrediction pred;
    pred.r_hat = Vec2(1.0, 0.0) + 0.3 * (w_rot * v);
    pred.t_hat = w_trans * v;
    return pred;
  };
  fns.dense_decoder = [w_phi, w_alpha, w_covis](int, int, const VecX& e) {
    const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    DenseRows rows;
    const VecX p = w_phi * e;
    const VecX a = w_alpha * e;
    const VecX c = w_covis * e;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      rows.phi.push_back(0.1 + 1.35 * sigmoid(p(k)));
      rows.alpha.push_back(kPi * std::tanh(a(k)));
      rows.covis.push_back(sigmoid(c(k)));
    }
    return rows;
  };
  return fns;
}

// Reference functions whose dense decoder reads ground-truth cue rows, for
// exercising origin selection end to end against known co-visibility.
inline UpdateFunctions make_cue_oracle_functions(
    std::uint64_t seed, int node_dim, int width,
    std::function<DenseRows(int src, int dst)> cue_lookup) {
  UpdateFunctions fns = make_reference_functions(seed, node_dim, width);
  fns.dense_decoder = [lookup = std::move(cue_lookup)](int src, int dst, const VecX&) {
    return lookup(src, dst);
  };
  return fns;
}

}  // namespace panograph
