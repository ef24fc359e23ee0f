#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panograph/errors.hpp"
#include "panograph/graph.hpp"
#include "panograph/pose2.hpp"

namespace panograph {

// Diagonal Gaussian noise model; sigmas whiten residuals componentwise.
struct NoiseModel {
  double sigma_t = 0.2;      // meters, per translation axis
  double sigma_theta = 0.1;  // radians
};

struct PgoConfig {
  NoiseModel prior{0.20, 0.1};     // anchors the origin at identity
  NoiseModel odometry{0.30, 0.3};  // between-factor whitening
  int max_iters = 1000;
  double rel_tol = 1e-5;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  enum class EdgeSet { All, TreePlusOne } edge_set = EdgeSet::All;
};

struct SolveDiagnostics {
  int iterations = 0;
  double final_cost = 0.0;
  bool converged = true;
  std::vector<double> cost_trace;            // initial cost then accepted steps
  std::vector<EdgeKey> accepted_edges;       // greedy tree, in acceptance order
};

struct Solution {
  std::string origin;
  std::map<std::string, Pose2> poses;  // origin pose is exactly identity
  SolveDiagnostics diagnostics;
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Unordered pairs sorted by descending pair score, ties by lexicographic key.
inline std::vector<EdgeKey> ranked_pairs(const PoseGraph& graph) {
  std::vector<EdgeKey> pairs;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.nodes.size(); ++j) {
      const std::string& a = graph.nodes[i];
      const std::string& b = graph.nodes[j];
      const EdgeKey key{std::min(a, b), std::max(a, b)};
      if (graph.has_edge(key.first, key.second) || graph.has_edge(key.second, key.first)) {
        pairs.push_back(key);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [&graph](const EdgeKey& x, const EdgeKey& y) {
    const double sx = graph.pair_score(x.first, x.second);
    const double sy = graph.pair_score(y.first, y.second);
    if (sx != sy) return sx > sy;
    return x < y;
  });
  return pairs;
}

}  // namespace detail

// Accept unordered pairs from highest co-visibility down, keeping those that
// join two components, then compose poses outward from the origin along the
// resulting tree.
inline Solution greedy_spanning_tree(const PoseGraph& graph) {
  const int n = graph.size();
  if (n < 2) throw ValidationError("greedy_spanning_tree: graph needs >= 2 nodes");
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[graph.nodes[i]] = i;

  detail::UnionFind uf(n);
  std::vector<EdgeKey> accepted;
  for (const EdgeKey& pair : detail::ranked_pairs(graph)) {
    if (static_cast<int>(accepted.size()) == n - 1) break;
    if (uf.unite(index.at(pair.first), index.at(pair.second))) {
      accepted.push_back(pair);
    }
  }
  if (static_cast<int>(accepted.size()) != n - 1) {
    throw DisconnectedError("greedy_spanning_tree: graph is not connected");
  }

  std::vector<std::vector<int>> adjacency(n);
  std::map<EdgeKey, const EdgeObservation*> pair_obs;
  for (const EdgeKey& pair : accepted) {
    const int a = index.at(pair.first);
    const int b = index.at(pair.second);
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
    pair_obs[pair] = &graph.preferred_edge(pair.first, pair.second);
  }

  Solution solution;
  solution.origin = graph.origin();
  solution.poses[solution.origin] = Pose2::identity();
  std::vector<bool> placed(n, false);
  placed[graph.origin_index] = true;
  std::queue<int> frontier;
  frontier.push(graph.origin_index);
  while (!frontier.empty()) {
    const int cur = frontier.front();
    frontier.pop();
    const Pose2& cur_pose = solution.poses.at(graph.nodes[cur]);
    for (int next : adjacency[cur]) {
      if (placed[next]) continue;
      const EdgeKey pair{std::min(graph.nodes[cur], graph.nodes[next]),
                         std::max(graph.nodes[cur], graph.nodes[next])};
      const EdgeObservation& obs = *pair_obs.at(pair);
      const Pose2 pose = obs.src == graph.nodes[cur] ? compose(cur_pose, obs.rel_pose)
                                                     : compose(cur_pose, inverse(obs.rel_pose));
      solution.poses[graph.nodes[next]] = pose;
      placed[next] = true;
      frontier.push(next);
    }
  }
  solution.diagnostics.accepted_edges = std::move(accepted);
  return solution;
}

// ---------------------------------------------------------------------------
// Between-factor residual and analytic Jacobians
//
// State block per node: (x, y, theta), additive updates with angle wrapping.
// Residual of an observation z of j in i's frame: [R_i^T (p_j - p_i) - z_t,
// wrap(theta_j - theta_i - z_theta)].

inline Eigen::Vector3d between_residual(const Pose2& pose_i, const Pose2& pose_j,
                                        const Pose2& measured) {
  const Rot2 ri = pose_i.r;
  const Vec2 dp = pose_j.t - pose_i.t;
  const Vec2 in_i(ri.c * dp.x() + ri.s * dp.y(), -ri.s * dp.x() + ri.c * dp.y());
  Eigen::Vector3d r;
  r.head<2>() = in_i - measured.t;
  r(2) = wrap_angle(pose_j.theta() - pose_i.theta() - measured.theta());
  return r;
}

struct BetweenJacobians {
  Eigen::Matrix3d wrt_i;
  Eigen::Matrix3d wrt_j;
};

inline BetweenJacobians jacobian_between(const Pose2& pose_i, const Pose2& pose_j) {
  const double c = pose_i.r.c;
  const double s = pose_i.r.s;
  const Vec2 dp = pose_j.t - pose_i.t;
  BetweenJacobians jac;
  jac.wrt_i.setZero();
  jac.wrt_j.setZero();
  // d r_t / d p_i = -R_i^T, d r_t / d p_j = R_i^T
  jac.wrt_i(0, 0) = -c;
  jac.wrt_i(0, 1) = -s;
  jac.wrt_i(1, 0) = s;
  jac.wrt_i(1, 1) = -c;
  jac.wrt_j(0, 0) = c;
  jac.wrt_j(0, 1) = s;
  jac.wrt_j(1, 0) = -s;
  jac.wrt_j(1, 1) = c;
  // d r_t / d theta_i = d(R_i^T)/dtheta * (p_j - p_i)
  jac.wrt_i(0, 2) = -s * dp.x() + c * dp.y();
  jac.wrt_i(1, 2) = -c * dp.x() - s * dp.y();
  // rotation residual
  jac.wrt_i(2, 2) = -1.0;
  jac.wrt_j(2, 2) = 1.0;
  return jac;
}

namespace detail {

struct Factor {
  int i = -1;          // state index of src (-1 for the prior)
  int j = -1;          // state index of dst (prior uses j as the anchored node)
  Pose2 measured;      // between measurement, or identity target for the prior
  Eigen::Vector3d inv_sigma;  // componentwise whitening (1/sigma)
};

inline Eigen::Vector3d factor_residual(const Factor& f, const std::vector<Pose2>& poses) {
  if (f.i < 0) {
    const Pose2& p = poses[f.j];
    return {p.t.x(), p.t.y(), wrap_angle(p.theta())};
  }
  return between_residual(poses[f.i], poses[f.j], f.measured);
}

inline double total_cost(const std::vector<Factor>& factors, const std::vector<Pose2>& poses) {
  double cost = 0.0;
  for (const auto& f : factors) {
    const Eigen::Vector3d r = f.inv_sigma.cwiseProduct(factor_residual(f, poses));
    cost += r.squaredNorm();
  }
  return cost;
}

inline std::vector<Pose2> state_to_poses(const Eigen::VectorXd& state) {
  std::vector<Pose2> poses(state.size() / 3);
  for (std::size_t k = 0; k < poses.size(); ++k) {
    poses[k] = Pose2::from_angle(wrap_angle(state(3 * k + 2)),
                                 {state(3 * k + 0), state(3 * k + 1)});
  }
  return poses;
}

// Unordered pairs PGO optimizes over: the greedy tree, plus either every
// remaining pair with positive co-visibility (All) or only the single
// lowest-scored remaining pair (TreePlusOne).
inline std::vector<EdgeKey> pgo_pairs(const PoseGraph& graph, const Solution& tree,
                                      PgoConfig::EdgeSet edge_set) {
  std::vector<EdgeKey> pairs = tree.diagnostics.accepted_edges;
  std::vector<EdgeKey> rest;
  for (const EdgeKey& pair : ranked_pairs(graph)) {
    if (std::find(pairs.begin(), pairs.end(), pair) == pairs.end()) rest.push_back(pair);
  }
  if (edge_set == PgoConfig::EdgeSet::All) {
    for (const EdgeKey& pair : rest) {
      if (graph.pair_score(pair.first, pair.second) > 0.0) pairs.push_back(pair);
    }
  } else if (!rest.empty()) {
    pairs.push_back(rest.back());  // ranked_pairs sorts descending, so last is lowest
  }
  return pairs;
}

}  // namespace detail

inline constexpr double kPgoCostFloor = 1e-24;

// Levenberg-Marquardt over all node poses: a prior factor anchors the origin
// at identity and one between factor covers each selected unordered pair
// (direction with higher co-visibility). The output is re-anchored so the
// origin pose is exactly identity.
inline Solution pgo(const PoseGraph& graph, const Solution& init, const PgoConfig& cfg = {}) {
  const int n = graph.size();
  if (n < 2) throw ValidationError("pgo: graph needs >= 2 nodes");
  if (cfg.max_iters < 1) throw ValidationError("pgo: max_iters must be >= 1");
  if (cfg.rel_tol <= 0.0) throw ValidationError("pgo: rel_tol must be positive");
  if (cfg.prior.sigma_t <= 0.0 || cfg.prior.sigma_theta <= 0.0 || cfg.odometry.sigma_t <= 0.0 ||
      cfg.odometry.sigma_theta <= 0.0) {
    throw ValidationError("pgo: noise model sigmas must be positive");
  }
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) {
    index[graph.nodes[i]] = i;
    if (!init.poses.count(graph.nodes[i])) {
      throw ValidationError("pgo: init is missing node '" + graph.nodes[i] + "'");
    }
  }

  // The greedy tree fixes the edge set; it throws DisconnectedError when the
  // graph cannot support a spanning tree.
  const Solution tree = greedy_spanning_tree(graph);

  std::vector<detail::Factor> factors;
  factors.push_back({-1, graph.origin_index, Pose2::identity(),
                     {1.0 / cfg.prior.sigma_t, 1.0 / cfg.prior.sigma_t,
                      1.0 / cfg.prior.sigma_theta}});
  for (const EdgeKey& pair : detail::pgo_pairs(graph, tree, cfg.edge_set)) {
    const EdgeObservation& obs = graph.preferred_edge(pair.first, pair.second);
    factors.push_back({index.at(obs.src), index.at(obs.dst), obs.rel_pose,
                       {1.0 / cfg.odometry.sigma_t, 1.0 / cfg.odometry.sigma_t,
                        1.0 / cfg.odometry.sigma_theta}});
  }

  Eigen::VectorXd state(3 * n);
  for (int k = 0; k < n; ++k) {
    const Pose2& p = init.poses.at(graph.nodes[k]);
    state(3 * k + 0) = p.t.x();
    state(3 * k + 1) = p.t.y();
    state(3 * k + 2) = p.theta();
  }

  std::vector<Pose2> poses = detail::state_to_poses(state);
  double cost = detail::total_cost(factors, poses);
  if (!std::isfinite(cost)) throw NumericalError("pgo: non-finite cost at init");

  SolveDiagnostics diag;
  diag.cost_trace.push_back(cost);
  bool converged = cost < kPgoCostFloor;
  double lambda = cfg.lambda_init;

  while (!converged && diag.iterations < cfg.max_iters) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * n);
    for (const auto& f : factors) {
      const Eigen::Vector3d r = f.inv_sigma.cwiseProduct(detail::factor_residual(f, poses));
      if (f.i < 0) {
        const Eigen::Matrix3d jw = f.inv_sigma.asDiagonal();
        h.block<3, 3>(3 * f.j, 3 * f.j) += jw.transpose() * jw;
        grad.segment<3>(3 * f.j) += jw.transpose() * r;
      } else {
        const BetweenJacobians jac = jacobian_between(poses[f.i], poses[f.j]);
        const Eigen::Matrix3d ji = f.inv_sigma.asDiagonal() * jac.wrt_i;
        const Eigen::Matrix3d jj = f.inv_sigma.asDiagonal() * jac.wrt_j;
        h.block<3, 3>(3 * f.i, 3 * f.i) += ji.transpose() * ji;
        h.block<3, 3>(3 * f.j, 3 * f.j) += jj.transpose() * jj;
        h.block<3, 3>(3 * f.i, 3 * f.j) += ji.transpose() * jj;
        h.block<3, 3>(3 * f.j, 3 * f.i) += jj.transpose() * ji;
        grad.segment<3>(3 * f.i) += ji.transpose() * r;
        grad.segment<3>(3 * f.j) += jj.transpose() * r;
      }
    }
    if (!h.allFinite() || !grad.allFinite()) {
      throw NumericalError("pgo: non-finite Jacobian");
    }
    if (grad.cwiseAbs().maxCoeff() < 1e-13) {
      converged = true;
      break;
    }

    const Eigen::MatrixXd damped =
        h + lambda * Eigen::MatrixXd::Identity(3 * n, 3 * n);
    const Eigen::VectorXd dx = damped.ldlt().solve(-grad);
    ++diag.iterations;

    const Eigen::VectorXd trial = state + dx;
    const std::vector<Pose2> trial_poses = detail::state_to_poses(trial);
    const double trial_cost = detail::total_cost(factors, trial_poses);
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
      state = trial;
      poses = trial_poses;
      cost = trial_cost;
      diag.cost_trace.push_back(cost);
      lambda = std::max(lambda / cfg.lambda_down, 1e-12);
      if (rel < cfg.rel_tol || cost < kPgoCostFloor) converged = true;
    } else {
      lambda *= cfg.lambda_up;
      if (lambda > 1e15) {
        converged = true;  // no improving step even at near-gradient descent
      }
    }
  }

  Solution solution;
  solution.origin = graph.origin();
  const Pose2 anchor = inverse(poses[graph.origin_index]);
  for (int k = 0; k < n; ++k) {
    solution.poses[graph.nodes[k]] = compose(anchor, poses[k]);
  }
  solution.poses[solution.origin] = Pose2::identity();
  diag.final_cost = cost;
  diag.converged = converged;
  diag.accepted_edges = tree.diagnostics.accepted_edges;
  solution.diagnostics = std::move(diag);
  return solution;
}

// ---------------------------------------------------------------------------
// Solution file (.poses.json)

inline nlohmann::json solution_to_json(const Solution& solution) {
  nlohmann::json j;
  j["origin"] = solution.origin;
  j["poses"] = nlohmann::json::object();
  for (const auto& [id, pose] : solution.poses) {
    j["poses"][id] = {{"theta", pose.theta()}, {"t", {pose.t.x(), pose.t.y()}}};
  }
  j["diagnostics"] = {{"iterations", solution.diagnostics.iterations},
                      {"final_cost", solution.diagnostics.final_cost},
                      {"converged", solution.diagnostics.converged}};
  return j;
}

inline Solution solution_from_json(const nlohmann::json& j) {
  Solution solution;
  solution.origin = detail::require_field<std::string>(j, "origin", "solution");
  const auto poses = detail::require_field<nlohmann::json>(j, "poses", "solution");
  if (!poses.is_object()) throw ParseError("solution: 'poses' must be an object");
  for (const auto& [id, jp] : poses.items()) {
    const double theta = detail::require_field<double>(jp, "theta", "solution pose");
    const Vec2 t = detail::parse_vec2(detail::require_field<nlohmann::json>(jp, "t", "solution pose"),
                                      "solution pose t");
    solution.poses[id] = Pose2::from_angle(theta, t);
  }
  if (!solution.poses.count(solution.origin)) {
    throw ParseError("solution: origin '" + solution.origin + "' has no pose");
  }
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    solution.diagnostics.iterations = d.value("iterations", 0);
    solution.diagnostics.final_cost = d.value("final_cost", 0.0);
    solution.diagnostics.converged = d.value("converged", true);
  }
  return solution;
}

inline void save_solution(const Solution& solution, const std::filesystem::path& path) {
  write_file_atomic(path, solution_to_json(solution).dump(2) + "\n");
}

inline Solution load_solution(const std::filesystem::path& path) {
  try {
    return solution_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace panograph
