#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "panograph/rng.hpp"
#include "panograph/solvers.hpp"

using namespace panograph;

namespace {

// Hand-built graph from ground-truth world poses and per-pair scores.
PoseGraph make_graph(const std::vector<std::pair<std::string, Pose2>>& world,
                     const std::map<EdgeKey, double>& scores, int origin_index = 0) {
  PoseGraph graph;
  graph.origin_index = origin_index;
  std::map<std::string, Pose2> poses;
  for (const auto& [id, pose] : world) {
    graph.nodes.push_back(id);
    poses[id] = pose;
  }
  for (const auto& [pair, score] : scores) {
    EdgeObservation fwd;
    fwd.src = pair.first;
    fwd.dst = pair.second;
    fwd.rel_pose = relative(poses.at(pair.first), poses.at(pair.second));
    fwd.covis_score = score;
    EdgeObservation bwd;
    bwd.src = pair.second;
    bwd.dst = pair.first;
    bwd.rel_pose = relative(poses.at(pair.second), poses.at(pair.first));
    bwd.covis_score = score;
    graph.edges.emplace(EdgeKey{fwd.src, fwd.dst}, std::move(fwd));
    graph.edges.emplace(EdgeKey{bwd.src, bwd.dst}, std::move(bwd));
  }
  return graph;
}

double pose_error(const Pose2& a, const Pose2& b) {
  return std::max((a.t - b.t).norm(), std::abs(wrap_angle(a.theta() - b.theta())));
}

Pose2 random_pose(Rng& rng, double span = 5.0) {
  return Pose2::from_angle(rng.uniform(-kPi, kPi),
                           {rng.uniform(-span, span), rng.uniform(-span, span)});
}

}  // namespace

TEST_CASE("greedy keeps the two strongest pairs of a triplet") {
  const PoseGraph graph = make_graph(
      {{"a", Pose2::identity()}, {"b", Pose2::from_angle(0.3, {1, 0})},
       {"c", Pose2::from_angle(-0.2, {2, 1})}},
      {{{"a", "b"}, 0.9}, {{"b", "c"}, 0.8}, {{"a", "c"}, 0.2}});
  const Solution solution = greedy_spanning_tree(graph);
  const auto& tree = solution.diagnostics.accepted_edges;
  REQUIRE(tree.size() == 2);
  CHECK(tree[0] == EdgeKey{"a", "b"});
  CHECK(tree[1] == EdgeKey{"b", "c"});
}

TEST_CASE("greedy recovers ground truth on zero-noise graphs") {
  for (int size = 3; size <= 5; ++size) {
    SynthParams params;
    params.cameras_per_room = size;
    const Scene scene = synth_scene(300 + size, params);
    const Cluster cluster{scene.clusters[0], 0};
    const PoseGraph graph = build_graph(cluster, scene, 32, std::nullopt, 0);
    const Solution solution = greedy_spanning_tree(graph);

    CHECK(pose_error(solution.poses.at(solution.origin), Pose2::identity()) == 0.0);
    const Pose2 origin_world = world_from_camera(scene.camera(cluster.origin()));
    for (const auto& id : cluster.pano_ids) {
      const Pose2 want = relative(origin_world, world_from_camera(scene.camera(id)));
      CHECK(pose_error(solution.poses.at(id), want) < 1e-12);
    }
  }
}

TEST_CASE("greedy tie-break is lexicographic and deterministic") {
  const auto build = [] {
    return make_graph({{"a", Pose2::identity()},
                       {"b", Pose2::from_angle(0, {1, 0})},
                       {"c", Pose2::from_angle(0, {0, 1})}},
                      {{{"a", "b"}, 1.0}, {{"b", "c"}, 1.0}, {{"a", "c"}, 1.0}});
  };
  const Solution s1 = greedy_spanning_tree(build());
  const Solution s2 = greedy_spanning_tree(build());
  REQUIRE(s1.diagnostics.accepted_edges.size() == 2);
  CHECK(s1.diagnostics.accepted_edges == s2.diagnostics.accepted_edges);
  CHECK(s1.diagnostics.accepted_edges[0] == EdgeKey{"a", "b"});
  CHECK(s1.diagnostics.accepted_edges[1] == EdgeKey{"a", "c"});
}

TEST_CASE("greedy raises on disconnected graphs") {
  const PoseGraph graph = make_graph(
      {{"a", Pose2::identity()}, {"b", Pose2::from_angle(0, {1, 0})},
       {"c", Pose2::from_angle(0, {0, 1})}, {"d", Pose2::from_angle(0, {1, 1})}},
      {{{"a", "b"}, 0.9}, {{"c", "d"}, 0.9}});
  CHECK_THROWS_AS(greedy_spanning_tree(graph), DisconnectedError);
}

TEST_CASE("between-factor Jacobians") {
  SECTION("identity linearization gives the closed-form blocks") {
    const BetweenJacobians jac = jacobian_between(Pose2::identity(), Pose2::identity());
    CHECK((jac.wrt_i + Eigen::Matrix3d::Identity()).norm() == 0.0);
    CHECK((jac.wrt_j - Eigen::Matrix3d::Identity()).norm() == 0.0);
  }
  SECTION("rotation rows never depend on translations") {
    Rng rng(401);
    for (int i = 0; i < 100; ++i) {
      const BetweenJacobians jac = jacobian_between(random_pose(rng), random_pose(rng));
      CHECK(jac.wrt_i(2, 0) == 0.0);
      CHECK(jac.wrt_i(2, 1) == 0.0);
      CHECK(jac.wrt_j(2, 0) == 0.0);
      CHECK(jac.wrt_j(2, 1) == 0.0);
    }
  }
  SECTION("matches central finite differences at 1000 random points") {
    Rng rng(402);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const Pose2 pi = random_pose(rng);
      const Pose2 pj = random_pose(rng);
      const Pose2 z = random_pose(rng);
      const BetweenJacobians jac = jacobian_between(pi, pj);

      for (int row = 0; row < 3; ++row) {
        const auto component = [&](const std::vector<double>& x) {
          const Pose2 a = Pose2::from_angle(x[2], {x[0], x[1]});
          const Pose2 b = Pose2::from_angle(x[5], {x[3], x[4]});
          return between_residual(a, b, z)(row);
        };
        const std::vector<double> x0 = {pi.t.x(), pi.t.y(), pi.theta(),
                                        pj.t.x(), pj.t.y(), pj.theta()};
        const std::vector<double> fd = oracles::fd_gradient(component, x0);
        const std::vector<double> analytic = {jac.wrt_i(row, 0), jac.wrt_i(row, 1),
                                              jac.wrt_i(row, 2), jac.wrt_j(row, 0),
                                              jac.wrt_j(row, 1), jac.wrt_j(row, 2)};
        worst = std::max(worst, oracles::max_rel_error(analytic, fd));
      }
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("pgo at the zero-noise optimum converges immediately") {
  SynthParams params;
  params.cameras_per_room = 4;
  const Scene scene = synth_scene(310, params);
  const Cluster cluster{scene.clusters[0], 0};
  const PoseGraph graph = build_graph(cluster, scene, 32, std::nullopt, 0);
  const Solution init = greedy_spanning_tree(graph);
  const Solution refined = pgo(graph, init);

  CHECK(refined.diagnostics.converged);
  CHECK(refined.diagnostics.iterations <= 3);
  CHECK(refined.diagnostics.final_cost < 1e-18);
  const Pose2 origin_world = world_from_camera(scene.camera(cluster.origin()));
  for (const auto& id : cluster.pano_ids) {
    const Pose2 want = relative(origin_world, world_from_camera(scene.camera(id)));
    CHECK(pose_error(refined.poses.at(id), want) < 1e-9);
  }
  CHECK(pose_error(refined.poses.at(refined.origin), Pose2::identity()) == 0.0);
}

TEST_CASE("single between factor: optimum equals the observation") {
  PoseGraph graph = make_graph(
      {{"a", Pose2::identity()}, {"b", Pose2::from_angle(0.7, {1.5, -0.5})}},
      {{{"a", "b"}, 1.0}});
  Solution init;
  init.origin = "a";
  init.poses["a"] = Pose2::identity();
  init.poses["b"] = Pose2::from_angle(0.2, {0.5, 0.8});  // deliberately off
  const Solution solution = pgo(graph, init);
  CHECK(solution.diagnostics.converged);
  const Pose2& want = graph.edge("a", "b").rel_pose;
  CHECK(pose_error(solution.poses.at("b"), want) < 1e-9);
  CHECK(pose_error(solution.poses.at("a"), Pose2::identity()) == 0.0);
}

TEST_CASE("accepted pgo steps strictly decrease the cost") {
  SynthParams params;
  params.cameras_per_room = 5;
  const Scene scene = synth_scene(311, params);
  const Cluster cluster{scene.clusters[0], 0};
  NoisePerturbation noise;
  noise.sigma_t = 0.3;
  noise.sigma_theta = 0.2;
  const PoseGraph graph = build_graph(cluster, scene, 32, noise, 8);
  const Solution solution = pgo(graph, greedy_spanning_tree(graph));

  const auto& trace = solution.diagnostics.cost_trace;
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] < trace[i - 1]);
  CHECK(solution.diagnostics.converged);
  CHECK(solution.diagnostics.final_cost == trace.back());
}

TEST_CASE("pgo and greedy agree on zero-noise graphs") {
  for (std::uint64_t seed = 320; seed < 325; ++seed) {
    SynthParams params;
    params.cameras_per_room = 4;
    const Scene scene = synth_scene(seed, params);
    const Cluster cluster{scene.clusters[0], 0};
    const PoseGraph graph = build_graph(cluster, scene, 32, std::nullopt, 0);
    const Solution g = greedy_spanning_tree(graph);
    const Solution p = pgo(graph, g);
    for (const auto& id : cluster.pano_ids) {
      CHECK(pose_error(g.poses.at(id), p.poses.at(id)) < 1e-9);
    }
  }
}

TEST_CASE("pgo validates its inputs") {
  const PoseGraph graph = make_graph(
      {{"a", Pose2::identity()}, {"b", Pose2::from_angle(0, {1, 0})}},
      {{{"a", "b"}, 1.0}});
  Solution incomplete;
  incomplete.origin = "a";
  incomplete.poses["a"] = Pose2::identity();
  CHECK_THROWS_AS(pgo(graph, incomplete), ValidationError);

  Solution init = greedy_spanning_tree(graph);
  PgoConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(pgo(graph, init, bad), ValidationError);
}

TEST_CASE("tree+1 edge set uses the tree plus the weakest remaining pair") {
  // Square of four nodes: the weakest pair must survive into the factor set,
  // which shows up as a different optimum than tree-only composition when the
  // extra observation is inconsistent.
  PoseGraph graph = make_graph({{"a", Pose2::identity()},
                                {"b", Pose2::from_angle(0, {1, 0})},
                                {"c", Pose2::from_angle(0, {1, 1})},
                                {"d", Pose2::from_angle(0, {0, 1})}},
                               {{{"a", "b"}, 0.9},
                                {{"b", "c"}, 0.8},
                                {{"c", "d"}, 0.7},
                                {{"a", "d"}, 0.3},
                                {{"a", "c"}, 0.2}});
  // Make the lowest-covis pair inconsistent with the rest.
  graph.edges.at({"a", "c"}).rel_pose = Pose2::from_angle(0.3, {1.4, 1.2});
  graph.edges.at({"c", "a"}).rel_pose = inverse(Pose2::from_angle(0.3, {1.4, 1.2}));

  const Solution init = greedy_spanning_tree(graph);
  PgoConfig tree_plus_one;
  tree_plus_one.edge_set = PgoConfig::EdgeSet::TreePlusOne;
  const Solution refined = pgo(graph, init, tree_plus_one);
  // The inconsistent diagonal drags c away from the tree solution.
  CHECK(pose_error(refined.poses.at("c"), init.poses.at("c")) > 1e-3);
  CHECK(refined.diagnostics.converged);
}
