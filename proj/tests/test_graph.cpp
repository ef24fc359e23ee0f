#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "oracles.hpp"
#include "panograph/graph.hpp"

using namespace panograph;

namespace {
Cluster first_cluster(const Scene& scene) { return Cluster{scene.clusters.at(0), 0}; }
}  // namespace

TEST_CASE("zero-noise graph composes exactly to ground truth") {
  const Scene scene = synth_scene(201, {});
  const Cluster cluster = first_cluster(scene);
  const PoseGraph graph = build_graph(cluster, scene, 64, std::nullopt, 0);

  CHECK(graph.size() == 3);
  CHECK(graph.edges.size() == 6);  // complete digraph

  std::map<std::string, Pose2> world;
  for (const auto& id : graph.nodes) world[id] = world_from_camera(scene.camera(id));

  for (const auto& [key, obs] : graph.edges) {
    const Pose2 want = relative(world.at(obs.src), world.at(obs.dst));
    CHECK(oracles::pose_matrix_diff(obs.rel_pose, oracles::pose_to_mat(want)) < 1e-12);
    // chained composition reproduces the other endpoint
    const Pose2 reached = compose(world.at(obs.src), obs.rel_pose);
    CHECK(oracles::pose_matrix_diff(reached, oracles::pose_to_mat(world.at(obs.dst))) < 1e-12);
  }

  SECTION("forward and backward observations are mutual inverses") {
    for (const auto& [key, obs] : graph.edges) {
      const auto& back = graph.edge(obs.dst, obs.src);
      CHECK(oracles::pose_matrix_diff(compose(obs.rel_pose, back.rel_pose),
                                      Eigen::Matrix3d::Identity()) < 1e-12);
    }
  }
}

TEST_CASE("noise statistics match the requested sigma") {
  NoisePerturbation noise;
  noise.sigma_theta = 0.05;
  noise.sigma_t = 0.0;
  double sum = 0.0, sum_sq = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; count < 10000; ++seed) {
    const Scene scene = synth_scene(seed, SynthParams{.cameras_per_room = 5});
    const Cluster cluster = first_cluster(scene);
    const PoseGraph clean = build_graph(cluster, scene, 16, std::nullopt, seed);
    const PoseGraph noisy = build_graph(cluster, scene, 16, noise, seed);
    for (const auto& [key, obs] : noisy.edges) {
      const double residual = wrap_angle(obs.rel_pose.theta() - clean.edge(key.first, key.second).rel_pose.theta());
      sum += residual;
      sum_sq += residual * residual;
      ++count;
    }
  }
  const double mean = sum / count;
  const double std_dev = std::sqrt(sum_sq / count - mean * mean);
  CHECK(std::abs(std_dev - 0.05) < 0.002);
}

TEST_CASE("noise draws are identical with and without the outlier flag") {
  const Scene scene = synth_scene(4, SynthParams{.cameras_per_room = 4, .notched_rooms = 1});
  const Cluster cluster = first_cluster(scene);

  NoisePerturbation base;
  base.sigma_t = 0.1;
  base.sigma_theta = 0.05;
  NoisePerturbation with_outlier = base;
  with_outlier.outlier = true;
  with_outlier.outlier_factor = 10.0;

  const PoseGraph g0 = build_graph(cluster, scene, 64, base, 5);
  const PoseGraph g1 = build_graph(cluster, scene, 64, with_outlier, 5);

  // Find the lowest-covis pair from the clean scores.
  EdgeKey lowest{"", ""};
  double lowest_score = 2.0;
  for (std::size_t i = 0; i < g0.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < g0.nodes.size(); ++j) {
      const double s = g0.pair_score(g0.nodes[i], g0.nodes[j]);
      if (s < lowest_score) {
        lowest_score = s;
        lowest = {std::min(g0.nodes[i], g0.nodes[j]), std::max(g0.nodes[i], g0.nodes[j])};
      }
    }
  }
  REQUIRE(lowest_score < 1.0);  // the notch must create covis variation

  int touched = 0;
  for (const auto& [key, obs] : g1.edges) {
    const auto& clean = g0.edge(key.first, key.second);
    const bool is_outlier_pair = std::min(key.first, key.second) == lowest.first &&
                                 std::max(key.first, key.second) == lowest.second;
    if (is_outlier_pair) {
      CHECK(obs.rel_pose.theta() != clean.rel_pose.theta());
      ++touched;
    } else {
      CHECK(obs.rel_pose.theta() == clean.rel_pose.theta());  // bitwise
      CHECK(obs.rel_pose.t == clean.rel_pose.t);
    }
  }
  CHECK(touched == 2);  // both directions of the pair
}

TEST_CASE("build_graph is deterministic per seed") {
  const Scene scene = synth_scene(31, {});
  const Cluster cluster = first_cluster(scene);
  NoisePerturbation noise;
  noise.sigma_t = 0.2;
  noise.sigma_theta = 0.1;
  const PoseGraph a = build_graph(cluster, scene, 32, noise, 9);
  const PoseGraph b = build_graph(cluster, scene, 32, noise, 9);
  const PoseGraph c = build_graph(cluster, scene, 32, noise, 10);
  CHECK(graph_to_json(a).dump() == graph_to_json(b).dump());
  CHECK(graph_to_json(a).dump() != graph_to_json(c).dump());
}

TEST_CASE("classify_connectivity") {
  PoseGraph graph;
  graph.nodes = {"a", "b", "c"};
  const auto add = [&graph](const std::string& s, const std::string& d, double score) {
    EdgeObservation obs;
    obs.src = s;
    obs.dst = d;
    obs.covis_score = score;
    graph.edges.emplace(EdgeKey{s, d}, std::move(obs));
  };

  SECTION("all high scores are fully connected") {
    add("a", "b", 1.0); add("b", "a", 1.0);
    add("a", "c", 1.0); add("c", "a", 1.0);
    add("b", "c", 1.0); add("c", "b", 1.0);
    const auto cls = classify_connectivity(graph);
    CHECK(cls.label == ConnectivityClass::Label::Fully);
    CHECK(cls.below_threshold.empty());
  }
  SECTION("one weak pair is partial and gets listed") {
    add("a", "b", 0.9); add("b", "a", 0.8);
    add("a", "c", 0.05); add("c", "a", 0.02);
    add("b", "c", 0.7); add("c", "b", 0.6);
    const auto cls = classify_connectivity(graph);
    CHECK(cls.label == ConnectivityClass::Label::Partially);
    REQUIRE(cls.below_threshold.size() == 1);
    CHECK(cls.below_threshold[0] == EdgeKey{"a", "c"});
  }
  SECTION("a score exactly at the threshold stays connected") {
    add("a", "b", 0.1); add("b", "a", 0.0);
    add("a", "c", 1.0); add("c", "a", 1.0);
    add("b", "c", 1.0); add("c", "b", 1.0);
    CHECK(classify_connectivity(graph, 0.1).label == ConnectivityClass::Label::Fully);
  }
  SECTION("the max over both directions decides") {
    add("a", "b", 0.0); add("b", "a", 0.5);
    add("a", "c", 1.0); add("c", "a", 1.0);
    add("b", "c", 1.0); add("c", "b", 1.0);
    CHECK(classify_connectivity(graph).label == ConnectivityClass::Label::Fully);
  }
}

TEST_CASE("graph json round trip") {
  const Scene scene = synth_scene(41, {});
  NoisePerturbation noise;
  noise.sigma_t = 0.1;
  noise.sigma_theta = 0.05;
  const PoseGraph graph = build_graph(first_cluster(scene), scene, 32, noise, 3);

  const auto dir = std::filesystem::temp_directory_path() / "panograph_graph_test";
  std::filesystem::create_directories(dir);
  save_graph(graph, dir / "g.graph.json");
  const PoseGraph loaded = load_graph(dir / "g.graph.json");

  CHECK(loaded.nodes == graph.nodes);
  CHECK(loaded.origin() == graph.origin());
  REQUIRE(loaded.edges.size() == graph.edges.size());
  for (const auto& [key, obs] : graph.edges) {
    const auto& l = loaded.edge(key.first, key.second);
    CHECK(std::abs(wrap_angle(l.rel_pose.theta() - obs.rel_pose.theta())) < 1e-15);
    CHECK((l.rel_pose.t - obs.rel_pose.t).norm() < 1e-15);
    CHECK(l.covis_score == obs.covis_score);
  }

  CHECK_THROWS_AS(graph_from_json(nlohmann::json::parse(R"({"nodes":["a"],"origin":"zz","edges":[]})")),
                  ParseError);
}
