// panograph: synthesize scenes, generate column-wise cues, build pose graphs,
// solve them, and score the results.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panograph/cues.hpp"
#include "panograph/evaluation.hpp"
#include "panograph/graph.hpp"
#include "panograph/losses.hpp"
#include "panograph/message_passing.hpp"
#include "panograph/parallel.hpp"
#include "panograph/scene.hpp"
#include "panograph/solvers.hpp"
#include "panograph/svg.hpp"

namespace fs = std::filesystem;
using namespace panograph;

namespace {

Cluster select_cluster(const Scene& scene, int index, std::uint64_t seed) {
  const auto clusters = clusters_from_scene(scene, seed);
  if (index < 0 || index >= static_cast<int>(clusters.size())) {
    throw ValidationError("cluster index " + std::to_string(index) + " out of range (scene has " +
                          std::to_string(clusters.size()) + " clusters)");
  }
  return clusters[index];
}

PoseMap ground_truth_poses(const Scene& scene, const std::vector<std::string>& ids) {
  PoseMap gt;
  for (const auto& id : ids) gt[id] = world_from_camera(scene.camera(id));
  return gt;
}

Solution solve_mp_demo(const PoseGraph& graph, int node_dim, std::uint64_t seed) {
  std::vector<VecX> features;
  Rng rng(seed);
  for (int i = 0; i < graph.size(); ++i) {
    VecX f(node_dim);
    for (int k = 0; k < node_dim; ++k) f(k) = rng.normal();
    features.push_back(std::move(f));
  }
  // Origin selection scores candidates by the graph's co-visibility scores,
  // the reference update functions drive the dataflow.
  const auto scorer = [&graph](const RunOutput&, int origin) {
    double sum = 0.0;
    int count = 0;
    for (const auto& [key, obs] : graph.edges) {
      if (obs.src != graph.nodes[origin]) continue;
      sum += obs.covis_score;
      ++count;
    }
    return count > 0 ? sum / count : 0.0;
  };
  const UpdateFunctions fns = make_reference_functions(seed ^ 0x9e3779b97f4a7c15ull, node_dim, 32);
  const OriginSelection sel =
      infer_with_origin_selection(features, fns, /*layers=*/6, scorer);

  Solution solution;
  solution.origin = graph.nodes[sel.origin];
  for (int i = 0; i < graph.size(); ++i) {
    solution.poses[graph.nodes[i]] = sel.poses[i];
  }
  solution.diagnostics.converged = true;
  return solution;
}

struct BenchResult {
  int size = 0;
  std::string connectivity;
  std::map<std::string, AlignedErrors> errors;  // method -> errors
};

int run_cli(int argc, char** argv) {
  CLI::App app{"panograph: multi-view panorama pose toolkit"};
  app.require_subcommand(1);

  // --- synth -------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene file");
  SynthParams synth_params;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--rooms", synth_params.rooms, "room count")->check(CLI::PositiveNumber);
  synth->add_option("--panos-per-room", synth_params.cameras_per_room, "cameras per room")
      ->check(CLI::PositiveNumber);
  synth->add_option("--size-min", synth_params.size_min, "min room diameter, meters");
  synth->add_option("--size-max", synth_params.size_max, "max room diameter, meters");
  synth->add_option("--notched", synth_params.notched_rooms,
                    "how many rooms get an occluding notch");
  synth->add_option("--margin", synth_params.camera_margin, "camera wall clearance, meters");
  synth->add_option("--central-frac", synth_params.central_radius_frac,
                    "confine cameras near the room centroid (0 = off)");
  synth->add_option("--seed", synth_seed, "random seed")->required();
  synth->add_option("-o,--output", synth_out, "output .scene.json")->required();

  // --- cues ---------------------------------------------------------------
  auto* cues = app.add_subcommand("cues", "dump column-wise cues for a cluster");
  std::string cues_scene;
  int cues_cluster = 0;
  int cues_width = 512;
  std::uint64_t cues_seed = 0;
  bool cues_binary = false;
  std::string cues_out;
  cues->add_option("--scene", cues_scene, "input .scene.json")->required();
  cues->add_option("--cluster", cues_cluster, "cluster index");
  cues->add_option("--width", cues_width, "columns per panorama")->check(CLI::PositiveNumber);
  cues->add_option("--seed", cues_seed, "seed for down-sampling oversized clusters");
  cues->add_flag("--binary", cues_binary, "also write flat binary .cues.bin files");
  cues->add_option("-o,--output", cues_out, "output directory")->required();

  // --- graph ---------------------------------------------------------------
  auto* graph_cmd = app.add_subcommand("graph", "build a pose graph with observations");
  std::string graph_scene, graph_out;
  int graph_cluster = 0;
  int graph_width = 512;
  std::uint64_t graph_seed = 0;
  double graph_noise_t = 0.0, graph_noise_theta = 0.0;
  bool graph_outlier = false;
  double graph_outlier_factor = 10.0;
  graph_cmd->add_option("--scene", graph_scene, "input .scene.json")->required();
  graph_cmd->add_option("--cluster", graph_cluster, "cluster index");
  graph_cmd->add_option("--width", graph_width, "columns for covis scoring")
      ->check(CLI::PositiveNumber);
  graph_cmd->add_option("--seed", graph_seed, "random seed")->required();
  graph_cmd->add_option("--noise-t", graph_noise_t, "translation noise sigma, meters");
  graph_cmd->add_option("--noise-theta", graph_noise_theta, "rotation noise sigma, radians");
  graph_cmd->add_flag("--outlier", graph_outlier, "corrupt the lowest-covis pair");
  graph_cmd->add_option("--outlier-factor", graph_outlier_factor, "outlier noise multiplier");
  graph_cmd->add_option("-o,--output", graph_out, "output .graph.json")->required();

  // --- solve ----------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "estimate global poses from a graph");
  std::string solve_graph, solve_out;
  std::string solve_method = "greedy";
  std::string solve_edges = "all";
  PgoConfig solve_cfg;
  int solve_dim = 16;
  std::uint64_t solve_seed = 0;
  solve->add_option("--graph", solve_graph, "input .graph.json")->required();
  solve->add_option("--method", solve_method, "greedy | pgo | mp-demo")
      ->check(CLI::IsMember({"greedy", "pgo", "mp-demo"}));
  solve->add_option("--pgo-edges", solve_edges, "pgo factor pairs: all | tree+1")
      ->check(CLI::IsMember({"all", "tree+1"}));
  solve->add_option("--max-iters", solve_cfg.max_iters, "LM iteration cap");
  solve->add_option("--rel-tol", solve_cfg.rel_tol, "LM relative cost tolerance");
  solve->add_option("--dim", solve_dim, "mp-demo feature dimension");
  solve->add_option("--seed", solve_seed, "mp-demo feature seed");
  solve->add_option("-o,--output", solve_out, "output .poses.json")->required();

  // --- eval ------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "score predicted poses against a scene");
  std::string eval_scene, eval_pred, eval_out;
  std::string eval_method = "unknown";
  int eval_width = 512;
  double eval_threshold = 0.1;
  eval->add_option("--scene", eval_scene, "input .scene.json")->required();
  eval->add_option("--pred", eval_pred, "input .poses.json")->required();
  eval->add_option("--method", eval_method, "method label for the CSV");
  eval->add_option("--width", eval_width, "columns for connectivity classification");
  eval->add_option("--threshold", eval_threshold, "connectivity threshold");
  eval->add_option("-o,--output", eval_out, "output metrics .csv")->required();

  // --- bench -------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "synthesize, solve, and score many clusters");
  std::uint64_t bench_seed = 0;
  int bench_rooms = 25;
  int bench_panos = 5;
  int bench_notched = 12;
  int bench_width = 512;
  int bench_per_space = 1;
  std::vector<int> bench_sizes = {3, 4, 5};
  double bench_noise_t = 0.1, bench_noise_theta = 0.05;
  bool bench_outlier = false;
  std::string bench_edges = "all";
  bool bench_by_connectivity = false;
  bool bench_per_cluster = false;
  int bench_svg = 0;
  std::string bench_out;
  bench->add_option("--seed", bench_seed, "random seed")->required();
  bench->add_option("--rooms", bench_rooms, "rooms in the synthetic scene");
  bench->add_option("--panos-per-room", bench_panos, "cameras per room");
  bench->add_option("--notched", bench_notched, "rooms with an occluding notch");
  bench->add_option("--width", bench_width, "cue columns");
  bench->add_option("--sizes", bench_sizes, "cluster sizes to sample");
  bench->add_option("--per-space", bench_per_space, "clusters sampled per room and size");
  bench->add_option("--noise-t", bench_noise_t, "translation noise sigma, meters");
  bench->add_option("--noise-theta", bench_noise_theta, "rotation noise sigma, radians");
  bench->add_flag("--outlier", bench_outlier, "corrupt the lowest-covis pair of each graph");
  bench->add_option("--pgo-edges", bench_edges, "pgo factor pairs: all | tree+1")
      ->check(CLI::IsMember({"all", "tree+1"}));
  bench->add_flag("--by-connectivity", bench_by_connectivity,
                  "split CSV rows by fully/partially connected");
  bench->add_flag("--per-cluster", bench_per_cluster,
                  "pool per-cluster mean errors instead of per-pano errors");
  bench->add_option("--svg", bench_svg, "render the first N clusters to SVG");
  bench->add_option("-o,--output", bench_out, "output directory")->required();

  // --- loss-check -----------------------------------------------------------------
  auto* loss_check = app.add_subcommand("loss-check",
                                        "verify analytic loss gradients against central differences");
  std::uint64_t loss_seed = 0;
  int loss_instances = 100;
  loss_check->add_option("--seed", loss_seed, "random seed");
  loss_check->add_option("--instances", loss_instances, "random instances per loss")
      ->check(CLI::PositiveNumber);

  // --- mp-demo ---------------------------------------------------------------------
  auto* mp_demo = app.add_subcommand("mp-demo",
                                     "run the reference message-passing pipeline on a graph");
  std::string mp_graph_path, mp_out;
  int mp_dim = 16;
  std::uint64_t mp_seed = 0;
  mp_demo->add_option("--graph", mp_graph_path, "input .graph.json")->required();
  mp_demo->add_option("--dim", mp_dim, "node feature dimension");
  mp_demo->add_option("--seed", mp_seed, "feature seed");
  mp_demo->add_option("-o,--output", mp_out, "optional output .poses.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  if (synth->parsed()) {
    const Scene scene = synth_scene(synth_seed, synth_params);
    save_scene(scene, synth_out);
    return 0;
  }

  if (cues->parsed()) {
    const Scene scene = load_scene(cues_scene);
    const Cluster cluster = select_cluster(scene, cues_cluster, cues_seed);
    fs::create_directories(cues_out);
    for (const auto& src : cluster.pano_ids) {
      for (const auto& dst : cluster.pano_ids) {
        if (src == dst) continue;
        const CueSet cue = correspondence_and_covis(scene, src, dst, cues_width);
        save_cues_json(cue, fs::path(cues_out) / (src + "__" + dst + ".cues.json"));
        if (cues_binary) {
          save_cues_binary(cue, fs::path(cues_out) / (src + "__" + dst + ".cues.bin"));
        }
      }
    }
    return 0;
  }

  if (graph_cmd->parsed()) {
    const Scene scene = load_scene(graph_scene);
    const Cluster cluster = select_cluster(scene, graph_cluster, graph_seed);
    std::optional<NoisePerturbation> noise;
    if (graph_noise_t > 0.0 || graph_noise_theta > 0.0) {
      noise = NoisePerturbation{graph_noise_t, graph_noise_theta, graph_outlier,
                                graph_outlier_factor};
    }
    save_graph(build_graph(cluster, scene, graph_width, noise, graph_seed), graph_out);
    return 0;
  }

  if (solve->parsed()) {
    const PoseGraph graph = load_graph(solve_graph);
    Solution solution;
    if (solve_method == "greedy") {
      solution = greedy_spanning_tree(graph);
    } else if (solve_method == "pgo") {
      solve_cfg.edge_set = solve_edges == "all" ? PgoConfig::EdgeSet::All
                                                : PgoConfig::EdgeSet::TreePlusOne;
      solution = pgo(graph, greedy_spanning_tree(graph), solve_cfg);
    } else {
      solution = solve_mp_demo(graph, solve_dim, solve_seed);
    }
    save_solution(solution, solve_out);
    return 0;
  }

  if (eval->parsed()) {
    const Scene scene = load_scene(eval_scene);
    const Solution pred = load_solution(eval_pred);
    std::vector<std::string> ids;
    for (const auto& [id, pose] : pred.poses) ids.push_back(id);
    const PoseMap gt = ground_truth_poses(scene, ids);
    const AlignedErrors errors = evaluate(pred, gt);

    const Cluster cluster{ids, 0};
    const PoseGraph clean = build_graph(cluster, scene, eval_width, std::nullopt, 0);
    const ConnectivityClass cls = classify_connectivity(clean, eval_threshold);

    const MetricSummary row = summarize(errors.rotation_rad, errors.translation_m,
                                        static_cast<int>(ids.size()), eval_method, cls.name());
    write_file_atomic(eval_out, metrics_csv_header() + "\n" + metrics_csv_row(row) + "\n");
    return 0;
  }

  if (bench->parsed()) {
    fs::create_directories(bench_out);
    SynthParams params;
    params.rooms = bench_rooms;
    params.cameras_per_room = bench_panos;
    params.notched_rooms = bench_notched;
    const Scene scene = synth_scene(bench_seed, params);
    std::set<int> sizes(bench_sizes.begin(), bench_sizes.end());
    const std::vector<Cluster> clusters =
        sample_clusters(scene, bench_seed + 1, sizes, bench_per_space);
    if (clusters.empty()) throw ValidationError("bench: no clusters could be sampled");

    PgoConfig cfg;
    cfg.edge_set = bench_edges == "all" ? PgoConfig::EdgeSet::All
                                        : PgoConfig::EdgeSet::TreePlusOne;
    std::vector<BenchResult> results(clusters.size());
    parallel_for(static_cast<int>(clusters.size()), [&](int idx) {
      const Cluster& cluster = clusters[idx];
      NoisePerturbation noise{bench_noise_t, bench_noise_theta, bench_outlier, 10.0};
      const PoseGraph graph =
          build_graph(cluster, scene, bench_width, noise, bench_seed + 1000 + idx);
      const PoseMap gt = ground_truth_poses(scene, cluster.pano_ids);
      BenchResult& result = results[idx];
      result.size = cluster.size();
      result.connectivity = classify_connectivity(graph).name();
      const Solution greedy = greedy_spanning_tree(graph);
      const Solution refined = pgo(graph, greedy, cfg);
      result.errors.emplace("greedy", evaluate(greedy, gt));
      result.errors.emplace("pgo", evaluate(refined, gt));
      if (idx < bench_svg) {
        save_svg(render_svg(scene, cluster, {{"greedy", greedy}, {"pgo", refined}}),
                 fs::path(bench_out) / ("cluster_" + std::to_string(idx) + ".svg"));
      }
    });

    // Pool per (size, connectivity-label, method) in deterministic order.
    std::map<std::tuple<int, std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>>
        pools;
    for (const auto& result : results) {
      const std::string connectivity = bench_by_connectivity ? result.connectivity : "all";
      for (const auto& [method, errors] : result.errors) {
        auto& [rot, tr] = pools[{result.size, connectivity, method}];
        if (bench_per_cluster) {
          double rot_mean = 0.0, tr_mean = 0.0;
          for (double r : errors.rotation_rad) rot_mean += r;
          for (double t : errors.translation_m) tr_mean += t;
          rot.push_back(rot_mean / errors.rotation_rad.size());
          tr.push_back(tr_mean / errors.translation_m.size());
        } else {
          rot.insert(rot.end(), errors.rotation_rad.begin(), errors.rotation_rad.end());
          tr.insert(tr.end(), errors.translation_m.begin(), errors.translation_m.end());
        }
      }
    }
    std::string csv = metrics_csv_header() + "\n";
    for (const auto& [key, pool] : pools) {
      const auto& [size, connectivity, method] = key;
      csv += metrics_csv_row(summarize(pool.first, pool.second, size, method, connectivity)) + "\n";
    }
    write_file_atomic(fs::path(bench_out) / "metrics.csv", csv);
    return 0;
  }

  if (loss_check->parsed()) {
    bool ok = true;
    std::printf("loss gradient check: central differences, step 1e-6, %d instances\n",
                loss_instances);
    for (const auto& entry : losses_fd_report(loss_seed, loss_instances)) {
      const bool pass = entry.max_rel_err < 1e-6;
      ok = ok && pass;
      std::printf("  %-20s max rel err %.3e  %s\n", entry.name.c_str(), entry.max_rel_err,
                  pass ? "ok" : "FAIL");
    }
    return ok ? 0 : 1;
  }

  if (mp_demo->parsed()) {
    const PoseGraph graph = load_graph(mp_graph_path);
    const Solution solution = solve_mp_demo(graph, mp_dim, mp_seed);
    std::printf("origin: %s\n", solution.origin.c_str());
    for (const auto& [id, pose] : solution.poses) {
      std::printf("%s: theta=%.6f t=(%.6f, %.6f)\n", id.c_str(), pose.theta(), pose.t.x(),
                  pose.t.y());
    }
    if (!mp_out.empty()) save_solution(solution, mp_out);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
