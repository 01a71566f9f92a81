#include "mapfuse/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mapfuse/map_io.hpp"

namespace mapfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double get_or(const json& j, const char* key, double def) {
  return j.contains(key) ? j.at(key).get<double>() : def;
}

int get_or(const json& j, const char* key, int def) {
  return j.contains(key) ? j.at(key).get<int>() : def;
}

bool get_or(const json& j, const char* key, bool def) {
  return j.contains(key) ? j.at(key).get<bool>() : def;
}

std::string get_or(const json& j, const char* key, const std::string& def) {
  return j.contains(key) ? j.at(key).get<std::string>() : def;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  try {
    cfg.name = get_or(j, "name", cfg.name);
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      cfg.kind = scenario_kind_from_string(get_or(s, "kind", std::string("straight")));
      cfg.length = get_or(s, "length", cfg.length);
    }
    cfg.cycles = get_or(j, "cycles", cfg.cycles);
    cfg.traversals_per_cycle = get_or(j, "traversals_per_cycle", cfg.traversals_per_cycle);
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      cfg.noise.sigma_lat = get_or(n, "sigma_lat", cfg.noise.sigma_lat);
      cfg.noise.sigma_lon = get_or(n, "sigma_lon", cfg.noise.sigma_lon);
      cfg.noise.sigma_yaw_deg = get_or(n, "sigma_yaw_deg", cfg.noise.sigma_yaw_deg);
      cfg.noise.scale_min = get_or(n, "scale_min", cfg.noise.scale_min);
      cfg.noise.scale_max = get_or(n, "scale_max", cfg.noise.scale_max);
      cfg.noise.dropout_prob = get_or(n, "dropout_prob", cfg.noise.dropout_prob);
      cfg.noise.fake_prob = get_or(n, "fake_prob", cfg.noise.fake_prob);
      cfg.noise.conf_matched = get_or(n, "conf_matched", cfg.noise.conf_matched);
      cfg.noise.conf_fake = get_or(n, "conf_fake", cfg.noise.conf_fake);
      cfg.noise.conf_sigma = get_or(n, "conf_sigma", cfg.noise.conf_sigma);
      cfg.noise.range_lon = get_or(n, "range_lon", cfg.noise.range_lon);
      cfg.noise.range_lat = get_or(n, "range_lat", cfg.noise.range_lat);
      cfg.noise.miscalibration = get_or(n, "miscalibration", cfg.noise.miscalibration);
    }
    if (j.contains("association")) {
      const auto& a = j.at("association");
      cfg.assoc.gate = get_or(a, "gate", cfg.assoc.gate);
      cfg.assoc.conf_threshold = get_or(a, "conf_threshold", cfg.assoc.conf_threshold);
      cfg.assoc.coverage_radius = get_or(a, "coverage_radius", cfg.assoc.coverage_radius);
      cfg.assoc.change_window = get_or(a, "change_window", cfg.assoc.change_window);
    }
    if (j.contains("solver_config")) {
      cfg.solver = load_solver_config(j.at("solver_config").get<std::string>());
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      cfg.solver.max_iters = get_or(s, "max_iters", cfg.solver.max_iters);
      cfg.solver.lambda_init = get_or(s, "lambda_init", cfg.solver.lambda_init);
      cfg.solver.step_tol = get_or(s, "step_tol", cfg.solver.step_tol);
      cfg.solver.cost_tol = get_or(s, "cost_tol", cfg.solver.cost_tol);
      cfg.solver.huber_enabled = get_or(s, "huber_enabled", cfg.solver.huber_enabled);
    }
    if (j.contains("fusion")) {
      const auto& f = j.at("fusion");
      cfg.fusion.match_gate = get_or(f, "match_gate", cfg.fusion.match_gate);
      cfg.fusion.admit_min_frames = get_or(f, "admit_min_frames", cfg.fusion.admit_min_frames);
    }
    cfg.use_uncertainty = get_or(j, "use_uncertainty", cfg.use_uncertainty);
    cfg.uniform_scale = get_or(j, "uniform_scale", cfg.uniform_scale);
    cfg.change_label_tol = get_or(j, "change_label_tol", cfg.change_label_tol);
    cfg.region = get_or(j, "region", cfg.region);
    if (j.contains("changes")) {
      for (const auto& jc : j.at("changes")) {
        ChangeSpec spec;
        spec.effective_from_traversal = get_or(jc, "effective_from_traversal", 1);
        for (const auto& jo : jc.at("ops")) {
          ChangeOp op;
          const std::string kind = jo.at("op").get<std::string>();
          if (kind == "delete") {
            op.kind = ChangeOp::Kind::remove;
            op.id = jo.at("id").get<std::string>();
          } else if (kind == "insert") {
            op.kind = ChangeOp::Kind::insert;
            op.id = get_or(jo, "id", std::string{});
            op.cls = element_class_from_string(jo.at("class").get<std::string>());
            for (const auto& jp : jo.at("geometry")) {
              op.geometry.emplace_back(jp.at(0).get<double>(), jp.at(1).get<double>(),
                                       jp.size() > 2 ? jp.at(2).get<double>() : 0.0);
            }
          } else {
            throw ConfigError("unknown change op: " + kind);
          }
          spec.ops.push_back(std::move(op));
        }
        cfg.changes.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

void validate(const RunConfig& cfg) {
  if (cfg.cycles < 1) throw ConfigError("cycles must be >= 1");
  if (cfg.traversals_per_cycle < 1) throw ConfigError("traversals_per_cycle must be >= 1");
  if (cfg.length <= 0.0) throw ConfigError("scenario length must be positive");
  if (cfg.uniform_scale <= 0.0) throw ConfigError("uniform_scale must be positive");
  try {
    mapfuse::validate(cfg.noise);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json frame_to_json(const TraversalFrame& frame) {
  return {{"index", frame.index},
          {"gt_pose", pose_to_json(frame.gt_pose)},
          {"init_pose", pose_to_json(frame.init_pose)},
          {"obs", map_to_json(frame.obs)}};
}

TraversalFrame frame_from_json(const json& j) {
  TraversalFrame frame;
  frame.index = j.at("index").get<int>();
  frame.gt_pose = pose_from_json(j.at("gt_pose"));
  frame.init_pose = pose_from_json(j.at("init_pose"));
  frame.obs = map_from_json(j.at("obs"));
  return frame;
}

void write_trajectory_csv(const fs::path& path, std::span<const Pose2> poses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path.string());
  out << "t,x,y,yaw\n";
  char buf[128];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.9f,%.9f\n", i, poses[i].x, poses[i].y,
                  poses[i].yaw);
    out << buf;
  }
}

std::vector<Pose2> read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory: " + path.string());
  std::vector<Pose2> poses;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t, x, y, yaw;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &t, &x, &y, &yaw) != 4) {
      throw std::runtime_error("bad trajectory row: " + line);
    }
    poses.push_back(Pose2{x, y, yaw});
  }
  return poses;
}

FrameOutcome run_frame(const VectorMap& prior, const TraversalFrame& frame,
                       const AssocConfig& assoc_cfg, const SolverConfig& solver_cfg,
                       double range_lon, double range_lat, kernels::ExecPolicy policy) {
  FrameOutcome out;
  const VectorMap prior_local = crop_map(prior, frame.init_pose, range_lon, range_lat);
  out.assoc = associate(frame.obs, prior_local, frame.init_pose, assoc_cfg, policy);
  out.estimate = frame.init_pose;
  try {
    const SolveReport rep = localize(out.assoc, frame.init_pose, solver_cfg);
    out.estimate = rep.pose;
    out.solved = rep.converged;
  } catch (const std::exception& e) {
    std::cerr << "localize failed on frame " << frame.index << ": " << e.what() << "\n";
    out.solved = false;
  }
  return out;
}

bool change_label(const VectorMap& world, const VectorMap& prior, const Pose2& gt_pose,
                  double tol, double range_lon, double range_lat) {
  const VectorMap w = crop_map(world, gt_pose, range_lon, range_lat);
  const VectorMap p = crop_map(prior, gt_pose, range_lon, range_lat);
  auto unexplained = [&](const VectorMap& from, const VectorMap& by) {
    for (const auto& e : from.elements) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& f : by.elements) {
        if (f.cls != e.cls) continue;
        best = std::min(best, chamfer_distance(e, f));
      }
      if (best > tol) return true;
    }
    return false;
  };
  return unexplained(w, p) || unexplained(p, w);
}

std::string metrics_csv(const std::string& scenario, std::span<const CycleMetrics> rows) {
  std::ostringstream out;
  out << "scenario,cycle,ap_ped,ap_div,ap_bou,map,acc_c,acc_r,macc,"
         "lat_mean,lat_p90,lon_mean,lon_p90,yaw_mean,yaw_p90\n";
  char buf[512];
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    const double acc_c = r.change ? r.change->acc_changed : nan;
    const double acc_r = r.change ? r.change->acc_unchanged : nan;
    const double macc = r.change ? r.change->mean_acc : nan;
    std::snprintf(buf, sizeof(buf),
                  "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  scenario.c_str(), r.cycle, r.score.per_class[0], r.score.per_class[1],
                  r.score.per_class[2], r.score.map_mean, acc_c, acc_r, macc, r.loc.lat_mean,
                  r.loc.lat_p90, r.loc.lon_mean, r.loc.lon_p90, r.loc.yaw_mean_deg,
                  r.loc.yaw_p90_deg);
    out << buf;
  }
  return out.str();
}

RunResult run_cycles(const RunConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "fusion_reports");

  RandomStream scenario_rng(derive_seed(cfg.seed, 0));
  const Scenario sc = generate_scenario(cfg.kind, cfg.length, scenario_rng);
  VectorMap world = sc.world;
  save_map(out_dir / "world_initial.json", world);
  write_trajectory_csv(out_dir / "traj_gt.csv", sc.trajectory);

  MapRepository repo(out_dir / "store");
  std::vector<CycleMetrics> rows;
  std::vector<Pose2> traj_est_all, traj_gt_all;
  int global_traversal = 0;

  for (int cycle = 1; cycle <= cfg.cycles; ++cycle) {
    std::vector<Pose2> est_poses, gt_poses;
    std::vector<ChangeDecision> decisions, labels;

    for (int trav = 1; trav <= cfg.traversals_per_cycle; ++trav) {
      ++global_traversal;
      for (const auto& spec : cfg.changes) {
        if (spec.effective_from_traversal == global_traversal) {
          world = apply_changes(world, spec);
        }
      }

      RandomStream rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(global_traversal)));
      const auto head = repo.head_version(cfg.region);
      VectorMap prior;
      if (head) {
        prior = repo.load(cfg.region);
      } else {
        prior.version = 0;
        prior.frame = MapFrame::world;
      }

      ObservationBatch batch;
      batch.traversal_id = global_traversal;
      std::vector<AssociationResult> history;

      for (std::size_t fi = 0; fi < sc.trajectory.size(); ++fi) {
        TraversalFrame frame = synthesize_frame(world, sc.trajectory[fi], cfg.noise, rng);
        frame.index = static_cast<int>(fi);
        if (!cfg.use_uncertainty) {
          for (auto& e : frame.obs.elements) {
            for (auto& v : e.vertices) v.scale = LaplaceScale{cfg.uniform_scale, cfg.uniform_scale};
          }
        }

        if (head) {
          const FrameOutcome fo = run_frame(prior, frame, cfg.assoc, cfg.solver,
                                            cfg.noise.range_lon, cfg.noise.range_lat,
                                            cfg.fusion.policy);
          decisions.push_back(detect_change(fo.assoc, history, cfg.assoc.change_window));
          labels.push_back(change_label(world, prior, frame.gt_pose, cfg.change_label_tol,
                                        cfg.noise.range_lon, cfg.noise.range_lat)
                               ? ChangeDecision::changed
                               : ChangeDecision::unchanged);
          history.push_back(fo.assoc);
          if (static_cast<int>(history.size()) > cfg.assoc.change_window - 1 &&
              !history.empty()) {
            history.erase(history.begin());
          }
          est_poses.push_back(fo.estimate);
          gt_poses.push_back(frame.gt_pose);
          if (fo.solved) batch.frames.push_back({frame.obs, fo.estimate, fo.assoc});
        } else {
          // Bootstrap traversal: no prior yet, observations fuse first-traverse
          // at their initial poses.
          VectorMap empty_prior;
          empty_prior.frame = MapFrame::ego;
          const AssociationResult assoc =
              associate(frame.obs, empty_prior, frame.init_pose, cfg.assoc, cfg.fusion.policy);
          est_poses.push_back(frame.init_pose);
          gt_poses.push_back(frame.gt_pose);
          batch.frames.push_back({frame.obs, frame.init_pose, assoc});
        }
      }

      FusionReport report;
      const VectorMap fused = crowdsource_update(prior, batch, cfg.fusion, &report);
      repo.commit(cfg.region, fused);
      {
        std::ofstream out(out_dir / "fusion_reports" /
                          ("cycle" + std::to_string(cycle) + "_traversal" +
                           std::to_string(trav) + ".json"));
        out << fusion_report_to_json(report).dump(1) << "\n";
      }
    }

    const VectorMap head_map = repo.load(cfg.region);
    CycleMetrics cm;
    cm.cycle = cycle;
    cm.map_version = static_cast<int>(head_map.version);
    cm.score = mean_ap(head_map, world, cfg.fusion.policy);
    cm.loc = loc_stats(est_poses, gt_poses);
    const bool has_changed = std::any_of(labels.begin(), labels.end(), [](ChangeDecision d) {
      return d == ChangeDecision::changed;
    });
    const bool has_unchanged = std::any_of(labels.begin(), labels.end(), [](ChangeDecision d) {
      return d == ChangeDecision::unchanged;
    });
    if (has_changed && has_unchanged) cm.change = change_accuracy(decisions, labels);
    rows.push_back(cm);

    traj_est_all.insert(traj_est_all.end(), est_poses.begin(), est_poses.end());
    traj_gt_all.insert(traj_gt_all.end(), gt_poses.begin(), gt_poses.end());
  }

  RunResult result;
  result.cycles = rows;
  result.csv = metrics_csv(cfg.name, rows);
  result.final_map = repo.load(cfg.region);
  result.final_world = world;

  {
    std::ofstream out(out_dir / "metrics.csv");
    out << result.csv;
  }
  {
    json jrows = json::array();
    for (const auto& r : rows) {
      json jr = {{"cycle", r.cycle},
                 {"map_version", r.map_version},
                 {"map", r.score.map_mean},
                 {"ap_ped", r.score.per_class[0]},
                 {"ap_div", r.score.per_class[1]},
                 {"ap_bou", r.score.per_class[2]},
                 {"lat_mean", r.loc.lat_mean},
                 {"lat_p90", r.loc.lat_p90},
                 {"lon_mean", r.loc.lon_mean},
                 {"lon_p90", r.loc.lon_p90},
                 {"yaw_mean", r.loc.yaw_mean_deg},
                 {"yaw_p90", r.loc.yaw_p90_deg}};
      if (r.change) {
        jr["acc_c"] = r.change->acc_changed;
        jr["acc_r"] = r.change->acc_unchanged;
        jr["macc"] = r.change->mean_acc;
      }
      jrows.push_back(jr);
    }
    std::ofstream out(out_dir / "metrics.json");
    out << json{{"scenario", cfg.name}, {"cycles", jrows}}.dump(1) << "\n";
  }
  write_trajectory_csv(out_dir / "traj_est.csv", traj_est_all);
  write_trajectory_csv(out_dir / "traj_gt_frames.csv", traj_gt_all);
  save_map(out_dir / "world_final.json", world);
  return result;
}

}  // namespace mapfuse
