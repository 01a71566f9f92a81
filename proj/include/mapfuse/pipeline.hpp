#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapfuse/association.hpp"
#include "mapfuse/fusion.hpp"
#include "mapfuse/localizer.hpp"
#include "mapfuse/metrics.hpp"
#include "mapfuse/perception_sim.hpp"
#include "mapfuse/store.hpp"

namespace mapfuse {

/// Bad user configuration; the CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  ScenarioKind kind = ScenarioKind::straight;
  double length = 100.0;
  int cycles = 3;
  int traversals_per_cycle = 5;
  NoiseConfig noise;
  AssocConfig assoc;
  SolverConfig solver;
  FusionConfig fusion;
  bool use_uncertainty = true;
  double uniform_scale = 0.2;     // substituted when use_uncertainty is off
  double change_label_tol = 1.0;  // Chamfer gate for ground-truth change labels
  std::string region = "main";
  std::vector<ChangeSpec> changes;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void validate(const RunConfig& cfg);

nlohmann::json frame_to_json(const TraversalFrame& frame);
TraversalFrame frame_from_json(const nlohmann::json& j);

void write_trajectory_csv(const std::filesystem::path& path, std::span<const Pose2> poses);
std::vector<Pose2> read_trajectory_csv(const std::filesystem::path& path);

struct FrameOutcome {
  AssociationResult assoc;
  Pose2 estimate;
  bool solved = false;
};

/// Crop the prior around the initial guess, associate, localize. A solver
/// failure leaves `estimate` at the initial pose with solved=false.
FrameOutcome run_frame(const VectorMap& prior, const TraversalFrame& frame,
                       const AssocConfig& assoc_cfg, const SolverConfig& solver_cfg,
                       double range_lon, double range_lat,
                       kernels::ExecPolicy policy = kernels::default_policy());

/// Ground-truth change label: does the world disagree with the prior inside
/// the perception box around this pose?
bool change_label(const VectorMap& world, const VectorMap& prior, const Pose2& gt_pose,
                  double tol, double range_lon, double range_lat);

struct CycleMetrics {
  int cycle = 0;
  int map_version = 0;
  MapScore score;
  std::optional<ChangeAccuracy> change;
  LocStats loc;
};

std::string metrics_csv(const std::string& scenario, std::span<const CycleMetrics> rows);

struct RunResult {
  std::vector<CycleMetrics> cycles;
  std::string csv;
  VectorMap final_map;
  VectorMap final_world;
};

/// The full closed loop: cycle 1 bootstraps the prior by first-traverse
/// fusion; later traversals localize against the stored head, detect changes,
/// and feed a crowdsourced update that commits the next version. One metrics
/// row per cycle. Input files are never touched; everything lands in out_dir.
RunResult run_cycles(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace mapfuse
