#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapfuse/kernels.hpp"
#include "mapfuse/map_model.hpp"

namespace mapfuse {

struct AssignmentPair {
  std::string obs_id;
  std::string prior_id;
  double cost = 0.0;
};

/// Element-level one-to-one assignment between an observation and the local
/// prior. Pairs with mismatched class or cost above the gate never form.
struct Assignment {
  std::vector<AssignmentPair> pairs;
  std::vector<std::string> unmatched_obs;
  std::vector<std::string> unmatched_prior;
};

/// One vertex pairing of a matched element pair. Indices refer to vertex
/// positions within each polyline after orientation alignment.
struct Correspondence {
  std::string obs_element;
  std::string prior_element;
  int obs_index = 0;
  int prior_index = 0;
  MapVertex obs_vertex;    // ego frame
  MapVertex prior_vertex;  // world frame
};

/// Three-way partition of elements plus vertex correspondences. `outdated`
/// holds prior ids (unmatched priors and matches demoted for low confidence);
/// `new_ids` holds observation ids with no prior counterpart.
struct AssociationResult {
  std::vector<AssignmentPair> matched;
  std::vector<std::string> outdated;
  std::vector<std::string> new_ids;
  /// Low-confidence matches, a subset of `outdated`; their pairing is kept so
  /// localization can force-include them for ablation runs.
  std::vector<AssignmentPair> demoted;
  /// New observation ids that overlap the prior's coverage area.
  std::vector<std::string> new_in_coverage;
  std::vector<Correspondence> correspondences;
  std::vector<Correspondence> demoted_correspondences;
};

struct AssocConfig {
  double gate = 3.0;
  double conf_threshold = 0.4;
  double coverage_radius = 5.0;
  int change_window = 5;
};

/// Minimum-total-cost class-consistent assignment with Chamfer costs, gated.
Assignment hungarian_match(const VectorMap& obs, const VectorMap& prior_local, double gate,
                           kernels::ExecPolicy policy = kernels::default_policy());

/// Splits an assignment by observation confidence and builds index-wise
/// vertex correspondences (prior polylines oriented forward or reversed to
/// align with the observation). `prior_ego` and `prior_world` are the same
/// cropped prior expressed in the two frames.
AssociationResult classify_existence(const Assignment& assign, const VectorMap& obs,
                                     const VectorMap& prior_ego, const VectorMap& prior_world,
                                     const AssocConfig& cfg);

/// Full association step: transforms the cropped prior (ego frame of `init`)
/// into both frames, matches, classifies.
AssociationResult associate(const VectorMap& obs, const VectorMap& prior_local_ego,
                            const Pose2& init, const AssocConfig& cfg,
                            kernels::ExecPolicy policy = kernels::default_policy());

enum class ChangeDecision { unchanged, changed };

/// True when the frame carries a change event: any outdated prior element or
/// any new element inside the prior's coverage area.
bool change_event(const AssociationResult& result);

/// Majority vote over the trailing window (current result plus up to
/// window-1 previous ones).
ChangeDecision detect_change(const AssociationResult& current,
                             std::span<const AssociationResult> history, int window = 5);

nlohmann::json association_to_json(const AssociationResult& result);

}  // namespace mapfuse
