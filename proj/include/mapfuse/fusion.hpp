#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapfuse/association.hpp"
#include "mapfuse/kernels.hpp"
#include "mapfuse/map_model.hpp"

namespace mapfuse {

/// Disjoint-set forest with path compression and union by rank.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n = 0);
  std::size_t add();
  std::size_t find(std::size_t a);
  bool unite(std::size_t a, std::size_t b);
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

struct WeightedVertex {
  Vec3 position{0.0, 0.0, 0.0};
  LaplaceScale scale{};
};

/// Closed-form per-axis minimizer of the fusion objective: inverse-variance
/// weighted mean over members plus, when present, the previous-version term.
/// For a lone member without a prior the member passes through unchanged
/// (first-traverse rule). z averages unweighted over members.
WeightedVertex fuse_vertex(std::span<const WeightedVertex> members,
                           const std::optional<WeightedVertex>& prior);

/// One localized frame queued for fusion.
struct FrameObservation {
  VectorMap obs;  // ego frame, per-vertex scales embedded
  Pose2 pose;     // solved ego->world transform
  AssociationResult assoc;
};

struct ObservationBatch {
  int traversal_id = 0;
  std::vector<FrameObservation> frames;
};

struct VertexRef {
  int traversal = 0;
  int frame = 0;
  std::string element;
  int vertex = 0;
};

struct ClusterMember {
  VertexRef ref;
  Vec3 world_position{0.0, 0.0, 0.0};
  LaplaceScale scale{};
  double element_confidence = 1.0;
};

/// A union-find cluster of co-observed vertices: all members share a class
/// and, for re-observed prior elements, a prior anchor vertex.
struct FusedCluster {
  int id = 0;
  ElementClass cls = ElementClass::Divider;
  std::string group;   // prior element id or provisional new-element key
  int order_hint = 0;  // hub vertex slot within the group
  std::vector<ClusterMember> members;
  std::optional<WeightedVertex> prior_anchor;
  WeightedVertex fused;
  int predecessor = -1;
  int successor = -1;
};

struct ClusterSet {
  std::vector<FusedCluster> clusters;
  /// (frame index, element id) -> cluster index of each raw obs vertex.
  std::map<std::pair<int, std::string>, std::vector<int>> obs_cluster;
  /// (group, hub slot) -> cluster index.
  std::map<std::pair<std::string, int>, int> hub_cluster;
  std::set<std::string> prior_groups;
};

struct FusionConfig {
  double match_gate = 3.0;    // gate for pairing new elements across frames
  int admit_min_frames = 2;   // frames required to admit a new element
  int min_chain_clusters = 2; // shorter successor chains are discarded
  kernels::ExecPolicy policy = kernels::default_policy();
};

struct FusionReport {
  int n_clusters = 0;
  std::vector<std::string> dropped;
  std::vector<std::string> admitted;
  std::map<std::string, std::pair<int, int>> element_votes;  // id -> (J, outdated)
  int chain_breaks = 0;
  int singletons_discarded = 0;
};

nlohmann::json fusion_report_to_json(const FusionReport& report);

/// Transforms observed vertices to world and unions refs that correspond
/// through matched prior elements (obs <-> prior hub <-> obs). New elements
/// hub through a provisional element created at first sighting so later
/// frames can support them.
ClusterSet build_clusters(const ObservationBatch& batch, const VectorMap& prior,
                          const FusionConfig& cfg);

/// Runs fuse_vertex over every cluster (data-parallel under the policy).
void fuse_all(ClusterSet& set, kernels::ExecPolicy policy = kernels::default_policy());

/// Hungarian voting for predecessor/successor links: each member votes for
/// the cluster holding its within-polyline successor; a max-vote one-to-one
/// assignment fixes the links and cycles are cut at their weakest edge.
void vote_topology(ClusterSet& set);

/// Full cloud-side update: cluster, fuse, vote, rebuild elements by walking
/// successor chains, drop priors voted outdated by a majority of observing
/// frames, admit new elements seen in enough frames. Returns version + 1.
VectorMap crowdsource_update(const VectorMap& prior, const ObservationBatch& batch,
                             const FusionConfig& cfg = {}, FusionReport* report = nullptr);

}  // namespace mapfuse
