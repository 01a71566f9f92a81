#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mapfuse/geometry.hpp"
#include "mapfuse/map_model.hpp"

namespace mapfuse {

/// Seeded random stream with hand-rolled samplers so output is identical
/// across standard library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal(double sigma);   // Box-Muller
  double laplace(double scale);  // inverse CDF
  bool bernoulli(double p);

 private:
  std::mt19937_64 eng_;
};

/// Mixes a seed with a stream index into an independent sub-seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct NoiseConfig {
  double sigma_lat = 0.75;      // m
  double sigma_lon = 1.5;       // m
  double sigma_yaw_deg = 0.85;  // degrees
  double scale_min = 0.05;      // Laplace b lower bound, m
  double scale_max = 0.3;
  double dropout_prob = 0.0;
  double fake_prob = 0.0;
  double conf_matched = 0.9;
  double conf_fake = 0.1;
  double conf_sigma = 0.03;
  double range_lon = 36.0;
  double range_lat = 18.0;
  /// Fake detections keep at least this distance from every true element so
  /// ground-truth matched/outdated/new labels stay unambiguous.
  double fake_clearance = 3.0;
  /// Recorded scale = miscalibration * generating scale (1.0 = honest).
  double miscalibration = 1.0;
};

void validate(const NoiseConfig& cfg);

struct TraversalFrame {
  int index = 0;
  Pose2 gt_pose;
  Pose2 init_pose;
  VectorMap obs;  // ego frame, noisy, with recorded per-vertex scales
};

struct ChangeOp {
  enum class Kind { insert, remove };
  Kind kind = Kind::remove;
  std::string id;  // target for remove; assigned id for insert
  ElementClass cls = ElementClass::PedestrianCrossing;
  std::vector<Vec3> geometry;  // insert only; >= 2 points, resampled to V
};

struct ChangeSpec {
  std::vector<ChangeOp> ops;
  int effective_from_traversal = 1;  // global 1-based traversal counter
};

/// Ground-truth pose composed with ego-frame lat/lon/yaw Gaussian offsets.
Pose2 sample_init_pose(const Pose2& gt, const NoiseConfig& cfg, RandomStream& rng);

/// One simulated observation: crop around the ground-truth pose, per-vertex
/// Laplace noise with honestly recorded scales, whole-element dropout, fake
/// detections, confidences, and a perturbed initial pose.
TraversalFrame synthesize_frame(const VectorMap& world, const Pose2& gt_pose,
                                const NoiseConfig& cfg, RandomStream& rng);

/// Applies deletions/insertions in order; bumps the version.
VectorMap apply_changes(const VectorMap& world, const ChangeSpec& spec);

enum class ScenarioKind { straight, turning };

ScenarioKind scenario_kind_from_string(const std::string& s);
std::string to_string(ScenarioKind kind);

struct Scenario {
  VectorMap world;
  std::vector<Pose2> trajectory;  // one pose per 2 m of travel
};

/// Straight: parallel dividers/boundaries plus periodic crosswalks along a
/// line. Turning: the circular-arc analog. Crosswalk spacing jitters with the
/// seed so different seeds give distinct worlds.
Scenario generate_scenario(ScenarioKind kind, double length, RandomStream& rng);

}  // namespace mapfuse
