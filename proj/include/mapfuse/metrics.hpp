#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "mapfuse/association.hpp"
#include "mapfuse/geometry.hpp"
#include "mapfuse/map_model.hpp"

namespace mapfuse {

inline constexpr std::array<double, 3> kApThresholds = {0.5, 1.0, 1.5};

struct MapScore {
  /// AP per class (ped, div, bou order) per threshold; NaN when the class has
  /// no ground-truth support.
  std::array<std::array<double, 3>, 3> ap{};
  std::array<double, 3> per_class{};  // mean over thresholds
  double map_mean = 0.0;              // mean over classes with support

  double ap_for(ElementClass cls) const;
};

struct ChangeAccuracy {
  double acc_changed = 0.0;
  double acc_unchanged = 0.0;
  double mean_acc = 0.0;
};

struct LocStats {
  double lat_mean = 0.0, lat_p90 = 0.0;
  double lon_mean = 0.0, lon_p90 = 0.0;
  double yaw_mean_deg = 0.0, yaw_p90_deg = 0.0;
};

/// Average precision at one Chamfer threshold: predictions sorted by
/// confidence claim the nearest unclaimed same-class ground-truth element
/// within the threshold; all-point interpolated PR area.
double ap_at(const VectorMap& pred, const VectorMap& gt, ElementClass cls, double threshold,
             kernels::ExecPolicy policy = kernels::default_policy());

MapScore mean_ap(const VectorMap& pred, const VectorMap& gt,
                 kernels::ExecPolicy policy = kernels::default_policy());

/// Per-class recall on changed/unchanged plus their mean. Throws when either
/// class is absent from the labels.
ChangeAccuracy change_accuracy(std::span<const ChangeDecision> decisions,
                               std::span<const ChangeDecision> labels);

/// Per-frame absolute errors in the ground-truth heading frame (lat =
/// cross-track, lon = along-track, yaw in degrees); mean and linearly
/// interpolated 90th percentile.
LocStats loc_stats(std::span<const Pose2> estimates, std::span<const Pose2> ground_truth);

/// Linear interpolation between closest order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace mapfuse
