#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "mapfuse/geometry.hpp"
#include "mapfuse/map_model.hpp"
#include "mapfuse/pipeline.hpp"

namespace mapfuse {

/// Ground truth (dashed) vs fused (solid) elements, colored per class.
void write_map_overlay_svg(const std::filesystem::path& path, const VectorMap& gt,
                           const VectorMap& fused);

/// Per-frame lateral / longitudinal / yaw deviation of the estimate.
void write_trajectory_deviation_svg(const std::filesystem::path& path,
                                    std::span<const Pose2> est, std::span<const Pose2> gt);

/// Per-cycle mAP curve.
void write_map_curve_svg(const std::filesystem::path& path,
                         std::span<const CycleMetrics> cycles);

}  // namespace mapfuse
