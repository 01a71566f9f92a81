#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mapfuse/map_model.hpp"

namespace mapfuse {

nlohmann::json map_to_json(const VectorMap& map);
VectorMap map_from_json(const nlohmann::json& j);

nlohmann::json pose_to_json(const Pose2& pose);
Pose2 pose_from_json(const nlohmann::json& j);

void save_map(const std::filesystem::path& path, const VectorMap& map);
VectorMap load_map(const std::filesystem::path& path);

}  // namespace mapfuse
