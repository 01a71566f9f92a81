#include "mapfuse/map_io.hpp"

#include <fstream>
#include <stdexcept>

namespace mapfuse {

using nlohmann::json;

json map_to_json(const VectorMap& map) {
  json elements = json::array();
  for (const auto& e : map.elements) {
    json vertices = json::array();
    json scales = json::array();
    for (const auto& v : e.vertices) {
      vertices.push_back({v.position.x(), v.position.y(), v.position.z()});
      scales.push_back({v.scale.bx, v.scale.by});
    }
    elements.push_back({{"id", e.id},
                        {"class", to_string(e.cls)},
                        {"vertices", vertices},
                        {"scales", scales},
                        {"confidence", e.confidence}});
  }
  return {{"version", map.version},
          {"frame", map.frame == MapFrame::world ? "world" : "ego"},
          {"elements", elements}};
}

VectorMap map_from_json(const json& j) {
  VectorMap map;
  map.version = j.at("version").get<std::int64_t>();
  const std::string frame = j.at("frame").get<std::string>();
  if (frame == "world") {
    map.frame = MapFrame::world;
  } else if (frame == "ego") {
    map.frame = MapFrame::ego;
  } else {
    throw std::invalid_argument("unknown map frame: " + frame);
  }
  for (const auto& je : j.at("elements")) {
    MapElement e;
    e.id = je.at("id").get<std::string>();
    e.cls = element_class_from_string(je.at("class").get<std::string>());
    e.confidence = je.at("confidence").get<double>();
    const auto& jv = je.at("vertices");
    const auto& js = je.at("scales");
    if (jv.size() != js.size()) {
      throw std::invalid_argument("element " + e.id + ": vertices/scales size mismatch");
    }
    for (std::size_t k = 0; k < jv.size(); ++k) {
      MapVertex v;
      v.position = Vec3{jv[k].at(0).get<double>(), jv[k].at(1).get<double>(),
                        jv[k].at(2).get<double>()};
      v.scale = LaplaceScale{js[k].at(0).get<double>(), js[k].at(1).get<double>()};
      e.vertices.push_back(v);
    }
    map.elements.push_back(std::move(e));
  }
  validate(map);
  return map;
}

json pose_to_json(const Pose2& pose) { return {{"x", pose.x}, {"y", pose.y}, {"yaw", pose.yaw}}; }

Pose2 pose_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("yaw").get<double>()};
}

void save_map(const std::filesystem::path& path, const VectorMap& map) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << map_to_json(map).dump(1) << "\n";
}

VectorMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map file: " + path.string());
  json j;
  in >> j;
  return map_from_json(j);
}

}  // namespace mapfuse
