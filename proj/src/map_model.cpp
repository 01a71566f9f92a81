#include "mapfuse/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <unordered_set>

namespace mapfuse {

namespace {

double xy_dist(const MapVertex& a, const MapVertex& b) {
  return std::hypot(a.position.x() - b.position.x(), a.position.y() - b.position.y());
}

MapVertex lerp_vertex(const MapVertex& a, const MapVertex& b, double t) {
  MapVertex out;
  out.position = (1.0 - t) * a.position + t * b.position;
  out.scale.bx = (1.0 - t) * a.scale.bx + t * b.scale.bx;
  out.scale.by = (1.0 - t) * a.scale.by + t * b.scale.by;
  return out;
}

// Liang-Barsky clip of one segment against the centered box. Returns the
// parameter interval of the inside part, or nothing if fully outside.
std::optional<std::pair<double, double>> clip_segment(const Vec2& a, const Vec2& b,
                                                      double range_lon, double range_lat) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  auto clip1 = [&](double p, double q) {
    if (p == 0.0) return q >= 0.0;
    const double r = q / p;
    if (p < 0.0) {
      if (r > t1) return false;
      if (r > t0) t0 = r;
    } else {
      if (r < t0) return false;
      if (r < t1) t1 = r;
    }
    return true;
  };
  if (clip1(-dx, a.x() + range_lon) && clip1(dx, range_lon - a.x()) &&
      clip1(-dy, a.y() + range_lat) && clip1(dy, range_lat - a.y())) {
    return std::make_pair(t0, t1);
  }
  return std::nullopt;
}

// Splits a polyline into maximal runs inside the box, inserting interpolated
// vertices where segments cross the boundary.
std::vector<std::vector<MapVertex>> clip_polyline(const std::vector<MapVertex>& verts,
                                                  double range_lon, double range_lat) {
  std::vector<std::vector<MapVertex>> runs;
  std::vector<MapVertex> cur;
  auto flush = [&]() {
    if (cur.size() >= 2) runs.push_back(cur);
    cur.clear();
  };
  auto push = [&](const MapVertex& v) {
    if (cur.empty() || xy_dist(cur.back(), v) > 1e-12) cur.push_back(v);
  };
  for (std::size_t i = 0; i + 1 < verts.size(); ++i) {
    const Vec2 a{verts[i].position.x(), verts[i].position.y()};
    const Vec2 b{verts[i + 1].position.x(), verts[i + 1].position.y()};
    const auto seg = clip_segment(a, b, range_lon, range_lat);
    if (!seg) {
      flush();
      continue;
    }
    const auto [t0, t1] = *seg;
    if (t0 > 0.0) flush();
    push(t0 == 0.0 ? verts[i] : lerp_vertex(verts[i], verts[i + 1], t0));
    push(t1 == 1.0 ? verts[i + 1] : lerp_vertex(verts[i], verts[i + 1], t1));
    if (t1 < 1.0) flush();
  }
  flush();
  return runs;
}

double arclength_xy(const std::vector<MapVertex>& verts) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < verts.size(); ++i) len += xy_dist(verts[i], verts[i + 1]);
  return len;
}

}  // namespace

LaplaceScale scale_from_variance(double var_x, double var_y) {
  if (var_x <= 0.0 || var_y <= 0.0) throw std::invalid_argument("variance must be positive");
  return {std::sqrt(var_x / 2.0), std::sqrt(var_y / 2.0)};
}

std::string to_string(ElementClass c) {
  switch (c) {
    case ElementClass::PedestrianCrossing: return "ped";
    case ElementClass::Divider: return "div";
    case ElementClass::Boundary: return "bou";
  }
  throw std::invalid_argument("unknown element class");
}

ElementClass element_class_from_string(const std::string& s) {
  if (s == "ped") return ElementClass::PedestrianCrossing;
  if (s == "div") return ElementClass::Divider;
  if (s == "bou") return ElementClass::Boundary;
  throw std::invalid_argument("unknown element class: " + s);
}

const MapElement* VectorMap::find(const std::string& id) const {
  for (const auto& e : elements) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

void validate(const MapElement& element) {
  if (element.id.empty()) throw std::invalid_argument("element id must be non-empty");
  if (static_cast<int>(element.vertices.size()) != kVertexCount) {
    throw std::invalid_argument("element " + element.id + " must have " +
                                std::to_string(kVertexCount) + " vertices");
  }
  if (element.confidence < 0.0 || element.confidence > 1.0) {
    throw std::invalid_argument("element " + element.id + " confidence out of [0,1]");
  }
  for (std::size_t i = 0; i < element.vertices.size(); ++i) {
    const auto& v = element.vertices[i];
    if (!v.position.allFinite()) {
      throw std::invalid_argument("element " + element.id + " has non-finite vertex");
    }
    if (!v.scale.positive()) {
      throw std::invalid_argument("element " + element.id + " has non-positive scale");
    }
    if (i > 0 && xy_dist(element.vertices[i - 1], v) <= 1e-12) {
      throw std::invalid_argument("element " + element.id + " has consecutive duplicate vertices");
    }
  }
}

void validate(const VectorMap& map) {
  std::unordered_set<std::string> ids;
  for (const auto& e : map.elements) {
    validate(e);
    if (!ids.insert(e.id).second) throw std::invalid_argument("duplicate element id: " + e.id);
  }
}

MapElement transform_element(const Pose2& pose, const MapElement& element) {
  MapElement out = element;
  for (auto& v : out.vertices) v.position = pose.apply(v.position);
  return out;
}

VectorMap transform_map(const Pose2& pose, const VectorMap& map) {
  VectorMap out = map;
  for (auto& e : out.elements) {
    for (auto& v : e.vertices) v.position = pose.apply(v.position);
  }
  return out;
}

std::vector<MapVertex> resample_fixed(const std::vector<MapVertex>& polyline, int count) {
  if (count < 2) throw std::invalid_argument("resample count must be >= 2");
  if (polyline.size() < 2) throw std::invalid_argument("polyline needs >= 2 vertices");
  std::vector<double> cum(polyline.size(), 0.0);
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    cum[i] = cum[i - 1] + xy_dist(polyline[i - 1], polyline[i]);
  }
  const double total = cum.back();
  if (total <= 1e-12) throw std::invalid_argument("degenerate zero-length polyline");

  std::vector<MapVertex> out(static_cast<std::size_t>(count));
  out.front() = polyline.front();
  out.back() = polyline.back();
  std::size_t seg = 0;
  for (int k = 1; k + 1 < count; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(count - 1);
    while (seg + 2 < polyline.size() && cum[seg + 1] < s) ++seg;
    const double seg_len = cum[seg + 1] - cum[seg];
    const double t = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
    out[static_cast<std::size_t>(k)] = lerp_vertex(polyline[seg], polyline[seg + 1], t);
  }
  return out;
}

VectorMap crop_map(const VectorMap& map, const Pose2& pose, double range_lon, double range_lat) {
  if (range_lon <= 0.0 || range_lat <= 0.0) {
    throw std::invalid_argument("crop ranges must be positive");
  }
  const Pose2 to_ego = inverse(pose);
  VectorMap out;
  out.version = map.version;
  out.frame = MapFrame::ego;
  for (const auto& element : map.elements) {
    MapElement local = transform_element(to_ego, element);
    const bool any_inside = std::any_of(
        local.vertices.begin(), local.vertices.end(), [&](const MapVertex& v) {
          return std::abs(v.position.x()) <= range_lon && std::abs(v.position.y()) <= range_lat;
        });
    if (!any_inside) continue;
    auto runs = clip_polyline(local.vertices, range_lon, range_lat);
    if (runs.empty()) continue;
    // A polyline may dip out of the box and return; keep the longest piece so
    // the element stays a single fixed-size polyline.
    const auto longest = std::max_element(
        runs.begin(), runs.end(), [](const auto& a, const auto& b) {
          return arclength_xy(a) < arclength_xy(b);
        });
    if (arclength_xy(*longest) <= 1e-9) continue;
    local.vertices = resample_fixed(*longest, kVertexCount);
    out.elements.push_back(std::move(local));
  }
  return out;
}

double chamfer_distance(const MapElement& a, const MapElement& b) {
  if (a.vertices.empty() || b.vertices.empty()) {
    throw std::invalid_argument("chamfer_distance on empty element");
  }
  auto directed = [](const MapElement& from, const MapElement& to) {
    double sum = 0.0;
    for (const auto& v : from.vertices) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& w : to.vertices) {
        best = std::min(best, std::hypot(v.position.x() - w.position.x(),
                                         v.position.y() - w.position.y()));
      }
      sum += best;
    }
    return sum / static_cast<double>(from.vertices.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

double laplace_nll(const MapVertex& pred, const Vec2& truth) {
  if (!pred.scale.positive()) throw std::invalid_argument("laplace_nll: scale must be positive");
  const double rx = std::abs(pred.position.x() - truth.x());
  const double ry = std::abs(pred.position.y() - truth.y());
  return std::log(2.0 * pred.scale.bx) + rx / pred.scale.bx +
         std::log(2.0 * pred.scale.by) + ry / pred.scale.by;
}

}  // namespace mapfuse
