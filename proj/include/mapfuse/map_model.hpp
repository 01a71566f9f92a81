#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapfuse/geometry.hpp"

namespace mapfuse {

/// Every map element carries exactly this many ordered vertices.
inline constexpr int kVertexCount = 20;

/// Per-axis dispersion of a univariate Laplace density. Variance is 2*b^2,
/// mean absolute deviation is b.
struct LaplaceScale {
  double bx = 0.1;
  double by = 0.1;

  double var_x() const { return 2.0 * bx * bx; }
  double var_y() const { return 2.0 * by * by; }
  bool positive() const { return bx > 0.0 && by > 0.0; }
};

LaplaceScale scale_from_variance(double var_x, double var_y);

struct MapVertex {
  Vec3 position{0.0, 0.0, 0.0};
  LaplaceScale scale{};
};

enum class ElementClass { PedestrianCrossing, Divider, Boundary };

inline constexpr ElementClass kAllClasses[] = {
    ElementClass::PedestrianCrossing, ElementClass::Divider, ElementClass::Boundary};

std::string to_string(ElementClass c);
ElementClass element_class_from_string(const std::string& s);

/// One polyline map element: ordered vertices (always kVertexCount of them
/// once finalized), a class label and a detection confidence in [0, 1].
struct MapElement {
  std::string id;
  ElementClass cls = ElementClass::Divider;
  std::vector<MapVertex> vertices;
  double confidence = 1.0;
};

enum class MapFrame { world, ego };

/// A set of polyline elements plus a monotone version counter.
struct VectorMap {
  std::vector<MapElement> elements;
  std::int64_t version = 0;
  MapFrame frame = MapFrame::world;

  const MapElement* find(const std::string& id) const;
};

/// Throws std::invalid_argument when an invariant is broken (vertex count,
/// duplicate ids, non-positive scales, consecutive duplicate vertices).
void validate(const MapElement& element);
void validate(const VectorMap& map);

MapElement transform_element(const Pose2& pose, const MapElement& element);
VectorMap transform_map(const Pose2& pose, const VectorMap& map);

/// Crops `map` (world frame) to the ego box [-range_lon, range_lon] x
/// [-range_lat, range_lat] around `pose`. Elements with at least one vertex
/// inside are kept, clipped at the box boundary and resampled back to
/// kVertexCount vertices. Output is in the ego frame of `pose`.
VectorMap crop_map(const VectorMap& map, const Pose2& pose, double range_lon = 36.0,
                   double range_lat = 18.0);

/// Resamples a polyline to `count` vertices equally spaced by xy arclength.
/// Endpoints are preserved exactly; z and scales interpolate linearly.
std::vector<MapVertex> resample_fixed(const std::vector<MapVertex>& polyline, int count);

/// Symmetric Chamfer distance over xy vertex sets: mean nearest-vertex
/// distance a->b averaged with b->a.
double chamfer_distance(const MapElement& a, const MapElement& b);

/// Negative log-likelihood of a single vertex under per-axis Laplace
/// densities: sum over x,y of log(2*b) + |residual| / b.
double laplace_nll(const MapVertex& pred, const Vec2& truth);

}  // namespace mapfuse
