#include "mapfuse/perception_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mapfuse {

double RandomStream::uniform() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RandomStream::normal(double sigma) {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RandomStream::laplace(double scale) {
  const double u = uniform() - 0.5;
  const double t = std::max(1.0 - 2.0 * std::abs(u), 1e-300);
  const double mag = -scale * std::log(t);
  return u < 0.0 ? -mag : mag;
}

bool RandomStream::bernoulli(double p) { return uniform() < p; }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the combined word
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL + 0xBF58476D1CE4E5B9ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void validate(const NoiseConfig& cfg) {
  if (cfg.sigma_lat < 0.0 || cfg.sigma_lon < 0.0 || cfg.sigma_yaw_deg < 0.0) {
    throw std::invalid_argument("noise sigmas must be >= 0");
  }
  if (cfg.scale_min <= 0.0 || cfg.scale_max < cfg.scale_min) {
    throw std::invalid_argument("vertex scale range invalid");
  }
  if (cfg.dropout_prob < 0.0 || cfg.dropout_prob > 1.0 || cfg.fake_prob < 0.0 ||
      cfg.fake_prob > 1.0) {
    throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  if (cfg.range_lon <= 0.0 || cfg.range_lat <= 0.0) {
    throw std::invalid_argument("perception ranges must be positive");
  }
  if (cfg.miscalibration <= 0.0) throw std::invalid_argument("miscalibration must be > 0");
}

Pose2 sample_init_pose(const Pose2& gt, const NoiseConfig& cfg, RandomStream& rng) {
  const double lon = rng.normal(cfg.sigma_lon);
  const double lat = rng.normal(cfg.sigma_lat);
  const double yaw = rng.normal(cfg.sigma_yaw_deg) * M_PI / 180.0;
  return compose(gt, Pose2{lon, lat, yaw});
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double min_vertex_distance(const MapElement& a, const MapElement& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : a.vertices) {
    for (const auto& w : b.vertices) {
      best = std::min(best, std::hypot(v.position.x() - w.position.x(),
                                       v.position.y() - w.position.y()));
    }
  }
  return best;
}

}  // namespace

TraversalFrame synthesize_frame(const VectorMap& world, const Pose2& gt_pose,
                                const NoiseConfig& cfg, RandomStream& rng) {
  validate(cfg);
  TraversalFrame frame;
  frame.gt_pose = gt_pose;

  const VectorMap cropped = crop_map(world, gt_pose, cfg.range_lon, cfg.range_lat);
  frame.obs.frame = MapFrame::ego;
  frame.obs.version = world.version;

  for (const auto& element : cropped.elements) {
    if (rng.bernoulli(cfg.dropout_prob)) continue;  // occlusion
    MapElement noisy = element;
    for (auto& v : noisy.vertices) {
      const double b = rng.uniform(cfg.scale_min, cfg.scale_max);
      v.position.x() += rng.laplace(b);
      v.position.y() += rng.laplace(b);
      v.scale = LaplaceScale{b * cfg.miscalibration, b * cfg.miscalibration};
    }
    noisy.confidence = clamp01(cfg.conf_matched + rng.normal(cfg.conf_sigma));
    frame.obs.elements.push_back(std::move(noisy));
  }

  // Fake detections: short random polylines kept clear of every true element.
  int fake_seq = 0;
  for (std::size_t i = 0; i < cropped.elements.size(); ++i) {
    if (!rng.bernoulli(cfg.fake_prob)) continue;
    for (int attempt = 0; attempt < 40; ++attempt) {
      const double cx = rng.uniform(-0.8 * cfg.range_lon, 0.8 * cfg.range_lon);
      const double cy = rng.uniform(-0.8 * cfg.range_lat, 0.8 * cfg.range_lat);
      const double heading = rng.uniform(0.0, 2.0 * M_PI);
      const double half = 0.5 * rng.uniform(4.0, 12.0);
      MapElement fake;
      fake.id = "fake_" + std::to_string(fake_seq);
      fake.cls = kAllClasses[static_cast<std::size_t>(rng.uniform(0.0, 3.0))];
      std::vector<MapVertex> ends(2);
      ends[0].position = Vec3{cx - half * std::cos(heading), cy - half * std::sin(heading), 0.0};
      ends[1].position = Vec3{cx + half * std::cos(heading), cy + half * std::sin(heading), 0.0};
      fake.vertices = resample_fixed(ends, kVertexCount);
      bool clear = true;
      for (const auto& real : cropped.elements) {
        if (min_vertex_distance(fake, real) < cfg.fake_clearance) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      for (auto& v : fake.vertices) {
        const double b = rng.uniform(cfg.scale_min, cfg.scale_max);
        v.scale = LaplaceScale{b, b};
      }
      fake.confidence = clamp01(cfg.conf_fake + rng.normal(cfg.conf_sigma));
      frame.obs.elements.push_back(std::move(fake));
      ++fake_seq;
      break;
    }
  }

  frame.init_pose = sample_init_pose(gt_pose, cfg, rng);
  return frame;
}

VectorMap apply_changes(const VectorMap& world, const ChangeSpec& spec) {
  VectorMap out = world;
  int insert_seq = 0;
  for (const auto& op : spec.ops) {
    if (op.kind == ChangeOp::Kind::remove) {
      const auto it = std::find_if(out.elements.begin(), out.elements.end(),
                                   [&](const MapElement& e) { return e.id == op.id; });
      if (it == out.elements.end()) {
        throw std::invalid_argument("apply_changes: unknown element id: " + op.id);
      }
      out.elements.erase(it);
    } else {
      if (op.geometry.size() < 2) {
        throw std::invalid_argument("apply_changes: insert needs >= 2 points");
      }
      MapElement e;
      e.id = op.id.empty() ? "ins_" + std::to_string(out.version) + "_" +
                                 std::to_string(insert_seq++)
                           : op.id;
      e.cls = op.cls;
      std::vector<MapVertex> pts;
      for (const auto& p : op.geometry) {
        MapVertex v;
        v.position = p;
        v.scale = LaplaceScale{0.02, 0.02};
        pts.push_back(v);
      }
      e.vertices = resample_fixed(pts, kVertexCount);
      e.confidence = 1.0;
      out.elements.push_back(std::move(e));
    }
  }
  out.version = world.version + 1;
  validate(out);
  return out;
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "straight") return ScenarioKind::straight;
  if (s == "turning") return ScenarioKind::turning;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

std::string to_string(ScenarioKind kind) {
  return kind == ScenarioKind::straight ? "straight" : "turning";
}

namespace {

constexpr double kGtScale = 0.02;
constexpr double kLaneHalfWidth = 7.0;
constexpr double kSegmentLength = 20.0;
constexpr double kCrosswalkSpacing = 30.0;
constexpr double kTrajectoryStep = 2.0;

MapElement line_element(const std::string& id, ElementClass cls, const Vec3& a, const Vec3& b) {
  MapElement e;
  e.id = id;
  e.cls = cls;
  e.vertices.resize(kVertexCount);
  for (int k = 0; k < kVertexCount; ++k) {
    const double t = static_cast<double>(k) / (kVertexCount - 1);
    e.vertices[static_cast<std::size_t>(k)].position = (1.0 - t) * a + t * b;
    e.vertices[static_cast<std::size_t>(k)].scale = LaplaceScale{kGtScale, kGtScale};
  }
  e.confidence = 1.0;
  return e;
}

// Arc sampled exactly on the circle of radius r around `center`, from angle
// a0 to a1, so vertices satisfy |p - center| = r to machine precision.
MapElement arc_element(const std::string& id, ElementClass cls, const Vec2& center, double r,
                       double a0, double a1) {
  MapElement e;
  e.id = id;
  e.cls = cls;
  e.vertices.resize(kVertexCount);
  for (int k = 0; k < kVertexCount; ++k) {
    const double t = static_cast<double>(k) / (kVertexCount - 1);
    const double a = (1.0 - t) * a0 + t * a1;
    e.vertices[static_cast<std::size_t>(k)].position =
        Vec3{center.x() + r * std::cos(a), center.y() + r * std::sin(a), 0.0};
    e.vertices[static_cast<std::size_t>(k)].scale = LaplaceScale{kGtScale, kGtScale};
  }
  e.confidence = 1.0;
  return e;
}

std::string seq_id(const std::string& stem, int i) {
  return stem + (i < 10 ? "0" : "") + std::to_string(i);
}

}  // namespace

Scenario generate_scenario(ScenarioKind kind, double length, RandomStream& rng) {
  if (length <= 0.0) throw std::invalid_argument("scenario length must be positive");
  Scenario sc;
  sc.world.version = 1;
  sc.world.frame = MapFrame::world;

  const double lane_offsets[] = {-3.5, 0.0, 3.5};
  const int n_segments = std::max(1, static_cast<int>(std::ceil(length / kSegmentLength)));

  if (kind == ScenarioKind::straight) {
    for (int s = 0; s < n_segments; ++s) {
      const double x0 = kSegmentLength * s;
      const double x1 = std::min(length, x0 + kSegmentLength);
      if (x1 - x0 < 2.0) break;
      sc.world.elements.push_back(line_element(seq_id("bou_l_", s), ElementClass::Boundary,
                                               {x0, kLaneHalfWidth, 0.0},
                                               {x1, kLaneHalfWidth, 0.0}));
      sc.world.elements.push_back(line_element(seq_id("bou_r_", s), ElementClass::Boundary,
                                               {x0, -kLaneHalfWidth, 0.0},
                                               {x1, -kLaneHalfWidth, 0.0}));
      for (std::size_t l = 0; l < 3; ++l) {
        sc.world.elements.push_back(
            line_element(seq_id("div_" + std::to_string(l) + "_", s), ElementClass::Divider,
                         {x0, lane_offsets[l], 0.0}, {x1, lane_offsets[l], 0.0}));
      }
    }
    int c = 0;
    for (double x = 0.6 * kCrosswalkSpacing; x < length - 4.0; x += kCrosswalkSpacing) {
      const double jitter = rng.uniform(-3.0, 3.0);
      const double cx = std::clamp(x + jitter, 4.0, length - 4.0);
      sc.world.elements.push_back(line_element(seq_id("ped_", c++),
                                               ElementClass::PedestrianCrossing,
                                               {cx, -kLaneHalfWidth, 0.0},
                                               {cx, kLaneHalfWidth, 0.0}));
    }
    for (double s = 0.0; s <= length + 1e-9; s += kTrajectoryStep) {
      sc.trajectory.push_back(Pose2{std::min(s, length), 0.0, 0.0});
    }
  } else {
    const double radius = std::max(length / (0.5 * M_PI), 2.5 * kLaneHalfWidth);
    const Vec2 center{0.0, radius};
    const double total_angle = length / radius;
    const double a_start = -M_PI / 2.0;  // trajectory starts at the origin heading +x
    const int n_arcs = std::max(1, static_cast<int>(std::ceil(length / kSegmentLength)));
    const double arc_step = total_angle / n_arcs;
    for (int s = 0; s < n_arcs; ++s) {
      const double a0 = a_start + arc_step * s;
      const double a1 = a_start + arc_step * (s + 1);
      sc.world.elements.push_back(arc_element(seq_id("bou_o_", s), ElementClass::Boundary,
                                              center, radius + kLaneHalfWidth, a0, a1));
      sc.world.elements.push_back(arc_element(seq_id("bou_i_", s), ElementClass::Boundary,
                                              center, radius - kLaneHalfWidth, a0, a1));
      for (std::size_t l = 0; l < 3; ++l) {
        sc.world.elements.push_back(arc_element(seq_id("div_" + std::to_string(l) + "_", s),
                                                ElementClass::Divider, center,
                                                radius - lane_offsets[l], a0, a1));
      }
    }
    int c = 0;
    for (double s = 0.6 * kCrosswalkSpacing; s < length - 4.0; s += kCrosswalkSpacing) {
      const double jitter = rng.uniform(-3.0, 3.0);
      const double a = a_start + std::clamp(s + jitter, 4.0, length - 4.0) / radius;
      const Vec3 inner{center.x() + (radius - kLaneHalfWidth) * std::cos(a),
                       center.y() + (radius - kLaneHalfWidth) * std::sin(a), 0.0};
      const Vec3 outer{center.x() + (radius + kLaneHalfWidth) * std::cos(a),
                       center.y() + (radius + kLaneHalfWidth) * std::sin(a), 0.0};
      sc.world.elements.push_back(
          line_element(seq_id("ped_", c++), ElementClass::PedestrianCrossing, inner, outer));
    }
    for (double s = 0.0; s <= length + 1e-9; s += kTrajectoryStep) {
      const double a = a_start + std::min(s, length) / radius;
      sc.trajectory.push_back(Pose2{center.x() + radius * std::cos(a),
                                    center.y() + radius * std::sin(a),
                                    normalize_angle(a + M_PI / 2.0)});
    }
  }
  validate(sc.world);
  return sc;
}

}  // namespace mapfuse
