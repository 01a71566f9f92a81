#include "mapfuse/geometry.hpp"

#include <cmath>

namespace mapfuse {

double normalize_angle(double yaw) {
  double a = std::fmod(yaw + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

Mat2 Pose2::rotation() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Vec2 Pose2::apply(const Vec2& p) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * p.x() - s * p.y() + x, s * p.x() + c * p.y() + y};
}

Vec3 Pose2::apply(const Vec3& p) const {
  const Vec2 q = apply(Vec2{p.x(), p.y()});
  return {q.x(), q.y(), p.z()};
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const Vec2 t = a.apply(Vec2{b.x, b.y});
  return {t.x(), t.y(), a.yaw + b.yaw};
}

Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  return {-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.yaw};
}

Pose2 between(const Pose2& a, const Pose2& b) { return compose(inverse(a), b); }

}  // namespace mapfuse
