#pragma once

#include <Eigen/Core>

namespace mapfuse {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;

/// Wraps an angle to (-pi, pi].
double normalize_angle(double yaw);

/// Planar rigid pose. Maps child-frame points into the parent frame:
/// p_parent = R(yaw) * p_child + (x, y). z passes through untouched.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}

  Mat2 rotation() const;
  Vec2 translation() const { return {x, y}; }

  Vec2 apply(const Vec2& p) const;
  Vec3 apply(const Vec3& p) const;
};

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& p);

/// Relative pose of `b` expressed in the frame of `a`: inverse(a) * b.
Pose2 between(const Pose2& a, const Pose2& b);

}  // namespace mapfuse
