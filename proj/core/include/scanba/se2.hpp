// Copyright 2026, the scanba authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

namespace scanba {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double theta) {
  double a = std::remainder(theta, 2.0 * kPi);
  if (a <= -kPi) a = kPi;
  return a;
}

/// A rigid transform in the plane. Applies as p_world = R(theta) * p + (x, y).
/// theta is kept in (-pi, pi] by all operations below.
struct Pose2 {
  double theta = 0.0;
  double x = 0.0;
  double y = 0.0;

  static Pose2 identity() { return {}; }

  Eigen::Vector2d translation() const { return {x, y}; }
  Eigen::Matrix2d rotation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }
};

/// Tangent-space increment (body frame): rotation rate first, then translation.
struct Twist2 {
  double dtheta = 0.0;
  double dx = 0.0;
  double dy = 0.0;

  Eigen::Vector3d vec() const { return {dtheta, dx, dy}; }
  static Twist2 from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
  double norm() const { return vec().norm(); }
};

/// Transform applying b first, then a.
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {wrap_angle(a.theta + b.theta),
          a.x + c * b.x - s * b.y,
          a.y + s * b.x + c * b.y};
}

inline Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  // R(-theta) * -t
  return {wrap_angle(-p.theta), -(c * p.x + s * p.y), -(-s * p.x + c * p.y)};
}

inline Eigen::Vector2d transform_point(const Pose2& p, const Eigen::Vector2d& pt) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  return {p.x + c * pt.x() - s * pt.y(), p.y + s * pt.x() + c * pt.y()};
}

// Below this the V(theta) integral matrix is taken as identity.
inline constexpr double kSmallAngle = 1e-9;

inline Pose2 exp(const Twist2& xi) {
  const double t = xi.dtheta;
  if (std::abs(t) < kSmallAngle) {
    return {wrap_angle(t), xi.dx, xi.dy};
  }
  const double a = std::sin(t) / t;
  const double b = (1.0 - std::cos(t)) / t;
  // V(theta) = [a, -b; b, a]
  return {wrap_angle(t), a * xi.dx - b * xi.dy, b * xi.dx + a * xi.dy};
}

inline Twist2 log(const Pose2& p) {
  const double t = p.theta;
  if (std::abs(t) < kSmallAngle) {
    return {t, p.x, p.y};
  }
  const double half = 0.5 * t;
  const double a = half / std::tan(half);
  // V(theta)^-1 = [a, half; -half, a]
  return {t, a * p.x + half * p.y, -half * p.x + a * p.y};
}

/// Right (body-frame) perturbation: T * exp(xi). Invariant to re-expression
/// of the world frame, so Jacobians built on it do not depend on where the
/// global origin sits.
inline Pose2 apply_perturbation(const Pose2& p, const Twist2& xi) {
  return compose(p, exp(xi));
}

/// Derivative of q(xi) = (T * exp(xi))^-1 * m with respect to xi at xi = 0,
/// given q = T^-1 * m. Columns ordered (dtheta, dx, dy).
inline Eigen::Matrix<double, 2, 3> point_in_sensor_jacobian(const Eigen::Vector2d& q) {
  Eigen::Matrix<double, 2, 3> j;
  j << q.y(), -1.0, 0.0,
      -q.x(), 0.0, -1.0;
  return j;
}

/// A pose tagged with its acquisition time.
struct StampedPose {
  double timestamp_s = 0.0;
  Pose2 pose;
};

using Trajectory = std::vector<StampedPose>;

}  // namespace scanba
