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

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "scanba/se2.hpp"

namespace scanba {

struct CumulativeMask;  // preprocess.hpp

/// A Cartesian intensity image rooted at a sensor pose. Pixels are stored
/// row-major (v-major, then u) with intensities in [0, 1]. The sensor sits at
/// the image center; sensor +x points up in the image (-v), sensor +y right (+u).
struct Scan {
  int id = 0;
  double timestamp_s = 0.0;
  int width = 0;   // u extent, columns
  int height = 0;  // v extent, rows
  double resolution_m = 1.0;
  std::vector<float> pixels;

  float at(int v, int u) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  float& at(int v, int u) { return pixels[static_cast<std::size_t>(v) * width + u]; }

  /// Half-diagonal of the image footprint in meters; bounds the range of any
  /// sampleable point in the sensor frame.
  double footprint_radius_m() const {
    return 0.5 * resolution_m * std::hypot(width - 1.0, height - 1.0);
  }
};

/// Per-sample measurement noise: a constant intensity std-dev plus a term
/// growing linearly with sensor-frame range.
struct WeightModel {
  double sigma_pixel = 0.1;
  double sigma_range_per_m = 0.005;

  /// Inverse variance, variances of the two sources summed.
  double weight(double range_m) const {
    const double sr = sigma_range_per_m * range_m;
    return 1.0 / (sigma_pixel * sigma_pixel + sr * sr);
  }
};

struct SampleResult {
  double intensity = 0.0;
  double weight = 0.0;
  bool valid = false;
  Eigen::Vector2d grad_px = Eigen::Vector2d::Zero();  // d intensity / d (u, v)
  Eigen::Vector2d sensor_pt = Eigen::Vector2d::Zero();  // m in the sensor frame
};

/// World point to pixel coordinates of a scan captured from pose T.
/// With q = T^-1 m: u = q_y / r + (w-1)/2, v = -q_x / r + (h-1)/2.
inline Eigen::Vector2d world_to_pixel(const Eigen::Vector2d& m, const Pose2& T,
                                      const Scan& scan) {
  const Eigen::Vector2d q = transform_point(inverse(T), m);
  return {q.y() / scan.resolution_m + 0.5 * (scan.width - 1),
          -q.x() / scan.resolution_m + 0.5 * (scan.height - 1)};
}

/// Inverse of world_to_pixel.
inline Eigen::Vector2d pixel_to_world(const Eigen::Vector2d& px, const Pose2& T,
                                      const Scan& scan) {
  const Eigen::Vector2d q{(0.5 * (scan.height - 1) - px.y()) * scan.resolution_m,
                          (px.x() - 0.5 * (scan.width - 1)) * scan.resolution_m};
  return transform_point(T, q);
}

/// Bilinear interpolation with its analytic gradient. Uses the right-continuous
/// (floor) cell, so all four neighbors must be in bounds; valid=false otherwise.
struct Interp {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  bool valid = false;
};

inline Interp interpolate(const Scan& scan, const Eigen::Vector2d& px) {
  Interp out;
  const double u = px.x(), v = px.y();
  const int u0 = static_cast<int>(std::floor(u));
  const int v0 = static_cast<int>(std::floor(v));
  if (u0 < 0 || v0 < 0 || u0 + 1 > scan.width - 1 || v0 + 1 > scan.height - 1) {
    return out;
  }
  const double fu = u - u0, fv = v - v0;
  const double i00 = scan.at(v0, u0), i10 = scan.at(v0, u0 + 1);
  const double i01 = scan.at(v0 + 1, u0), i11 = scan.at(v0 + 1, u0 + 1);
  out.value = (1.0 - fv) * ((1.0 - fu) * i00 + fu * i10) +
              fv * ((1.0 - fu) * i01 + fu * i11);
  out.grad.x() = (1.0 - fv) * (i10 - i00) + fv * (i11 - i01);
  out.grad.y() = (1.0 - fu) * (i01 - i00) + fu * (i11 - i10);
  out.valid = true;
  return out;
}

/// Measurement sampling function: projects a world point into the scan and
/// bilinearly interpolates intensity. Out-of-bounds or masked locations come
/// back with valid=false and are skipped by callers, never clamped.
SampleResult sample(const Eigen::Vector2d& m, const Pose2& T, const Scan& scan,
                    const WeightModel& wm, const CumulativeMask* mask = nullptr);

/// d intensity / d xi at xi = 0 for the body-frame perturbation T * exp(xi),
/// assembled from an already-computed pixel gradient and sensor-frame point.
inline Eigen::Vector3d pose_jacobian_from_gradient(const Eigen::Vector2d& grad_px,
                                                   const Eigen::Vector2d& sensor_pt,
                                                   double resolution_m) {
  // grad_px^T * dp/dq * dq/dxi with dp/dq = [0, 1/r; -1/r, 0].
  const double gu = grad_px.x(), gv = grad_px.y();
  const double inv_r = 1.0 / resolution_m;
  return {-(gu * sensor_pt.x() + gv * sensor_pt.y()) * inv_r, gv * inv_r, -gu * inv_r};
}

/// Pose Jacobian of the interpolated intensity at a valid sample location.
/// Throws std::invalid_argument if the sample is invalid.
Eigen::Vector3d sample_jacobian_pose(const Eigen::Vector2d& m, const Pose2& T,
                                     const Scan& scan);

}  // namespace scanba
