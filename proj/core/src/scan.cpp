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

#include "scanba/scan.hpp"

#include <stdexcept>

#include "scanba/preprocess.hpp"

namespace scanba {

SampleResult sample(const Eigen::Vector2d& m, const Pose2& T, const Scan& scan,
                    const WeightModel& wm, const CumulativeMask* mask) {
  SampleResult out;
  out.sensor_pt = transform_point(inverse(T), m);
  const Eigen::Vector2d px{
      out.sensor_pt.y() / scan.resolution_m + 0.5 * (scan.width - 1),
      -out.sensor_pt.x() / scan.resolution_m + 0.5 * (scan.height - 1)};
  const Interp it = interpolate(scan, px);
  if (!it.valid) return out;
  if (mask != nullptr && is_excluded(*mask, px, it.value)) return out;
  out.intensity = it.value;
  out.grad_px = it.grad;
  out.weight = wm.weight(out.sensor_pt.norm());
  out.valid = true;
  return out;
}

Eigen::Vector3d sample_jacobian_pose(const Eigen::Vector2d& m, const Pose2& T,
                                     const Scan& scan) {
  const SampleResult s = sample(m, T, scan, WeightModel{});
  if (!s.valid) {
    throw std::invalid_argument("sample_jacobian_pose: sample is out of bounds");
  }
  return pose_jacobian_from_gradient(s.grad_px, s.sensor_pt, scan.resolution_m);
}

}  // namespace scanba
