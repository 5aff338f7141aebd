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

#include <vector>

#include <Eigen/Core>

#include "scanba/scan.hpp"
#include "scanba/se2.hpp"

namespace scanba {

/// Motion gate for admitting a pose (and its scan) into the problem.
struct KeyframePolicy {
  double min_translation_m = 5.0;
  double min_rotation_rad = 30.0 * kPi / 180.0;
};

/// Adaptive blurring of feature-sparse scans: blur until the fraction of
/// pixels above intensity_threshold reaches occupancy_bound.
struct BlurPolicy {
  double intensity_threshold = 0.5;
  double occupancy_bound = 0.003;
  double sigma_step_px = 1.0;
  double sigma_max_px = 15.0;
};

/// Per-ray running intensity sums, normalized so a quarter-intensity ray
/// saturates at 1.0. High scores on zero returns flag occlusion shadows;
/// very high scores anywhere flag saturated ("ringing") azimuths.
struct CumulativeMask {
  int width = 0;
  int height = 0;
  std::vector<float> cumulative;
  double zero_ignore_threshold = 0.2;
  double saturation_threshold = 0.9;

  float at(int v, int u) const { return cumulative[static_cast<std::size_t>(v) * width + u]; }
  float& at(int v, int u) { return cumulative[static_cast<std::size_t>(v) * width + u]; }

  /// Bilinear score lookup at a continuous pixel position (clamped to bounds).
  double score_at(const Eigen::Vector2d& px) const;
};

/// Greedy motion-based keyframe selection. The first pose is always kept;
/// a pose is kept iff it moved at least min_translation_m or rotated at
/// least min_rotation_rad relative to the last kept pose.
std::vector<int> select_keyframes(const Trajectory& traj,
                                  const KeyframePolicy& policy = {});

struct BlurredScan {
  Scan scan;
  double sigma_px = 0.0;
};

/// Fraction of pixels strictly above the threshold.
double occupancy(const Scan& scan, double intensity_threshold);

/// Gaussian blur with a truncated 3-sigma kernel and zero-padded borders.
Scan gaussian_blur(const Scan& scan, double sigma_px);

/// Returns the scan unchanged when it already meets the occupancy bound,
/// otherwise the original blurred at the smallest sigma on the policy's
/// schedule that meets it (or sigma_max_px when none does).
BlurredScan adaptive_blur(const Scan& scan, const BlurPolicy& policy = {});

/// Casts one ray per border pixel from the sensor center, accumulating
/// bilinearly sampled intensity at 1-pixel steps. Pixels hit by several rays
/// keep the maximum normalized score.
CumulativeMask build_cumulative_mask(const Scan& scan,
                                     const Eigen::Vector2d& sensor_center_px,
                                     double zero_ignore_threshold = 0.2,
                                     double saturation_threshold = 0.9);

/// True iff the measurement at this pixel should be dropped: a zero return in
/// an occlusion shadow, or any return on a saturated stretch of ray.
bool is_excluded(const CumulativeMask& mask, const Eigen::Vector2d& px,
                 double intensity);

}  // namespace scanba
