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

#include <optional>
#include <utility>
#include <vector>

#include "scanba/se2.hpp"

namespace scanba {

struct SelfConsistency {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
  int pairs = 0;
};

struct LocRpe {
  double longitudinal_m = 0.0;
  double lateral_m = 0.0;
  double yaw_deg = 0.0;
  int pairs = 0;
};

struct MetricReport {
  double ate_m = 0.0;
  double epe_m = 0.0;
  std::optional<SelfConsistency> self_consistency;
  std::optional<LocRpe> loc_rpe;
};

/// Closed-form SE(2) registration (rotation + translation, no scale)
/// minimizing the sum of squared distances from aligned est points to gt.
Pose2 align_trajectories(const Trajectory& est, const Trajectory& gt);

/// RMSE of position error after optimal rigid alignment. Throws
/// std::invalid_argument on mismatched lengths or fewer than two poses.
double ate(const Trajectory& est, const Trajectory& gt);

/// Translation norm of (T_N^gt)^-1 T_s^gt (T_s^est)^-1 T_N^est, the start-to-end
/// loop discrepancy. start_index selects T_s and defaults to the first pose.
double epe(const Trajectory& est, const Trajectory& gt, int start_index = 0);

/// Relative-pose error between trajectory revisits: each pose is paired with
/// the Euclidean-nearest pose at least min_travel_m away by gt arc length but
/// within max_euclid_m. No qualifying pair anywhere -> nullopt.
std::optional<SelfConsistency> self_consistency(const Trajectory& est,
                                                const Trajectory& gt,
                                                double min_travel_m = 300.0,
                                                double max_euclid_m = 25.0);

/// Localization error per associated pair (reference index, localized index),
/// expressed in the reference pose's body frame and split into longitudinal
/// (body x) and lateral (body y) RMSE. Throws on empty associations.
LocRpe loc_rpe(const Trajectory& reference, const Trajectory& localized,
               const std::vector<std::pair<int, int>>& associations);

}  // namespace scanba
