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

#include <string>

#include "scanba/ba_solver.hpp"
#include "scanba/mapgrid.hpp"
#include "scanba/preprocess.hpp"
#include "scanba/scan.hpp"
#include "scanba/se2.hpp"

namespace scanba {

enum class LocalizeStatus {
  kConverged,
  kMaxIterations,
  kDiverged,            // cost could not be decreased; pose holds the last accept
  kInsufficientOverlap, // fewer than kMinResiduals valid residuals at the start
};

inline const char* to_string(LocalizeStatus s) {
  switch (s) {
    case LocalizeStatus::kConverged: return "converged";
    case LocalizeStatus::kMaxIterations: return "max_iterations";
    case LocalizeStatus::kDiverged: return "diverged";
    case LocalizeStatus::kInsufficientOverlap: return "insufficient_overlap";
  }
  return "unknown";
}

struct LocalizeResult {
  Pose2 pose;
  ConvergenceReport report;
  LocalizeStatus status = LocalizeStatus::kConverged;
};

inline SolverConfig default_localizer_config() {
  SolverConfig c;
  c.max_iterations = 20;  // per-frame budget
  return c;
}

/// Single-pose direct localization against a fixed intensity map.
struct LocalizerState {
  Pose2 pose;
  const GridMap* map = nullptr;
  WeightModel wm;
  SolverConfig config = default_localizer_config();
  ConvergenceReport last_report;
};

inline constexpr int kMinResiduals = 10;

/// Gauss-Newton over the single pose: one residual per observed map cell
/// inside the scan's footprint, with the map intensities held constant.
/// Updates state.pose and state.last_report on success; on divergence the
/// pose holds the last accepted iterate.
LocalizeResult localize_frame(LocalizerState& state, const Scan& scan,
                              const CumulativeMask* mask = nullptr);

/// Dead-reckons the estimate to the next frame with a body-frame odometry
/// increment. Updates and returns state.pose.
Pose2 propagate(LocalizerState& state, const Pose2& odom_delta);

}  // namespace scanba
