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
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scanba/mapgrid.hpp"
#include "scanba/scan.hpp"
#include "scanba/se2.hpp"

namespace scanba {

/// Parameters of the generated structure. An empty corridor band of
/// half-width empty_corridor_fraction * extent/2 along the x axis is kept
/// free of features to mimic feature-starved stretches.
struct FeatureSpec {
  int wall_segments = 25;
  int blobs = 40;
  double blob_sigma_min_m = 1.5;
  double blob_sigma_max_m = 4.0;
  double wall_thickness_m = 0.5;
  double clutter_density = 0.002;  // fraction of cells speckled
  double empty_corridor_fraction = 0.0;
};

struct WorldSpec {
  double extent_x_m = 120.0;
  double extent_y_m = 120.0;
  double resolution_m = 0.25;
  FeatureSpec features;
};

/// A synthetic ground-truth intensity field, deterministic per seed.
struct SyntheticWorld {
  GridMap truth_map;
  FeatureSpec feature_spec;
  std::uint64_t rng_seed = 0;
};

SyntheticWorld generate_world(const WorldSpec& spec, std::uint64_t seed);

/// Feature-rich preset: walls, smooth blobs, light clutter.
WorldSpec structured_world_spec(double extent_x_m = 120.0, double extent_y_m = 120.0);
/// Sparse preset: nearly everything inside the corridor band is empty, so
/// rendered scans fall below typical occupancy bounds.
WorldSpec sparse_corridor_world_spec(double extent_x_m = 200.0, double extent_y_m = 60.0);

/// Bilinear truth lookup at a world point; unobserved/out-of-bounds reads 0.
double sample_world_bilinear(const GridMap& truth, const Eigen::Vector2d& m);

struct RenderOptions {
  double noise_sigma = 0.0;       // zero-mean Gaussian, clipped to [0, 1]
  bool occlusion = false;         // zero out pixels beyond the first strong hit
  double occlusion_threshold = 0.8;
};

/// Renders the scan a sensor at `pose` would capture: every pixel is the
/// bilinearly interpolated truth intensity at its world point, plus noise.
Scan render_scan(const SyntheticWorld& world, const Pose2& pose, int width,
                 int height, double resolution_m, const RenderOptions& opts,
                 std::uint64_t seed);

/// Uniform per-axis pose noise applied to every pose except the first (the
/// gauge anchor). Deterministic per seed.
Trajectory perturb_trajectory(const Trajectory& traj, double max_trans_m,
                              double max_rot_deg, std::uint64_t seed);

/// Trajectory presets used by the simulator.
Trajectory circle_trajectory(double radius_m, int num_poses, double period_s = 1.0);
Trajectory line_trajectory(double length_m, int num_poses, double period_s = 1.0);
/// Out along +x and back, the return pass offset laterally by lane_offset_m.
Trajectory out_and_back_trajectory(double length_m, double spacing_m,
                                   double lane_offset_m = 3.0, double period_s = 1.0);

}  // namespace scanba
