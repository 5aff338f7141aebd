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

#include "scanba/ba_solver.hpp"
#include "scanba/sim.hpp"

namespace scanba::testing {

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Smooth wall-free world: Gaussian blobs only, so rendered scans carry
/// usable gradients everywhere.
inline SyntheticWorld blob_world(double extent, std::uint64_t seed, int blobs = 40) {
  WorldSpec spec;
  spec.extent_x_m = extent;
  spec.extent_y_m = extent;
  spec.features.wall_segments = 0;
  spec.features.blobs = blobs;
  spec.features.blob_sigma_min_m = 1.5;
  spec.features.blob_sigma_max_m = 4.0;
  spec.features.clutter_density = 0.0;
  return generate_world(spec, seed);
}

struct BAInstance {
  SyntheticWorld world;
  Trajectory gt;
  BAProblem problem;  // init_poses filled with gt; perturb afterwards if needed
};

inline BAInstance render_instance(SyntheticWorld world, const Trajectory& gt,
                                  double noise, double r_v, std::uint64_t seed,
                                  int scan_px = 64, double scan_res = 0.5) {
  BAInstance inst;
  inst.world = std::move(world);
  inst.gt = gt;
  RenderOptions opts;
  opts.noise_sigma = noise;
  for (std::size_t n = 0; n < gt.size(); ++n) {
    Scan scan = render_scan(inst.world, gt[n].pose, scan_px, scan_px, scan_res, opts,
                            mix(seed, n));
    scan.id = static_cast<int>(n);
    scan.timestamp_s = gt[n].timestamp_s;
    inst.problem.scans.push_back(std::move(scan));
  }
  inst.problem.init_poses = gt;
  inst.problem.grid = bounds_from_trajectory(
      gt, inst.problem.scans.front().footprint_radius_m(), r_v);
  return inst;
}

/// N scans captured from the same spot, each with its own noise draw.
inline BAInstance stationary_instance(int n_poses, double noise, double r_v,
                                      std::uint64_t seed, int scan_px = 64,
                                      double scan_res = 0.5) {
  Trajectory gt;
  for (int n = 0; n < n_poses; ++n) gt.push_back({double(n), Pose2::identity()});
  return render_instance(blob_world(80.0, mix(seed, 9000)), gt, noise, r_v, seed,
                         scan_px, scan_res);
}

inline BAInstance loop_instance(int n_poses, double radius, double noise, double r_v,
                                std::uint64_t seed, int scan_px = 64,
                                double scan_res = 0.5) {
  const Trajectory gt = circle_trajectory(radius, n_poses);
  const double extent = 2.0 * radius + scan_px * scan_res + 20.0;
  return render_instance(blob_world(extent, mix(seed, 9000), 120), gt, noise, r_v, seed,
                         scan_px, scan_res);
}

}  // namespace scanba::testing
