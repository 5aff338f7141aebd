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

#include "scanba/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace scanba {

namespace {

GridMap empty_grid(double extent_x_m, double extent_y_m, double resolution_m) {
  GridMap g;
  g.resolution_m = resolution_m;
  g.cols = static_cast<int>(std::round(extent_x_m / resolution_m)) + 1;
  g.rows = static_cast<int>(std::round(extent_y_m / resolution_m)) + 1;
  g.origin_m = {-0.5 * (g.cols - 1) * resolution_m, -0.5 * (g.rows - 1) * resolution_m};
  g.intensity.assign(g.size(), 0.0);
  g.weight_sum.assign(g.size(), 1.0);
  g.count.assign(g.size(), 1);
  return g;
}

void stamp_max(GridMap& g, int col, int row, double value) {
  if (!g.in_bounds(col, row)) return;
  double& cell = g.intensity[g.index(col, row)];
  cell = std::max(cell, value);
}

void draw_wall(GridMap& g, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
               double thickness_m, double intensity) {
  const double r = 0.5 * thickness_m;
  const Eigen::Vector2d lo = a.cwiseMin(b).array() - r;
  const Eigen::Vector2d hi = a.cwiseMax(b).array() + r;
  const int c0 = static_cast<int>(std::floor((lo.x() - g.origin_m.x()) / g.resolution_m));
  const int c1 = static_cast<int>(std::ceil((hi.x() - g.origin_m.x()) / g.resolution_m));
  const int r0 = static_cast<int>(std::floor((lo.y() - g.origin_m.y()) / g.resolution_m));
  const int r1 = static_cast<int>(std::ceil((hi.y() - g.origin_m.y()) / g.resolution_m));
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      if (!g.in_bounds(col, row)) continue;
      const Eigen::Vector2d p = g.cell_center(col, row);
      const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      if ((p - (a + t * ab)).norm() <= r) stamp_max(g, col, row, intensity);
    }
  }
}

void draw_blob(GridMap& g, const Eigen::Vector2d& c, double sigma_m, double peak) {
  const double reach = 3.0 * sigma_m;
  const int c0 = static_cast<int>(std::floor((c.x() - reach - g.origin_m.x()) / g.resolution_m));
  const int c1 = static_cast<int>(std::ceil((c.x() + reach - g.origin_m.x()) / g.resolution_m));
  const int r0 = static_cast<int>(std::floor((c.y() - reach - g.origin_m.y()) / g.resolution_m));
  const int r1 = static_cast<int>(std::ceil((c.y() + reach - g.origin_m.y()) / g.resolution_m));
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      if (!g.in_bounds(col, row)) continue;
      const double d2 = (g.cell_center(col, row) - c).squaredNorm();
      const double v = peak * std::exp(-0.5 * d2 / (sigma_m * sigma_m));
      if (v > 1e-4) stamp_max(g, col, row, v);
    }
  }
}

}  // namespace

SyntheticWorld generate_world(const WorldSpec& spec, std::uint64_t seed) {
  SyntheticWorld world;
  world.feature_spec = spec.features;
  world.rng_seed = seed;
  world.truth_map = empty_grid(spec.extent_x_m, spec.extent_y_m, spec.resolution_m);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-0.5 * spec.extent_x_m, 0.5 * spec.extent_x_m);
  std::uniform_real_distribution<double> uy(-0.5 * spec.extent_y_m, 0.5 * spec.extent_y_m);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const double corridor_half =
      0.5 * spec.features.empty_corridor_fraction * spec.extent_y_m;
  const auto in_corridor = [&](const Eigen::Vector2d& p) {
    return std::abs(p.y()) < corridor_half;
  };

  for (int i = 0; i < spec.features.wall_segments; ++i) {
    const Eigen::Vector2d a{ux(rng), uy(rng)};
    const double angle = 2.0 * kPi * u01(rng);
    const double len = 10.0 + 30.0 * u01(rng);
    const Eigen::Vector2d b = a + len * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    const double intensity = 0.6 + 0.4 * u01(rng);
    if (in_corridor(a) || in_corridor(b)) continue;
    draw_wall(world.truth_map, a, b, spec.features.wall_thickness_m, intensity);
  }
  for (int i = 0; i < spec.features.blobs; ++i) {
    const Eigen::Vector2d c{ux(rng), uy(rng)};
    const double sigma = spec.features.blob_sigma_min_m +
                         (spec.features.blob_sigma_max_m - spec.features.blob_sigma_min_m) * u01(rng);
    const double peak = 0.4 + 0.5 * u01(rng);
    if (in_corridor(c)) continue;
    draw_blob(world.truth_map, c, sigma, peak);
  }
  const auto clutter_cells = static_cast<std::size_t>(
      spec.features.clutter_density * static_cast<double>(world.truth_map.size()));
  std::uniform_int_distribution<int> ucol(0, world.truth_map.cols - 1);
  std::uniform_int_distribution<int> urow(0, world.truth_map.rows - 1);
  for (std::size_t i = 0; i < clutter_cells; ++i) {
    const int col = ucol(rng), row = urow(rng);
    const double v = 0.3 + 0.5 * u01(rng);
    if (in_corridor(world.truth_map.cell_center(col, row))) continue;
    stamp_max(world.truth_map, col, row, v);
  }
  for (double& v : world.truth_map.intensity) v = std::clamp(v, 0.0, 1.0);
  return world;
}

WorldSpec structured_world_spec(double extent_x_m, double extent_y_m) {
  WorldSpec spec;
  spec.extent_x_m = extent_x_m;
  spec.extent_y_m = extent_y_m;
  return spec;
}

WorldSpec sparse_corridor_world_spec(double extent_x_m, double extent_y_m) {
  WorldSpec spec;
  spec.extent_x_m = extent_x_m;
  spec.extent_y_m = extent_y_m;
  spec.features.wall_segments = 2;
  spec.features.blobs = 4;
  spec.features.blob_sigma_min_m = 0.5;
  spec.features.blob_sigma_max_m = 1.0;
  spec.features.clutter_density = 0.0;
  spec.features.empty_corridor_fraction = 0.9;
  return spec;
}

double sample_world_bilinear(const GridMap& truth, const Eigen::Vector2d& m) {
  const double cc = (m.x() - truth.origin_m.x()) / truth.resolution_m;
  const double cr = (m.y() - truth.origin_m.y()) / truth.resolution_m;
  const int c0 = static_cast<int>(std::floor(cc));
  const int r0 = static_cast<int>(std::floor(cr));
  if (c0 < 0 || r0 < 0 || c0 + 1 >= truth.cols || r0 + 1 >= truth.rows) return 0.0;
  const double fc = cc - c0, fr = cr - r0;
  const double i00 = truth.intensity[truth.index(c0, r0)];
  const double i10 = truth.intensity[truth.index(c0 + 1, r0)];
  const double i01 = truth.intensity[truth.index(c0, r0 + 1)];
  const double i11 = truth.intensity[truth.index(c0 + 1, r0 + 1)];
  return (1.0 - fr) * ((1.0 - fc) * i00 + fc * i10) + fr * ((1.0 - fc) * i01 + fc * i11);
}

Scan render_scan(const SyntheticWorld& world, const Pose2& pose, int width,
                 int height, double resolution_m, const RenderOptions& opts,
                 std::uint64_t seed) {
  Scan scan;
  scan.width = width;
  scan.height = height;
  scan.resolution_m = resolution_m;
  scan.pixels.assign(static_cast<std::size_t>(width) * height, 0.0f);

  std::vector<double> clean(scan.pixels.size(), 0.0);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Eigen::Vector2d m = pixel_to_world({double(u), double(v)}, pose, scan);
      clean[static_cast<std::size_t>(v) * width + u] =
          sample_world_bilinear(world.truth_map, m);
    }
  }

  std::vector<char> occluded;
  if (opts.occlusion) {
    occluded.assign(clean.size(), 0);
    const Eigen::Vector2d center{0.5 * (width - 1), 0.5 * (height - 1)};
    std::vector<Eigen::Vector2d> targets;
    for (int u = 0; u < width; ++u) {
      targets.emplace_back(u, 0);
      targets.emplace_back(u, height - 1);
    }
    for (int v = 1; v < height - 1; ++v) {
      targets.emplace_back(0, v);
      targets.emplace_back(width - 1, v);
    }
    for (const Eigen::Vector2d& target : targets) {
      const Eigen::Vector2d dir = target - center;
      const double len = dir.norm();
      if (len < 1e-9) continue;
      const Eigen::Vector2d unit = dir / len;
      bool hit = false;
      for (double t = 0.0; t <= len; t += 1.0) {
        const Eigen::Vector2d p = center + t * unit;
        const int u = std::clamp(static_cast<int>(std::lround(p.x())), 0, width - 1);
        const int v = std::clamp(static_cast<int>(std::lround(p.y())), 0, height - 1);
        const std::size_t idx = static_cast<std::size_t>(v) * width + u;
        if (hit) {
          occluded[idx] = 1;
        } else if (clean[idx] > opts.occlusion_threshold) {
          hit = true;
        }
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, opts.noise_sigma);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (!occluded.empty() && occluded[i]) {
      scan.pixels[i] = 0.0f;
      continue;
    }
    double v = clean[i];
    if (opts.noise_sigma > 0.0) v += noise(rng);
    scan.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return scan;
}

Trajectory perturb_trajectory(const Trajectory& traj, double max_trans_m,
                              double max_rot_deg, std::uint64_t seed) {
  Trajectory out = traj;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(-max_trans_m, max_trans_m);
  std::uniform_real_distribution<double> ur(-max_rot_deg * kPi / 180.0,
                                            max_rot_deg * kPi / 180.0);
  for (std::size_t k = 1; k < out.size(); ++k) {
    const double dx = max_trans_m > 0.0 ? ut(rng) : 0.0;
    const double dy = max_trans_m > 0.0 ? ut(rng) : 0.0;
    const double dt = max_rot_deg > 0.0 ? ur(rng) : 0.0;
    out[k].pose.x += dx;
    out[k].pose.y += dy;
    out[k].pose.theta = wrap_angle(out[k].pose.theta + dt);
  }
  return out;
}

Trajectory circle_trajectory(double radius_m, int num_poses, double period_s) {
  Trajectory traj;
  traj.reserve(num_poses);
  for (int k = 0; k < num_poses; ++k) {
    const double phi = 2.0 * kPi * k / num_poses;
    StampedPose s;
    s.timestamp_s = k * period_s;
    s.pose = {wrap_angle(phi + 0.5 * kPi), radius_m * std::cos(phi), radius_m * std::sin(phi)};
    traj.push_back(s);
  }
  return traj;
}

Trajectory line_trajectory(double length_m, int num_poses, double period_s) {
  Trajectory traj;
  traj.reserve(num_poses);
  for (int k = 0; k < num_poses; ++k) {
    StampedPose s;
    s.timestamp_s = k * period_s;
    s.pose = {0.0, num_poses > 1 ? length_m * k / (num_poses - 1) : 0.0, 0.0};
    traj.push_back(s);
  }
  return traj;
}

Trajectory out_and_back_trajectory(double length_m, double spacing_m,
                                   double lane_offset_m, double period_s) {
  Trajectory traj;
  double t = 0.0;
  for (double x = 0.0; x <= length_m + 1e-9; x += spacing_m, t += period_s) {
    traj.push_back({t, {0.0, x, 0.0}});
  }
  for (double x = length_m; x >= -1e-9; x -= spacing_m, t += period_s) {
    traj.push_back({t, {kPi, x, lane_offset_m}});
  }
  return traj;
}

}  // namespace scanba
