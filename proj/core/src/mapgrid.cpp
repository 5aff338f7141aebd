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

#include "scanba/mapgrid.hpp"

#include <cmath>
#include <stdexcept>

#include "scanba/parallel.hpp"

namespace scanba {

namespace {

// Kahan-compensated accumulator; keeps cell means independent of the order
// scans are visited in to well below 1e-10.
struct Compensated {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

GridMap bounds_from_trajectory(const Trajectory& traj, double scan_extent_m,
                               double resolution_m) {
  if (traj.empty()) {
    throw std::invalid_argument("bounds_from_trajectory: empty trajectory");
  }
  double min_x = traj[0].pose.x, max_x = traj[0].pose.x;
  double min_y = traj[0].pose.y, max_y = traj[0].pose.y;
  for (const auto& s : traj) {
    min_x = std::min(min_x, s.pose.x);
    max_x = std::max(max_x, s.pose.x);
    min_y = std::min(min_y, s.pose.y);
    max_y = std::max(max_y, s.pose.y);
  }
  min_x -= scan_extent_m;
  max_x += scan_extent_m;
  min_y -= scan_extent_m;
  max_y += scan_extent_m;

  // Cell centers sit on integer multiples of the resolution.
  const auto lo = [&](double v) { return static_cast<int>(std::floor(v / resolution_m + 0.5)); };
  const auto hi = [&](double v) { return static_cast<int>(std::ceil(v / resolution_m - 0.5)); };
  const int cx0 = lo(min_x), cx1 = hi(max_x);
  const int cy0 = lo(min_y), cy1 = hi(max_y);

  GridMap grid;
  grid.resolution_m = resolution_m;
  grid.origin_m = {cx0 * resolution_m, cy0 * resolution_m};
  grid.cols = cx1 - cx0 + 1;
  grid.rows = cy1 - cy0 + 1;
  grid.intensity.assign(grid.size(), 0.0);
  grid.weight_sum.assign(grid.size(), 0.0);
  grid.count.assign(grid.size(), 0);
  return grid;
}

void build_map(const std::vector<Scan>& scans, const Trajectory& poses,
               const WeightModel& wm, const std::vector<CumulativeMask>& masks,
               GridMap& grid, int threads) {
  if (scans.size() != poses.size()) {
    throw std::invalid_argument("build_map: scans and poses must be index-aligned");
  }
  if (!masks.empty() && masks.size() != scans.size()) {
    throw std::invalid_argument("build_map: masks must be empty or index-aligned");
  }
  std::fill(grid.intensity.begin(), grid.intensity.end(), 0.0);
  std::fill(grid.weight_sum.begin(), grid.weight_sum.end(), 0.0);
  std::fill(grid.count.begin(), grid.count.end(), 0);

  // Conservative per-scan footprint disks for cell pruning.
  std::vector<Eigen::Vector2d> centers(scans.size());
  std::vector<double> radii(scans.size());
  for (std::size_t n = 0; n < scans.size(); ++n) {
    centers[n] = poses[n].pose.translation();
    radii[n] = scans[n].footprint_radius_m();
  }

  // Cells are partitioned into contiguous blocks; each worker owns its block
  // exclusively, so the per-cell accumulators need no synchronization.
  parallel_chunks(grid.size(), threads, [&](int, std::size_t begin, std::size_t end) {
    for (std::size_t cell = begin; cell < end; ++cell) {
      const int row = static_cast<int>(cell) / grid.cols;
      const int col = static_cast<int>(cell) % grid.cols;
      const Eigen::Vector2d m = grid.cell_center(col, row);
      Compensated swi, sw;
      std::uint32_t cnt = 0;
      for (std::size_t n = 0; n < scans.size(); ++n) {
        if ((m - centers[n]).squaredNorm() > radii[n] * radii[n]) continue;
        const CumulativeMask* mask = masks.empty() ? nullptr : &masks[n];
        const SampleResult s = sample(m, poses[n].pose, scans[n], wm, mask);
        if (!s.valid) continue;
        swi.add(s.weight * s.intensity);
        sw.add(s.weight);
        ++cnt;
      }
      if (cnt > 0) {
        grid.intensity[cell] = swi.sum / sw.sum;
        grid.weight_sum[cell] = sw.sum;
        grid.count[cell] = cnt;
      }
    }
  });
}

std::optional<std::pair<double, double>> query(const GridMap& map,
                                               const Eigen::Vector2d& m) {
  const int col = static_cast<int>(std::lround((m.x() - map.origin_m.x()) / map.resolution_m));
  const int row = static_cast<int>(std::lround((m.y() - map.origin_m.y()) / map.resolution_m));
  if (!map.in_bounds(col, row) || !map.observed(col, row)) return std::nullopt;
  const std::size_t i = map.index(col, row);
  return std::make_pair(map.intensity[i], map.weight_sum[i]);
}

}  // namespace scanba
