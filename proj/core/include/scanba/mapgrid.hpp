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
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scanba/preprocess.hpp"
#include "scanba/scan.hpp"
#include "scanba/se2.hpp"

namespace scanba {

/// Regularly sampled 2D intensity field. Cell (col, row) is centered at
/// origin_m + resolution_m * (col, row); values are weighted means of the
/// scan intensities observing that location. Cells with count == 0 were
/// never observed and report no value (zero is a legitimate intensity).
struct GridMap {
  Eigen::Vector2d origin_m = Eigen::Vector2d::Zero();  // center of cell (0, 0)
  double resolution_m = 1.0;
  int cols = 0;
  int rows = 0;
  std::vector<double> intensity;
  std::vector<double> weight_sum;
  std::vector<std::uint32_t> count;

  std::size_t size() const { return static_cast<std::size_t>(cols) * rows; }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * cols + col;
  }
  bool in_bounds(int col, int row) const {
    return col >= 0 && col < cols && row >= 0 && row < rows;
  }
  Eigen::Vector2d cell_center(int col, int row) const {
    return origin_m + resolution_m * Eigen::Vector2d(col, row);
  }
  bool observed(int col, int row) const { return count[index(col, row)] > 0; }
};

/// Empty grid covering the axis-aligned bounding box of the trajectory,
/// inflated by scan_extent_m, with cell centers on integer multiples of
/// resolution_m. Throws std::invalid_argument on an empty trajectory.
GridMap bounds_from_trajectory(const Trajectory& traj, double scan_extent_m,
                               double resolution_m);

/// Closed-form weighted-mean map: for every cell, the mean of the valid,
/// unmasked scan intensities weighted by their inverse variances. Purely
/// per-cell; no global system is formed. masks may be empty.
void build_map(const std::vector<Scan>& scans, const Trajectory& poses,
               const WeightModel& wm, const std::vector<CumulativeMask>& masks,
               GridMap& grid, int threads = 0);

/// Nearest-cell lookup of (intensity, accumulated weight). Out-of-bounds or
/// unobserved cells yield no value.
std::optional<std::pair<double, double>> query(const GridMap& map,
                                               const Eigen::Vector2d& m);

}  // namespace scanba
