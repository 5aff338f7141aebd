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
#include <string>

#include "scanba/ba_solver.hpp"
#include "scanba/localizer.hpp"
#include "scanba/preprocess.hpp"
#include "scanba/scan.hpp"
#include "scanba/se2.hpp"

namespace scanba {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNoConverge = 1;
inline constexpr int kExitInputError = 2;

struct SimConfig {
  std::string preset = "structured";    // structured | sparse-corridor
  std::string trajectory = "loop";      // loop | line | corridor
  int num_poses = 40;
  double loop_radius_m = 40.0;
  double line_length_m = 150.0;
  double corridor_length_m = 210.0;
  double corridor_spacing_m = 6.0;
  double corridor_lane_offset_m = 3.0;
  int scan_width = 64;
  int scan_height = 64;
  double scan_resolution_m = 0.5;
  double world_resolution_m = 0.25;
  double noise_sigma = 0.02;
  bool occlusion = false;
  double odom_noise_trans_m = 0.0;
  double odom_noise_rot_deg = 0.0;
  double perturb_trans_m = 0.0;   // applied to the emitted initial trajectory
  double perturb_rot_deg = 0.0;
};

/// Every tunable in one declarative document, pre-filled with the defaults
/// the modules carry. Flags override config-file values; the fully resolved
/// config is written next to each run's outputs.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  WeightModel weight;
  KeyframePolicy keyframe;
  BlurPolicy blur;
  bool use_cumulative_mask = true;
  double cum_low = 0.2;
  double cum_high = 0.9;
  double map_resolution_m = 1.0;
  SolverConfig solver;
  SolverConfig localizer = default_localizer_config();
  SimConfig sim;

  // Paths and per-command switches.
  std::string dataset_dir;
  std::string output_dir;
  std::string map_file;        // stem, without extension
  std::string trajectory_file;
  std::string odometry_file;
  std::string est_file;
  std::string gt_file;
  std::string loc_est_file;
  std::string loc_gt_file;
  std::optional<Pose2> init_pose;
  bool force = false;
  bool dump_hessian_pattern = false;
  std::string export_image_stem;
};

/// Parses a config document, rejecting unknown keys. Missing keys keep their
/// defaults.
RunConfig config_from_json(const std::string& json_text);
std::string config_to_json(const RunConfig& config);

struct Dataset {
  std::vector<Scan> scans;
  Trajectory ground_truth;  // may be empty for externally supplied data
  Trajectory initial;
  Trajectory odometry;      // rows are relative increments
};

Dataset load_dataset(const std::string& dir);

// Pipeline stages, one per CLI subcommand. Return process exit codes:
// 0 success, 1 convergence failure, 2 input error.
int cmd_simulate(const RunConfig& config);
int cmd_ba(const RunConfig& config);
int cmd_map(const RunConfig& config);
int cmd_localize(const RunConfig& config);
int cmd_eval(const RunConfig& config);

}  // namespace scanba
