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

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "scanba/io.hpp"
#include "scanba/pipeline.hpp"
#include "scanba/se2.hpp"

namespace {

using scanba::RunConfig;

// Flags override the config file only when actually given on the command line.
struct SubState {
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

  void bind(CLI::Option* opt, std::function<void(RunConfig&)> fn) {
    overrides.emplace_back(opt, std::move(fn));
  }
  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = scanba::config_from_json(scanba::io::read_text(config_path));
    }
    for (const auto& [opt, fn] : overrides) {
      if (opt->count() > 0) fn(cfg);
    }
    return cfg;
  }
};

struct CommonOpts {
  std::string out;
  int threads = 0;
  std::uint64_t seed = 0;
  bool force = false;
};

void add_common(CLI::App* sub, SubState& st, CommonOpts& o) {
  sub->add_option("--config", st.config_path, "JSON config file; flags override it");
  st.bind(sub->add_option("--out", o.out, "output directory"),
          [&o](RunConfig& c) { c.output_dir = o.out; });
  st.bind(sub->add_option("--threads", o.threads, "worker thread cap (0 = hardware)"),
          [&o](RunConfig& c) { c.threads = o.threads; });
  st.bind(sub->add_option("--seed", o.seed, "random seed"),
          [&o](RunConfig& c) { c.seed = o.seed; });
  st.bind(sub->add_flag("--force", o.force, "overwrite a non-empty output directory"),
          [](RunConfig& c) { c.force = true; });
}

struct PreprocessOpts {
  double blur_threshold = 0.0;
  double blur_bound = 0.0;
  double cum_low = 0.0;
  double cum_high = 0.0;
  double map_res = 0.0;
  double kf_trans = 0.0;
  double kf_rot_deg = 0.0;
  bool no_cumulative = false;
};

void add_preprocess_flags(CLI::App* sub, SubState& st, PreprocessOpts& o, bool with_keyframe) {
  st.bind(sub->add_option("--blur-threshold", o.blur_threshold, "occupancy intensity threshold"),
          [&o](RunConfig& c) { c.blur.intensity_threshold = o.blur_threshold; });
  st.bind(sub->add_option("--blur-bound", o.blur_bound, "occupancy bound fraction"),
          [&o](RunConfig& c) { c.blur.occupancy_bound = o.blur_bound; });
  st.bind(sub->add_option("--cum-low", o.cum_low, "cumulative zero-ignore threshold"),
          [&o](RunConfig& c) { c.cum_low = o.cum_low; });
  st.bind(sub->add_option("--cum-high", o.cum_high, "cumulative saturation threshold"),
          [&o](RunConfig& c) { c.cum_high = o.cum_high; });
  st.bind(sub->add_option("--map-res", o.map_res, "map cell size in meters"),
          [&o](RunConfig& c) { c.map_resolution_m = o.map_res; });
  st.bind(sub->add_flag("--no-cumulative", o.no_cumulative, "disable cumulative-image masking"),
          [](RunConfig& c) { c.use_cumulative_mask = false; });
  if (with_keyframe) {
    st.bind(sub->add_option("--kf-trans-m", o.kf_trans, "keyframe translation gate [m]"),
            [&o](RunConfig& c) { c.keyframe.min_translation_m = o.kf_trans; });
    st.bind(sub->add_option("--kf-rot-deg", o.kf_rot_deg, "keyframe rotation gate [deg]"),
            [&o](RunConfig& c) { c.keyframe.min_rotation_rad = o.kf_rot_deg * scanba::kPi / 180.0; });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scanba: separable direct bundle adjustment and localization on 2D intensity scans"};
  app.require_subcommand(1);
  int exit_code = 0;

  // simulate -----------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  SubState sim_st;
  CommonOpts sim_common;
  scanba::SimConfig sim_opts;
  add_common(sim, sim_st, sim_common);
  sim_st.bind(sim->add_option("--preset", sim_opts.preset, "structured | sparse-corridor")
                  ->check(CLI::IsMember({"structured", "sparse-corridor"})),
              [&](RunConfig& c) { c.sim.preset = sim_opts.preset; });
  sim_st.bind(sim->add_option("--trajectory", sim_opts.trajectory, "loop | line | corridor")
                  ->check(CLI::IsMember({"loop", "line", "corridor"})),
              [&](RunConfig& c) { c.sim.trajectory = sim_opts.trajectory; });
  sim_st.bind(sim->add_option("--poses", sim_opts.num_poses, "number of poses (loop/line)"),
              [&](RunConfig& c) { c.sim.num_poses = sim_opts.num_poses; });
  sim_st.bind(sim->add_option("--loop-radius", sim_opts.loop_radius_m, "loop radius [m]"),
              [&](RunConfig& c) { c.sim.loop_radius_m = sim_opts.loop_radius_m; });
  sim_st.bind(sim->add_option("--line-length", sim_opts.line_length_m, "line length [m]"),
              [&](RunConfig& c) { c.sim.line_length_m = sim_opts.line_length_m; });
  sim_st.bind(sim->add_option("--corridor-length", sim_opts.corridor_length_m, "corridor length [m]"),
              [&](RunConfig& c) { c.sim.corridor_length_m = sim_opts.corridor_length_m; });
  sim_st.bind(sim->add_option("--corridor-spacing", sim_opts.corridor_spacing_m, "pose spacing [m]"),
              [&](RunConfig& c) { c.sim.corridor_spacing_m = sim_opts.corridor_spacing_m; });
  sim_st.bind(sim->add_option("--lane-offset", sim_opts.corridor_lane_offset_m,
                              "return lane offset [m]"),
              [&](RunConfig& c) { c.sim.corridor_lane_offset_m = sim_opts.corridor_lane_offset_m; });
  sim_st.bind(sim->add_option("--scan-width", sim_opts.scan_width, "scan width [px]"),
              [&](RunConfig& c) { c.sim.scan_width = sim_opts.scan_width; });
  sim_st.bind(sim->add_option("--scan-height", sim_opts.scan_height, "scan height [px]"),
              [&](RunConfig& c) { c.sim.scan_height = sim_opts.scan_height; });
  sim_st.bind(sim->add_option("--scan-res", sim_opts.scan_resolution_m, "scan resolution [m/px]"),
              [&](RunConfig& c) { c.sim.scan_resolution_m = sim_opts.scan_resolution_m; });
  sim_st.bind(sim->add_option("--world-res", sim_opts.world_resolution_m, "truth resolution [m]"),
              [&](RunConfig& c) { c.sim.world_resolution_m = sim_opts.world_resolution_m; });
  sim_st.bind(sim->add_option("--noise-sigma", sim_opts.noise_sigma, "render noise std-dev"),
              [&](RunConfig& c) { c.sim.noise_sigma = sim_opts.noise_sigma; });
  sim_st.bind(sim->add_flag("--occlusion", sim_opts.occlusion, "simulate occlusion shadows"),
              [](RunConfig& c) { c.sim.occlusion = true; });
  sim_st.bind(sim->add_option("--odom-noise-trans", sim_opts.odom_noise_trans_m,
                              "odometry translation noise [m]"),
              [&](RunConfig& c) { c.sim.odom_noise_trans_m = sim_opts.odom_noise_trans_m; });
  sim_st.bind(sim->add_option("--odom-noise-rot-deg", sim_opts.odom_noise_rot_deg,
                              "odometry rotation noise [deg]"),
              [&](RunConfig& c) { c.sim.odom_noise_rot_deg = sim_opts.odom_noise_rot_deg; });
  sim_st.bind(sim->add_option("--perturb-trans", sim_opts.perturb_trans_m,
                              "initial-trajectory perturbation [m]"),
              [&](RunConfig& c) { c.sim.perturb_trans_m = sim_opts.perturb_trans_m; });
  sim_st.bind(sim->add_option("--perturb-rot-deg", sim_opts.perturb_rot_deg,
                              "initial-trajectory perturbation [deg]"),
              [&](RunConfig& c) { c.sim.perturb_rot_deg = sim_opts.perturb_rot_deg; });
  sim->callback([&]() { exit_code = scanba::cmd_simulate(sim_st.resolve()); });

  // ba -------------------------------------------------------------------------
  auto* ba = app.add_subcommand("ba", "bundle-adjust a dataset and build its map");
  SubState ba_st;
  CommonOpts ba_common;
  PreprocessOpts ba_pre;
  struct {
    std::string dataset, trajectory_file, jacobian_mode, export_image;
    int max_iterations = 0;
    double damping = 0.0;
    bool dump_pattern = false;
  } ba_opts;
  add_common(ba, ba_st, ba_common);
  add_preprocess_flags(ba, ba_st, ba_pre, true);
  ba_st.bind(ba->add_option("--dataset", ba_opts.dataset, "dataset directory")->required(),
             [&](RunConfig& c) { c.dataset_dir = ba_opts.dataset; });
  ba_st.bind(ba->add_option("--trajectory-file", ba_opts.trajectory_file,
                            "initial trajectory override (default: dataset init_trajectory.csv)"),
             [&](RunConfig& c) { c.trajectory_file = ba_opts.trajectory_file; });
  ba_st.bind(ba->add_option("--jacobian-mode", ba_opts.jacobian_mode, "exact_varpro | mean_fixed")
                 ->check(CLI::IsMember({"exact_varpro", "mean_fixed"})),
             [&](RunConfig& c) {
               c.solver.jacobian_mode = ba_opts.jacobian_mode == "mean_fixed"
                                            ? scanba::JacobianMode::kMeanFixed
                                            : scanba::JacobianMode::kExactVarpro;
             });
  ba_st.bind(ba->add_option("--max-iterations", ba_opts.max_iterations, "iteration cap"),
             [&](RunConfig& c) { c.solver.max_iterations = ba_opts.max_iterations; });
  ba_st.bind(ba->add_option("--damping", ba_opts.damping, "initial Levenberg damping"),
             [&](RunConfig& c) { c.solver.damping = ba_opts.damping; });
  ba_st.bind(ba->add_flag("--dump-hessian-pattern", ba_opts.dump_pattern,
                          "write the block sparsity pattern of the normal equations"),
             [](RunConfig& c) { c.dump_hessian_pattern = true; });
  ba_st.bind(ba->add_option("--export-image", ba_opts.export_image, "PGM export stem"),
             [&](RunConfig& c) { c.export_image_stem = ba_opts.export_image; });
  ba->callback([&]() { exit_code = scanba::cmd_ba(ba_st.resolve()); });

  // map ------------------------------------------------------------------------
  auto* mapc = app.add_subcommand("map", "build a map from scans and an external trajectory");
  SubState map_st;
  CommonOpts map_common;
  PreprocessOpts map_pre;
  struct {
    std::string dataset, trajectory_file, map_out, export_image;
  } map_opts;
  add_common(mapc, map_st, map_common);
  add_preprocess_flags(mapc, map_st, map_pre, false);
  map_st.bind(mapc->add_option("--dataset", map_opts.dataset, "dataset directory")->required(),
              [&](RunConfig& c) { c.dataset_dir = map_opts.dataset; });
  map_st.bind(mapc->add_option("--trajectory-file", map_opts.trajectory_file, "poses to map from")
                  ->required(),
              [&](RunConfig& c) { c.trajectory_file = map_opts.trajectory_file; });
  map_st.bind(mapc->add_option("--map-out", map_opts.map_out, "map output stem"),
              [&](RunConfig& c) { c.map_file = map_opts.map_out; });
  map_st.bind(mapc->add_option("--export-image", map_opts.export_image, "PGM export stem"),
              [&](RunConfig& c) { c.export_image_stem = map_opts.export_image; });
  mapc->callback([&]() { exit_code = scanba::cmd_map(map_st.resolve()); });

  // localize ---------------------------------------------------------------------
  auto* loc = app.add_subcommand("localize", "localize a scan stream against a map");
  SubState loc_st;
  CommonOpts loc_common;
  struct {
    std::string map_stem, dataset, odometry;
    std::vector<double> init;
    int max_iterations = 0;
    bool no_cumulative = false;
  } loc_opts;
  add_common(loc, loc_st, loc_common);
  loc_st.bind(loc->add_option("--map", loc_opts.map_stem, "map file stem")->required(),
              [&](RunConfig& c) { c.map_file = loc_opts.map_stem; });
  loc_st.bind(loc->add_option("--dataset", loc_opts.dataset, "dataset directory with scans/")
                  ->required(),
              [&](RunConfig& c) { c.dataset_dir = loc_opts.dataset; });
  loc_st.bind(loc->add_option("--odometry", loc_opts.odometry,
                              "odometry increments (default: dataset odometry.csv)"),
              [&](RunConfig& c) { c.odometry_file = loc_opts.odometry; });
  loc_st.bind(loc->add_option("--init", loc_opts.init, "initial pose: x y theta")->expected(3),
              [&](RunConfig& c) {
                c.init_pose = scanba::Pose2{loc_opts.init[2], loc_opts.init[0], loc_opts.init[1]};
              });
  loc_st.bind(loc->add_option("--max-iterations", loc_opts.max_iterations, "per-frame cap"),
              [&](RunConfig& c) { c.localizer.max_iterations = loc_opts.max_iterations; });
  loc_st.bind(loc->add_flag("--no-cumulative", loc_opts.no_cumulative,
                            "disable cumulative-image masking"),
              [](RunConfig& c) { c.use_cumulative_mask = false; });
  loc->callback([&]() { exit_code = scanba::cmd_localize(loc_st.resolve()); });

  // eval -----------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "trajectory and localization metrics");
  SubState eval_st;
  CommonOpts eval_common;
  struct {
    std::string est, gt, loc_est, loc_gt;
  } eval_opts;
  add_common(eval, eval_st, eval_common);
  eval_st.bind(eval->add_option("--est", eval_opts.est, "estimated trajectory")->required(),
               [&](RunConfig& c) { c.est_file = eval_opts.est; });
  eval_st.bind(eval->add_option("--gt", eval_opts.gt, "ground-truth trajectory")->required(),
               [&](RunConfig& c) { c.gt_file = eval_opts.gt; });
  eval_st.bind(eval->add_option("--loc-est", eval_opts.loc_est, "localized trajectory"),
               [&](RunConfig& c) { c.loc_est_file = eval_opts.loc_est; });
  eval_st.bind(eval->add_option("--loc-gt", eval_opts.loc_gt, "localization ground truth"),
               [&](RunConfig& c) { c.loc_gt_file = eval_opts.loc_gt; });
  eval->callback([&]() { exit_code = scanba::cmd_eval(eval_st.resolve()); });

  CLI11_PARSE(app, argc, argv);
  return exit_code;
}
