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

#include "scanba/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scanba/io.hpp"
#include "scanba/mapgrid.hpp"
#include "scanba/metrics.hpp"
#include "scanba/sim.hpp"

namespace scanba {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::runtime_error("unknown config key '" + ctx + key + "'");
    }
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

JacobianMode jacobian_mode_from_string(const std::string& s) {
  if (s == "exact_varpro") return JacobianMode::kExactVarpro;
  if (s == "mean_fixed") return JacobianMode::kMeanFixed;
  throw std::runtime_error("unknown jacobian_mode '" + s + "'");
}

std::string to_string(JacobianMode mode) {
  return mode == JacobianMode::kExactVarpro ? "exact_varpro" : "mean_fixed";
}

void solver_from_json(const json& j, const std::string& ctx, SolverConfig& s) {
  check_keys(j, ctx, {"max_iterations", "update_tolerance", "cost_rel_tolerance",
                      "damping", "jacobian_mode"});
  get_if(j, "max_iterations", s.max_iterations);
  get_if(j, "update_tolerance", s.update_tolerance);
  get_if(j, "cost_rel_tolerance", s.cost_rel_tolerance);
  get_if(j, "damping", s.damping);
  if (j.contains("jacobian_mode")) {
    s.jacobian_mode = jacobian_mode_from_string(j.at("jacobian_mode").get<std::string>());
  }
}

json solver_to_json(const SolverConfig& s) {
  return {{"max_iterations", s.max_iterations},
          {"update_tolerance", s.update_tolerance},
          {"cost_rel_tolerance", s.cost_rel_tolerance},
          {"damping", s.damping},
          {"jacobian_mode", to_string(s.jacobian_mode)}};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scan_%06d", index);
  return buf;
}

struct Preprocessed {
  std::vector<Scan> scans;
  std::vector<CumulativeMask> masks;
  std::vector<double> blur_sigmas;
};

Preprocessed preprocess_scans(const std::vector<Scan>& raw, const RunConfig& cfg) {
  Preprocessed out;
  out.scans.reserve(raw.size());
  out.blur_sigmas.reserve(raw.size());
  for (const Scan& scan : raw) {
    if (cfg.use_cumulative_mask) {
      const Eigen::Vector2d center{0.5 * (scan.width - 1), 0.5 * (scan.height - 1)};
      out.masks.push_back(
          build_cumulative_mask(scan, center, cfg.cum_low, cfg.cum_high));
    }
    BlurredScan blurred = adaptive_blur(scan, cfg.blur);
    out.blur_sigmas.push_back(blurred.sigma_px);
    out.scans.push_back(std::move(blurred.scan));
  }
  return out;
}

double max_footprint(const std::vector<Scan>& scans) {
  double r = 0.0;
  for (const Scan& s : scans) r = std::max(r, s.footprint_radius_m());
  return r;
}

void prepare_output_dir(const RunConfig& cfg) {
  if (cfg.output_dir.empty()) throw std::runtime_error("output directory not set");
  const fs::path dir(cfg.output_dir);
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw std::runtime_error("output path is not a directory: " + cfg.output_dir);
  }
  fs::create_directories(dir);
}

void write_resolved_config(const RunConfig& cfg) {
  io::write_text(fs::path(cfg.output_dir) / "run_config.json", config_to_json(cfg));
}

Trajectory subset(const Trajectory& traj, const std::vector<int>& indices) {
  Trajectory out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(traj[i]);
  return out;
}

/// Nearest-timestamp association of each localized frame to a reference pose.
std::vector<std::pair<int, int>> associate_by_timestamp(const Trajectory& reference,
                                                        const Trajectory& localized) {
  std::vector<std::pair<int, int>> assoc;
  assoc.reserve(localized.size());
  for (std::size_t j = 0; j < localized.size(); ++j) {
    int best = 0;
    double best_dt = std::abs(reference[0].timestamp_s - localized[j].timestamp_s);
    for (std::size_t i = 1; i < reference.size(); ++i) {
      const double dt = std::abs(reference[i].timestamp_s - localized[j].timestamp_s);
      if (dt < best_dt) {
        best_dt = dt;
        best = static_cast<int>(i);
      }
    }
    assoc.emplace_back(best, static_cast<int>(j));
  }
  return assoc;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConverge;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace

RunConfig config_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  RunConfig cfg;
  check_keys(j, "", {"seed", "threads", "weight", "keyframe", "blur", "cumulative",
                     "map", "solver", "localizer", "sim", "paths", "init_pose",
                     "force", "dump_hessian_pattern"});
  get_if(j, "seed", cfg.seed);
  get_if(j, "threads", cfg.threads);
  get_if(j, "force", cfg.force);
  get_if(j, "dump_hessian_pattern", cfg.dump_hessian_pattern);

  if (j.contains("weight")) {
    const json& w = j.at("weight");
    check_keys(w, "weight.", {"sigma_pixel", "sigma_range_per_m"});
    get_if(w, "sigma_pixel", cfg.weight.sigma_pixel);
    get_if(w, "sigma_range_per_m", cfg.weight.sigma_range_per_m);
  }
  if (j.contains("keyframe")) {
    const json& k = j.at("keyframe");
    check_keys(k, "keyframe.", {"min_translation_m", "min_rotation_rad"});
    get_if(k, "min_translation_m", cfg.keyframe.min_translation_m);
    get_if(k, "min_rotation_rad", cfg.keyframe.min_rotation_rad);
  }
  if (j.contains("blur")) {
    const json& b = j.at("blur");
    check_keys(b, "blur.", {"intensity_threshold", "occupancy_bound", "sigma_step_px",
                            "sigma_max_px"});
    get_if(b, "intensity_threshold", cfg.blur.intensity_threshold);
    get_if(b, "occupancy_bound", cfg.blur.occupancy_bound);
    get_if(b, "sigma_step_px", cfg.blur.sigma_step_px);
    get_if(b, "sigma_max_px", cfg.blur.sigma_max_px);
  }
  if (j.contains("cumulative")) {
    const json& c = j.at("cumulative");
    check_keys(c, "cumulative.", {"enabled", "zero_ignore_threshold", "saturation_threshold"});
    get_if(c, "enabled", cfg.use_cumulative_mask);
    get_if(c, "zero_ignore_threshold", cfg.cum_low);
    get_if(c, "saturation_threshold", cfg.cum_high);
  }
  if (j.contains("map")) {
    const json& m = j.at("map");
    check_keys(m, "map.", {"resolution_m"});
    get_if(m, "resolution_m", cfg.map_resolution_m);
  }
  if (j.contains("solver")) solver_from_json(j.at("solver"), "solver.", cfg.solver);
  if (j.contains("localizer")) solver_from_json(j.at("localizer"), "localizer.", cfg.localizer);
  if (j.contains("sim")) {
    const json& s = j.at("sim");
    check_keys(s, "sim.",
               {"preset", "trajectory", "num_poses", "loop_radius_m", "line_length_m",
                "corridor_length_m", "corridor_spacing_m", "corridor_lane_offset_m",
                "scan_width", "scan_height", "scan_resolution_m", "world_resolution_m",
                "noise_sigma", "occlusion", "odom_noise_trans_m", "odom_noise_rot_deg",
                "perturb_trans_m", "perturb_rot_deg"});
    get_if(s, "preset", cfg.sim.preset);
    get_if(s, "trajectory", cfg.sim.trajectory);
    get_if(s, "num_poses", cfg.sim.num_poses);
    get_if(s, "loop_radius_m", cfg.sim.loop_radius_m);
    get_if(s, "line_length_m", cfg.sim.line_length_m);
    get_if(s, "corridor_length_m", cfg.sim.corridor_length_m);
    get_if(s, "corridor_spacing_m", cfg.sim.corridor_spacing_m);
    get_if(s, "corridor_lane_offset_m", cfg.sim.corridor_lane_offset_m);
    get_if(s, "scan_width", cfg.sim.scan_width);
    get_if(s, "scan_height", cfg.sim.scan_height);
    get_if(s, "scan_resolution_m", cfg.sim.scan_resolution_m);
    get_if(s, "world_resolution_m", cfg.sim.world_resolution_m);
    get_if(s, "noise_sigma", cfg.sim.noise_sigma);
    get_if(s, "occlusion", cfg.sim.occlusion);
    get_if(s, "odom_noise_trans_m", cfg.sim.odom_noise_trans_m);
    get_if(s, "odom_noise_rot_deg", cfg.sim.odom_noise_rot_deg);
    get_if(s, "perturb_trans_m", cfg.sim.perturb_trans_m);
    get_if(s, "perturb_rot_deg", cfg.sim.perturb_rot_deg);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_keys(p, "paths.",
               {"dataset_dir", "output_dir", "map_file", "trajectory_file",
                "odometry_file", "est_file", "gt_file", "loc_est_file", "loc_gt_file",
                "export_image_stem"});
    get_if(p, "dataset_dir", cfg.dataset_dir);
    get_if(p, "output_dir", cfg.output_dir);
    get_if(p, "map_file", cfg.map_file);
    get_if(p, "trajectory_file", cfg.trajectory_file);
    get_if(p, "odometry_file", cfg.odometry_file);
    get_if(p, "est_file", cfg.est_file);
    get_if(p, "gt_file", cfg.gt_file);
    get_if(p, "loc_est_file", cfg.loc_est_file);
    get_if(p, "loc_gt_file", cfg.loc_gt_file);
    get_if(p, "export_image_stem", cfg.export_image_stem);
  }
  if (j.contains("init_pose") && !j.at("init_pose").is_null()) {
    const json& p = j.at("init_pose");
    cfg.init_pose = Pose2{p.at(2).get<double>(), p.at(0).get<double>(), p.at(1).get<double>()};
  }
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["force"] = cfg.force;
  j["dump_hessian_pattern"] = cfg.dump_hessian_pattern;
  j["weight"] = {{"sigma_pixel", cfg.weight.sigma_pixel},
                 {"sigma_range_per_m", cfg.weight.sigma_range_per_m}};
  j["keyframe"] = {{"min_translation_m", cfg.keyframe.min_translation_m},
                   {"min_rotation_rad", cfg.keyframe.min_rotation_rad}};
  j["blur"] = {{"intensity_threshold", cfg.blur.intensity_threshold},
               {"occupancy_bound", cfg.blur.occupancy_bound},
               {"sigma_step_px", cfg.blur.sigma_step_px},
               {"sigma_max_px", cfg.blur.sigma_max_px}};
  j["cumulative"] = {{"enabled", cfg.use_cumulative_mask},
                     {"zero_ignore_threshold", cfg.cum_low},
                     {"saturation_threshold", cfg.cum_high}};
  j["map"] = {{"resolution_m", cfg.map_resolution_m}};
  j["solver"] = solver_to_json(cfg.solver);
  j["localizer"] = solver_to_json(cfg.localizer);
  j["sim"] = {{"preset", cfg.sim.preset},
              {"trajectory", cfg.sim.trajectory},
              {"num_poses", cfg.sim.num_poses},
              {"loop_radius_m", cfg.sim.loop_radius_m},
              {"line_length_m", cfg.sim.line_length_m},
              {"corridor_length_m", cfg.sim.corridor_length_m},
              {"corridor_spacing_m", cfg.sim.corridor_spacing_m},
              {"corridor_lane_offset_m", cfg.sim.corridor_lane_offset_m},
              {"scan_width", cfg.sim.scan_width},
              {"scan_height", cfg.sim.scan_height},
              {"scan_resolution_m", cfg.sim.scan_resolution_m},
              {"world_resolution_m", cfg.sim.world_resolution_m},
              {"noise_sigma", cfg.sim.noise_sigma},
              {"occlusion", cfg.sim.occlusion},
              {"odom_noise_trans_m", cfg.sim.odom_noise_trans_m},
              {"odom_noise_rot_deg", cfg.sim.odom_noise_rot_deg},
              {"perturb_trans_m", cfg.sim.perturb_trans_m},
              {"perturb_rot_deg", cfg.sim.perturb_rot_deg}};
  j["paths"] = {{"dataset_dir", cfg.dataset_dir},
                {"output_dir", cfg.output_dir},
                {"map_file", cfg.map_file},
                {"trajectory_file", cfg.trajectory_file},
                {"odometry_file", cfg.odometry_file},
                {"est_file", cfg.est_file},
                {"gt_file", cfg.gt_file},
                {"loc_est_file", cfg.loc_est_file},
                {"loc_gt_file", cfg.loc_gt_file},
                {"export_image_stem", cfg.export_image_stem}};
  if (cfg.init_pose) {
    j["init_pose"] = {cfg.init_pose->x, cfg.init_pose->y, cfg.init_pose->theta};
  } else {
    j["init_pose"] = nullptr;
  }
  return j.dump(2) + "\n";
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  const fs::path base(dir);
  const fs::path scan_dir = fs::is_directory(base / "scans") ? base / "scans" : base;
  for (const fs::path& stem : io::list_scan_stems(scan_dir)) {
    ds.scans.push_back(io::read_scan(stem).scan);
  }
  if (fs::exists(base / "gt_trajectory.csv")) {
    ds.ground_truth = io::read_trajectory(base / "gt_trajectory.csv");
  }
  if (fs::exists(base / "init_trajectory.csv")) {
    ds.initial = io::read_trajectory(base / "init_trajectory.csv");
  }
  if (fs::exists(base / "odometry.csv")) {
    ds.odometry = io::read_trajectory(base / "odometry.csv");
  }
  return ds;
}

int cmd_simulate(const RunConfig& cfg) {
  return run_guarded([&]() {
    if (cfg.output_dir.empty()) throw std::runtime_error("--out is required");
    const fs::path out(cfg.output_dir);
    if (fs::exists(out) && !fs::is_empty(out) && !cfg.force) {
      throw std::runtime_error("output directory exists and is not empty (use --force): " +
                               cfg.output_dir);
    }
    fs::create_directories(out / "scans");

    // Trajectory preset.
    Trajectory gt;
    if (cfg.sim.trajectory == "loop") {
      gt = circle_trajectory(cfg.sim.loop_radius_m, cfg.sim.num_poses);
    } else if (cfg.sim.trajectory == "line") {
      gt = line_trajectory(cfg.sim.line_length_m, cfg.sim.num_poses);
    } else if (cfg.sim.trajectory == "corridor") {
      gt = out_and_back_trajectory(cfg.sim.corridor_length_m, cfg.sim.corridor_spacing_m,
                                   cfg.sim.corridor_lane_offset_m);
    } else {
      throw std::runtime_error("unknown trajectory preset '" + cfg.sim.trajectory + "'");
    }

    // Size the world to cover the trajectory plus the scan footprint.
    Scan proto;
    proto.width = cfg.sim.scan_width;
    proto.height = cfg.sim.scan_height;
    proto.resolution_m = cfg.sim.scan_resolution_m;
    const double margin = proto.footprint_radius_m() + 10.0;
    double min_x = gt[0].pose.x, max_x = gt[0].pose.x;
    double min_y = gt[0].pose.y, max_y = gt[0].pose.y;
    for (const auto& s : gt) {
      min_x = std::min(min_x, s.pose.x);
      max_x = std::max(max_x, s.pose.x);
      min_y = std::min(min_y, s.pose.y);
      max_y = std::max(max_y, s.pose.y);
    }
    const double extent_x = (max_x - min_x) + 2.0 * margin;
    const double extent_y = (max_y - min_y) + 2.0 * margin;

    WorldSpec spec;
    if (cfg.sim.preset == "structured") {
      spec = structured_world_spec(extent_x, extent_y);
      const double area_ratio = extent_x * extent_y / (120.0 * 120.0);
      spec.features.wall_segments =
          std::max(5, static_cast<int>(std::lround(spec.features.wall_segments * area_ratio)));
      spec.features.blobs =
          std::max(8, static_cast<int>(std::lround(spec.features.blobs * area_ratio)));
    } else if (cfg.sim.preset == "sparse-corridor") {
      spec = sparse_corridor_world_spec(extent_x, extent_y);
    } else {
      throw std::runtime_error("unknown world preset '" + cfg.sim.preset + "'");
    }
    spec.resolution_m = cfg.sim.world_resolution_m;

    // The generated world is centered on the trajectory bounding box, with
    // the origin snapped to the truth lattice so grid-aligned sensor poses
    // sample truth cells exactly.
    SyntheticWorld world = generate_world(spec, cfg.seed);
    world.truth_map.origin_m.x() += 0.5 * (min_x + max_x);
    world.truth_map.origin_m.y() += 0.5 * (min_y + max_y);
    const double wres = world.truth_map.resolution_m;
    world.truth_map.origin_m.x() = std::round(world.truth_map.origin_m.x() / wres) * wres;
    world.truth_map.origin_m.y() = std::round(world.truth_map.origin_m.y() / wres) * wres;

    // Initial trajectory: ground truth, optionally perturbed.
    Trajectory init = gt;
    if (cfg.sim.perturb_trans_m > 0.0 || cfg.sim.perturb_rot_deg > 0.0) {
      init = perturb_trajectory(gt, cfg.sim.perturb_trans_m, cfg.sim.perturb_rot_deg,
                                mix_seed(cfg.seed, 1));
    }

    // Odometry increments from ground truth, optionally noise-corrupted.
    Trajectory odom;
    std::mt19937_64 odom_rng(mix_seed(cfg.seed, 2));
    std::normal_distribution<double> nt(0.0, cfg.sim.odom_noise_trans_m);
    std::normal_distribution<double> nr(0.0, cfg.sim.odom_noise_rot_deg * kPi / 180.0);
    for (std::size_t n = 0; n < gt.size(); ++n) {
      Pose2 delta;
      if (n > 0) {
        delta = compose(inverse(gt[n - 1].pose), gt[n].pose);
        if (cfg.sim.odom_noise_trans_m > 0.0 || cfg.sim.odom_noise_rot_deg > 0.0) {
          delta = compose(delta, Pose2{nr(odom_rng), nt(odom_rng), nt(odom_rng)});
        }
      }
      odom.push_back({gt[n].timestamp_s, delta});
    }

    RenderOptions ropts;
    ropts.noise_sigma = cfg.sim.noise_sigma;
    ropts.occlusion = cfg.sim.occlusion;
    for (std::size_t n = 0; n < gt.size(); ++n) {
      io::ScanRecord rec;
      rec.scan = render_scan(world, gt[n].pose, cfg.sim.scan_width, cfg.sim.scan_height,
                             cfg.sim.scan_resolution_m, ropts, mix_seed(cfg.seed, 100 + n));
      rec.scan.id = static_cast<int>(n);
      rec.scan.timestamp_s = gt[n].timestamp_s;
      rec.pose_hint = init[n].pose;
      io::write_scan(out / "scans" / frame_name(static_cast<int>(n)), rec);
    }

    io::write_trajectory(out / "gt_trajectory.csv", gt);
    io::write_trajectory(out / "init_trajectory.csv", init);
    io::write_trajectory(out / "odometry.csv", odom);
    io::write_map(out / "world_map", world.truth_map);
    write_resolved_config(cfg);

    // Manifest with content hashes over the dataset payload. The resolved
    // config embeds host paths, so it stays out of the hash list to keep
    // same-seed datasets byte-comparable across directories.
    json manifest;
    manifest["seed"] = cfg.seed;
    json files = json::array();
    std::vector<fs::path> all;
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name == "manifest.json" || name == "run_config.json") continue;
      all.push_back(entry.path());
    }
    std::sort(all.begin(), all.end());
    for (const fs::path& p : all) {
      files.push_back({{"path", fs::relative(p, out).generic_string()},
                       {"bytes", fs::file_size(p)},
                       {"fnv1a64", io::file_hash(p)}});
    }
    manifest["files"] = files;
    io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
    return kExitOk;
  });
}

namespace {

struct BAStage {
  BAResult result;
  std::vector<int> keyframes;
  Trajectory init_kf;
  bool solve_failed = false;
  std::string failure;
};

BAStage run_ba_stage(const RunConfig& cfg, const Dataset& ds) {
  if (ds.scans.empty()) throw std::runtime_error("dataset has no scans");
  Trajectory init = ds.initial;
  if (!cfg.trajectory_file.empty()) init = io::read_trajectory(cfg.trajectory_file);
  if (init.empty()) throw std::runtime_error("no initial trajectory available");
  if (init.size() != ds.scans.size()) {
    throw std::runtime_error("scan/pose count mismatch: " + std::to_string(ds.scans.size()) +
                             " scans vs " + std::to_string(init.size()) + " poses");
  }

  BAStage stage;
  stage.keyframes = select_keyframes(init, cfg.keyframe);
  stage.init_kf = subset(init, stage.keyframes);
  std::vector<Scan> raw;
  raw.reserve(stage.keyframes.size());
  for (int i : stage.keyframes) raw.push_back(ds.scans[i]);

  Preprocessed pre = preprocess_scans(raw, cfg);

  BAProblem problem;
  problem.scans = std::move(pre.scans);
  problem.init_poses = stage.init_kf;
  problem.wm = cfg.weight;
  problem.masks = std::move(pre.masks);
  problem.threads = cfg.threads;
  problem.grid = bounds_from_trajectory(stage.init_kf, max_footprint(problem.scans),
                                        cfg.map_resolution_m);

  try {
    stage.result = solve_ba(problem, cfg.solver);
  } catch (const SolveError& e) {
    stage.solve_failed = true;
    stage.failure = e.what();
    return stage;
  }

  if (cfg.dump_hessian_pattern) {
    const Covisibility covis = compute_covisibility(problem, stage.result.poses);
    const NormalSystem system =
        assemble(problem, stage.result.poses, covis, cfg.solver.jacobian_mode);
    std::ostringstream txt;
    for (const auto& [i, j] : system.block_pattern()) {
      txt << i << " " << j << "\n";
      if (i != j) txt << j << " " << i << "\n";
    }
    io::write_text(fs::path(cfg.output_dir) / "hessian_pattern.txt", txt.str());
  }
  return stage;
}

}  // namespace

int cmd_ba(const RunConfig& cfg) {
  return run_guarded([&]() {
    if (cfg.dataset_dir.empty()) throw std::runtime_error("--dataset is required");
    prepare_output_dir(cfg);
    const Dataset ds = load_dataset(cfg.dataset_dir);
    BAStage stage = run_ba_stage(cfg, ds);
    write_resolved_config(cfg);

    json kf;
    kf["kept_indices"] = stage.keyframes;
    io::write_text(fs::path(cfg.output_dir) / "keyframes.json", kf.dump(2) + "\n");

    if (stage.solve_failed) {
      ConvergenceReport failed;
      failed.converged = false;
      failed.message = stage.failure;
      io::write_text(fs::path(cfg.output_dir) / "report.json", io::report_to_json(failed));
      std::cerr << "error: " << stage.failure << "\n";
      return kExitNoConverge;
    }

    io::write_trajectory(fs::path(cfg.output_dir) / "trajectory.csv", stage.result.poses);
    io::write_map(fs::path(cfg.output_dir) / "map", stage.result.map);
    io::write_text(fs::path(cfg.output_dir) / "report.json",
                   io::report_to_json(stage.result.report));
    if (!cfg.export_image_stem.empty()) {
      io::export_map_image(cfg.export_image_stem, stage.result.map);
    }
    return stage.result.report.converged ? kExitOk : kExitNoConverge;
  });
}

int cmd_map(const RunConfig& cfg) {
  return run_guarded([&]() {
    if (cfg.dataset_dir.empty()) throw std::runtime_error("--dataset is required");
    if (cfg.trajectory_file.empty()) throw std::runtime_error("--trajectory-file is required");
    prepare_output_dir(cfg);
    const Dataset ds = load_dataset(cfg.dataset_dir);
    const Trajectory poses = io::read_trajectory(cfg.trajectory_file);
    if (poses.size() != ds.scans.size()) {
      throw std::runtime_error("scan/pose count mismatch: " + std::to_string(ds.scans.size()) +
                               " scans vs " + std::to_string(poses.size()) + " poses");
    }

    Preprocessed pre = preprocess_scans(ds.scans, cfg);
    GridMap grid =
        bounds_from_trajectory(poses, max_footprint(pre.scans), cfg.map_resolution_m);
    build_map(pre.scans, poses, cfg.weight, pre.masks, grid, cfg.threads);

    const fs::path stem = cfg.map_file.empty() ? fs::path(cfg.output_dir) / "map"
                                               : fs::path(cfg.map_file);
    io::write_map(stem, grid);
    if (!cfg.export_image_stem.empty()) io::export_map_image(cfg.export_image_stem, grid);
    write_resolved_config(cfg);
    return kExitOk;
  });
}

int cmd_localize(const RunConfig& cfg) {
  return run_guarded([&]() {
    if (cfg.map_file.empty()) throw std::runtime_error("--map is required");
    if (cfg.dataset_dir.empty()) throw std::runtime_error("--dataset is required");
    prepare_output_dir(cfg);

    const GridMap map = io::read_map(cfg.map_file);
    const Dataset ds = load_dataset(cfg.dataset_dir);
    if (ds.scans.empty()) throw std::runtime_error("dataset has no scans");

    Trajectory odom = ds.odometry;
    if (!cfg.odometry_file.empty()) odom = io::read_trajectory(cfg.odometry_file);
    if (odom.size() != ds.scans.size()) {
      throw std::runtime_error("odometry rows must match scan count (" +
                               std::to_string(ds.scans.size()) + " scans vs " +
                               std::to_string(odom.size()) + " rows)");
    }

    Pose2 init;
    if (cfg.init_pose) {
      init = *cfg.init_pose;
    } else if (!ds.ground_truth.empty()) {
      init = ds.ground_truth[0].pose;
    } else {
      throw std::runtime_error("--init pose is required (no ground truth in dataset)");
    }

    Preprocessed pre = preprocess_scans(ds.scans, cfg);

    LocalizerState state;
    state.map = &map;
    state.wm = cfg.weight;
    state.config = cfg.localizer;
    state.pose = init;

    Trajectory localized;
    json frames = json::array();
    int flagged = 0;
    for (std::size_t n = 0; n < pre.scans.size(); ++n) {
      if (n > 0) propagate(state, odom[n].pose);
      const CumulativeMask* mask = pre.masks.empty() ? nullptr : &pre.masks[n];
      const LocalizeResult res = localize_frame(state, pre.scans[n], mask);
      const bool ok = res.status == LocalizeStatus::kConverged ||
                      res.status == LocalizeStatus::kMaxIterations;
      if (!ok) ++flagged;
      // Flagged frames fall back to the propagated odometry estimate, which
      // localize_frame left untouched in state.pose.
      localized.push_back({pre.scans[n].timestamp_s, state.pose});
      frames.push_back({{"frame", n},
                        {"status", to_string(res.status)},
                        {"iterations", res.report.iterations},
                        {"final_cost", res.report.costs.empty() ? 0.0 : res.report.costs.back()},
                        {"wall_time_s", res.report.wall_time_s}});
    }

    io::write_trajectory(fs::path(cfg.output_dir) / "localized_trajectory.csv", localized);
    json report;
    report["frames"] = frames;
    report["flagged"] = flagged;
    io::write_text(fs::path(cfg.output_dir) / "localize_report.json", report.dump(2) + "\n");
    write_resolved_config(cfg);
    return flagged == 0 ? kExitOk : kExitNoConverge;
  });
}

int cmd_eval(const RunConfig& cfg) {
  return run_guarded([&]() {
    if (cfg.est_file.empty() || cfg.gt_file.empty()) {
      throw std::runtime_error("--est and --gt are required");
    }
    prepare_output_dir(cfg);
    const Trajectory est = io::read_trajectory(cfg.est_file);
    const Trajectory gt = io::read_trajectory(cfg.gt_file);
    if (est.size() != gt.size()) {
      throw std::runtime_error("trajectory length mismatch: " + std::to_string(est.size()) +
                               " vs " + std::to_string(gt.size()));
    }

    MetricReport report;
    report.ate_m = ate(est, gt);
    report.epe_m = epe(est, gt);
    report.self_consistency = self_consistency(est, gt);

    if (!cfg.loc_est_file.empty() && !cfg.loc_gt_file.empty()) {
      const Trajectory loc_est = io::read_trajectory(cfg.loc_est_file);
      const Trajectory loc_gt = io::read_trajectory(cfg.loc_gt_file);
      report.loc_rpe = loc_rpe(loc_gt, loc_est, associate_by_timestamp(loc_gt, loc_est));
    }

    const std::string out = io::metric_report_to_json(report);
    io::write_text(fs::path(cfg.output_dir) / "metrics.json", out);
    std::cout << out;

    // Per-pose aligned position errors for external plotting.
    const Pose2 align = align_trajectories(est, gt);
    std::ostringstream csv;
    csv << "index,err_x_m,err_y_m,err_norm_m\n";
    for (std::size_t i = 0; i < est.size(); ++i) {
      const Eigen::Vector2d e =
          transform_point(align, est[i].pose.translation()) - gt[i].pose.translation();
      csv << i << ',' << io::format_double(e.x()) << ',' << io::format_double(e.y()) << ','
          << io::format_double(e.norm()) << '\n';
    }
    io::write_text(fs::path(cfg.output_dir) / "aligned_errors.csv", csv.str());
    write_resolved_config(cfg);
    return kExitOk;
  });
}

}  // namespace scanba
