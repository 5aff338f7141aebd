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

#include "scanba/localizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace scanba {

namespace {

struct FrameSystem {
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  double cost = 0.0;
  int residuals = 0;
};

// One residual per observed map cell inside the scan footprint: the fixed map
// intensity against the bilinearly sampled scan intensity at that location.
// Weights come from weight_pose so candidate steps are scored on the same
// frozen objective as the system they came from.
FrameSystem evaluate_frame(const GridMap& map, const Scan& scan, const Pose2& pose,
                           const Pose2& weight_pose, const WeightModel& wm,
                           const CumulativeMask* mask, bool want_system) {
  FrameSystem out;
  const double radius = scan.footprint_radius_m();
  const Eigen::Vector2d center = pose.translation();
  const int col0 = std::max(0, static_cast<int>(std::floor(
                                   (center.x() - radius - map.origin_m.x()) / map.resolution_m)));
  const int col1 = std::min(map.cols - 1, static_cast<int>(std::ceil(
                                              (center.x() + radius - map.origin_m.x()) / map.resolution_m)));
  const int row0 = std::max(0, static_cast<int>(std::floor(
                                   (center.y() - radius - map.origin_m.y()) / map.resolution_m)));
  const int row1 = std::min(map.rows - 1, static_cast<int>(std::ceil(
                                              (center.y() + radius - map.origin_m.y()) / map.resolution_m)));

  const Pose2 weight_inv = inverse(weight_pose);
  for (int row = row0; row <= row1; ++row) {
    for (int col = col0; col <= col1; ++col) {
      if (!map.observed(col, row)) continue;
      const Eigen::Vector2d m = map.cell_center(col, row);
      const SampleResult s = sample(m, pose, scan, wm, mask);
      if (!s.valid) continue;
      const double sqw = std::sqrt(wm.weight(transform_point(weight_inv, m).norm()));
      const double r = sqw * (map.intensity[map.index(col, row)] - s.intensity);
      out.cost += r * r;
      ++out.residuals;
      if (want_system) {
        const Eigen::Vector3d j =
            -sqw * pose_jacobian_from_gradient(s.grad_px, s.sensor_pt, scan.resolution_m);
        out.h += j * j.transpose();
        out.b += -j * r;
      }
    }
  }
  return out;
}

}  // namespace

LocalizeResult localize_frame(LocalizerState& state, const Scan& scan,
                              const CumulativeMask* mask) {
  const auto t0 = std::chrono::steady_clock::now();
  LocalizeResult result;
  result.pose = state.pose;
  ConvergenceReport& report = result.report;
  const GridMap& map = *state.map;
  double lambda = state.config.damping;

  for (int iter = 0; iter < state.config.max_iterations; ++iter) {
    const FrameSystem sys =
        evaluate_frame(map, scan, result.pose, result.pose, state.wm, mask, true);
    if (report.costs.empty()) {
      report.costs.push_back(sys.cost);
      if (sys.residuals < kMinResiduals) {
        result.status = LocalizeStatus::kInsufficientOverlap;
        report.message = "insufficient overlap with the map";
        break;
      }
    }
    report.h_nnz = 9;

    bool accepted = false;
    bool noop_step = false;
    Eigen::Vector3d dx = Eigen::Vector3d::Zero();
    Pose2 candidate;
    double cost1 = 0.0;
    double best_candidate = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
      Eigen::Matrix3d hd = sys.h;
      hd.diagonal() *= 1.0 + lambda;
      const Eigen::LDLT<Eigen::Matrix3d> ldlt(hd);
      if (ldlt.info() == Eigen::Success) {
        dx = ldlt.solve(sys.b);
        if (dx.allFinite()) {
          if (attempt == 0 && dx.norm() < state.config.update_tolerance) {
            noop_step = true;
            break;
          }
          candidate = apply_perturbation(result.pose, Twist2::from_vec(dx));
          cost1 =
              evaluate_frame(map, scan, candidate, result.pose, state.wm, mask, false).cost;
          best_candidate = std::min(best_candidate, cost1);
          if (cost1 <= sys.cost * (1.0 + 1e-12)) {
            accepted = true;
            break;
          }
        }
      }
      lambda = lambda == 0.0 ? 1e-4 : lambda * 10.0;
    }
    if (noop_step) {
      report.iterations = iter + 1;
      report.update_norms.push_back(dx.norm());
      result.status = LocalizeStatus::kConverged;
      report.converged = true;
      report.message = "update norm below tolerance";
      break;
    }
    if (!accepted) {
      // Sub-centimeter proposals that cannot change the cost are a wedged
      // stationary point; hold the pose and report success.
      if (dx.norm() <= 1e4 * state.config.update_tolerance &&
          best_candidate - sys.cost <=
              100.0 * state.config.cost_rel_tolerance * std::max(sys.cost, 1e-300)) {
        result.status = LocalizeStatus::kConverged;
        report.converged = true;
        report.message = "cost stationary within tolerance";
        break;
      }
      // Retry budget spent for this linearization: carry the escalated
      // damping into the next iteration of the frame budget.
      if (iter + 1 == state.config.max_iterations) {
        result.status = LocalizeStatus::kDiverged;
        report.message = "cost could not be decreased after damped retries (last step " +
                         std::to_string(dx.norm()) + ", best increase " +
                         std::to_string(best_candidate - sys.cost) + ")";
      }
      continue;
    }
    lambda = std::max(state.config.damping, lambda / 10.0);

    result.pose = candidate;
    report.iterations = iter + 1;
    report.costs.push_back(cost1);
    const double step = dx.norm();
    report.update_norms.push_back(step);
    if (step < state.config.update_tolerance) {
      result.status = LocalizeStatus::kConverged;
      report.converged = true;
      report.message = "update norm below tolerance";
      break;
    }
    if (sys.cost - cost1 < state.config.cost_rel_tolerance * std::max(sys.cost, 1e-300)) {
      result.status = LocalizeStatus::kConverged;
      report.converged = true;
      report.message = "relative cost decrease below tolerance";
      break;
    }
    if (iter + 1 == state.config.max_iterations) {
      result.status = LocalizeStatus::kMaxIterations;
      report.message = "max iterations reached";
    }
  }

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (result.status == LocalizeStatus::kConverged ||
      result.status == LocalizeStatus::kMaxIterations) {
    state.pose = result.pose;
  }
  state.last_report = report;
  return result;
}

Pose2 propagate(LocalizerState& state, const Pose2& odom_delta) {
  state.pose = compose(state.pose, odom_delta);
  return state.pose;
}

}  // namespace scanba
