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

#include "scanba/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace scanba {

Pose2 align_trajectories(const Trajectory& est, const Trajectory& gt) {
  if (est.size() != gt.size()) {
    throw std::invalid_argument("align_trajectories: length mismatch");
  }
  if (est.size() < 2) {
    throw std::invalid_argument("align_trajectories: need at least two poses");
  }
  const double n = static_cast<double>(est.size());
  Eigen::Vector2d ce = Eigen::Vector2d::Zero(), cg = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    ce += est[i].pose.translation();
    cg += gt[i].pose.translation();
  }
  ce /= n;
  cg /= n;
  // Closed-form 2D rotation from the cross-covariance; equivalent to the
  // SVD-based registration and never produces a reflection.
  double sdot = 0.0, scross = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Eigen::Vector2d a = est[i].pose.translation() - ce;
    const Eigen::Vector2d b = gt[i].pose.translation() - cg;
    sdot += a.dot(b);
    scross += a.x() * b.y() - a.y() * b.x();
  }
  Pose2 align;
  align.theta = std::atan2(scross, sdot);
  const Eigen::Vector2d t = cg - align.rotation() * ce;
  align.x = t.x();
  align.y = t.y();
  return align;
}

double ate(const Trajectory& est, const Trajectory& gt) {
  const Pose2 align = align_trajectories(est, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Eigen::Vector2d aligned = transform_point(align, est[i].pose.translation());
    sum += (aligned - gt[i].pose.translation()).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(est.size()));
}

double epe(const Trajectory& est, const Trajectory& gt, int start_index) {
  if (est.size() != gt.size() || est.size() < 2) {
    throw std::invalid_argument("epe: need two index-aligned trajectories");
  }
  const Pose2& gN = gt.back().pose;
  const Pose2& gs = gt[start_index].pose;
  const Pose2& es = est[start_index].pose;
  const Pose2& eN = est.back().pose;
  const Pose2 loop = compose(compose(inverse(gN), gs), compose(inverse(es), eN));
  return std::hypot(loop.x, loop.y);
}

std::optional<SelfConsistency> self_consistency(const Trajectory& est,
                                                const Trajectory& gt,
                                                double min_travel_m,
                                                double max_euclid_m) {
  if (est.size() != gt.size()) {
    throw std::invalid_argument("self_consistency: length mismatch");
  }
  const std::size_t n = gt.size();
  std::vector<double> arc(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    arc[i] = arc[i - 1] + (gt[i].pose.translation() - gt[i - 1].pose.translation()).norm();
  }

  double sum_t2 = 0.0, sum_r2 = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t partner = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(arc[k] - arc[i]) < min_travel_m) continue;
      const double d = (gt[k].pose.translation() - gt[i].pose.translation()).norm();
      if (d > max_euclid_m || d >= best) continue;
      best = d;
      partner = k;
    }
    if (partner == n) continue;

    const Pose2 rel_est = compose(inverse(est[i].pose), est[partner].pose);
    const Pose2 rel_gt = compose(inverse(gt[i].pose), gt[partner].pose);
    const Pose2 err = compose(inverse(rel_gt), rel_est);
    sum_t2 += err.x * err.x + err.y * err.y;
    const double dr = std::abs(err.theta) * 180.0 / kPi;
    sum_r2 += dr * dr;
    ++pairs;
  }
  if (pairs == 0) return std::nullopt;
  SelfConsistency out;
  out.translation_m = std::sqrt(sum_t2 / pairs);
  out.rotation_deg = std::sqrt(sum_r2 / pairs);
  out.pairs = pairs;
  return out;
}

LocRpe loc_rpe(const Trajectory& reference, const Trajectory& localized,
               const std::vector<std::pair<int, int>>& associations) {
  if (associations.empty()) {
    throw std::invalid_argument("loc_rpe: empty associations");
  }
  double sum_lon = 0.0, sum_lat = 0.0, sum_yaw = 0.0;
  for (const auto& [ri, li] : associations) {
    const Pose2 err = compose(inverse(reference[ri].pose), localized[li].pose);
    sum_lon += err.x * err.x;
    sum_lat += err.y * err.y;
    const double yaw = err.theta * 180.0 / kPi;
    sum_yaw += yaw * yaw;
  }
  const double n = static_cast<double>(associations.size());
  LocRpe out;
  out.longitudinal_m = std::sqrt(sum_lon / n);
  out.lateral_m = std::sqrt(sum_lat / n);
  out.yaw_deg = std::sqrt(sum_yaw / n);
  out.pairs = static_cast<int>(associations.size());
  return out;
}

}  // namespace scanba
