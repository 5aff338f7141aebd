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

#include "scanba/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace scanba {

std::vector<int> select_keyframes(const Trajectory& traj, const KeyframePolicy& policy) {
  std::vector<int> kept;
  if (traj.empty()) return kept;
  kept.push_back(0);
  Pose2 last = traj[0].pose;
  for (int n = 1; n < static_cast<int>(traj.size()); ++n) {
    const Pose2& p = traj[n].pose;
    const double dt = std::hypot(p.x - last.x, p.y - last.y);
    const double dr = std::abs(wrap_angle(p.theta - last.theta));
    if (dt >= policy.min_translation_m || dr >= policy.min_rotation_rad) {
      kept.push_back(n);
      last = p;
    }
  }
  return kept;
}

double occupancy(const Scan& scan, double intensity_threshold) {
  if (scan.pixels.empty()) return 0.0;
  std::size_t above = 0;
  for (float p : scan.pixels) {
    if (p > intensity_threshold) ++above;
  }
  return static_cast<double>(above) / static_cast<double>(scan.pixels.size());
}

Scan gaussian_blur(const Scan& scan, double sigma_px) {
  if (sigma_px <= 0.0) return scan;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma_px * sigma_px));
    ksum += kernel[k + radius];
  }
  for (double& k : kernel) k /= ksum;

  const int w = scan.width, h = scan.height;
  Scan out = scan;
  std::vector<float> tmp(scan.pixels.size(), 0.0f);
  // Horizontal pass, zero padding outside the image.
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int uu = u + k;
        if (uu < 0 || uu >= w) continue;
        acc += kernel[k + radius] * scan.at(v, uu);
      }
      tmp[static_cast<std::size_t>(v) * w + u] = static_cast<float>(acc);
    }
  }
  // Vertical pass.
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int vv = v + k;
        if (vv < 0 || vv >= h) continue;
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(vv) * w + u];
      }
      out.at(v, u) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

BlurredScan adaptive_blur(const Scan& scan, const BlurPolicy& policy) {
  if (occupancy(scan, policy.intensity_threshold) >= policy.occupancy_bound) {
    return {scan, 0.0};
  }
  double sigma = 0.0;
  Scan blurred = scan;
  while (sigma < policy.sigma_max_px) {
    sigma = std::min(sigma + policy.sigma_step_px, policy.sigma_max_px);
    blurred = gaussian_blur(scan, sigma);
    if (occupancy(blurred, policy.intensity_threshold) >= policy.occupancy_bound) break;
  }
  return {std::move(blurred), sigma};
}

double CumulativeMask::score_at(const Eigen::Vector2d& px) const {
  const double u = std::clamp(px.x(), 0.0, static_cast<double>(width - 1));
  const double v = std::clamp(px.y(), 0.0, static_cast<double>(height - 1));
  const int u0 = std::min(static_cast<int>(std::floor(u)), width - 2);
  const int v0 = std::min(static_cast<int>(std::floor(v)), height - 2);
  const double fu = u - u0, fv = v - v0;
  return (1.0 - fv) * ((1.0 - fu) * at(v0, u0) + fu * at(v0, u0 + 1)) +
         fv * ((1.0 - fu) * at(v0 + 1, u0) + fu * at(v0 + 1, u0 + 1));
}

CumulativeMask build_cumulative_mask(const Scan& scan,
                                     const Eigen::Vector2d& sensor_center_px,
                                     double zero_ignore_threshold,
                                     double saturation_threshold) {
  CumulativeMask mask;
  mask.width = scan.width;
  mask.height = scan.height;
  mask.cumulative.assign(scan.pixels.size(), 0.0f);
  mask.zero_ignore_threshold = zero_ignore_threshold;
  mask.saturation_threshold = saturation_threshold;

  // One ray per border pixel keeps every pixel within half a pixel of a ray.
  std::vector<Eigen::Vector2d> targets;
  for (int u = 0; u < scan.width; ++u) {
    targets.emplace_back(u, 0);
    targets.emplace_back(u, scan.height - 1);
  }
  for (int v = 1; v < scan.height - 1; ++v) {
    targets.emplace_back(0, v);
    targets.emplace_back(scan.width - 1, v);
  }

  // One cap shared by every ray keeps the stored scores monotone along each
  // ray even where rays of different lengths cross: the cap is a quarter of
  // the longest ray's step count, so a quarter-intensity image saturates the
  // longest rays at 1.0.
  const auto position_count = [](double len) {
    const int whole = static_cast<int>(std::floor(len));
    return whole + 1 + (len > static_cast<double>(whole) ? 1 : 0);
  };
  int max_positions = 1;
  for (const Eigen::Vector2d& target : targets) {
    max_positions = std::max(max_positions,
                             position_count((target - sensor_center_px).norm()));
  }
  const double cap = 0.25 * max_positions;

  std::vector<std::vector<std::uint32_t>> ray_pixels;
  ray_pixels.reserve(targets.size());
  for (const Eigen::Vector2d& target : targets) {
    const Eigen::Vector2d dir = target - sensor_center_px;
    const double len = dir.norm();
    if (len < 1e-9) continue;
    const Eigen::Vector2d unit = dir / len;
    // Sample at t = 0, 1, ..., floor(len) plus the border endpoint.
    const int positions = position_count(len);
    double running = 0.0;
    std::vector<std::uint32_t> visited;
    visited.reserve(positions);
    for (int k = 0; k < positions; ++k) {
      const double t = std::min(static_cast<double>(k), len);
      const Eigen::Vector2d p = sensor_center_px + t * unit;
      const int u = std::clamp(static_cast<int>(std::lround(p.x())), 0, scan.width - 1);
      const int v = std::clamp(static_cast<int>(std::lround(p.y())), 0, scan.height - 1);
      // Border positions whose 4-neighborhood leaves the image read as the
      // nearest pixel instead of being dropped.
      const Interp it = interpolate(scan, p);
      running += it.valid ? it.value : scan.at(v, u);
      const float score = static_cast<float>(running / cap);
      const auto idx = static_cast<std::uint32_t>(v) * scan.width + u;
      mask.cumulative[idx] = std::max(mask.cumulative[idx], score);
      if (visited.empty() || visited.back() != idx) visited.push_back(idx);
    }
    ray_pixels.push_back(std::move(visited));
  }

  // Monotone closure: where rays of different lengths cross, the max-combined
  // grid can dip outward by a sampling phase; propagating running maxima along
  // every ray until stable removes the dips and only ever raises scores.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& visited : ray_pixels) {
      float run = 0.0f;
      for (std::uint32_t idx : visited) {
        if (mask.cumulative[idx] < run) {
          mask.cumulative[idx] = run;
          changed = true;
        } else {
          run = mask.cumulative[idx];
        }
      }
    }
  }
  return mask;
}

bool is_excluded(const CumulativeMask& mask, const Eigen::Vector2d& px,
                 double intensity) {
  const double score = mask.score_at(px);
  if (score > mask.saturation_threshold) return true;
  return intensity <= 1e-6 && score > mask.zero_ignore_threshold;
}

}  // namespace scanba
