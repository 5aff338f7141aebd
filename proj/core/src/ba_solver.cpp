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

#include "scanba/ba_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "scanba/parallel.hpp"

namespace scanba {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Valid samples gathered for one map cell.
struct CellSamples {
  std::vector<int> states;
  std::vector<double> intensities;
  std::vector<double> weights;
  std::vector<Eigen::Vector3d> grads;  // d itilde / d xi per observing pose
  double mean = 0.0;
  double weight_total = 0.0;
};

// Weights come from weight_poses so a linearization can hold them fixed while
// the geometry varies (the solver passes the same trajectory for both).
bool gather_cell(const BAProblem& problem, const Trajectory& poses,
                 const Trajectory& weight_poses, const Covisibility& covis,
                 std::size_t cell, bool want_grads, CellSamples& out) {
  const int row = static_cast<int>(cell) / problem.grid.cols;
  const int col = static_cast<int>(cell) % problem.grid.cols;
  const Eigen::Vector2d m = problem.grid.cell_center(col, row);
  out.states.clear();
  out.intensities.clear();
  out.weights.clear();
  out.grads.clear();

  const bool same_weights = &poses == &weight_poses;
  for (std::uint32_t k = covis.offsets[cell]; k < covis.offsets[cell + 1]; ++k) {
    const int n = covis.scan_ids[k];
    const CumulativeMask* mask = problem.masks.empty() ? nullptr : &problem.masks[n];
    const SampleResult s = sample(m, poses[n].pose, problem.scans[n], problem.wm, mask);
    if (!s.valid) continue;
    double w = s.weight;
    if (!same_weights) {
      w = problem.wm.weight(transform_point(inverse(weight_poses[n].pose), m).norm());
    }
    out.states.push_back(n);
    out.intensities.push_back(s.intensity);
    out.weights.push_back(w);
    if (want_grads) {
      out.grads.push_back(pose_jacobian_from_gradient(s.grad_px, s.sensor_pt,
                                                      problem.scans[n].resolution_m));
    }
  }
  if (out.states.size() < 2) return false;

  double swi = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    swi += out.weights[i] * out.intensities[i];
    sw += out.weights[i];
  }
  out.mean = swi / sw;
  out.weight_total = sw;
  return true;
}

double cell_cost(const CellSamples& c) {
  double cost = 0.0;
  for (std::size_t i = 0; i < c.states.size(); ++i) {
    const double r = c.mean - c.intensities[i];
    cost += c.weights[i] * r * r;
  }
  return cost;
}

CellSystem make_cell_system(std::size_t cell, const CellSamples& c, JacobianMode mode) {
  const int nv = static_cast<int>(c.states.size());
  CellSystem sys;
  sys.cell = cell;
  sys.states = c.states;
  sys.e.resize(nv);
  sys.J = Eigen::MatrixXd::Zero(nv, 3 * nv);
  for (int i = 0; i < nv; ++i) {
    const double sqw = std::sqrt(c.weights[i]);
    sys.e(i) = sqw * (c.mean - c.intensities[i]);
    if (mode == JacobianMode::kMeanFixed) {
      sys.J.block<1, 3>(i, 3 * i) = -sqw * c.grads[i].transpose();
    } else {
      // d e_i / d xi_k = sqrt(w_i) * ((w_k / w_total) g_k - [i == k] g_i)
      for (int k = 0; k < nv; ++k) {
        Eigen::Vector3d g = (c.weights[k] / c.weight_total) * c.grads[k];
        if (k == i) g -= c.grads[i];
        sys.J.block<1, 3>(i, 3 * k) = sqw * g.transpose();
      }
    }
  }
  return sys;
}

double max_pose_motion(const Trajectory& a, const Trajectory& b, double lever_arm_m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dt = std::hypot(a[i].pose.x - b[i].pose.x, a[i].pose.y - b[i].pose.y);
    const double dr = std::abs(wrap_angle(a[i].pose.theta - b[i].pose.theta));
    worst = std::max(worst, dt + dr * lever_arm_m);
  }
  return worst;
}

Trajectory apply_update(const Trajectory& poses, const Eigen::VectorXd& dx) {
  Trajectory out = poses;
  for (std::size_t k = 1; k < poses.size(); ++k) {
    const Eigen::Vector3d xi = dx.segment<3>(3 * (k - 1));
    out[k].pose = apply_perturbation(poses[k].pose, Twist2::from_vec(xi));
  }
  return out;
}

}  // namespace

Covisibility compute_covisibility(const BAProblem& problem, const Trajectory& poses) {
  const std::size_t cells = problem.grid.size();
  const std::size_t n_scans = problem.scans.size();
  std::vector<Eigen::Vector2d> centers(n_scans);
  std::vector<double> radii2(n_scans);
  for (std::size_t n = 0; n < n_scans; ++n) {
    centers[n] = poses[n].pose.translation();
    const double r = problem.scans[n].footprint_radius_m();
    radii2[n] = r * r;
  }

  Covisibility covis;
  covis.offsets.assign(cells + 1, 0);
  std::vector<std::int32_t> ids;
  ids.reserve(cells);  // grown as needed
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const int row = static_cast<int>(cell) / problem.grid.cols;
    const int col = static_cast<int>(cell) % problem.grid.cols;
    const Eigen::Vector2d m = problem.grid.cell_center(col, row);
    for (std::size_t n = 0; n < n_scans; ++n) {
      if ((m - centers[n]).squaredNorm() <= radii2[n]) {
        ids.push_back(static_cast<std::int32_t>(n));
      }
    }
    covis.offsets[cell + 1] = static_cast<std::uint32_t>(ids.size());
  }
  covis.scan_ids = std::move(ids);
  return covis;
}

double for_each_cell_system(const BAProblem& problem, const Trajectory& poses,
                            const Trajectory& weight_poses, const Covisibility& covis,
                            JacobianMode mode,
                            const std::function<void(const CellSystem&)>& visit) {
  double cost = 0.0;
  CellSamples c;
  for (std::size_t cell = 0; cell < covis.cells(); ++cell) {
    if (!gather_cell(problem, poses, weight_poses, covis, cell, true, c)) continue;
    cost += cell_cost(c);
    visit(make_cell_system(cell, c, mode));
  }
  return cost;
}

double evaluate_cost(const BAProblem& problem, const Trajectory& poses,
                     const Trajectory& weight_poses, const Covisibility& covis,
                     int threads) {
  const std::size_t cells = covis.cells();
  const int t = effective_threads(threads);
  std::vector<double> partial(std::max(1, t), 0.0);
  parallel_chunks(cells, threads, [&](int chunk, std::size_t begin, std::size_t end) {
    CellSamples c;
    double acc = 0.0;
    for (std::size_t cell = begin; cell < end; ++cell) {
      if (!gather_cell(problem, poses, weight_poses, covis, cell, false, c)) continue;
      acc += cell_cost(c);
    }
    partial[chunk] = acc;
  });
  double cost = 0.0;
  for (double p : partial) cost += p;
  return cost;
}

NormalSystem::NormalSystem(int num_poses) : num_poses_(num_poses) {
  b_ = Eigen::VectorXd::Zero(dim());
}

void NormalSystem::add_block(int state_i, int state_j, const Eigen::Matrix3d& h) {
  if (state_i == 0 || state_j == 0) return;  // gauge anchor rows/cols deleted
  if (state_i <= state_j) {
    auto [it, inserted] = blocks_.try_emplace({state_i, state_j}, h);
    if (!inserted) it->second += h;
  } else {
    add_block(state_j, state_i, h.transpose());
  }
}

void NormalSystem::add_rhs(int state_i, const Eigen::Vector3d& b) {
  if (state_i == 0) return;
  b_.segment<3>(3 * (state_i - 1)) += b;
}

void NormalSystem::accumulate(const CellSystem& cell) {
  const int nv = static_cast<int>(cell.states.size());
  for (int a = 0; a < nv; ++a) {
    const int i = cell.states[a];
    const Eigen::MatrixXd ja = cell.J.middleCols(3 * a, 3);
    if (i != 0) add_rhs(i, -ja.transpose() * cell.e);
    for (int b = a; b < nv; ++b) {
      const int j = cell.states[b];
      if (i == 0 && j == 0) continue;
      add_block(i, j, ja.transpose() * cell.J.middleCols(3 * b, 3));
    }
  }
}

void NormalSystem::merge(const NormalSystem& other) {
  for (const auto& [key, h] : other.blocks_) {
    auto [it, inserted] = blocks_.try_emplace(key, h);
    if (!inserted) it->second += h;
  }
  b_ += other.b_;
}

std::set<std::pair<int, int>> NormalSystem::block_pattern() const {
  std::set<std::pair<int, int>> pattern;
  for (const auto& [key, h] : blocks_) pattern.insert(key);
  return pattern;
}

std::size_t NormalSystem::scalar_nnz() const {
  std::size_t nnz = 0;
  for (const auto& [key, h] : blocks_) nnz += key.first == key.second ? 9 : 18;
  return nnz;
}

std::optional<Eigen::VectorXd> NormalSystem::solve(double damping) const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(blocks_.size() * 9 * 2);
  for (const auto& [key, h] : blocks_) {
    const int r0 = 3 * (key.first - 1), c0 = 3 * (key.second - 1);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        double v = h(r, c);
        if (key.first == key.second && r == c) v *= 1.0 + damping;
        triplets.emplace_back(r0 + r, c0 + c, v);
        if (key.first != key.second) triplets.emplace_back(c0 + c, r0 + r, v);
      }
    }
  }
  Eigen::SparseMatrix<double> h(dim(), dim());
  h.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd dx = ldlt.solve(b_);
  if (ldlt.info() != Eigen::Success || !dx.allFinite()) return std::nullopt;
  return dx;
}

std::vector<int> NormalSystem::unconstrained_states(double tol) const {
  std::vector<int> missing;
  for (int s = 1; s < num_poses_; ++s) {
    const auto it = blocks_.find({s, s});
    if (it == blocks_.end() || it->second.norm() <= tol) missing.push_back(s);
  }
  return missing;
}

NormalSystem assemble(const BAProblem& problem, const Trajectory& poses,
                      const Covisibility& covis, JacobianMode mode, double* cost) {
  const int num_poses = static_cast<int>(poses.size());
  const std::size_t cells = covis.cells();
  const int t = effective_threads(problem.threads);
  std::vector<NormalSystem> partial(std::max(1, t), NormalSystem(num_poses));
  std::vector<double> partial_cost(partial.size(), 0.0);

  parallel_chunks(cells, problem.threads, [&](int chunk, std::size_t begin, std::size_t end) {
    CellSamples c;
    double acc = 0.0;
    for (std::size_t cell = begin; cell < end; ++cell) {
      if (!gather_cell(problem, poses, poses, covis, cell, true, c)) continue;
      acc += cell_cost(c);
      partial[chunk].accumulate(make_cell_system(cell, c, mode));
    }
    partial_cost[chunk] = acc;
  });

  NormalSystem system = std::move(partial[0]);
  double total = partial_cost[0];
  for (std::size_t i = 1; i < partial.size(); ++i) {
    system.merge(partial[i]);
    total += partial_cost[i];
  }
  if (cost != nullptr) *cost = total;
  return system;
}

BAResult solve_ba(const BAProblem& problem, const SolverConfig& config) {
  const auto t0 = Clock::now();
  if (problem.scans.size() != problem.init_poses.size() || problem.scans.size() < 2) {
    throw std::invalid_argument("solve_ba: need at least two index-aligned scans/poses");
  }

  double lever = 0.0;
  for (const Scan& s : problem.scans) lever = std::max(lever, s.footprint_radius_m());

  BAResult result;
  result.poses = problem.init_poses;
  ConvergenceReport& report = result.report;

  Covisibility covis = compute_covisibility(problem, result.poses);
  Trajectory covis_ref = result.poses;
  double lambda = config.damping;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (max_pose_motion(result.poses, covis_ref, lever) > 0.5 * problem.grid.resolution_m) {
      covis = compute_covisibility(problem, result.poses);
      covis_ref = result.poses;
    }

    double cost0 = 0.0;
    const NormalSystem system = assemble(problem, result.poses, covis,
                                         config.jacobian_mode, &cost0);
    report.h_nnz = system.scalar_nnz();
    if (report.costs.empty()) report.costs.push_back(cost0);

    const std::vector<int> missing = system.unconstrained_states();
    if (!missing.empty()) {
      std::ostringstream msg;
      msg << "normal equations rank-deficient: no residuals constrain state(s)";
      for (int s : missing) msg << " " << s;
      throw SolveError(msg.str());
    }

    bool accepted = false;
    bool noop_step = false;
    Eigen::VectorXd dx;
    Trajectory candidate;
    double cost1 = 0.0;
    double best_candidate = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
      const auto solved = system.solve(lambda);
      if (!solved) {
        lambda = lambda == 0.0 ? 1e-4 : lambda * 10.0;
        continue;
      }
      dx = *solved;
      if (attempt == 0 && dx.norm() < config.update_tolerance) {
        noop_step = true;  // already at the fixed point of this linearization
        break;
      }
      candidate = apply_update(result.poses, dx);
      // Step acceptance compares the frozen-weight objective the Gauss-Newton
      // model descends; weights are re-frozen at the next linearization.
      cost1 = evaluate_cost(problem, candidate, result.poses, covis, problem.threads);
      best_candidate = std::min(best_candidate, cost1);
      if (cost1 <= cost0 * (1.0 + 1e-12)) {
        accepted = true;
      } else {
        lambda = lambda == 0.0 ? 1e-4 : lambda * 10.0;
      }
    }
    if (noop_step) {
      report.iterations = iter + 1;
      report.update_norms.push_back(dx.norm());
      report.converged = true;
      report.message = "update norm below tolerance";
      break;
    }
    if (!accepted) {
      if (dx.size() == 0) {
        throw SolveError("normal equations could not be factorized after damping");
      }
      // Re-weighting at the candidate poses shifts the objective by a hair;
      // when no small step can change the cost beyond that, this is a
      // stationary point of the reweighted objective.
      if (dx.norm() <= 1e4 * config.update_tolerance &&
          best_candidate - cost0 <=
              100.0 * config.cost_rel_tolerance * std::max(cost0, 1e-300)) {
        report.converged = true;
        report.message = "cost stationary within tolerance";
        break;
      }
      // The retry budget for this linearization is spent; carry the escalated
      // damping into the next iteration and keep grinding. The iteration cap
      // bounds the total work.
      continue;
    }
    lambda = std::max(config.damping, lambda / 10.0);

    result.poses = candidate;
    report.iterations = iter + 1;
    report.costs.push_back(cost1);
    const double step = dx.norm();
    report.update_norms.push_back(step);

    if (step < config.update_tolerance) {
      report.converged = true;
      report.message = "update norm below tolerance";
      break;
    }
    if (cost0 - cost1 < config.cost_rel_tolerance * std::max(cost0, 1e-300)) {
      report.converged = true;
      report.message = "relative cost decrease below tolerance";
      break;
    }
  }
  if (report.message.empty()) {
    report.message = "max iterations reached without meeting tolerances";
  }

  result.map = problem.grid;
  build_map(problem.scans, result.poses, problem.wm, problem.masks, result.map,
            problem.threads);
  report.wall_time_s = seconds_since(t0);
  return result;
}

JointResult solve_joint_oracle(const BAProblem& problem, const SolverConfig& config) {
  const auto t0 = Clock::now();
  const int num_poses = static_cast<int>(problem.init_poses.size());
  Trajectory poses = problem.init_poses;
  Covisibility covis = compute_covisibility(problem, poses);

  // Fix the intensity state set at initialization: every cell with at least
  // one valid sample.
  std::vector<std::size_t> cell_indices;
  std::vector<double> intensities;
  std::vector<std::int64_t> cell_to_state(problem.grid.size(), -1);
  std::size_t residual_count = 0;
  {
    CellSamples c;
    for (std::size_t cell = 0; cell < covis.cells(); ++cell) {
      gather_cell(problem, poses, poses, covis, cell, false, c);
      if (c.states.empty()) continue;
      double swi = 0.0, sw = 0.0;
      for (std::size_t i = 0; i < c.states.size(); ++i) {
        swi += c.weights[i] * c.intensities[i];
        sw += c.weights[i];
      }
      cell_to_state[cell] = static_cast<std::int64_t>(cell_indices.size());
      cell_indices.push_back(cell);
      intensities.push_back(swi / sw);
      residual_count += c.states.size();
    }
  }
  if (residual_count > 1000000) {
    throw std::invalid_argument("solve_joint_oracle: instance above 10^6 residuals");
  }

  const int pose_dim = 3 * (num_poses - 1);
  const int dim = pose_dim + static_cast<int>(cell_indices.size());
  JointResult result;
  ConvergenceReport& report = result.report;
  double lambda = config.damping;

  // One linearization pass: returns cost and, when wanted, the triplets/rhs.
  // weights_at pins the weight poses so candidate evaluations stay on the
  // same frozen objective as the system they are compared against.
  const auto linearize = [&](const Trajectory& at, const Trajectory& weights_at,
                             const std::vector<double>& ivals,
                             std::vector<Eigen::Triplet<double>>* triplets,
                             Eigen::VectorXd* rhs) {
    double cost = 0.0;
    CellSamples c;
    for (std::size_t s = 0; s < cell_indices.size(); ++s) {
      const std::size_t cell = cell_indices[s];
      gather_cell(problem, at, weights_at, covis, cell, triplets != nullptr, c);
      const int icol = pose_dim + static_cast<int>(s);
      double hii = 0.0;
      for (std::size_t i = 0; i < c.states.size(); ++i) {
        const int n = c.states[i];
        const double w = c.weights[i];
        const double sqw = std::sqrt(w);
        const double r = sqw * (ivals[s] - c.intensities[i]);
        cost += r * r;
        if (triplets == nullptr) continue;
        hii += w;
        (*rhs)(icol) += -sqw * r;
        if (n != 0) {
          const Eigen::Vector3d g = c.grads[i];
          const int prow = 3 * (n - 1);
          const Eigen::Matrix3d hpp = w * g * g.transpose();
          for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
              triplets->emplace_back(prow + a, prow + b, hpp(a, b));
            }
            const double hpi = -w * g(a);
            triplets->emplace_back(prow + a, icol, hpi);
            triplets->emplace_back(icol, prow + a, hpi);
          }
          rhs->segment<3>(prow) += sqw * r * g;
        }
      }
      if (triplets != nullptr) {
        // Frozen intensity state when a cell currently has no valid samples.
        triplets->emplace_back(icol, icol, hii > 0.0 ? hii : 1.0);
      }
    }
    return cost;
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    const double cost0 = linearize(poses, poses, intensities, &triplets, &rhs);
    if (report.costs.empty()) report.costs.push_back(cost0);

    Eigen::SparseMatrix<double> h(dim, dim);
    h.setFromTriplets(triplets.begin(), triplets.end());
    report.h_nnz = static_cast<std::size_t>(h.nonZeros());

    bool accepted = false;
    bool noop_step = false;
    Eigen::VectorXd dx;
    Trajectory cand_poses;
    std::vector<double> cand_i;
    double cost1 = 0.0;
    double best_candidate = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
      Eigen::SparseMatrix<double> hd = h;
      if (lambda > 0.0) {
        for (int k = 0; k < dim; ++k) hd.coeffRef(k, k) *= 1.0 + lambda;
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(hd);
      if (ldlt.info() == Eigen::Success) {
        dx = ldlt.solve(rhs);
        if (ldlt.info() == Eigen::Success && dx.allFinite()) {
          if (attempt == 0 && dx.norm() < config.update_tolerance) {
            noop_step = true;
            break;
          }
          cand_poses = poses;
          for (int k = 1; k < num_poses; ++k) {
            cand_poses[k].pose = apply_perturbation(
                poses[k].pose, Twist2::from_vec(dx.segment<3>(3 * (k - 1))));
          }
          cand_i = intensities;
          for (std::size_t s = 0; s < cand_i.size(); ++s) {
            cand_i[s] += dx(pose_dim + static_cast<int>(s));
          }
          cost1 = linearize(cand_poses, poses, cand_i, nullptr, nullptr);
          best_candidate = std::min(best_candidate, cost1);
          if (cost1 <= cost0 * (1.0 + 1e-12)) {
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
      report.converged = true;
      report.message = "update norm below tolerance";
      break;
    }
    if (!accepted) {
      if (dx.size() > 0 && dx.norm() <= 1e4 * config.update_tolerance &&
          best_candidate - cost0 <=
              100.0 * config.cost_rel_tolerance * std::max(cost0, 1e-300)) {
        report.converged = true;
        report.message = "cost stationary within tolerance";
        break;
      }
      continue;  // keep the escalated damping and re-try from a fresh iteration
    }
    lambda = std::max(config.damping, lambda / 10.0);

    poses = cand_poses;
    intensities = cand_i;
    report.iterations = iter + 1;
    report.costs.push_back(cost1);
    const double step = dx.norm();
    report.update_norms.push_back(step);
    if (step < config.update_tolerance) {
      report.converged = true;
      report.message = "update norm below tolerance";
      break;
    }
    if (cost0 - cost1 < config.cost_rel_tolerance * std::max(cost0, 1e-300)) {
      report.converged = true;
      report.message = "relative cost decrease below tolerance";
      break;
    }
  }
  if (report.message.empty()) report.message = "max iterations reached without meeting tolerances";

  result.poses = std::move(poses);
  result.cell_indices = std::move(cell_indices);
  result.intensities = std::move(intensities);
  report.wall_time_s = seconds_since(t0);
  return result;
}

}  // namespace scanba
