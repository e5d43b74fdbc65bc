// Copyright 2026 The CellFed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cellfed/power_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cellfed/errors.hpp"

namespace cellfed::power {

void PowerProblem::validate() const {
  const Eigen::Index M = bits.size();
  if (M < 1) throw InvalidArgument("power problem needs at least one client");
  if (stats.A_bar.size() != M || stats.B_bar.size() != M || stats.I_M.size() != M ||
      stats.B_tilde.rows() != M || stats.B_tilde.cols() != M) {
    throw InvalidArgument("channel statistics do not match the number of bit counts");
  }
  if ((bits.array() < 1.0).any()) throw InvalidArgument("bit counts must be >= 1");
  if (theta_E < 0.0 || theta_E > 1.0 || theta_l < 0.0 || theta_l > 1.0) {
    throw InvalidArgument("scalarization weights must lie in [0, 1]");
  }
  if (theta_E == 0.0 && theta_l == 0.0) throw InvalidArgument("theta_E and theta_l are both zero");
  if (!(p_min > 0.0) || p_min >= 1.0) throw InvalidArgument("p_min must lie in (0, 1)");
  if ((stats.I_M.array() <= 0.0).any()) throw InvalidArgument("noise terms I_M must be positive");
  cfg.validate();
}

double latency(const PowerProblem& problem, const VectorRef& p, int j) {
  const double r = channel::uplink_rate(problem.stats, p, j, problem.cfg);
  if (!(r > 0.0)) return std::numeric_limits<double>::infinity();
  return problem.bits[j] / r;
}

Vector latencies(const PowerProblem& problem, const VectorRef& p) {
  Vector ell(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) ell[j] = latency(problem, p, static_cast<int>(j));
  return ell;
}

double energy(const PowerProblem& problem, const VectorRef& p, int j) {
  if (p[j] == 0.0) return 0.0;
  return p[j] * problem.cfg.p_u * latency(problem, p, j);
}

Matrix latency_jacobian(const PowerProblem& problem, const VectorRef& p) {
  const Matrix J = channel::rate_jacobian(problem.stats, p, problem.cfg);
  const Vector r = channel::uplink_rates(problem.stats, p, problem.cfg);
  Matrix L(J.rows(), J.cols());
  for (Eigen::Index j = 0; j < J.rows(); ++j) {
    L.row(j) = -problem.bits[j] / (r[j] * r[j]) * J.row(j);
  }
  return L;
}

double objective(const PowerProblem& problem, const VectorRef& x) {
  const Eigen::Index M = problem.bits.size();
  const auto p = x.head(M);
  double total_energy = 0.0;
  if (problem.theta_E != 0.0) {
    for (Eigen::Index j = 0; j < M; ++j) total_energy += energy(problem, p, static_cast<int>(j));
  }
  return problem.theta_l * x[M] + problem.theta_E * total_energy;
}

Vector objective_gradient(const PowerProblem& problem, const VectorRef& x) {
  const Eigen::Index M = problem.bits.size();
  Vector grad = Vector::Zero(M + 1);
  grad[M] = problem.theta_l;
  if (problem.theta_E == 0.0) return grad;
  const Vector p = x.head(M);
  const Vector ell = latencies(problem, p);
  const Matrix L = latency_jacobian(problem, p);
  // dE_j/dp_i = p_u (delta_ij ell_j + p_j dell_j/dp_i)
  Vector dE = problem.cfg.p_u * (L.transpose() * p);
  dE += problem.cfg.p_u * ell;
  grad.head(M) = problem.theta_E * dE;
  return grad;
}

QpData build_qp(const PowerProblem& problem, const VectorRef& x, const Matrix& H) {
  const Eigen::Index M = problem.bits.size();
  const Vector p = x.head(M);
  const double ell_max = x[M];
  const Vector ell = latencies(problem, p);
  Matrix L = latency_jacobian(problem, p);
  if (problem.linearization == Linearization::kDiagonal) L = Matrix(L.diagonal().asDiagonal());

  QpData qp;
  qp.H = H;
  qp.g = objective_gradient(problem, x);
  qp.G = Matrix::Zero(3 * M, M + 1);
  qp.G.block(0, 0, M, M) = -Matrix::Identity(M, M);
  qp.G.block(M, 0, M, M) = Matrix::Identity(M, M);
  qp.G.block(2 * M, 0, M, M) = L;
  qp.G.block(2 * M, M, M, 1).setConstant(-1.0);
  qp.p_tilde.resize(3 * M);
  qp.p_tilde.segment(0, M) = p.array() - problem.p_min;
  qp.p_tilde.segment(M, M) = 1.0 - p.array();
  // ell_j - ell_max + dL_j dp <= d ell_max, i.e. right-hand side ell_max - ell_j >= 0
  qp.p_tilde.segment(2 * M, M) = ell_max - ell.array();
  return qp;
}

QpResult solve_qp(const Matrix& H, const Vector& g, const Matrix& G, const Vector& p_tilde,
                  int max_iterations) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = G.rows();
  if (H.cols() != n || g.size() != n || G.cols() != n || p_tilde.size() != m) {
    throw InvalidArgument("QP data dimensions are inconsistent");
  }
  if (max_iterations <= 0) max_iterations = std::max<int>(50, 50 * static_cast<int>(m / 3));

  const double rhs_scale = std::max(1.0, p_tilde.cwiseAbs().maxCoeff());
  if ((p_tilde.array() < -1e-9 * rhs_scale).any()) {
    throw QpInfeasible("QP started from an infeasible point (negative right-hand side)");
  }
  const Vector rhs = p_tilde.cwiseMax(0.0);

  Eigen::LLT<Matrix> chol(H);
  if (chol.info() != Eigen::Success) throw InvalidArgument("QP Hessian is not positive definite");

  const double newton_scale = chol.solve(g).cwiseAbs().maxCoeff();
  Vector dx = Vector::Zero(n);
  std::vector<Eigen::Index> working;
  std::vector<bool> in_working(static_cast<std::size_t>(m), false);
  Vector lambda_w;

  QpResult result;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    const Vector q = H * dx + g;
    const auto k = static_cast<Eigen::Index>(working.size());
    Vector step;
    if (k == 0) {
      step = -chol.solve(q);
      lambda_w.resize(0);
    } else {
      Matrix kkt = Matrix::Zero(n + k, n + k);
      kkt.topLeftCorner(n, n) = H;
      for (Eigen::Index a = 0; a < k; ++a) {
        kkt.block(n + a, 0, 1, n) = G.row(working[static_cast<std::size_t>(a)]);
        kkt.block(0, n + a, n, 1) = G.row(working[static_cast<std::size_t>(a)]).transpose();
      }
      Vector b = Vector::Zero(n + k);
      b.head(n) = -q;
      const Vector sol = kkt.fullPivLu().solve(b);
      step = sol.head(n);
      lambda_w = sol.tail(k);
    }

    const double step_tol = 1e-11 * std::max(newton_scale, dx.cwiseAbs().maxCoeff());
    if (step.cwiseAbs().maxCoeff() <= step_tol) {
      if (k == 0) break;
      Eigen::Index drop = -1;
      double most_negative = -1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff());
      for (Eigen::Index a = 0; a < k; ++a) {
        if (lambda_w[a] < most_negative) {
          most_negative = lambda_w[a];
          drop = a;
        }
      }
      if (drop < 0) break;
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = false;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double gs = G.row(i).dot(step);
      if (gs <= 1e-15 * G.row(i).cwiseAbs().maxCoeff() * step.cwiseAbs().maxCoeff()) continue;
      const double ratio = std::max(0.0, (rhs[i] - G.row(i).dot(dx)) / gs);
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
      }
    }
    dx += alpha * step;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = true;
    }
  }

  result.step = dx;
  result.iterations = iter;
  result.multipliers = Vector::Zero(m);
  // lambda_w lags the working set by one entry if the iteration cap hit
  // right after a constraint was added; the newest one then gets zero.
  for (std::size_t a = 0; a < working.size() && static_cast<Eigen::Index>(a) < lambda_w.size(); ++a) {
    result.multipliers[working[a]] = std::max(0.0, lambda_w[static_cast<Eigen::Index>(a)]);
  }
  const Vector stationarity = H * dx + g + G.transpose() * result.multipliers;
  const Vector slack = G * dx - rhs;
  double residual = stationarity.cwiseAbs().maxCoeff();
  residual = std::max(residual, slack.cwiseMax(0.0).maxCoeff());
  residual = std::max(residual, result.multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff());
  result.kkt_residual = residual;
  return result;
}

ArmijoResult armijo_backtrack(const std::function<double(double)>& phi, double f0, double slope) {
  ArmijoResult out;
  double alpha = kArmijoInitialStep;
  for (int t = 0; t < kArmijoMaxHalvings; ++t) {
    const double trial = phi(alpha);
    if (std::isfinite(trial) && trial <= f0 + kArmijoSufficientDecrease * alpha * slope) {
      out.step = alpha;
      out.halvings = t;
      return out;
    }
    alpha *= kArmijoShrink;
  }
  out.step = 0.0;
  out.halvings = kArmijoMaxHalvings;
  out.stalled = true;
  return out;
}

Vector lift_to_feasible(const PowerProblem& problem, const VectorRef& x) {
  const Eigen::Index M = problem.bits.size();
  Vector out = x;
  out.head(M) = out.head(M).cwiseMax(problem.p_min).cwiseMin(1.0);
  const double worst = latencies(problem, out.head(M)).maxCoeff();
  out[M] = std::max(out[M], worst);
  return out;
}

ArmijoResult armijo_step(const PowerProblem& problem, const VectorRef& x, const VectorRef& dx) {
  const double f0 = objective(problem, x);
  const double slope = objective_gradient(problem, x).dot(dx);
  if (!(slope < 0.0)) {
    ArmijoResult out;
    out.stalled = true;
    return out;
  }
  const Vector base = x;
  const Vector direction = dx;
  return armijo_backtrack(
      [&](double alpha) { return objective(problem, lift_to_feasible(problem, base + alpha * direction)); }, f0,
      slope);
}

Matrix bfgs_update(const Matrix& H, const VectorRef& s, const VectorRef& z) {
  const double zs = z.dot(s);
  if (zs <= 1e-10 * s.norm() * z.norm()) return H;
  const Vector Hs = H * s;
  const double sHs = s.dot(Hs);
  if (!(sHs > 0.0)) return H;
  Matrix out = H - (Hs * Hs.transpose()) / sHs + (z * z.transpose()) / zs;
  return 0.5 * (out + out.transpose());
}

Vector initial_iterate(const PowerProblem& problem) {
  const Eigen::Index M = problem.bits.size();
  Vector x(M + 1);
  x.head(M).setOnes();
  x[M] = latencies(problem, x.head(M)).maxCoeff();
  return x;
}

namespace {

// Gradient of the Lagrangian restricted to the nonlinear latency rows; the
// box rows are linear and cancel in gradient differences.
Vector lagrangian_gradient(const PowerProblem& problem, const VectorRef& x, const VectorRef& latency_mult) {
  const Eigen::Index M = problem.bits.size();
  Vector grad = objective_gradient(problem, x);
  const Matrix L = latency_jacobian(problem, x.head(M));
  grad.head(M) += L.transpose() * latency_mult;
  grad[M] -= latency_mult.sum();
  return grad;
}

}  // namespace

PowerSolution solve(const PowerProblem& problem, const SolverOptions& options) {
  problem.validate();
  const Eigen::Index M = problem.bits.size();

  Vector x = initial_iterate(problem);

  // The iteration runs in scaled coordinates xs = x ./ D with D = (1, .., 1,
  // ell_ref) and objective F / F_ref, so that powers and seconds are both of
  // order one. Latency rows are divided by ell_ref.
  const double ell_ref = x[M];
  const double f_ref = std::max(objective(problem, x), std::numeric_limits<double>::min());
  Vector D = Vector::Ones(M + 1);
  D[M] = ell_ref;
  Vector row_scale = Vector::Ones(3 * M);
  row_scale.tail(M).setConstant(1.0 / ell_ref);

  Matrix H = Matrix::Identity(M + 1, M + 1);
  Vector latency_mult = Vector::Zero(M);

  PowerSolution sol;
  sol.objective_trace.push_back(objective(problem, x));
  for (int round = 1; round <= options.max_rounds; ++round) {
    sol.rounds_used = round;
    const QpData qp = build_qp(problem, x, H);
    const Vector g = D.cwiseProduct(qp.g) / f_ref;
    const Matrix G = row_scale.asDiagonal() * qp.G * D.asDiagonal();
    const Vector rhs = row_scale.cwiseProduct(qp.p_tilde);
    const QpResult step = solve_qp(H, g, G, rhs);
    latency_mult = step.multipliers.tail(M) * (f_ref / ell_ref);
    if (step.step.cwiseAbs().maxCoeff() < options.eps_x) {
      sol.converged = true;
      break;
    }
    const Vector dx = D.cwiseProduct(step.step);
    const ArmijoResult ls = armijo_step(problem, x, dx);
    if (ls.stalled) {
      sol.converged = true;
      break;
    }
    const Vector x_next = lift_to_feasible(problem, x + ls.step * dx);
    const Vector s = (x_next - x).cwiseQuotient(D);
    const Vector z = D.cwiseProduct(lagrangian_gradient(problem, x_next, latency_mult) -
                                    lagrangian_gradient(problem, x, latency_mult)) /
                     f_ref;
    H = bfgs_update(H, s, z);
    x = x_next;
    sol.objective_trace.push_back(objective(problem, x));
    if (s.cwiseAbs().maxCoeff() < options.eps_x) {
      sol.converged = true;
      break;
    }
  }

  sol.p = x.head(M);
  sol.ell_max = x[M];
  sol.objective = objective(problem, x);
  sol.kkt_residual = lagrangian_gradient(problem, x, latency_mult).cwiseAbs().maxCoeff();
  return sol;
}

}  // namespace cellfed::power
