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

#ifndef CELLFED_POWER_SOLVER_HPP
#define CELLFED_POWER_SOLVER_HPP

// Uplink power allocation trading straggler latency against total energy:
//
//   minimize    theta_l * ell_max + theta_E * sum_j E_j(p)
//   subject to  p_min <= p_j <= 1,   ell_j(p) <= ell_max
//
// where ell_j = b_j / r_j(p) and E_j = p_j p_u ell_j. Solved by SQP over
// x = (p_1..p_M, ell_max) with a BFGS Hessian model, an active-set QP for
// the search direction and Armijo backtracking on the objective.

#include <functional>
#include <vector>

#include "cellfed/channel_model.hpp"
#include "cellfed/types.hpp"

namespace cellfed::power {

inline constexpr double kMinPower = 1e-4;

/// How the latency constraints ell_j(p) <= ell_max are linearized.
enum class Linearization {
  kFull,      // d ell_j / d p_i for every i
  kDiagonal,  // d ell_j / d p_j only
};

struct PowerProblem {
  channel::ChannelStats stats;
  channel::ChannelConfig cfg;
  Vector bits;  // b_j >= 1
  double theta_E = 0.5;
  double theta_l = 0.5;
  double p_min = kMinPower;
  Linearization linearization = Linearization::kFull;

  int clients() const { return static_cast<int>(bits.size()); }
  /// Throws InvalidArgument on inconsistent sizes, bits < 1, weights outside
  /// [0, 1] or both weights zero.
  void validate() const;
};

/// Seconds; +infinity when the rate is zero.
double latency(const PowerProblem& problem, const VectorRef& p, int j);
Vector latencies(const PowerProblem& problem, const VectorRef& p);
/// Joules; zero when p_j == 0.
double energy(const PowerProblem& problem, const VectorRef& p, int j);
/// L(j, i) = d ell_j / d p_i.
Matrix latency_jacobian(const PowerProblem& problem, const VectorRef& p);

double objective(const PowerProblem& problem, const VectorRef& x);
Vector objective_gradient(const PowerProblem& problem, const VectorRef& x);

/// QP in the step dx:  min 1/2 dx'H dx + g'dx  s.t.  G dx <= p_tilde.
/// Rows of G: [-I 0] (lower box), [I 0] (upper box), [dL -1] (latency).
struct QpData {
  Matrix H;
  Vector g;
  Matrix G;
  Vector p_tilde;
};

QpData build_qp(const PowerProblem& problem, const VectorRef& x, const Matrix& H);

struct QpResult {
  Vector step;
  Vector multipliers;  // one per row of G, >= 0
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Primal active-set method started from dx = 0. Requires p_tilde >= 0
/// (the current iterate is feasible) and H positive definite; throws
/// QpInfeasible otherwise. max_iterations <= 0 means 50 * (rows / 3).
QpResult solve_qp(const Matrix& H, const Vector& g, const Matrix& G, const Vector& p_tilde,
                  int max_iterations = 0);

inline constexpr double kArmijoInitialStep = 1.0;
inline constexpr double kArmijoShrink = 0.5;
inline constexpr double kArmijoSufficientDecrease = 0.1;
inline constexpr int kArmijoMaxHalvings = 40;

struct ArmijoResult {
  double step = 0.0;
  int halvings = 0;
  bool stalled = false;  // no acceptable step within the halving cap; step = 0
};

/// Backtracking on a scalar trial function phi(alpha) = F(x + alpha dx):
/// accepts the first alpha = 0.5^t with phi(alpha) <= f0 + 0.1 alpha slope.
ArmijoResult armijo_backtrack(const std::function<double(double)>& phi, double f0, double slope);

/// Keeps p inside [p_min, 1] and raises ell_max to max_j ell_j(p) when the
/// trial point undershoots it, so every accepted iterate is feasible.
Vector lift_to_feasible(const PowerProblem& problem, const VectorRef& x);

ArmijoResult armijo_step(const PowerProblem& problem, const VectorRef& x, const VectorRef& dx);

/// Skips the update (returns H) when z's <= 1e-10 |s| |z|.
Matrix bfgs_update(const Matrix& H, const VectorRef& s, const VectorRef& z);

struct SolverOptions {
  double eps_x = 1e-6;
  int max_rounds = 200;
};

struct PowerSolution {
  Vector p;
  double ell_max = 0.0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int rounds_used = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // F at x^1, x^2, ...
};

/// Initial iterate: all p = 1, ell_max = max_j ell_j(1).
Vector initial_iterate(const PowerProblem& problem);

PowerSolution solve(const PowerProblem& problem, const SolverOptions& options = {});

}  // namespace cellfed::power

#endif  // CELLFED_POWER_SOLVER_HPP
