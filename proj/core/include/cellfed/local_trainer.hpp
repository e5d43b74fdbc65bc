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

#ifndef CELLFED_LOCAL_TRAINER_HPP
#define CELLFED_LOCAL_TRAINER_HPP

#include <algorithm>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cellfed/ml_core.hpp"
#include "cellfed/random.hpp"
#include "cellfed/types.hpp"

namespace cellfed::local {

// Sentinels for decimal exponents: the zero delta sits below every exponent,
// and the "no previous round" marker sits above every exponent.
inline constexpr int kExponentNegInf = std::numeric_limits<int>::min();
inline constexpr int kExponentPosInf = std::numeric_limits<int>::max();

/// Per-parameter adaptive step with a decayed mean of squared gradients:
///   accum <- rho accum + (1 - rho) g*g
///   w     <- w - alpha g / sqrt(accum + eps)
struct AdaDeltaState {
  Vector accum;
  double rho = 0.9;
  double eps = 1e-6;
  double alpha = 0.1;

  static AdaDeltaState fresh(Eigen::Index dimension, double rho, double eps, double alpha);
};

void adadelta_step(AdaDeltaState& state, Eigen::Ref<Vector> w, const VectorRef& g);
void sgd_step(double alpha, Eigen::Ref<Vector> w, const VectorRef& g);

/// floor(log10 ||w_l - w_prev||_inf), or kExponentNegInf for a zero delta.
/// Unlike the codec exponent this is not range-limited.
int step_exponent(const VectorRef& w_l, const VectorRef& w_prev);

/// True iff l >= l_prev and u_lk <= u_prev.
bool stop_check(int l, int u_lk, int l_prev, int u_prev);

enum class Optimizer { kAdaDelta, kSgd };

/// Which delta the stopping rule measures.
enum class ExponentSource {
  kCumulative,  // w_l - w_global: the vector that gets quantized
  kPerStep,     // w_l - w_{l-1}
};

struct LocalOptions {
  Optimizer optimizer = Optimizer::kAdaDelta;
  double alpha = 0.1;
  double rho = 0.9;
  double eps_a = 1e-6;
  int l_max = 6;
  int batch_size = 32;
  bool adaptive = true;  // false: always run l_max steps
  ExponentSource exponent_source = ExponentSource::kCumulative;
};

struct LocalResult {
  Vector delta_w;
  int local_iters = 0;
  int exponent = kExponentNegInf;  // exponent the stopping rule accepted
  bool fell_through = false;
};

LocalResult local_train(const ml::Model& model, const ml::Dataset& data, std::span<const std::size_t> shard,
                        const VectorRef& w_global, int l_prev, int u_prev, const LocalOptions& options, Rng& rng);

struct ConvergenceParams {
  double L_bar = 0.0;    // smoothness
  double G = 0.0;        // per-sample gradient component bound
  Vector sigma_l2;       // per-coordinate local variance
  Vector sigma_g2;       // per-coordinate global variance
  int L = 1;             // max local iterations
  int K = 1;             // planned global rounds
  int M = 1;
  Eigen::Index d = 1;
  double rho = 0.9;
};

struct AlphaBounds {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double sigma_k2 = 0.0;

  double min() const { return std::min({alpha0, alpha1, alpha2}); }
};

/// alpha0 = (6 L Lbar^2)^-1/2
/// alpha1 = sqrt(M) / sqrt(K (L^2 Lbar^2 d M + 6 L^3 Lbar^2 d e^6))
/// alpha2 = sqrt(2 (1 - rho) / (K L^2 Lbar d))
/// sigma_k^2 = max_i [ sigma_l_i^2 / (G^2 (1 - rho)) + sigma_g_i^2 ]
AlphaBounds compute_alpha_bounds(const ConvergenceParams& params);

/// max over `pairs` random pairs near w of |grad(w1) - grad(w2)| / |w1 - w2|.
/// A sampled lower bound on the true Lipschitz constant.
double estimate_lipschitz(const std::function<Vector(const Vector&)>& grad, const VectorRef& w, int pairs,
                          Rng& rng);

/// Empirical lower-bound estimates of the smoothness, gradient bound and
/// variance constants at w, using per-sample gradients on each shard.
ConvergenceParams estimate_convergence_params(const ml::Model& model, const ml::Dataset& data,
                                              const std::vector<std::vector<std::size_t>>& shards,
                                              const VectorRef& w, int n_samples, Rng& rng);

}  // namespace cellfed::local

#endif  // CELLFED_LOCAL_TRAINER_HPP
