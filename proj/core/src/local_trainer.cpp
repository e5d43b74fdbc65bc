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

#include "cellfed/local_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cellfed/emq_codec.hpp"
#include "cellfed/errors.hpp"

namespace cellfed::local {

AdaDeltaState AdaDeltaState::fresh(Eigen::Index dimension, double rho, double eps, double alpha) {
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("AdaDelta decay must lie in (0, 1)");
  if (!(eps > 0.0)) throw InvalidArgument("AdaDelta epsilon must be positive");
  return AdaDeltaState{Vector::Zero(dimension), rho, eps, alpha};
}

void adadelta_step(AdaDeltaState& state, Eigen::Ref<Vector> w, const VectorRef& g) {
  state.accum = state.rho * state.accum + (1.0 - state.rho) * g.cwiseProduct(g);
  w.array() -= state.alpha * g.array() / (state.accum.array() + state.eps).sqrt();
}

void sgd_step(double alpha, Eigen::Ref<Vector> w, const VectorRef& g) { w -= alpha * g; }

int step_exponent(const VectorRef& w_l, const VectorRef& w_prev) {
  const double norm = (w_l - w_prev).cwiseAbs().maxCoeff();
  if (norm == 0.0) return kExponentNegInf;
  return emq::decimal_exponent(norm);
}

bool stop_check(int l, int u_lk, int l_prev, int u_prev) { return l >= l_prev && u_lk <= u_prev; }

namespace {

// Draws `count` distinct shard entries; the pool is permuted in place.
std::span<const std::size_t> draw_batch(std::vector<std::size_t>& pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t span = pool.size() - i;
    const auto pick = i + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(span));
    std::swap(pool[i], pool[std::min(pick, pool.size() - 1)]);
  }
  return {pool.data(), count};
}

}  // namespace

LocalResult local_train(const ml::Model& model, const ml::Dataset& data, std::span<const std::size_t> shard,
                        const VectorRef& w_global, int l_prev, int u_prev, const LocalOptions& options,
                        Rng& rng) {
  if (options.l_max < 1) throw InvalidArgument("l_max must be >= 1");
  if (shard.empty()) throw InvalidArgument("client shard is empty");
  if (options.batch_size < 1) throw InvalidArgument("batch size must be >= 1");

  std::vector<std::size_t> pool(shard.begin(), shard.end());
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(options.batch_size), pool.size());

  AdaDeltaState state = AdaDeltaState::fresh(w_global.size(), options.rho, options.eps_a, options.alpha);
  Vector w = w_global;
  Vector w_before(w.size());
  LocalResult result;
  for (int l = 1; l <= options.l_max; ++l) {
    w_before = w;
    const auto minibatch = draw_batch(pool, batch, rng);
    const ml::LossGradient lg = ml::loss_and_gradient(model, w, data, minibatch);
    if (options.optimizer == Optimizer::kAdaDelta) {
      adadelta_step(state, w, lg.gradient);
    } else {
      sgd_step(options.alpha, w, lg.gradient);
    }
    const int u = options.exponent_source == ExponentSource::kCumulative ? step_exponent(w, w_global)
                                                                       : step_exponent(w, w_before);
    result.local_iters = l;
    result.exponent = u;
    if (options.adaptive && stop_check(l, u, l_prev, u_prev)) {
      result.delta_w = w - w_global;
      return result;
    }
  }
  result.delta_w = w - w_global;
  result.fell_through = options.adaptive;
  return result;
}

AlphaBounds compute_alpha_bounds(const ConvergenceParams& p) {
  if (!(p.L_bar > 0.0) || p.L < 1 || p.K < 1 || p.M < 1 || p.d < 1 || !(p.rho > 0.0 && p.rho < 1.0)) {
    throw InvalidArgument("convergence parameters must be positive with rho in (0, 1)");
  }
  const double L = p.L;
  const double Lb = p.L_bar;
  const double K = p.K;
  const double M = p.M;
  const double d = static_cast<double>(p.d);
  AlphaBounds out;
  out.alpha0 = 1.0 / std::sqrt(6.0 * L * Lb * Lb);
  out.alpha1 = std::sqrt(M) / std::sqrt(K * (L * L * Lb * Lb * d * M + 6.0 * L * L * L * Lb * Lb * d * std::exp(6.0)));
  out.alpha2 = std::sqrt(2.0 * (1.0 - p.rho) / (K * L * L * Lb * d));
  if (p.sigma_l2.size() > 0 && p.G > 0.0) {
    const Vector combined = p.sigma_l2.array() / (p.G * p.G * (1.0 - p.rho)) + p.sigma_g2.array();
    out.sigma_k2 = combined.maxCoeff();
  }
  return out;
}

double estimate_lipschitz(const std::function<Vector(const Vector&)>& grad, const VectorRef& w, int pairs,
                          Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = w.size();
  double best = 0.0;
  for (int t = 0; t < pairs; ++t) {
    Vector w1 = w;
    Vector step(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      w1[i] += 0.1 * normal(rng);
      step[i] = 0.01 * normal(rng);
    }
    const Vector w2 = w1 + step;
    const double dist = step.norm();
    if (dist == 0.0) continue;
    best = std::max(best, (grad(w1) - grad(w2)).norm() / dist);
  }
  return best;
}

ConvergenceParams estimate_convergence_params(const ml::Model& model, const ml::Dataset& data,
                                              const std::vector<std::vector<std::size_t>>& shards,
                                              const VectorRef& w, int n_samples, Rng& rng) {
  if (shards.empty()) throw InvalidArgument("need at least one shard");
  const Eigen::Index d = model.dimension();
  ConvergenceParams params;
  params.M = static_cast<int>(shards.size());
  params.d = d;
  params.sigma_l2 = Vector::Zero(d);
  params.sigma_g2 = Vector::Zero(d);

  Matrix client_grads(d, params.M);
  for (std::size_t j = 0; j < shards.size(); ++j) {
    const auto& shard = shards[j];
    const Vector full = ml::loss_and_gradient(model, w, data, shard).gradient;
    client_grads.col(static_cast<Eigen::Index>(j)) = full;
    params.L_bar = std::max(
        params.L_bar,
        estimate_lipschitz([&](const Vector& x) { return ml::loss_and_gradient(model, x, data, shard).gradient; }, w,
                           std::max(1, n_samples / params.M), rng));
    Vector var = Vector::Zero(d);
    const int draws = std::max(1, n_samples);
    for (int s = 0; s < draws; ++s) {
      const std::size_t pick = shard[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(shard.size()))];
      const std::size_t one[] = {pick};
      const Vector g = ml::loss_and_gradient(model, w, data, one).gradient;
      params.G = std::max(params.G, g.cwiseAbs().maxCoeff());
      var += (g - full).cwiseAbs2();
    }
    params.sigma_l2 = params.sigma_l2.cwiseMax(var / draws);
  }
  const Vector mean = client_grads.rowwise().mean();
  for (Eigen::Index j = 0; j < params.M; ++j) params.sigma_g2 += (client_grads.col(j) - mean).cwiseAbs2();
  params.sigma_g2 /= params.M;
  return params;
}

}  // namespace cellfed::local
