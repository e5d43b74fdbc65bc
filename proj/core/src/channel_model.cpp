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

#include "cellfed/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "cellfed/errors.hpp"
#include "cellfed/random.hpp"

namespace cellfed::channel {

void ChannelConfig::validate() const {
  if (antennas < 1) throw InvalidArgument("antennas must be >= 1");
  if (tau_p <= 0 || tau_p >= tau_c) throw InvalidArgument("need 0 < tau_p < tau_c");
  if (!(p_u > 0.0)) throw InvalidArgument("p_u must be positive");
  if (!(noise_w > 0.0)) throw InvalidArgument("noise power must be positive");
  if (!(bandwidth_hz > 0.0)) throw InvalidArgument("bandwidth must be positive");
}

double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

NetworkGeometry generate_geometry(std::uint64_t seed, int num_aps, int num_clients,
                                  double area_side, bool wrap_around) {
  if (num_aps < 1 || num_clients < 1) throw InvalidArgument("need at least one AP and one client");
  if (!(area_side > 0.0)) throw InvalidArgument("area side must be positive");

  NetworkGeometry geom;
  geom.area_side = area_side;
  geom.wrap_around = wrap_around;

  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_aps))));
  const double cell = area_side / grid;
  for (int a = 0; a < num_aps; ++a) {
    const int row = a / grid;
    const int col = a % grid;
    geom.aps.push_back({(col + 0.5) * cell, (row + 0.5) * cell});
  }

  Rng rng = make_rng(seed, "geometry.clients");
  for (int j = 0; j < num_clients; ++j) {
    const double x = unit_uniform(rng) * area_side;
    const double y = unit_uniform(rng) * area_side;
    geom.clients.push_back({x, y});
  }
  return geom;
}

double distance(const Point& a, const Point& b, double area_side, bool wrap_around) {
  double dx = std::abs(a.x - b.x);
  double dy = std::abs(a.y - b.y);
  if (wrap_around) {
    dx = std::min(dx, area_side - dx);
    dy = std::min(dy, area_side - dy);
  }
  return std::hypot(dx, dy);
}

Matrix compute_large_scale(const NetworkGeometry& geom, const ChannelConfig& cfg,
                           std::uint64_t shadow_seed) {
  const auto num_aps = static_cast<Eigen::Index>(geom.aps.size());
  const auto num_clients = static_cast<Eigen::Index>(geom.clients.size());
  Matrix beta(num_aps, num_clients);
  Rng rng = make_rng(shadow_seed, "channel.shadowing");
  std::normal_distribution<double> shadow(0.0, cfg.shadowing_std_db > 0.0 ? cfg.shadowing_std_db : 1.0);
  for (Eigen::Index m = 0; m < num_aps; ++m) {
    for (Eigen::Index j = 0; j < num_clients; ++j) {
      const double dist = std::max(
          1.0, distance(geom.aps[static_cast<std::size_t>(m)], geom.clients[static_cast<std::size_t>(j)],
                        geom.area_side, geom.wrap_around));
      double db = -cfg.pathloss_intercept_db - 10.0 * cfg.pathloss_exponent * std::log10(dist);
      if (cfg.shadowing_std_db > 0.0) db += shadow(rng);
      beta(m, j) = std::pow(10.0, db / 10.0);
    }
  }
  return beta;
}

std::vector<int> assign_pilots(int num_clients, int tau_p) {
  if (tau_p < 1) throw InvalidArgument("tau_p must be >= 1");
  std::vector<int> pilots(static_cast<std::size_t>(std::max(num_clients, 0)));
  for (int j = 0; j < num_clients; ++j) pilots[static_cast<std::size_t>(j)] = j % tau_p;
  return pilots;
}

ChannelStats compute_channel_stats(const Matrix& beta, const std::vector<int>& pilot_of,
                                   const ChannelConfig& cfg) {
  cfg.validate();
  const Eigen::Index num_aps = beta.rows();
  const Eigen::Index M = beta.cols();
  if (static_cast<Eigen::Index>(pilot_of.size()) != M) {
    throw InvalidArgument("pilot assignment size differs from client count");
  }
  if ((beta.array() < 0.0).any()) throw InvalidArgument("large-scale gains must be nonnegative");

  const double N = cfg.antennas;
  const double pp = cfg.pilot_power();
  const double noise = cfg.noise_w;
  const auto same_pilot = [&](Eigen::Index a, Eigen::Index b) {
    return pilot_of[static_cast<std::size_t>(a)] == pilot_of[static_cast<std::size_t>(b)];
  };

  ChannelStats s;
  s.beta = beta;
  s.pilot_of = pilot_of;
  s.gamma.resize(num_aps, M);
  // gamma / beta, kept separately so that beta -> 0 stays finite
  Matrix gamma_over_beta(num_aps, M);
  for (Eigen::Index m = 0; m < num_aps; ++m) {
    for (Eigen::Index j = 0; j < M; ++j) {
      double contaminated = 0.0;
      for (Eigen::Index i = 0; i < M; ++i) {
        if (same_pilot(i, j)) contaminated += beta(m, i);
      }
      const double denom = pp * contaminated + noise;
      gamma_over_beta(m, j) = pp * beta(m, j) / denom;
      s.gamma(m, j) = gamma_over_beta(m, j) * beta(m, j);
    }
  }

  s.A_bar.resize(M);
  s.B_bar.resize(M);
  s.I_M.resize(M);
  s.B_tilde = Matrix::Zero(M, M);
  for (Eigen::Index j = 0; j < M; ++j) {
    const double coherent = N * s.gamma.col(j).sum();
    s.A_bar[j] = coherent * coherent;
    s.B_bar[j] = N * s.gamma.col(j).dot(beta.col(j));
    s.I_M[j] = N * noise * s.gamma.col(j).sum() / cfg.p_u;
    for (Eigen::Index i = 0; i < M; ++i) {
      if (i == j) continue;
      double value = N * s.gamma.col(j).dot(beta.col(i));
      if (same_pilot(i, j)) {
        const double pc = N * gamma_over_beta.col(j).dot(beta.col(i));
        value += pc * pc;
      }
      s.B_tilde(j, i) = value;
    }
  }
  return s;
}

ChannelStats build_channel(std::uint64_t seed, int num_aps, int num_clients, double area_side,
                           bool wrap_around, const ChannelConfig& cfg) {
  const NetworkGeometry geom = generate_geometry(seed, num_aps, num_clients, area_side, wrap_around);
  return compute_channel_stats(compute_large_scale(geom, cfg, seed), assign_pilots(num_clients, cfg.tau_p),
                               cfg);
}

namespace {

double interference_plus_noise(const ChannelStats& s, const VectorRef& p, Eigen::Index j) {
  double acc = s.B_bar[j] * p[j] + s.I_M[j];
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i != j) acc += p[i] * s.B_tilde(j, i);
  }
  return acc;
}

void check_powers(const ChannelStats& s, const VectorRef& p) {
  if (p.size() != s.A_bar.size()) throw InvalidArgument("power vector size differs from client count");
}

}  // namespace

double sinr(const ChannelStats& stats, const VectorRef& p, int j) {
  check_powers(stats, p);
  const double denom = interference_plus_noise(stats, p, j);
  if (p[j] == 0.0) return 0.0;
  return stats.A_bar[j] * p[j] / denom;
}

double uplink_rate(const ChannelStats& stats, const VectorRef& p, int j, const ChannelConfig& cfg) {
  return cfg.pre_log_bandwidth() * std::log2(1.0 + sinr(stats, p, j));
}

Vector uplink_rates(const ChannelStats& stats, const VectorRef& p, const ChannelConfig& cfg) {
  Vector r(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) r[j] = uplink_rate(stats, p, static_cast<int>(j), cfg);
  return r;
}

Matrix rate_jacobian(const ChannelStats& stats, const VectorRef& p, const ChannelConfig& cfg) {
  check_powers(stats, p);
  // r_j = c [ln(D_j + A_j p_j) - ln D_j], c = B_tau / ln 2
  const double c = cfg.pre_log_bandwidth() / std::numbers::ln2;
  const Eigen::Index M = p.size();
  Matrix J(M, M);
  for (Eigen::Index j = 0; j < M; ++j) {
    const double D = interference_plus_noise(stats, p, j);
    const double total = D + stats.A_bar[j] * p[j];
    for (Eigen::Index i = 0; i < M; ++i) {
      if (i == j) {
        J(j, i) = c * ((stats.B_bar[j] + stats.A_bar[j]) / total - stats.B_bar[j] / D);
      } else {
        const double bt = stats.B_tilde(j, i);
        J(j, i) = c * (bt / total - bt / D);
      }
    }
  }
  return J;
}

void write_geometry_csv(std::ostream& out, const NetworkGeometry& geom) {
  out << "kind,index,x,y\n";
  out.precision(17);
  for (std::size_t a = 0; a < geom.aps.size(); ++a) {
    out << "ap," << a << ',' << geom.aps[a].x << ',' << geom.aps[a].y << '\n';
  }
  for (std::size_t j = 0; j < geom.clients.size(); ++j) {
    out << "client," << j << ',' << geom.clients[j].x << ',' << geom.clients[j].y << '\n';
  }
}

void write_stats_csv(std::ostream& out, const ChannelStats& stats) {
  out << "client,pilot,A_bar,B_bar,I_M,B_tilde_row_sum\n";
  out.precision(17);
  for (Eigen::Index j = 0; j < stats.A_bar.size(); ++j) {
    out << j << ',' << stats.pilot_of[static_cast<std::size_t>(j)] << ',' << stats.A_bar[j] << ','
        << stats.B_bar[j] << ',' << stats.I_M[j] << ',' << stats.B_tilde.row(j).sum() << '\n';
  }
}

}  // namespace cellfed::channel
