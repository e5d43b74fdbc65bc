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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cellfed/channel_model.hpp"
#include "cellfed/errors.hpp"
#include "oracles.hpp"

namespace cellfed::channel {
namespace {

// SINR evaluated term by term from the large-scale gains, without the
// precomputed statistics.
double reference_sinr(const Matrix& beta, const std::vector<int>& pilot, const ChannelConfig& cfg, const Vector& p,
                      int j) {
  const Eigen::Index A = beta.rows();
  const Eigen::Index M = beta.cols();
  const double N = cfg.antennas;
  const double pp = cfg.tau_p * cfg.p_u;
  auto gamma = [&](Eigen::Index m, Eigen::Index k) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) {
      if (pilot[static_cast<std::size_t>(i)] == pilot[static_cast<std::size_t>(k)]) c += beta(m, i);
    }
    return pp * beta(m, k) * beta(m, k) / (pp * c + cfg.noise_w);
  };
  double sum_gamma = 0.0;
  double self = 0.0;
  for (Eigen::Index m = 0; m < A; ++m) {
    sum_gamma += N * gamma(m, j);
    self += N * gamma(m, j) * beta(m, j);
  }
  const double num = sum_gamma * sum_gamma * p[j];
  double den = self * p[j] + cfg.noise_w * sum_gamma / cfg.p_u;
  for (Eigen::Index i = 0; i < M; ++i) {
    if (i == j) continue;
    double t = 0.0;
    double c = 0.0;
    for (Eigen::Index m = 0; m < A; ++m) {
      t += N * gamma(m, j) * beta(m, i);
      c += N * gamma(m, j) * beta(m, i) / beta(m, j);
    }
    if (pilot[static_cast<std::size_t>(i)] == pilot[static_cast<std::size_t>(j)]) t += c * c;
    den += p[i] * t;
  }
  return num / den;
}

Matrix random_beta(Rng& rng, int aps, int clients) {
  std::uniform_real_distribution<double> db(-140.0, -80.0);
  Matrix beta(aps, clients);
  for (int m = 0; m < aps; ++m) {
    for (int j = 0; j < clients; ++j) beta(m, j) = std::pow(10.0, db(rng) / 10.0);
  }
  return beta;
}

TEST(Units, DbmToWatt) {
  EXPECT_NEAR(dbm_to_watt(30.0), 1.0, 1e-15);
  EXPECT_NEAR(dbm_to_watt(-94.0) / 3.981071705534972e-13, 1.0, 1e-12);
  EXPECT_NEAR(ChannelConfig{}.noise_w / dbm_to_watt(-94.0), 1.0, 1e-12);
}

TEST(Config, Validation) {
  ChannelConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.tau_p = cfg.tau_c;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.p_u = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  EXPECT_DOUBLE_EQ(cfg.pre_log_bandwidth(), 20e6 * (1.0 - 10.0 / 200.0));
  EXPECT_DOUBLE_EQ(cfg.pilot_power(), 1.0);
}

TEST(Geometry, GridAndDeterminism) {
  const NetworkGeometry g = generate_geometry(11, 16, 5, 1000.0, true);
  ASSERT_EQ(g.aps.size(), 16u);
  EXPECT_DOUBLE_EQ(g.aps[0].x, 125.0);
  EXPECT_DOUBLE_EQ(g.aps[0].y, 125.0);
  EXPECT_DOUBLE_EQ(g.aps[15].x, 875.0);
  EXPECT_DOUBLE_EQ(g.aps[5].y, 375.0);
  for (const auto& c : g.clients) {
    EXPECT_GE(c.x, 0.0);
    EXPECT_LT(c.x, 1000.0);
    EXPECT_GE(c.y, 0.0);
    EXPECT_LT(c.y, 1000.0);
  }
  const NetworkGeometry again = generate_geometry(11, 16, 5, 1000.0, true);
  const NetworkGeometry other = generate_geometry(12, 16, 5, 1000.0, true);
  EXPECT_EQ(g.clients[3].x, again.clients[3].x);
  EXPECT_NE(g.clients[3].x, other.clients[3].x);
}

TEST(Geometry, WrapAroundDistance) {
  EXPECT_DOUBLE_EQ(distance({10, 10}, {990, 10}, 1000.0, true), 20.0);
  EXPECT_DOUBLE_EQ(distance({10, 10}, {990, 10}, 1000.0, false), 980.0);
  EXPECT_DOUBLE_EQ(distance({0, 0}, {3, 4}, 1000.0, true), 5.0);
}

TEST(LargeScale, PathlossValue) {
  NetworkGeometry g;
  g.aps = {{0, 0}};
  g.clients = {{100, 0}};
  g.area_side = 1000.0;
  g.wrap_around = false;
  const Matrix beta = compute_large_scale(g, ChannelConfig{}, 0);
  const double db = -30.5 - 36.7 * 2.0;
  EXPECT_NEAR(beta(0, 0) / std::pow(10.0, db / 10.0), 1.0, 1e-12);
}

TEST(Pilots, RoundRobin) {
  EXPECT_EQ(assign_pilots(5, 2), (std::vector<int>{0, 1, 0, 1, 0}));
  EXPECT_EQ(assign_pilots(3, 10), (std::vector<int>{0, 1, 2}));
}

TEST(Sinr, SingleClientClosedForm) {
  ChannelConfig cfg;
  Matrix beta(1, 1);
  beta << 1e-9;
  const ChannelStats s = compute_channel_stats(beta, {0}, cfg);
  const double pp = cfg.pilot_power();
  const double gamma = pp * 1e-18 / (pp * 1e-9 + cfg.noise_w);
  const double expected = cfg.antennas * gamma / (1e-9 + cfg.noise_w / cfg.p_u);
  EXPECT_NEAR(sinr(s, Vector::Ones(1), 0) / expected, 1.0, 1e-12);
  EXPECT_EQ(uplink_rate(s, Vector::Zero(1), 0, cfg), 0.0);
}

TEST(Sinr, MatchesTermByTermReference) {
  Rng rng = make_rng(21, "sinr-reference");
  ChannelConfig cfg;
  cfg.tau_p = 2;
  for (int t = 0; t < 100; ++t) {
    const int A = 1 + static_cast<int>(rng() % 6);
    const int M = 1 + static_cast<int>(rng() % 5);
    const Matrix beta = random_beta(rng, A, M);
    const auto pilots = assign_pilots(M, cfg.tau_p);
    const ChannelStats s = compute_channel_stats(beta, pilots, cfg);
    Vector p(M);
    for (int j = 0; j < M; ++j) p[j] = 0.01 + unit_uniform(rng);
    for (int j = 0; j < M; ++j) {
      EXPECT_NEAR(sinr(s, p, j) / reference_sinr(beta, pilots, cfg, p, j), 1.0, 1e-10);
    }
  }
}

TEST(Sinr, PilotSharingCostsRate) {
  Rng rng = make_rng(22, "pilot-sharing");
  const Matrix beta = random_beta(rng, 4, 2);
  ChannelConfig cfg;
  const ChannelStats orthogonal = compute_channel_stats(beta, {0, 1}, cfg);
  const ChannelStats shared = compute_channel_stats(beta, {0, 0}, cfg);
  const Vector p = Vector::Ones(2);
  for (int j = 0; j < 2; ++j) EXPECT_LT(uplink_rate(shared, p, j, cfg), uplink_rate(orthogonal, p, j, cfg));
}

TEST(Rate, MonotoneInPowers) {
  const ChannelStats s = build_channel(5, 16, 4, 1000.0, true, ChannelConfig{});
  ChannelConfig cfg;
  Vector p = Vector::Constant(4, 0.5);
  const double base = uplink_rate(s, p, 0, cfg);
  p[0] = 0.6;
  EXPECT_GT(uplink_rate(s, p, 0, cfg), base);
  p[0] = 0.5;
  p[1] = 0.9;
  EXPECT_LE(uplink_rate(s, p, 0, cfg), base);
}

TEST(Rate, JacobianMatchesFiniteDifferences) {
  Rng rng = make_rng(23, "rate-jacobian");
  ChannelConfig cfg;
  cfg.tau_p = 3;
  for (int t = 0; t < 100; ++t) {
    const int M = 1 + static_cast<int>(rng() % 6);
    const ChannelStats s = build_channel(rng(), 16, M, 1000.0, true, cfg);
    Vector p(M);
    for (int j = 0; j < M; ++j) p[j] = 0.05 + 0.9 * unit_uniform(rng);
    const Matrix J = rate_jacobian(s, p, cfg);
    Matrix fd(M, M);
    for (int j = 0; j < M; ++j) {
      const auto rj = [&](const Vector& x) { return uplink_rate(s, x, j, cfg); };
      for (int i = 0; i < M; ++i) fd(j, i) = testing::five_point_difference(rj, p, i, 1e-4);
    }
    EXPECT_LT((J - fd).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff(), 1e-6) << "instance " << t;
  }
}

TEST(Csv, HeadersAndRows) {
  const NetworkGeometry g = generate_geometry(1, 4, 2, 100.0, false);
  std::ostringstream geo;
  write_geometry_csv(geo, g);
  EXPECT_EQ(geo.str().substr(0, 15), "kind,index,x,y\n");
  const ChannelStats s = compute_channel_stats(compute_large_scale(g, ChannelConfig{}, 1), assign_pilots(2, 10),
                                               ChannelConfig{});
  std::ostringstream st;
  write_stats_csv(st, s);
  std::string line;
  int rows = 0;
  std::istringstream in(st.str());
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(Stats, RejectsBadInput) {
  Matrix beta = Matrix::Constant(2, 2, 1e-9);
  EXPECT_THROW(compute_channel_stats(beta, {0}, ChannelConfig{}), InvalidArgument);
  beta(0, 0) = -1.0;
  EXPECT_THROW(compute_channel_stats(beta, {0, 1}, ChannelConfig{}), InvalidArgument);
}

}  // namespace
}  // namespace cellfed::channel
