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

#ifndef CELLFED_CHANNEL_MODEL_HPP
#define CELLFED_CHANNEL_MODEL_HPP

// Cell-free massive MIMO uplink at the large-scale-statistics level.
//
// Clients send with power p_j * p_u, p_j in [0, 1]. APs use maximum-ratio
// combining on MMSE channel estimates, which gives the closed-form
//
//   SINR_j = A_j p_j / (B_j p_j + sum_{i != j} p_i Bt_j^i + I_j)
//   r_j    = B (1 - tau_p / tau_c) log2(1 + SINR_j)
//
// with A, B, Bt, I computed once from pathloss and pilot assignment.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cellfed/types.hpp"

namespace cellfed::channel {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct NetworkGeometry {
  std::vector<Point> aps;
  std::vector<Point> clients;
  double area_side = 1000.0;
  bool wrap_around = true;
};

struct ChannelConfig {
  int antennas = 4;                  // N per AP
  double bandwidth_hz = 20e6;        // B
  int tau_c = 200;                   // coherence block, channel uses
  int tau_p = 10;                    // pilot length
  double p_u = 0.1;                  // W
  double noise_w = 3.981071705534972e-13;  // -94 dBm, noise figure included
  double pathloss_exponent = 3.67;
  double pathloss_intercept_db = 30.5;
  double shadowing_std_db = 0.0;     // log-normal shadowing, off by default

  double pre_log_bandwidth() const { return bandwidth_hz * (1.0 - static_cast<double>(tau_p) / tau_c); }
  double pilot_power() const { return tau_p * p_u; }

  /// Throws InvalidArgument unless 0 < tau_p < tau_c, p_u > 0, noise > 0, N >= 1.
  void validate() const;
};

double dbm_to_watt(double dbm);

struct ChannelStats {
  Matrix beta;        // A_p x M, linear large-scale gain
  Matrix gamma;       // A_p x M, mean-square of the MMSE estimate
  Vector A_bar;       // M, coherent gain
  Vector B_bar;       // M, self beamforming uncertainty
  Matrix B_tilde;     // M x M, row j = victim, column i = interferer; diagonal unused
  Vector I_M;         // M, noise term
  std::vector<int> pilot_of;

  int clients() const { return static_cast<int>(A_bar.size()); }
};

NetworkGeometry generate_geometry(std::uint64_t seed, int num_aps, int num_clients,
                                  double area_side, bool wrap_around = true);

double distance(const Point& a, const Point& b, double area_side, bool wrap_around);

/// Log-distance pathloss, distance floored at 1 m. Shadowing is drawn from
/// `shadow_seed` only when cfg.shadowing_std_db > 0.
Matrix compute_large_scale(const NetworkGeometry& geom, const ChannelConfig& cfg,
                           std::uint64_t shadow_seed = 0);

/// Round-robin: client j uses pilot j mod tau_p.
std::vector<int> assign_pilots(int num_clients, int tau_p);

ChannelStats compute_channel_stats(const Matrix& beta, const std::vector<int>& pilot_of,
                                   const ChannelConfig& cfg);

/// Convenience: geometry -> beta -> pilots -> stats.
ChannelStats build_channel(std::uint64_t seed, int num_aps, int num_clients, double area_side,
                           bool wrap_around, const ChannelConfig& cfg);

double sinr(const ChannelStats& stats, const VectorRef& p, int j);
double uplink_rate(const ChannelStats& stats, const VectorRef& p, int j, const ChannelConfig& cfg);
Vector uplink_rates(const ChannelStats& stats, const VectorRef& p, const ChannelConfig& cfg);

/// J(j, i) = d r_j / d p_i, bits/s per unit power coefficient.
Matrix rate_jacobian(const ChannelStats& stats, const VectorRef& p, const ChannelConfig& cfg);

/// CSV dumps. geometry: kind,index,x,y. stats: one row per client with
/// client,pilot,A_bar,B_bar,I_M,B_tilde_row_sum.
void write_geometry_csv(std::ostream& out, const NetworkGeometry& geom);
void write_stats_csv(std::ostream& out, const ChannelStats& stats);

}  // namespace cellfed::channel

#endif  // CELLFED_CHANNEL_MODEL_HPP
