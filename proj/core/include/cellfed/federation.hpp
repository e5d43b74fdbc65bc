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

#ifndef CELLFED_FEDERATION_HPP
#define CELLFED_FEDERATION_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "cellfed/channel_model.hpp"
#include "cellfed/emq_codec.hpp"
#include "cellfed/local_trainer.hpp"
#include "cellfed/ml_core.hpp"
#include "cellfed/power_solver.hpp"
#include "cellfed/types.hpp"

namespace cellfed::fed {

enum class QuantArm { kEmq, kFixedBit, kFullPrecision };
enum class PowerArm { kSqp, kFullPower };

std::string_view to_string(QuantArm arm);
std::string_view to_string(PowerArm arm);
/// "emq:sqp" style label.
std::string arm_label(QuantArm quant, PowerArm power);

struct Budget {
  double energy_total = std::numeric_limits<double>::infinity();   // joules
  double latency_total = std::numeric_limits<double>::infinity();  // seconds
  int K_max = 100;
};

struct ClientRecord {
  std::uint64_t bits = 0;
  int local_iters = 0;
  int exponent = local::kExponentNegInf;       // stopping-rule exponent
  int wire_exponent = local::kExponentNegInf;  // EMQ exponent on the wire; -inf for zero or non-EMQ payloads
  double latency = 0.0;
  double energy = 0.0;
  double power = 0.0;
  bool fell_through = false;
  std::uint64_t bp_bits = 0;  // ceil(log2 bits)
};

struct IterationRecord {
  int k = 0;
  std::vector<ClientRecord> clients;
  double ell_max = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::uint64_t bp_overhead_bits = 0;
  double bp_latency = 0.0;  // slowest bit report at full power
  double bp_energy = 0.0;

  double quant_error_bound = 0.0;  // max_j elementwise dequantization bound this round
  double shadow_gap = 0.0;         // |w_k - w_k^F|_inf
  double shadow_bound = 0.0;       // cumulative sum of quant_error_bound

  int solver_rounds = 0;
  bool solver_converged = true;

  std::uint64_t sum_bits() const;
  double sum_energy() const;
  double mean_local_iters() const;
  int max_local_iters() const;
  int min_exponent() const;
  int max_exponent() const;
};

struct StopIndices {
  int k_latency = 0;  // first k whose cumulative latency exceeds the budget, or K_max + 1
  int k_energy = 0;   // same for energy
  int K = 0;          // completed rounds that fit both budgets
};

/// K = min(k_latency, k_energy) - 1, capped at K_max and at the number of
/// records. With include_bp the bit-report overhead counts against budgets.
StopIndices stop_indices(const std::vector<IterationRecord>& records, const Budget& budget,
                         bool include_bp = false);

/// w_prev + mean of deltas. Throws DimensionMismatch.
Vector aggregate(const VectorRef& w_prev, const std::vector<Vector>& deltas);

struct FederationConfig {
  QuantArm quant = QuantArm::kEmq;
  PowerArm power = PowerArm::kSqp;
  emq::OverflowMode overflow = emq::OverflowMode::kClamp;
  int fixed_bits = 8;
  local::LocalOptions local;
  double theta_E = 0.5;
  double theta_l = 0.5;
  double p_min = power::kMinPower;
  power::Linearization linearization = power::Linearization::kFull;
  power::SolverOptions solver;
  Budget budget;
  bool strict_bp_accounting = false;
  int threads = 1;
  std::uint64_t seed = 0;
};

/// Everything a run needs besides the configuration.
struct Environment {
  ml::Model model;
  ml::Dataset train;
  ml::Dataset test;
  std::vector<std::vector<std::size_t>> shards;
  channel::ChannelStats stats;
  channel::ChannelConfig channel_cfg;
  Vector w0;

  int clients() const { return static_cast<int>(shards.size()); }
  void validate() const;
};

struct RoundState {
  int k = 0;
  Vector w;
  Vector shadow;
  std::vector<int> l_prev;
  std::vector<int> u_prev;
  double shadow_bound = 0.0;

  static RoundState initial(const Environment& env);
};

/// One global iteration: local training fan-out, quantization, power
/// allocation, accounting and aggregation. Advances `state`.
IterationRecord global_round(const Environment& env, const FederationConfig& config, RoundState& state);

struct Trajectory {
  std::vector<Vector> weights;  // w_0 .. w_n for every executed round
  std::vector<Vector> shadow;   // full-precision aggregate on the same trajectory
  std::vector<IterationRecord> records;
  StopIndices stop;

  /// w_K.
  const Vector& final_weights() const { return weights[static_cast<std::size_t>(stop.K)]; }
};

using RoundCallback = std::function<void(const IterationRecord&)>;

/// Runs rounds until a budget is exceeded or K_max rounds complete.
Trajectory run(const Environment& env, const FederationConfig& config, const RoundCallback& on_round = {});

/// Worker count: `requested` if positive, else CELLFED_THREADS, else the
/// hardware concurrency.
int resolve_thread_count(int requested);

/// Calls fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Vector w;
  std::uint64_t iteration = 0;
};

/// "CFCK", u32 version, u64 dimension, u64 iteration, then little-endian doubles.
void write_checkpoint(const std::string& path, const VectorRef& w, std::uint64_t iteration);
Checkpoint read_checkpoint(const std::string& path);

inline constexpr std::string_view kLedgerVersionLine = "# cellfed-ledger v1";

/// Versioned CSV of the first K records:
/// k,loss,test_acc,sum_bits,mean_l,max_l,min_u,max_u,ell_max,sum_E,cum_E,cum_L,arm
void write_ledger_csv(std::ostream& out, const Trajectory& trajectory, std::string_view arm);

}  // namespace cellfed::fed

#endif  // CELLFED_FEDERATION_HPP
