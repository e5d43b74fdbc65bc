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

#include "cellfed/federation.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "cellfed/baselines.hpp"
#include "cellfed/errors.hpp"
#include "cellfed/random.hpp"

namespace cellfed::fed {

std::string_view to_string(QuantArm arm) {
  switch (arm) {
    case QuantArm::kEmq:
      return "emq";
    case QuantArm::kFixedBit:
      return "fixedbit";
    case QuantArm::kFullPrecision:
      return "fullprec";
  }
  return "unknown";
}

std::string_view to_string(PowerArm arm) {
  return arm == PowerArm::kSqp ? "sqp" : "fullpower";
}

std::string arm_label(QuantArm quant, PowerArm power) {
  std::string out(to_string(quant));
  out += ':';
  out += to_string(power);
  return out;
}

std::uint64_t IterationRecord::sum_bits() const {
  std::uint64_t total = 0;
  for (const auto& c : clients) total += c.bits;
  return total;
}

double IterationRecord::sum_energy() const {
  double total = 0.0;
  for (const auto& c : clients) total += c.energy;
  return total;
}

double IterationRecord::mean_local_iters() const {
  if (clients.empty()) return 0.0;
  double total = 0.0;
  for (const auto& c : clients) total += c.local_iters;
  return total / static_cast<double>(clients.size());
}

int IterationRecord::max_local_iters() const {
  int best = 0;
  for (const auto& c : clients) best = std::max(best, c.local_iters);
  return best;
}

int IterationRecord::min_exponent() const {
  int best = local::kExponentPosInf;
  for (const auto& c : clients) best = std::min(best, c.exponent);
  return best;
}

int IterationRecord::max_exponent() const {
  int best = local::kExponentNegInf;
  for (const auto& c : clients) best = std::max(best, c.exponent);
  return best;
}

namespace {

double round_latency(const IterationRecord& r, bool include_bp) {
  return r.ell_max + (include_bp ? r.bp_latency : 0.0);
}

double round_energy(const IterationRecord& r, bool include_bp) {
  return r.sum_energy() + (include_bp ? r.bp_energy : 0.0);
}

}  // namespace

StopIndices stop_indices(const std::vector<IterationRecord>& records, const Budget& budget, bool include_bp) {
  StopIndices out;
  out.k_latency = budget.K_max + 1;
  out.k_energy = budget.K_max + 1;
  double cum_latency = 0.0;
  double cum_energy = 0.0;
  const std::size_t horizon = std::min(records.size(), static_cast<std::size_t>(std::max(budget.K_max, 0)));
  for (std::size_t i = 0; i < horizon; ++i) {
    const int k = static_cast<int>(i) + 1;
    cum_latency += round_latency(records[i], include_bp);
    cum_energy += round_energy(records[i], include_bp);
    if (out.k_latency > budget.K_max && cum_latency > budget.latency_total) out.k_latency = k;
    if (out.k_energy > budget.K_max && cum_energy > budget.energy_total) out.k_energy = k;
  }
  out.K = std::min(out.k_latency, out.k_energy) - 1;
  out.K = std::min({out.K, budget.K_max, static_cast<int>(horizon)});
  return out;
}

Vector aggregate(const VectorRef& w_prev, const std::vector<Vector>& deltas) {
  if (deltas.empty()) throw InvalidArgument("aggregation needs at least one delta");
  Vector sum = Vector::Zero(w_prev.size());
  for (const auto& delta : deltas) {
    if (delta.size() != w_prev.size()) throw DimensionMismatch("delta dimension differs from the model");
    sum += delta;
  }
  return w_prev + sum / static_cast<double>(deltas.size());
}

void Environment::validate() const {
  if (shards.empty()) throw InvalidArgument("environment has no clients");
  if (w0.size() != model.dimension()) throw DimensionMismatch("initial weights do not match the model");
  if (stats.clients() != clients()) throw DimensionMismatch("channel and shard client counts differ");
  for (const auto& shard : shards) {
    if (shard.empty()) throw InvalidArgument("empty client shard");
  }
  train.validate();
  test.validate();
  channel_cfg.validate();
}

RoundState RoundState::initial(const Environment& env) {
  RoundState s;
  s.w = env.w0;
  s.shadow = env.w0;
  s.l_prev.assign(static_cast<std::size_t>(env.clients()), 1);
  s.u_prev.assign(static_cast<std::size_t>(env.clients()), local::kExponentPosInf);
  return s;
}

namespace {

struct ClientWork {
  local::LocalResult local;
  Vector delta_q;
  std::uint64_t bits = 0;
  double error_bound = 0.0;
  int wire_exponent = local::kExponentNegInf;
};

void quantize_delta(const FederationConfig& config, ClientWork& work) {
  const Vector& delta = work.local.delta_w;
  switch (config.quant) {
    case QuantArm::kEmq: {
      const emq::EmqCode code = emq::quantize(delta, config.overflow);
      work.delta_q = emq::dequantize(code);
      work.bits = emq::bit_count(code);
      if (!code.zero_vector) {
        work.wire_exponent = code.exponent;
        const emq::ErrorBound b = emq::error_bound(code.exponent);
        work.error_bound = config.overflow == emq::OverflowMode::kClamp ? b.relaxed : b.strict;
      }
      break;
    }
    case QuantArm::kFixedBit: {
      const baselines::FixedBitCode code = baselines::fixed_bit_quantize(delta, config.fixed_bits);
      work.delta_q = baselines::fixed_bit_dequantize(code);
      work.bits = baselines::fixed_bit_count(code);
      work.error_bound = baselines::fixed_bit_error_bound(code.scale, code.n_bits);
      break;
    }
    case QuantArm::kFullPrecision:
      work.delta_q = delta;
      work.bits = baselines::full_precision_bits(static_cast<std::uint64_t>(delta.size()));
      break;
  }
}

std::uint64_t ceil_log2(std::uint64_t b) {
  return b <= 1 ? 0 : static_cast<std::uint64_t>(std::bit_width(b - 1));
}

}  // namespace

IterationRecord global_round(const Environment& env, const FederationConfig& config, RoundState& state) {
  const int M = env.clients();
  state.k += 1;
  std::vector<ClientWork> work(static_cast<std::size_t>(M));
  parallel_for(work.size(), config.threads, [&](std::size_t j) {
    const std::uint64_t stream = (static_cast<std::uint64_t>(state.k) << 32) | j;
    Rng rng = make_rng(config.seed, "local", stream);
    work[j].local = local::local_train(env.model, env.train, env.shards[j], state.w, state.l_prev[j],
                                       state.u_prev[j], config.local, rng);
    quantize_delta(config, work[j]);
  });

  power::PowerProblem problem;
  problem.stats = env.stats;
  problem.cfg = env.channel_cfg;
  problem.bits.resize(M);
  for (int j = 0; j < M; ++j) problem.bits[j] = static_cast<double>(work[static_cast<std::size_t>(j)].bits);
  problem.theta_E = config.theta_E;
  problem.theta_l = config.theta_l;
  problem.p_min = config.p_min;
  problem.linearization = config.linearization;

  IterationRecord rec;
  rec.k = state.k;
  Vector p;
  if (config.power == PowerArm::kSqp) {
    const power::PowerSolution sol = power::solve(problem, config.solver);
    p = sol.p;
    rec.solver_rounds = sol.rounds_used;
    rec.solver_converged = sol.converged;
  } else {
    p = baselines::full_power(M);
  }

  const Vector full = Vector::Ones(M);
  const Vector full_rates = channel::uplink_rates(env.stats, full, env.channel_cfg);
  rec.clients.resize(static_cast<std::size_t>(M));
  std::vector<Vector> deltas_q;
  Vector delta_mean = Vector::Zero(state.w.size());
  deltas_q.reserve(work.size());
  for (int j = 0; j < M; ++j) {
    auto& w = work[static_cast<std::size_t>(j)];
    auto& c = rec.clients[static_cast<std::size_t>(j)];
    c.bits = w.bits;
    c.local_iters = w.local.local_iters;
    c.exponent = w.local.exponent;
    c.wire_exponent = w.wire_exponent;
    c.fell_through = w.local.fell_through;
    c.power = p[j];
    c.latency = power::latency(problem, p, j);
    c.energy = power::energy(problem, p, j);
    c.bp_bits = ceil_log2(w.bits);
    const double bp_latency = static_cast<double>(c.bp_bits) / full_rates[j];
    rec.bp_overhead_bits += c.bp_bits;
    rec.bp_latency = std::max(rec.bp_latency, bp_latency);
    rec.bp_energy += env.channel_cfg.p_u * bp_latency;
    rec.ell_max = std::max(rec.ell_max, c.latency);
    rec.quant_error_bound = std::max(rec.quant_error_bound, w.error_bound);
    delta_mean += w.local.delta_w;
    deltas_q.push_back(std::move(w.delta_q));
    state.l_prev[static_cast<std::size_t>(j)] = c.local_iters;
    state.u_prev[static_cast<std::size_t>(j)] = c.exponent;
  }

  state.w = aggregate(state.w, deltas_q);
  state.shadow += delta_mean / static_cast<double>(M);
  state.shadow_bound += rec.quant_error_bound;
  rec.shadow_bound = state.shadow_bound;
  rec.shadow_gap = (state.w - state.shadow).cwiseAbs().maxCoeff();
  rec.loss = ml::loss(env.model, state.w, env.train);
  rec.accuracy = ml::evaluate(env.model, state.w, env.test);
  return rec;
}

Trajectory run(const Environment& env, const FederationConfig& config, const RoundCallback& on_round) {
  env.validate();
  if (config.budget.K_max < 0) throw InvalidArgument("K_max must be non-negative");
  RoundState state = RoundState::initial(env);
  Trajectory traj;
  traj.weights.push_back(state.w);
  traj.shadow.push_back(state.shadow);
  double cum_latency = 0.0;
  double cum_energy = 0.0;
  for (int k = 1; k <= config.budget.K_max; ++k) {
    IterationRecord rec = global_round(env, config, state);
    cum_latency += round_latency(rec, config.strict_bp_accounting);
    cum_energy += round_energy(rec, config.strict_bp_accounting);
    traj.weights.push_back(state.w);
    traj.shadow.push_back(state.shadow);
    if (on_round) on_round(rec);
    traj.records.push_back(std::move(rec));
    if (cum_latency > config.budget.latency_total || cum_energy > config.budget.energy_total) break;
  }
  traj.stop = stop_indices(traj.records, config.budget, config.strict_bp_accounting);
  return traj;
}

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CELLFED_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<int>(value);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'F', 'C', 'K'};

template <typename T>
void put_le(std::ostream& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::istream& in) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int byte = in.get();
    if (byte == std::char_traits<char>::eof()) throw IoError("checkpoint is truncated");
    value |= static_cast<std::uint64_t>(byte & 0xFF) << (8 * i);
  }
  return static_cast<T>(value);
}

}  // namespace

void write_checkpoint(const std::string& path, const VectorRef& w, std::uint64_t iteration) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(w.size()));
  put_le<std::uint64_t>(out, iteration);
  for (Eigen::Index i = 0; i < w.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(w[i]));
  if (!out) throw IoError("failed writing " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 4, kCheckpointMagic)) throw IoError(path + " is not a checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto dimension = get_le<std::uint64_t>(in);
  Checkpoint ck;
  ck.iteration = get_le<std::uint64_t>(in);
  ck.w.resize(static_cast<Eigen::Index>(dimension));
  for (std::uint64_t i = 0; i < dimension; ++i) {
    ck.w[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(get_le<std::uint64_t>(in));
  }
  return ck;
}

namespace {

void put_exponent(std::ostream& out, int u) {
  if (u == local::kExponentNegInf) {
    out << "-inf";
  } else if (u == local::kExponentPosInf) {
    out << "inf";
  } else {
    out << u;
  }
}

}  // namespace

void write_ledger_csv(std::ostream& out, const Trajectory& trajectory, std::string_view arm) {
  const auto old_precision = out.precision(12);
  out << kLedgerVersionLine << '\n';
  out << "k,loss,test_acc,sum_bits,mean_l,max_l,min_u,max_u,ell_max,sum_E,cum_E,cum_L,arm\n";
  double cum_energy = 0.0;
  double cum_latency = 0.0;
  for (int i = 0; i < trajectory.stop.K; ++i) {
    const IterationRecord& r = trajectory.records[static_cast<std::size_t>(i)];
    const double sum_energy = r.sum_energy();
    cum_energy += sum_energy;
    cum_latency += r.ell_max;
    out << r.k << ',' << r.loss << ',' << r.accuracy << ',' << r.sum_bits() << ',' << r.mean_local_iters() << ','
        << r.max_local_iters() << ',';
    put_exponent(out, r.min_exponent());
    out << ',';
    put_exponent(out, r.max_exponent());
    out << ',' << r.ell_max << ',' << sum_energy << ',' << cum_energy << ',' << cum_latency << ',' << arm << '\n';
  }
  out.precision(old_precision);
}

}  // namespace cellfed::fed
