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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cellfed/baselines.hpp"
#include "cellfed/errors.hpp"
#include "cellfed/federation.hpp"
#include "cellfed/random.hpp"

namespace cellfed::fed {
namespace {

Environment small_env(int clients, std::uint64_t seed) {
  Environment env;
  env.model = ml::Model::mlp(6, 8, 3);
  const ml::Dataset all = ml::generate_synthetic(seed, 600, 3, 6, 2.0);
  std::vector<std::size_t> train_rows(400), test_rows(200);
  for (std::size_t i = 0; i < 400; ++i) train_rows[i] = i;
  for (std::size_t i = 0; i < 200; ++i) test_rows[i] = 400 + i;
  const auto take = [&](const std::vector<std::size_t>& rows) {
    ml::Dataset out;
    out.num_classes = all.num_classes;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), all.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.features.row(static_cast<Eigen::Index>(i)) = all.features.row(static_cast<Eigen::Index>(rows[i]));
      out.labels.push_back(all.labels[rows[i]]);
    }
    return out;
  };
  env.train = take(train_rows);
  env.test = take(test_rows);
  env.shards = ml::partition(env.train, {ml::PartitionMode::kIid, clients, seed + 1});
  env.stats = channel::build_channel(seed + 2, 16, clients, 1000.0, true, env.channel_cfg);
  Rng rng = make_rng(seed, "init");
  env.w0 = ml::initial_weights(env.model, rng);
  return env;
}

FederationConfig small_config(QuantArm quant, PowerArm power, int rounds) {
  FederationConfig c;
  c.quant = quant;
  c.power = power;
  c.budget.K_max = rounds;
  c.seed = 99;
  c.local.batch_size = 16;
  return c;
}

IterationRecord fake_record(int k, double latency, double energy) {
  IterationRecord r;
  r.k = k;
  r.ell_max = latency;
  ClientRecord c;
  c.energy = energy;
  r.clients.push_back(c);
  return r;
}

TEST(Aggregate, MeanOfDeltas) {
  Vector w(2);
  w << 1.0, -1.0;
  Vector a(2), b(2);
  a << 0.2, 0.4;
  b << -0.4, 0.0;
  const Vector out = aggregate(w, {a, b});
  EXPECT_DOUBLE_EQ(out[0], 0.9);
  EXPECT_DOUBLE_EQ(out[1], -0.8);
  EXPECT_EQ(aggregate(w, {Vector::Zero(2)}), w);
  EXPECT_THROW(aggregate(w, {Vector::Zero(3)}), DimensionMismatch);
  EXPECT_THROW(aggregate(w, {}), InvalidArgument);
}

TEST(StopIndices, LatencyBudget) {
  std::vector<IterationRecord> recs;
  for (int k = 1; k <= 6; ++k) recs.push_back(fake_record(k, 0.3, 0.0));
  Budget b;
  b.latency_total = 1.0;
  b.K_max = 10;
  const StopIndices s = stop_indices(recs, b);
  EXPECT_EQ(s.k_latency, 4);
  EXPECT_EQ(s.k_energy, 11);
  EXPECT_EQ(s.K, 3);
}

TEST(StopIndices, InfiniteBudgetsAndFirstRoundOverrun) {
  std::vector<IterationRecord> recs;
  for (int k = 1; k <= 5; ++k) recs.push_back(fake_record(k, 0.1, 2.0));
  Budget b;
  b.K_max = 5;
  EXPECT_EQ(stop_indices(recs, b).K, 5);
  b.K_max = 3;
  EXPECT_EQ(stop_indices(recs, b).K, 3);
  b.energy_total = 1.0;
  const StopIndices s = stop_indices(recs, b);
  EXPECT_EQ(s.k_energy, 1);
  EXPECT_EQ(s.K, 0);
}

TEST(StopIndices, BitReportOverheadOnlyWhenStrict) {
  std::vector<IterationRecord> recs;
  for (int k = 1; k <= 4; ++k) {
    recs.push_back(fake_record(k, 0.25, 0.0));
    recs.back().bp_latency = 0.1;
  }
  Budget b;
  b.latency_total = 1.0;
  EXPECT_EQ(stop_indices(recs, b, false).K, 4);
  EXPECT_EQ(stop_indices(recs, b, true).K, 2);
}

TEST(Federation, FullPrecisionShadowMatchesTrajectory) {
  const Environment env = small_env(3, 5);
  const Trajectory t = run(env, small_config(QuantArm::kFullPrecision, PowerArm::kFullPower, 5));
  ASSERT_EQ(t.weights.size(), 6u);
  for (std::size_t k = 0; k < t.weights.size(); ++k) EXPECT_LT((t.weights[k] - t.shadow[k]).cwiseAbs().maxCoeff(), 1e-14);
  for (const auto& r : t.records) {
    EXPECT_EQ(r.shadow_bound, 0.0);
    EXPECT_EQ(r.sum_bits(), 3u * 32u * static_cast<std::uint64_t>(env.model.dimension()));
  }
}

TEST(Federation, ShadowGapStaysWithinAccumulatedBound) {
  const Environment env = small_env(4, 6);
  for (QuantArm quant : {QuantArm::kEmq, QuantArm::kFixedBit}) {
    for (auto mode : {emq::OverflowMode::kClamp, emq::OverflowMode::kPromoteExponent}) {
      FederationConfig c = small_config(quant, PowerArm::kFullPower, 8);
      c.overflow = mode;
      c.fixed_bits = 4;
      const Trajectory t = run(env, c);
      double bound = 0.0;
      for (const auto& r : t.records) {
        bound += r.quant_error_bound;
        EXPECT_DOUBLE_EQ(r.shadow_bound, bound);
        EXPECT_LE(r.shadow_gap, r.shadow_bound * (1 + 1e-12) + 1e-15);
        EXPECT_GT(r.shadow_bound, 0.0);
      }
    }
  }
}

TEST(Federation, DeterministicAndThreadIndependent) {
  const Environment env = small_env(5, 7);
  FederationConfig c = small_config(QuantArm::kEmq, PowerArm::kSqp, 4);
  const Trajectory a = run(env, c);
  const Trajectory b = run(env, c);
  c.threads = 4;
  const Trajectory d = run(env, c);
  ASSERT_EQ(a.weights.size(), d.weights.size());
  for (std::size_t k = 0; k < a.weights.size(); ++k) {
    EXPECT_EQ(a.weights[k], b.weights[k]);
    EXPECT_EQ(a.weights[k], d.weights[k]);
  }
  std::ostringstream sa, sd;
  write_ledger_csv(sa, a, "emq:sqp");
  write_ledger_csv(sd, d, "emq:sqp");
  EXPECT_EQ(sa.str(), sd.str());
}

TEST(Federation, SingleClientRoundRecomputed) {
  const Environment env = small_env(1, 8);
  const FederationConfig c = small_config(QuantArm::kEmq, PowerArm::kFullPower, 1);
  const Trajectory t = run(env, c);
  ASSERT_EQ(t.records.size(), 1u);

  Rng rng = make_rng(c.seed, "local", std::uint64_t{1} << 32);
  const local::LocalResult lr =
      local::local_train(env.model, env.train, env.shards[0], env.w0, 1, local::kExponentPosInf, c.local, rng);
  const emq::EmqCode code = emq::quantize(lr.delta_w);
  const Vector expected = env.w0 + emq::dequantize(code);
  EXPECT_EQ(t.weights[1], expected);

  const ClientRecord& rec = t.records[0].clients[0];
  EXPECT_EQ(rec.bits, emq::bit_count(code));
  EXPECT_EQ(rec.local_iters, lr.local_iters);
  const double rate = channel::uplink_rate(env.stats, Vector::Ones(1), 0, env.channel_cfg);
  EXPECT_NEAR(rec.latency / (static_cast<double>(rec.bits) / rate), 1.0, 1e-12);
  EXPECT_NEAR(rec.energy / (env.channel_cfg.p_u * rec.latency), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(t.records[0].ell_max, rec.latency);
  EXPECT_DOUBLE_EQ(t.records[0].loss, ml::loss(env.model, expected, env.train));
  EXPECT_DOUBLE_EQ(t.records[0].accuracy, ml::evaluate(env.model, expected, env.test));
  EXPECT_EQ(rec.bp_bits, static_cast<std::uint64_t>(std::ceil(std::log2(static_cast<double>(rec.bits)))));
}

TEST(Federation, ZeroStepRoundsKeepWeights) {
  const Environment env = small_env(2, 9);
  FederationConfig c = small_config(QuantArm::kEmq, PowerArm::kFullPower, 3);
  c.local.alpha = 0.0;
  const Trajectory t = run(env, c);
  const std::uint64_t d = static_cast<std::uint64_t>(env.model.dimension());
  for (const auto& r : t.records) {
    EXPECT_EQ(r.sum_bits(), 2u * (8u + 2u * d));
    EXPECT_EQ(r.min_exponent(), local::kExponentNegInf);
    EXPECT_EQ(r.max_local_iters(), 1);
  }
  EXPECT_EQ(t.final_weights(), env.w0);
}

TEST(Federation, BudgetsAreRespected) {
  const Environment env = small_env(4, 10);
  FederationConfig c = small_config(QuantArm::kEmq, PowerArm::kSqp, 50);
  const Trajectory probe = run(env, small_config(QuantArm::kEmq, PowerArm::kSqp, 3));
  double e = 0.0, l = 0.0;
  for (const auto& r : probe.records) {
    e += r.sum_energy();
    l += r.ell_max;
  }
  c.budget.energy_total = 2.5 * e / 3.0;
  c.budget.latency_total = 10.0 * l;
  const Trajectory t = run(env, c);
  ASSERT_LT(t.stop.K, 50);
  double cum_e = 0.0, cum_l = 0.0;
  for (int k = 0; k < t.stop.K; ++k) {
    cum_e += t.records[static_cast<std::size_t>(k)].sum_energy();
    cum_l += t.records[static_cast<std::size_t>(k)].ell_max;
  }
  EXPECT_LE(cum_e, c.budget.energy_total);
  EXPECT_LE(cum_l, c.budget.latency_total);
  EXPECT_EQ(t.records.size(), static_cast<std::size_t>(t.stop.K) + 1);
}

TEST(Federation, BaselinesCoverEveryArm) {
  const Environment env = small_env(3, 11);
  for (QuantArm q : {QuantArm::kEmq, QuantArm::kFixedBit, QuantArm::kFullPrecision}) {
    for (PowerArm p : {PowerArm::kSqp, PowerArm::kFullPower}) {
      const Trajectory t = run(env, small_config(q, p, 2));
      EXPECT_EQ(t.stop.K, 2) << arm_label(q, p);
      for (const auto& r : t.records) {
        EXPECT_TRUE(std::isfinite(r.loss));
        EXPECT_GT(r.ell_max, 0.0);
        if (p == PowerArm::kFullPower) {
          for (const auto& c : r.clients) EXPECT_EQ(c.power, 1.0);
        }
      }
    }
  }
  EXPECT_EQ(arm_label(QuantArm::kFixedBit, PowerArm::kFullPower), "fixedbit:fullpower");
}

TEST(Federation, InvalidEnvironmentRejected) {
  Environment env = small_env(2, 12);
  env.w0 = Vector::Zero(3);
  EXPECT_THROW(run(env, small_config(QuantArm::kEmq, PowerArm::kSqp, 1)), DimensionMismatch);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto path = (std::filesystem::temp_directory_path() / "cellfed_ck_test.bin").string();
  Vector w(4);
  w << 1.5, -0.0, 1e-300, -7.25;
  write_checkpoint(path, w, 17);
  const Checkpoint ck = read_checkpoint(path);
  EXPECT_EQ(ck.iteration, 17u);
  EXPECT_EQ(ck.w, w);
  EXPECT_TRUE(std::signbit(ck.w[1]));
  std::filesystem::resize_file(path, 30);
  EXPECT_THROW(read_checkpoint(path), IoError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  EXPECT_THROW(read_checkpoint(path), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_checkpoint(path), IoError);
}

TEST(Ledger, CsvLayout) {
  const Environment env = small_env(2, 13);
  const Trajectory t = run(env, small_config(QuantArm::kEmq, PowerArm::kFullPower, 3));
  std::ostringstream out;
  write_ledger_csv(out, t, "emq:fullpower");
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kLedgerVersionLine);
  std::getline(in, line);
  EXPECT_EQ(line, "k,loss,test_acc,sum_bits,mean_l,max_l,min_u,max_u,ell_max,sum_E,cum_E,cum_L,arm");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u);
    EXPECT_NE(line.find(",emq:fullpower"), std::string::npos);
  }
  EXPECT_EQ(rows, 3);
}

TEST(Threads, ResolveAndParallelFor) {
  EXPECT_EQ(resolve_thread_count(3), 3);
  EXPECT_GE(resolve_thread_count(0), 1);
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw InvalidArgument("boom");
                            }),
               InvalidArgument);
}

}  // namespace
}  // namespace cellfed::fed
