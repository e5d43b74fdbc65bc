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

#ifndef CELLFED_EXPERIMENT_HPP
#define CELLFED_EXPERIMENT_HPP

// Experiment configuration and the operations behind the command-line tool.
//
// Configs are flat "key = value" text files. Blank lines and lines starting
// with '#' are ignored, as is anything after a whitespace-preceded '#'.
// Unknown or repeated keys are errors. Every run is
// fully determined by (config, seed): sub-seeds come from
// derive_seed(seed, label, 0) with labels "data", "partition", "init",
// "channel" and "federation".

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cellfed/federation.hpp"

namespace cellfed::experiment {

enum class DataSource { kSynthetic, kIdx };

struct ExperimentConfig {
  // run
  int clients = 8;
  int rounds_max = 60;
  std::uint64_t seed = 1;
  int threads = 0;

  // data
  DataSource data_source = DataSource::kSynthetic;
  std::size_t train_samples = 2000;
  std::size_t test_samples = 1000;
  int num_classes = 4;
  int num_features = 16;
  double separation = 1.5;
  ml::PartitionMode partition = ml::PartitionMode::kIid;
  std::string train_images, train_labels, test_images, test_labels;

  // model
  ml::ModelKind model = ml::ModelKind::kMlp;
  int hidden = 16;

  // local training
  local::LocalOptions local;

  // quantization and power
  fed::QuantArm quant = fed::QuantArm::kEmq;
  emq::OverflowMode overflow = emq::OverflowMode::kClamp;
  int fixed_bits = 8;
  fed::PowerArm power = fed::PowerArm::kSqp;
  double theta_E = 0.5;
  double theta_l = 0.5;
  double p_min = power::kMinPower;
  power::Linearization linearization = power::Linearization::kFull;
  power::SolverOptions solver;

  // budgets
  double energy_budget = std::numeric_limits<double>::infinity();
  double latency_budget = std::numeric_limits<double>::infinity();
  bool strict_bp_accounting = false;

  // network
  int aps = 16;
  double area_side = 1000.0;
  bool wrap_around = true;
  channel::ChannelConfig channel;
};

/// Keys that every config file must set.
const std::vector<std::string>& required_keys();
/// Every accepted key, in documentation order.
const std::vector<std::string>& known_keys();

/// Throws ConfigInvalid naming the field and 1-based line.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Parses "emq:sqp" style arm selections.
void apply_arm(ExperimentConfig& config, std::string_view arm);

fed::Environment build_environment(const ExperimentConfig& config);
fed::FederationConfig federation_config(const ExperimentConfig& config);

struct RunSummary {
  std::string arm;
  int K = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  std::uint64_t total_bits = 0;
  double total_energy = 0.0;
  double total_latency = 0.0;
};

/// Totals over the first K rounds. With K = 0 the loss and accuracy are
/// those of w_0.
RunSummary summarize(const fed::Environment& env, const fed::Trajectory& trajectory, std::string arm);

struct RunOutput {
  fed::Trajectory trajectory;
  RunSummary summary;
};

RunOutput run_experiment(const ExperimentConfig& config);

/// Writes <out_dir>/iterations.csv and <out_dir>/summary.json.
RunSummary cmd_run(const ExperimentConfig& config, const std::string& out_dir);

/// One sweep axis: theta_E, theta_l, energy_budget or latency_budget.
struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

/// Parses "name=v1,v2,..."; rejects unknown names and duplicate values.
SweepAxis parse_axis(std::string_view spec);

struct SweepCell {
  double theta_E = 0.0;
  double theta_l = 0.0;
  double energy_budget = 0.0;
  double latency_budget = 0.0;
  RunSummary summary;
};

/// Cross product of the axes, first axis slowest. Writes <out_dir>/sweep.csv.
std::vector<SweepCell> cmd_sweep(const ExperimentConfig& config, const std::vector<SweepAxis>& axes,
                                 const std::string& out_dir);

/// Whitespace-separated decimal values in, raw EMQ bitstream out.
std::uint64_t cmd_codec_encode(const std::string& in_path, const std::string& out_path,
                               emq::OverflowMode mode = emq::OverflowMode::kClamp);
/// Raw EMQ bitstream in, one value per line out.
void cmd_codec_decode(const std::string& in_path, const std::string& out_path, std::size_t dimension);

/// Solves a JSON power instance and returns the solution as JSON text.
///
/// Instance keys: "bits" (required), "theta_E", "theta_l", "p_min",
/// "linearization" ("full" | "diagonal"), and either "beta" (APs x clients
/// linear gains, optional "pilots") or "seed" with "aps" and
/// "area_side". Channel parameters may be overridden under "channel".
std::string cmd_power(const std::string& instance_json);

}  // namespace cellfed::experiment

#endif  // CELLFED_EXPERIMENT_HPP
