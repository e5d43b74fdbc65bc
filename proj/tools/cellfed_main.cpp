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

// cellfed: run, sweep, codec and power subcommands.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cellfed/errors.hpp"
#include "cellfed/experiment.hpp"

namespace {

namespace ex = cellfed::experiment;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "cellfed_out";
  std::string arm;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Override the config seed");
  cmd->add_option("--out-dir", flags.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--arm", flags.arm, "QUANT[:POWER], QUANT in emq|fixedbit|fullprec, POWER in sqp|fullpower");
}

ex::ExperimentConfig resolve(const CommonFlags& flags) {
  ex::ExperimentConfig config = ex::load_config(flags.config_path);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.arm.empty()) ex::apply_arm(config, flags.arm);
  return config;
}

void print_summary(const ex::RunSummary& s) {
  std::cout << s.arm << " K=" << s.K << " loss=" << s.final_loss << " acc=" << s.final_accuracy
            << " bits=" << s.total_bits << " energy=" << s.total_energy << " latency=" << s.total_latency << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning over cell-free massive MIMO: co-simulation tool"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one experiment and write iterations.csv and summary.json");
  add_common(run, run_flags);

  CommonFlags sweep_flags;
  std::vector<std::string> axis_specs;
  auto* sweep = app.add_subcommand("sweep", "Grid over theta_E, theta_l, energy_budget, latency_budget");
  add_common(sweep, sweep_flags);
  sweep->add_option("--axis", axis_specs, "name=v1,v2,... (repeatable)")->required();

  auto* codec = app.add_subcommand("codec", "EMQ encode/decode between text values and raw bitstreams");
  codec->require_subcommand(1);
  std::string codec_in, codec_out;
  std::size_t codec_dim = 0;
  bool promote = false;
  auto* encode = codec->add_subcommand("encode", "Text values to bitstream");
  encode->add_option("--in", codec_in)->required()->check(CLI::ExistingFile);
  encode->add_option("--out", codec_out)->required();
  encode->add_flag("--promote", promote, "Promote the exponent instead of clamping mantissa overflow");
  auto* decode = codec->add_subcommand("decode", "Bitstream to text values");
  decode->add_option("--in", codec_in)->required()->check(CLI::ExistingFile);
  decode->add_option("--out", codec_out)->required();
  decode->add_option("--dim", codec_dim, "Vector dimension")->required();

  std::string instance_path, power_out;
  auto* power = app.add_subcommand("power", "Solve a JSON power-allocation instance");
  power->add_option("--instance", instance_path)->required()->check(CLI::ExistingFile);
  power->add_option("--out", power_out, "Write the solution here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      print_summary(ex::cmd_run(resolve(run_flags), run_flags.out_dir));
    } else if (sweep->parsed()) {
      std::vector<ex::SweepAxis> axes;
      for (const auto& spec : axis_specs) axes.push_back(ex::parse_axis(spec));
      for (const auto& cell : ex::cmd_sweep(resolve(sweep_flags), axes, sweep_flags.out_dir)) {
        print_summary(cell.summary);
      }
    } else if (encode->parsed()) {
      const auto mode = promote ? cellfed::emq::OverflowMode::kPromoteExponent : cellfed::emq::OverflowMode::kClamp;
      std::cout << ex::cmd_codec_encode(codec_in, codec_out, mode) << " bits\n";
    } else if (decode->parsed()) {
      ex::cmd_codec_decode(codec_in, codec_out, codec_dim);
    } else if (power->parsed()) {
      std::ifstream in(instance_path);
      std::stringstream buffer;
      buffer << in.rdbuf();
      const std::string solution = ex::cmd_power(buffer.str());
      if (power_out.empty()) {
        std::cout << solution << '\n';
      } else {
        std::ofstream(power_out) << solution << '\n';
      }
    }
  } catch (const cellfed::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
