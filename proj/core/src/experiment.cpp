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

#include "cellfed/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include "json.hpp"
#endif

#include "cellfed/errors.hpp"
#include "cellfed/random.hpp"

namespace cellfed::experiment {

namespace {

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

struct Field {
  std::string name;
  Setter set;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument("expected a number, got '" + std::string(v) + "'");
  return out;
}

long long to_integer(std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument("expected an integer, got '" + std::string(v) + "'");
  return out;
}

int to_int(std::string_view v, int lo) {
  const long long x = to_integer(v);
  if (x < lo || x > std::numeric_limits<int>::max()) {
    throw InvalidArgument("value " + std::string(v) + " must be >= " + std::to_string(lo));
  }
  return static_cast<int>(x);
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("expected true or false, got '" + std::string(v) + "'");
}

template <typename E>
E to_enum(std::string_view v, std::initializer_list<std::pair<std::string_view, E>> table) {
  std::string options;
  for (const auto& [name, value] : table) {
    if (v == name) return value;
    if (!options.empty()) options += ", ";
    options += name;
  }
  throw InvalidArgument("expected one of " + options + ", got '" + std::string(v) + "'");
}

fed::QuantArm to_quant(std::string_view v) {
  return to_enum<fed::QuantArm>(
      v, {{"emq", fed::QuantArm::kEmq}, {"fixedbit", fed::QuantArm::kFixedBit}, {"fullprec", fed::QuantArm::kFullPrecision}});
}

fed::PowerArm to_power(std::string_view v) {
  return to_enum<fed::PowerArm>(v, {{"sqp", fed::PowerArm::kSqp}, {"fullpower", fed::PowerArm::kFullPower}});
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"clients", [](auto& c, auto v) { c.clients = to_int(v, 1); }},
      {"rounds_max", [](auto& c, auto v) { c.rounds_max = to_int(v, 0); }},
      {"seed", [](auto& c, auto v) { c.seed = static_cast<std::uint64_t>(to_integer(v)); }},
      {"threads", [](auto& c, auto v) { c.threads = to_int(v, 0); }},
      {"data", [](auto& c, auto v) {
         c.data_source = to_enum<DataSource>(v, {{"synthetic", DataSource::kSynthetic}, {"idx", DataSource::kIdx}});
       }},
      {"train_samples", [](auto& c, auto v) { c.train_samples = static_cast<std::size_t>(to_int(v, 1)); }},
      {"test_samples", [](auto& c, auto v) { c.test_samples = static_cast<std::size_t>(to_int(v, 1)); }},
      {"num_classes", [](auto& c, auto v) { c.num_classes = to_int(v, 2); }},
      {"num_features", [](auto& c, auto v) { c.num_features = to_int(v, 1); }},
      {"separation", [](auto& c, auto v) { c.separation = to_double(v); }},
      {"partition", [](auto& c, auto v) {
         c.partition = to_enum<ml::PartitionMode>(v, {{"iid", ml::PartitionMode::kIid},
                                                     {"label_shard", ml::PartitionMode::kLabelShard}});
       }},
      {"train_images", [](auto& c, auto v) { c.train_images = std::string(v); }},
      {"train_labels", [](auto& c, auto v) { c.train_labels = std::string(v); }},
      {"test_images", [](auto& c, auto v) { c.test_images = std::string(v); }},
      {"test_labels", [](auto& c, auto v) { c.test_labels = std::string(v); }},
      {"model", [](auto& c, auto v) {
         c.model = to_enum<ml::ModelKind>(v, {{"logistic", ml::ModelKind::kLogistic}, {"mlp", ml::ModelKind::kMlp}});
       }},
      {"hidden", [](auto& c, auto v) { c.hidden = to_int(v, 1); }},
      {"optimizer", [](auto& c, auto v) {
         c.local.optimizer = to_enum<local::Optimizer>(v, {{"adadelta", local::Optimizer::kAdaDelta},
                                                           {"sgd", local::Optimizer::kSgd}});
       }},
      {"alpha", [](auto& c, auto v) { c.local.alpha = to_double(v); }},
      {"rho", [](auto& c, auto v) { c.local.rho = to_double(v); }},
      {"eps_a", [](auto& c, auto v) { c.local.eps_a = to_double(v); }},
      {"l_max", [](auto& c, auto v) { c.local.l_max = to_int(v, 1); }},
      {"batch_size", [](auto& c, auto v) { c.local.batch_size = to_int(v, 1); }},
      {"adaptive", [](auto& c, auto v) { c.local.adaptive = to_bool(v); }},
      {"exponent_source", [](auto& c, auto v) {
         c.local.exponent_source = to_enum<local::ExponentSource>(
             v, {{"cumulative", local::ExponentSource::kCumulative}, {"per_step", local::ExponentSource::kPerStep}});
       }},
      {"quant", [](auto& c, auto v) { c.quant = to_quant(v); }},
      {"overflow", [](auto& c, auto v) {
         c.overflow = to_enum<emq::OverflowMode>(v, {{"clamp", emq::OverflowMode::kClamp},
                                                    {"promote", emq::OverflowMode::kPromoteExponent}});
       }},
      {"fixed_bits", [](auto& c, auto v) { c.fixed_bits = to_int(v, 2); }},
      {"power", [](auto& c, auto v) { c.power = to_power(v); }},
      {"theta_E", [](auto& c, auto v) { c.theta_E = to_double(v); }},
      {"theta_l", [](auto& c, auto v) { c.theta_l = to_double(v); }},
      {"p_min", [](auto& c, auto v) { c.p_min = to_double(v); }},
      {"linearization", [](auto& c, auto v) {
         c.linearization = to_enum<power::Linearization>(v, {{"full", power::Linearization::kFull},
                                                            {"diagonal", power::Linearization::kDiagonal}});
       }},
      {"eps_x", [](auto& c, auto v) { c.solver.eps_x = to_double(v); }},
      {"sqp_max_rounds", [](auto& c, auto v) { c.solver.max_rounds = to_int(v, 1); }},
      {"energy_budget", [](auto& c, auto v) { c.energy_budget = to_double(v); }},
      {"latency_budget", [](auto& c, auto v) { c.latency_budget = to_double(v); }},
      {"strict_bp_accounting", [](auto& c, auto v) { c.strict_bp_accounting = to_bool(v); }},
      {"aps", [](auto& c, auto v) { c.aps = to_int(v, 1); }},
      {"area_side", [](auto& c, auto v) { c.area_side = to_double(v); }},
      {"wrap_around", [](auto& c, auto v) { c.wrap_around = to_bool(v); }},
      {"antennas", [](auto& c, auto v) { c.channel.antennas = to_int(v, 1); }},
      {"bandwidth_hz", [](auto& c, auto v) { c.channel.bandwidth_hz = to_double(v); }},
      {"tau_c", [](auto& c, auto v) { c.channel.tau_c = to_int(v, 1); }},
      {"tau_p", [](auto& c, auto v) { c.channel.tau_p = to_int(v, 1); }},
      {"p_u", [](auto& c, auto v) { c.channel.p_u = to_double(v); }},
      {"noise_dbm", [](auto& c, auto v) { c.channel.noise_w = channel::dbm_to_watt(to_double(v)); }},
      {"pathloss_exponent", [](auto& c, auto v) { c.channel.pathloss_exponent = to_double(v); }},
      {"pathloss_intercept_db", [](auto& c, auto v) { c.channel.pathloss_intercept_db = to_double(v); }},
      {"shadowing_std_db", [](auto& c, auto v) { c.channel.shadowing_std_db = to_double(v); }},
  };
  return table;
}

void check_ranges(const ExperimentConfig& c) {
  auto fail = [](const char* field, const std::string& what) { throw ConfigInvalid(field, 0, what); };
  if (!(c.theta_E >= 0.0 && c.theta_E <= 1.0)) fail("theta_E", "must lie in [0, 1]");
  if (!(c.theta_l >= 0.0 && c.theta_l <= 1.0)) fail("theta_l", "must lie in [0, 1]");
  if (!(c.local.alpha > 0.0)) fail("alpha", "must be positive");
  if (!(c.local.rho > 0.0 && c.local.rho < 1.0)) fail("rho", "must lie in (0, 1)");
  if (!(c.local.eps_a > 0.0)) fail("eps_a", "must be positive");
  if (c.fixed_bits > 32) fail("fixed_bits", "must be at most 32");
  if (!(c.p_min > 0.0 && c.p_min < 1.0)) fail("p_min", "must lie in (0, 1)");
  if (!(c.energy_budget >= 0.0)) fail("energy_budget", "must be non-negative");
  if (!(c.latency_budget >= 0.0)) fail("latency_budget", "must be non-negative");
  if (!(c.area_side > 0.0)) fail("area_side", "must be positive");
  if (!(c.separation >= 0.0)) fail("separation", "must be non-negative");
  if (c.channel.tau_p >= c.channel.tau_c) fail("tau_p", "must be smaller than tau_c");
  if (c.data_source == DataSource::kIdx) {
    for (const auto& [name, path] : {std::pair{"train_images", &c.train_images}, std::pair{"train_labels", &c.train_labels},
                                     std::pair{"test_images", &c.test_images}, std::pair{"test_labels", &c.test_labels}}) {
      if (path->empty()) fail(name, "required when data = idx");
    }
  }
}

}  // namespace

const std::vector<std::string>& required_keys() {
  static const std::vector<std::string> keys = {"clients", "rounds_max"};
  return keys;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.name);
    return out;
  }();
  return keys;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::map<std::string, int, std::less<>> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    for (std::size_t i = 1; i < line.size(); ++i) {
      if (line[i] == '#' && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line = trim(line.substr(0, i));
        break;
      }
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigInvalid("", line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.name == key; });
    if (it == table.end()) throw ConfigInvalid(key, line_no, "unknown key");
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigInvalid(key, line_no, "repeats line " + std::to_string(prev->second));
    }
    if (value.empty()) throw ConfigInvalid(key, line_no, "missing value");
    try {
      it->set(config, value);
    } catch (const InvalidArgument& e) {
      throw ConfigInvalid(key, line_no, e.what());
    }
    seen.emplace(key, line_no);
  }
  for (const auto& key : required_keys()) {
    if (!seen.contains(key)) throw ConfigInvalid(key, 0, "required key is missing");
  }
  check_ranges(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  return parse_config(in);
}

void apply_arm(ExperimentConfig& config, std::string_view arm) {
  const auto colon = arm.find(':');
  try {
    if (colon == std::string_view::npos) {
      config.quant = to_quant(arm);
    } else {
      config.quant = to_quant(arm.substr(0, colon));
      config.power = to_power(arm.substr(colon + 1));
    }
  } catch (const InvalidArgument& e) {
    throw ConfigInvalid("arm", 0, e.what());
  }
}

namespace {

ml::Dataset take_rows(const ml::Dataset& data, std::size_t begin, std::size_t end) {
  ml::Dataset out;
  out.num_classes = data.num_classes;
  out.features = data.features.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    data.labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace

fed::Environment build_environment(const ExperimentConfig& config) {
  fed::Environment env;
  if (config.data_source == DataSource::kSynthetic) {
    const ml::Dataset all = ml::generate_synthetic(derive_seed(config.seed, "data", 0),
                                                   config.train_samples + config.test_samples, config.num_classes,
                                                   config.num_features, config.separation);
    env.train = take_rows(all, 0, config.train_samples);
    env.test = take_rows(all, config.train_samples, all.size());
  } else {
    env.train = ml::load_idx(config.train_images, config.train_labels, config.num_classes);
    env.test = ml::load_idx(config.test_images, config.test_labels, config.num_classes);
  }
  const int inputs = env.train.num_features();
  env.model = config.model == ml::ModelKind::kMlp ? ml::Model::mlp(inputs, config.hidden, env.train.num_classes)
                                                   : ml::Model::logistic(inputs, env.train.num_classes);
  env.shards = ml::partition(env.train, {config.partition, config.clients, derive_seed(config.seed, "partition", 0)});
  Rng init = make_rng(config.seed, "init", 0);
  env.w0 = ml::initial_weights(env.model, init);
  env.channel_cfg = config.channel;
  env.stats = channel::build_channel(derive_seed(config.seed, "channel", 0), config.aps, config.clients,
                                     config.area_side, config.wrap_around, config.channel);
  return env;
}

fed::FederationConfig federation_config(const ExperimentConfig& config) {
  fed::FederationConfig f;
  f.quant = config.quant;
  f.power = config.power;
  f.overflow = config.overflow;
  f.fixed_bits = config.fixed_bits;
  f.local = config.local;
  f.theta_E = config.theta_E;
  f.theta_l = config.theta_l;
  f.p_min = config.p_min;
  f.linearization = config.linearization;
  f.solver = config.solver;
  f.budget = {config.energy_budget, config.latency_budget, config.rounds_max};
  f.strict_bp_accounting = config.strict_bp_accounting;
  f.threads = fed::resolve_thread_count(config.threads);
  f.seed = derive_seed(config.seed, "federation", 0);
  return f;
}

RunSummary summarize(const fed::Environment& env, const fed::Trajectory& trajectory, std::string arm) {
  RunSummary s;
  s.arm = std::move(arm);
  s.K = trajectory.stop.K;
  for (int i = 0; i < s.K; ++i) {
    const auto& r = trajectory.records[static_cast<std::size_t>(i)];
    s.total_bits += r.sum_bits();
    s.total_energy += r.sum_energy();
    s.total_latency += r.ell_max;
  }
  if (s.K > 0) {
    const auto& last = trajectory.records[static_cast<std::size_t>(s.K - 1)];
    s.final_loss = last.loss;
    s.final_accuracy = last.accuracy;
  } else {
    s.final_loss = ml::loss(env.model, env.w0, env.train);
    s.final_accuracy = ml::evaluate(env.model, env.w0, env.test);
  }
  return s;
}

RunOutput run_experiment(const ExperimentConfig& config) {
  const fed::Environment env = build_environment(config);
  RunOutput out;
  out.trajectory = fed::run(env, federation_config(config));
  out.summary = summarize(env, out.trajectory, fed::arm_label(config.quant, config.power));
  return out;
}

namespace {

nlohmann::ordered_json summary_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["arm"] = s.arm;
  j["K"] = s.K;
  j["final_loss"] = s.final_loss;
  j["final_accuracy"] = s.final_accuracy;
  j["total_bits"] = s.total_bits;
  j["total_energy"] = s.total_energy;
  j["total_latency"] = s.total_latency;
  return j;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

}  // namespace

RunSummary cmd_run(const ExperimentConfig& config, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const RunOutput result = run_experiment(config);
  {
    auto csv = open_output(out_dir + "/iterations.csv");
    fed::write_ledger_csv(csv, result.trajectory, result.summary.arm);
  }
  auto json = open_output(out_dir + "/summary.json");
  json << summary_json(result.summary).dump(2) << '\n';
  return result.summary;
}

SweepAxis parse_axis(std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos) throw ConfigInvalid("axis", 0, "expected name=v1,v2,...");
  SweepAxis axis;
  axis.name = std::string(trim(spec.substr(0, eq)));
  static const std::vector<std::string> names = {"theta_E", "theta_l", "energy_budget", "latency_budget"};
  if (std::find(names.begin(), names.end(), axis.name) == names.end()) {
    throw ConfigInvalid(axis.name, 0, "not a sweepable axis");
  }
  std::string_view rest = spec.substr(eq + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view token = trim(rest.substr(0, comma));
    try {
      axis.values.push_back(to_double(token));
    } catch (const InvalidArgument& e) {
      throw ConfigInvalid(axis.name, 0, e.what());
    }
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (axis.values.empty()) throw ConfigInvalid(axis.name, 0, "axis has no values");
  std::vector<double> sorted = axis.values;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigInvalid(axis.name, 0, "duplicate axis value");
  }
  return axis;
}

std::vector<SweepCell> cmd_sweep(const ExperimentConfig& config, const std::vector<SweepAxis>& axes,
                                 const std::string& out_dir) {
  for (std::size_t a = 0; a < axes.size(); ++a) {
    for (std::size_t b = a + 1; b < axes.size(); ++b) {
      if (axes[a].name == axes[b].name) throw ConfigInvalid(axes[a].name, 0, "axis given twice");
    }
  }
  std::vector<ExperimentConfig> configs = {config};
  for (const auto& axis : axes) {
    std::vector<ExperimentConfig> next;
    for (const auto& base : configs) {
      for (double v : axis.values) {
        ExperimentConfig c = base;
        if (axis.name == "theta_E") c.theta_E = v;
        if (axis.name == "theta_l") c.theta_l = v;
        if (axis.name == "energy_budget") c.energy_budget = v;
        if (axis.name == "latency_budget") c.latency_budget = v;
        check_ranges(c);
        next.push_back(std::move(c));
      }
    }
    configs = std::move(next);
  }

  std::vector<SweepCell> cells(configs.size());
  const int threads = fed::resolve_thread_count(config.threads);
  fed::parallel_for(configs.size(), threads, [&](std::size_t i) {
    ExperimentConfig c = configs[i];
    c.threads = 1;
    cells[i] = {c.theta_E, c.theta_l, c.energy_budget, c.latency_budget, run_experiment(c).summary};
  });

  std::filesystem::create_directories(out_dir);
  auto csv = open_output(out_dir + "/sweep.csv");
  csv.precision(12);
  csv << "theta_E,theta_l,energy_budget,latency_budget,arm,K,final_loss,final_accuracy,total_bits,total_energy,"
         "total_latency\n";
  for (const auto& cell : cells) {
    const auto& s = cell.summary;
    csv << cell.theta_E << ',' << cell.theta_l << ',' << cell.energy_budget << ',' << cell.latency_budget << ','
        << s.arm << ',' << s.K << ',' << s.final_loss << ',' << s.final_accuracy << ',' << s.total_bits << ','
        << s.total_energy << ',' << s.total_latency << '\n';
  }
  return cells;
}

std::uint64_t cmd_codec_encode(const std::string& in_path, const std::string& out_path, emq::OverflowMode mode) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open " + in_path);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      values.push_back(to_double(token));
    } catch (const InvalidArgument& e) {
      throw IoError(in_path + ": " + e.what());
    }
  }
  const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  const BitStream stream = emq::encode_bits(emq::quantize(v, mode));
  auto out = open_output(out_path);
  out.write(reinterpret_cast<const char*>(stream.bytes.data()), static_cast<std::streamsize>(stream.bytes.size()));
  return stream.bit_length;
}

void cmd_codec_decode(const std::string& in_path, const std::string& out_path, std::size_t dimension) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + in_path);
  BitStream stream;
  stream.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  stream.bit_length = stream.bytes.size() * 8;
  const Vector v = emq::dequantize(emq::decode_bits(stream, dimension));
  auto out = open_output(out_path);
  char buffer[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto end = std::to_chars(buffer, buffer + sizeof(buffer), v[i]).ptr;
    out << std::string_view(buffer, static_cast<std::size_t>(end - buffer)) << '\n';
  }
}

std::string cmd_power(const std::string& instance_json) {
  nlohmann::json in;
  try {
    in = nlohmann::json::parse(instance_json);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("power instance is not valid JSON: ") + e.what());
  }
  try {
    power::PowerProblem problem;
    const auto bits = in.at("bits").get<std::vector<double>>();
    problem.bits = Eigen::Map<const Vector>(bits.data(), static_cast<Eigen::Index>(bits.size()));
    const int M = problem.clients();
    problem.theta_E = in.value("theta_E", 0.5);
    problem.theta_l = in.value("theta_l", 0.5);
    problem.p_min = in.value("p_min", power::kMinPower);
    const std::string lin = in.value("linearization", std::string("full"));
    if (lin != "full" && lin != "diagonal") throw InvalidArgument("linearization must be full or diagonal");
    problem.linearization = lin == "full" ? power::Linearization::kFull : power::Linearization::kDiagonal;
    if (in.contains("channel")) {
      const auto& ch = in["channel"];
      auto& cfg = problem.cfg;
      cfg.antennas = ch.value("antennas", cfg.antennas);
      cfg.bandwidth_hz = ch.value("bandwidth_hz", cfg.bandwidth_hz);
      cfg.tau_c = ch.value("tau_c", cfg.tau_c);
      cfg.tau_p = ch.value("tau_p", cfg.tau_p);
      cfg.p_u = ch.value("p_u", cfg.p_u);
      if (ch.contains("noise_dbm")) cfg.noise_w = channel::dbm_to_watt(ch["noise_dbm"].get<double>());
      cfg.pathloss_exponent = ch.value("pathloss_exponent", cfg.pathloss_exponent);
      cfg.pathloss_intercept_db = ch.value("pathloss_intercept_db", cfg.pathloss_intercept_db);
    }
    problem.cfg.validate();
    if (in.contains("beta")) {
      const auto rows = in["beta"].get<std::vector<std::vector<double>>>();
      Matrix beta(static_cast<Eigen::Index>(rows.size()), M);
      for (std::size_t a = 0; a < rows.size(); ++a) {
        if (static_cast<int>(rows[a].size()) != M) throw DimensionMismatch("beta rows must have one entry per client");
        for (int j = 0; j < M; ++j) beta(static_cast<Eigen::Index>(a), j) = rows[a][static_cast<std::size_t>(j)];
      }
      const auto pilots = in.contains("pilots") ? in["pilots"].get<std::vector<int>>()
                                                : channel::assign_pilots(M, problem.cfg.tau_p);
      problem.stats = channel::compute_channel_stats(beta, pilots, problem.cfg);
    } else {
      problem.stats = channel::build_channel(in.at("seed").get<std::uint64_t>(), in.value("aps", 16), M,
                                             in.value("area_side", 1000.0), in.value("wrap_around", true), problem.cfg);
    }
    const power::PowerSolution sol = power::solve(problem);
    nlohmann::ordered_json out;
    out["p"] = std::vector<double>(sol.p.data(), sol.p.data() + sol.p.size());
    out["ell_max"] = sol.ell_max;
    out["objective"] = sol.objective;
    out["kkt_residual"] = sol.kkt_residual;
    out["rounds_used"] = sol.rounds_used;
    out["converged"] = sol.converged;
    const Vector ell = power::latencies(problem, sol.p);
    std::vector<double> energies;
    for (int j = 0; j < M; ++j) energies.push_back(power::energy(problem, sol.p, j));
    out["latencies"] = std::vector<double>(ell.data(), ell.data() + ell.size());
    out["energies"] = energies;
    return out.dump(2);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad power instance: ") + e.what());
  }
}

}  // namespace cellfed::experiment
