#include "sgs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sgs/rng.hpp"
#include "sgs/version.hpp"

namespace fs = std::filesystem;

namespace sgs {

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

[[noreturn]] static void fail_config(std::string pointer, std::string message) {
  throw ConfigError(std::vector<ConfigIssue>{{std::move(pointer), std::move(message)}});
}

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(issues.empty() ? "invalid config"
                                        : issues.front().pointer + ": " + issues.front().message),
      issues_(std::move(issues)) {}

nlohmann::json ConfigError::to_json() const {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& issue : issues_)
    violations.push_back({{"pointer", issue.pointer}, {"message", issue.message}});
  return {{"schema", 1}, {"error", "config"}, {"violations", violations}};
}

ScoreModel ModelSpec::build(const DensitySpec& target, double sigma_sq,
                            std::uint64_t run_seed) const {
  const std::uint64_t seed = this->seed ? *this->seed : run_seed;
  switch (kind) {
    case Kind::Oracle:
      return ScoreModel::oracle(target, sigma_sq);
    case Kind::Perturbed:
      return ScoreModel::perturbed_oracle(target, sigma_sq, epsilon, seed);
    case Kind::Fitted:
      return fit_dae(target, sigma_sq, train_n,
                     FitConfig{gamma, features, include_linear, ridge}, seed);
    case Kind::FittedFile: {
      ScoreModel model = ScoreModel::fitted_from_json(read_json_file(path));
      if (model.sigma_sq() != sigma_sq)
        throw std::invalid_argument("model file " + path + " targets sigma_sq " +
                                    std::to_string(model.sigma_sq()) + ", leg expects " +
                                    std::to_string(sigma_sq));
      return model;
    }
  }
  throw std::logic_error("ModelSpec: unknown kind");
}

nlohmann::json ModelSpec::to_json() const {
  switch (kind) {
    case Kind::Oracle:
      return {{"kind", "oracle"}};
    case Kind::Perturbed:
      return {{"kind", "perturbed"}, {"epsilon", epsilon}};
    case Kind::Fitted:
      return {{"kind", "fitted"},   {"train_n", train_n}, {"gamma", gamma},
              {"features", features}, {"include_linear", include_linear}, {"ridge", ridge}};
    case Kind::FittedFile:
      return {{"kind", "fitted_file"}, {"path", path}};
  }
  return {};
}

namespace {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string base_dir, std::string root)
      : j_(j), base_dir_(std::move(base_dir)), root_(std::move(root)) {}

  std::vector<ConfigIssue> issues;

  void issue(const std::string& pointer, const std::string& message) {
    issues.push_back({root_ + pointer, message});
  }

  std::string resolve_path(const std::string& rel) const {
    fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(base_dir_) / p).string();
  }

  DensitySpec parse_target() {
    if (!j_.contains("target")) {
      issue("/target", "missing");
      return DensitySpec::standard_normal(1);
    }
    const auto& t = j_["target"];
    try {
      if (t.is_string()) {
        const std::string ref = t.get<std::string>();
        if (ref.rfind("zoo:", 0) == 0) {
          const std::string name = ref.substr(4);
          for (auto& [zoo_name, spec] : density_zoo())
            if (zoo_name == name) return spec;
          issue("/target", "unknown zoo density: " + name);
          return DensitySpec::standard_normal(1);
        }
        const std::string path = resolve_path(ref);
        if (!fs::exists(path)) {
          issue("/target", "file does not exist: " + path);
          return DensitySpec::standard_normal(1);
        }
        return DensitySpec::from_json(read_json_file(path));
      }
      return DensitySpec::from_json(t);
    } catch (const std::exception& e) {
      issue("/target", e.what());
      return DensitySpec::standard_normal(1);
    }
  }

  ModelSpec parse_model(const nlohmann::json& m, const std::string& pointer) {
    ModelSpec spec;
    if (m.is_string()) {
      const std::string kind = m.get<std::string>();
      if (kind == "oracle") {
        spec.kind = ModelSpec::Kind::Oracle;
      } else {
        issue(pointer, "unknown model kind: " + kind);
      }
      return spec;
    }
    const std::string kind = m.value("kind", "oracle");
    if (kind == "oracle") {
      spec.kind = ModelSpec::Kind::Oracle;
    } else if (kind == "perturbed") {
      spec.kind = ModelSpec::Kind::Perturbed;
      spec.epsilon = m.value("epsilon", -1.0);
      if (spec.epsilon < 0) issue(pointer + "/epsilon", "must be >= 0");
      if (m.contains("seed")) spec.seed = m["seed"].get<std::uint64_t>();
    } else if (kind == "fitted") {
      spec.kind = ModelSpec::Kind::Fitted;
      spec.train_n = m.value("train_n", 10000);
      spec.gamma = m.value("gamma", 1.0);
      spec.features = m.value("features", 64);
      spec.include_linear = m.value("include_linear", false);
      spec.ridge = m.value("ridge", 1e-8);
      if (m.contains("seed")) spec.seed = m["seed"].get<std::uint64_t>();
      if (spec.train_n < 1) issue(pointer + "/train_n", "must be >= 1");
      if (spec.gamma <= 0) issue(pointer + "/gamma", "must be > 0");
      if (spec.features < 0) issue(pointer + "/features", "must be >= 0");
      if (spec.ridge < 0) issue(pointer + "/ridge", "must be >= 0");
    } else if (kind == "fitted_file") {
      spec.kind = ModelSpec::Kind::FittedFile;
      spec.path = resolve_path(m.value("path", ""));
      if (!fs::exists(spec.path)) issue(pointer + "/path", "file does not exist: " + spec.path);
    } else {
      issue(pointer + "/kind", "unknown model kind: " + kind);
    }
    return spec;
  }

  std::vector<LegSpec> parse_legs() {
    std::vector<LegSpec> legs;
    if (j_.contains("schedule")) {
      const auto& sched = j_["schedule"];
      if (!sched.contains("legs") || !sched["legs"].is_array() || sched["legs"].empty()) {
        issue("/schedule/legs", "must be a non-empty array");
        return legs;
      }
      int i = 0;
      for (const auto& jl : sched["legs"]) {
        const std::string ptr = "/schedule/legs/" + std::to_string(i);
        LegSpec leg;
        leg.eta = jl.value("eta", 0.0);
        leg.sigma_sq = jl.value("sigma_sq", 0.0);
        leg.steps = jl.value("steps", 0L);
        if (leg.eta <= 0) issue(ptr + "/eta", "must be > 0");
        if (leg.sigma_sq < 0) issue(ptr + "/sigma_sq", "must be >= 0");
        if (leg.steps < 1) issue(ptr + "/steps", "must be >= 1");
        if (jl.contains("model")) leg.model = parse_model(jl["model"], ptr + "/model");
        legs.push_back(std::move(leg));
        ++i;
      }
      for (std::size_t k = 1; k < legs.size(); ++k) {
        if (legs[k].eta > legs[k - 1].eta)
          issue("/schedule/legs/" + std::to_string(k) + "/eta", "must be non-increasing");
        if (legs[k].sigma_sq > legs[k - 1].sigma_sq)
          issue("/schedule/legs/" + std::to_string(k) + "/sigma_sq", "must be non-increasing");
      }
    } else if (j_.contains("run")) {
      const auto& jr = j_["run"];
      LegSpec leg;
      leg.eta = jr.value("eta", 0.0);
      leg.sigma_sq = jr.value("sigma_sq", 0.0);
      leg.steps = jr.value("steps", 0L);
      if (leg.eta <= 0) issue("/run/eta", "must be > 0");
      if (leg.sigma_sq < 0) issue("/run/sigma_sq", "must be >= 0");
      if (leg.steps < 1) issue("/run/steps", "must be >= 1");
      legs.push_back(std::move(leg));
    } else {
      issue("/schedule", "missing (provide \"schedule\" or \"run\")");
    }
    return legs;
  }

  InitSpec parse_init(int dim, bool& given) {
    given = j_.contains("init");
    if (!given) return InitSpec::gaussian(Eigen::VectorXd::Zero(dim), 0.01);
    const auto& ji = j_["init"];
    const std::string kind = ji.value("kind", "gaussian");
    Eigen::VectorXd center = Eigen::VectorXd::Zero(dim);
    if (ji.contains("center")) {
      const auto& jc = ji["center"];
      if (static_cast<int>(jc.size()) != dim) {
        issue("/init/center", "length must equal the target dimension");
      } else {
        for (int i = 0; i < dim; ++i) center[i] = jc[static_cast<std::size_t>(i)].get<double>();
      }
    }
    if (kind == "point") return InitSpec::point(center);
    if (kind == "gaussian") {
      const double variance = ji.value("variance", 0.01);
      if (variance < 0) {
        issue("/init/variance", "must be >= 0");
        return InitSpec::gaussian(center, 0.0);
      }
      return InitSpec::gaussian(center, variance);
    }
    if (kind == "warm_start") {
      const std::string path = resolve_path(ji.value("path", ""));
      if (!fs::exists(path)) {
        issue("/init/path", "file does not exist: " + path);
        return InitSpec::gaussian(center, 0.01);
      }
      return InitSpec::warm_start(read_csv_file(path).points);
    }
    issue("/init/kind", "unknown init kind: " + kind);
    return InitSpec::gaussian(center, 0.01);
  }

  EvaluationSpec parse_evaluation() {
    EvaluationSpec eval;
    if (!j_.contains("evaluation")) return eval;
    const auto& je = j_["evaluation"];
    eval.w2_method = je.value("w2_method", "exact");
    eval.eval_n = je.value("eval_n", 512);
    eval.snapshot_every = je.value("snapshot_every", 0L);
    eval.projections = je.value("projections", 128);
    if (eval.w2_method != "exact" && eval.w2_method != "sliced")
      issue("/evaluation/w2_method", "must be \"exact\" or \"sliced\"");
    if (eval.eval_n < 1) issue("/evaluation/eval_n", "must be >= 1");
    if (eval.snapshot_every < 0) issue("/evaluation/snapshot_every", "must be >= 0");
    if (eval.projections < 1) issue("/evaluation/projections", "must be >= 1");
    return eval;
  }

  std::vector<std::uint64_t> parse_seeds() {
    std::vector<std::uint64_t> seeds;
    if (!j_.contains("seeds")) {
      issue("/seeds", "missing non-empty seed list");
      return seeds;
    }
    for (const auto& s : j_["seeds"]) seeds.push_back(s.get<std::uint64_t>());
    if (seeds.empty()) issue("/seeds", "must be non-empty");
    return seeds;
  }

 private:
  const nlohmann::json& j_;
  std::string base_dir_;
  std::string root_;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::string& base_dir,
                                             const std::string& root_pointer) {
  ConfigReader reader(j, base_dir, root_pointer);
  ExperimentConfig config;
  config.raw = j;
  config.experiment_id = j.value("name", std::string("experiment"));
  config.target = reader.parse_target();
  if (j.contains("model")) config.model = reader.parse_model(j["model"], "/model");
  config.legs = reader.parse_legs();
  config.chains = j.value("chains", 1024);
  if (config.chains < 1) reader.issue("/chains", "must be >= 1");
  config.init = reader.parse_init(config.target.dim(), config.init_given);
  config.evaluation = reader.parse_evaluation();
  config.seeds = reader.parse_seeds();
  const std::uint64_t seed_offset = j.value("seed_offset", 0ULL);
  for (auto& seed : config.seeds) seed += seed_offset;
  config.output_dir = j.value("output_dir", std::string());

  if (config.evaluation.eval_n > config.chains)
    reader.issue("/evaluation/eval_n", "must not exceed chains");
  if (config.evaluation.w2_method == "exact" && config.target.dim() > 1 &&
      config.evaluation.eval_n > 4096)
    reader.issue("/evaluation/eval_n", "exceeds the exact-assignment cap (4096)");

  if (!reader.issues.empty()) throw ConfigError(std::move(reader.issues));
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  if (!fs::exists(path))
    fail_config("/", "config file does not exist: " + path);
  nlohmann::json j;
  try {
    j = read_json_file(path);
  } catch (const std::exception& e) {
    fail_config("/", std::string("cannot parse JSON: ") + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

nlohmann::json MetricRecord::to_json() const {
  nlohmann::json j{{"schema", 1},
                   {"experiment", experiment_id},
                   {"seed", seed},
                   {"leg", leg},
                   {"iteration", iteration},
                   {"w2", w2.to_json()},
                   {"moment_mean_sq", moment_mean_sq}};
  if (bound_report_ref)
    j["bound_report"] = *bound_report_ref;
  else
    j["bound_report"] = nullptr;
  return j;
}

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();

  AnnealSchedule schedule;
  for (std::size_t i = 0; i < config.legs.size(); ++i) {
    const LegSpec& leg = config.legs[i];
    const ModelSpec& model_spec = leg.model ? *leg.model : config.model;
    const std::uint64_t model_seed = rng::mix64(seed + rng::kGolden * (i + 1));
    schedule.legs.push_back(
        {leg.eta, leg.sigma_sq, leg.steps, model_spec.build(config.target, leg.sigma_sq, model_seed)});
  }

  LangevinConfig base;
  base.eta = schedule.legs.front().eta;
  base.steps = schedule.legs.front().steps;
  base.chains = config.chains;
  base.dim = config.target.dim();
  base.init = config.init;
  base.seed = seed;

  RunResult result;
  result.trajectory = annealed_run(schedule, base, config.evaluation.snapshot_every);

  const int eval_n = config.evaluation.eval_n;
  const SampleBatch target_batch =
      config.target.sample(eval_n, rng::mix64(seed ^ 0x65766131u));

  const auto leg_of = [&](long iteration) {
    if (iteration <= 0) return 0;
    int leg = 0;
    for (std::size_t i = 0; i < result.trajectory.leg_starts.size(); ++i)
      if (result.trajectory.leg_starts[i] < iteration) leg = static_cast<int>(i);
    return leg;
  };

  for (const auto& snap : result.trajectory.snapshots) {
    MetricRecord rec;
    rec.experiment_id = config.experiment_id;
    rec.seed = seed;
    rec.leg = leg_of(snap.iteration);
    rec.iteration = snap.iteration;
    const Eigen::MatrixXd head = snap.batch.topRows(eval_n);
    if (config.evaluation.w2_method == "exact")
      rec.w2 = w2_exact(head, target_batch.points);
    else
      rec.w2 = w2_sliced(head, target_batch.points, config.evaluation.projections,
                         rng::mix64(seed ^ 0x736c6331u));
    rec.moment_mean_sq = result.trajectory.moment_trace[snap.iteration].mean_sq_norm;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    result.metrics.push_back(std::move(rec));
  }
  result.final_w2 = result.metrics.back().w2.value;
  return result;
}

ComparisonReport run_comparison(const std::vector<ExperimentConfig>& arms) {
  if (arms.size() < 2) fail_config("/arms", "comparison needs at least 2 arms");
  ComparisonReport report;
  for (const auto& arm : arms) {
    ComparisonArmResult res;
    res.name = arm.experiment_id;
    std::map<long, std::vector<double>> trace;
    for (const std::uint64_t seed : arm.seeds) {
      const RunResult run = run_experiment(arm, seed);
      res.final_w2_per_seed.push_back(run.final_w2);
      for (const auto& rec : run.metrics) trace[rec.iteration].push_back(rec.w2.value);
    }
    res.median_final_w2 = median(res.final_w2_per_seed);
    for (auto& [iteration, values] : trace)
      res.median_trace.emplace_back(iteration, median(values));
    report.arms.push_back(std::move(res));
  }

  const std::size_t n_arms = report.arms.size();
  const std::size_t n_seeds = report.arms.front().final_w2_per_seed.size();
  report.wins.assign(n_arms, std::vector<int>(n_arms, 0));
  for (std::size_t i = 0; i < n_arms; ++i)
    for (std::size_t j = 0; j < n_arms; ++j)
      for (std::size_t s = 0; s < n_seeds && i != j; ++s)
        if (report.arms[i].final_w2_per_seed[s] < report.arms[j].final_w2_per_seed[s])
          ++report.wins[i][j];
  return report;
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json arms_json = nlohmann::json::array();
  for (const auto& arm : arms) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [iteration, value] : arm.median_trace)
      trace.push_back({{"iteration", iteration}, {"median_w2", value}});
    arms_json.push_back({{"name", arm.name},
                         {"final_w2_per_seed", arm.final_w2_per_seed},
                         {"median_final_w2", arm.median_final_w2},
                         {"trace", trace}});
  }
  return {{"schema", 1}, {"arms", arms_json}, {"wins", wins}};
}

std::vector<ExperimentConfig> load_comparison(const std::string& path) {
  if (!fs::exists(path))
    fail_config("/", "config file does not exist: " + path);
  nlohmann::json j;
  try {
    j = read_json_file(path);
  } catch (const std::exception& e) {
    fail_config("/", std::string("cannot parse JSON: ") + e.what());
  }
  if (!j.contains("arms") || !j["arms"].is_array() || j["arms"].size() < 2)
    fail_config("/arms", "comparison config needs >= 2 arms");

  const std::string base_dir = fs::path(path).parent_path().string();
  std::vector<ExperimentConfig> arms;
  int i = 0;
  for (const auto& ja : j["arms"]) {
    nlohmann::json merged = j;
    merged.erase("arms");
    for (const auto& [key, value] : ja.items()) merged[key] = value;
    if (!merged.contains("name")) merged["name"] = "arm" + std::to_string(i);
    arms.push_back(
        ExperimentConfig::from_json(merged, base_dir, "/arms/" + std::to_string(i)));
    ++i;
  }
  return arms;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

fs::path resolve_run_dir(const ExperimentConfig& config, const std::string& output_root) {
  std::string root = output_root;
  if (root.empty()) root = config.output_dir;
  if (root.empty()) root = "sgs_out";
  return fs::path(root) / config.experiment_id;
}

void write_metrics(const std::vector<MetricRecord>& metrics, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const auto& rec : metrics) {
    out << rec.to_json().dump() << "\n";
    out.flush();  // a killed run leaves a valid JSONL prefix
  }
}

int emit_error(const std::exception& e) {
  if (const auto* config_error = dynamic_cast<const ConfigError*>(&e)) {
    std::cout << config_error->to_json().dump(2) << std::endl;
    return 2;
  }
  if (const auto* divergence = dynamic_cast<const DivergenceError*>(&e)) {
    const nlohmann::json j{{"schema", 1},
                           {"error", "divergence"},
                           {"leg", divergence->leg()},
                           {"iteration", divergence->iteration()}};
    std::cout << j.dump(2) << std::endl;
    return 3;
  }
  const nlohmann::json j{{"schema", 1}, {"error", "runtime"}, {"message", e.what()}};
  std::cout << j.dump(2) << std::endl;
  return 1;
}

}  // namespace

int cli_sample(const std::string& config_path, std::optional<std::uint64_t> seed_override,
               const std::string& output_root) {
  try {
    ExperimentConfig config = ExperimentConfig::load(config_path);
    if (seed_override) config.seeds = {*seed_override};
    const fs::path run_dir = resolve_run_dir(config, output_root);
    fs::create_directories(run_dir);

    nlohmann::json artifacts = nlohmann::json::array();
    nlohmann::json aborted = nullptr;
    int exit_code = 0;
    for (const std::uint64_t seed : config.seeds) {
      try {
        const RunResult result = run_experiment(config, seed);
        const std::string metrics_name = "metrics_" + std::to_string(seed) + ".jsonl";
        const std::string samples_name = "samples_" + std::to_string(seed) + ".csv";
        write_metrics(result.metrics, run_dir / metrics_name);
        write_csv(SampleBatch{result.trajectory.final_batch(), seed},
                  (run_dir / samples_name).string());
        artifacts.push_back({{"name", metrics_name}, {"hash", file_hash(run_dir / metrics_name)}});
        artifacts.push_back({{"name", samples_name}, {"hash", file_hash(run_dir / samples_name)}});
      } catch (const DivergenceError& e) {
        aborted = {{"seed", seed}, {"leg", e.leg()}, {"iteration", e.iteration()}};
        exit_code = emit_error(e);
        break;
      }
    }

    const nlohmann::json manifest{{"schema", 1},          {"version", kVersion},
                                  {"experiment", config.experiment_id},
                                  {"seeds", config.seeds}, {"config", config.raw},
                                  {"artifacts", artifacts}, {"aborted", aborted}};
    std::ofstream out(run_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
    out.close();
    if (exit_code == 0) std::cout << manifest.dump(2) << std::endl;
    return exit_code;
  } catch (const std::exception& e) {
    return emit_error(e);
  }
}

int cli_compare(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                const std::string& output_root) {
  try {
    std::vector<ExperimentConfig> arms = load_comparison(config_path);
    if (seed_override)
      for (auto& arm : arms) arm.seeds = {*seed_override};

    const ComparisonReport report = run_comparison(arms);

    std::string root = output_root;
    if (root.empty()) root = arms.front().output_dir;
    if (root.empty()) root = "sgs_out";
    const fs::path dir = fs::path(root) / (arms.front().experiment_id + "_comparison");
    fs::create_directories(dir);
    std::ofstream out(dir / "comparison.json");
    out << report.to_json().dump(2) << "\n";
    out.close();

    std::cout << report.to_json().dump(2) << std::endl;
    return 0;
  } catch (const std::exception& e) {
    return emit_error(e);
  }
}

namespace {

void apply_sweep_field(BoundInputs& inputs, const std::string& field, double value) {
  if (field == "eta") {
    inputs.eta = value;
    if (inputs.steps) inputs.tau = static_cast<double>(*inputs.steps) * value;
  } else if (field == "tau") {
    inputs.tau = value;
    if (inputs.steps) inputs.eta = value / static_cast<double>(*inputs.steps);
  } else if (field == "epsilon") {
    inputs.epsilon = value;
  } else if (field == "sigma_sq") {
    inputs.sigma_sq = value;
  } else if (field == "w2_init") {
    inputs.w2_init = value;
  } else if (field == "alpha") {
    inputs.alpha = value;
  } else if (field == "k_alpha") {
    inputs.k_alpha = value;
  } else if (field == "p_inf") {
    inputs.p_inf = value;
  } else if (field == "universal_C") {
    inputs.universal_c = value;
  } else if (field == "delta") {
    inputs.delta = value;
  } else if (field == "n") {
    inputs.n = value;
  } else if (field == "rademacher") {
    inputs.rademacher = value;
  } else if (field == "radius_R") {
    inputs.radius_R = value;
  } else {
    fail_config("/sweep/field", "unknown sweep field: " + field);
  }
}

}  // namespace

int cli_bounds(const std::string& inputs_path, const std::optional<std::string>& sweep_field,
               double sweep_lo, double sweep_hi, int sweep_steps) {
  try {
    if (!fs::exists(inputs_path))
      fail_config("/", "inputs file does not exist: " + inputs_path);
    BoundInputs inputs;
    try {
      inputs = BoundInputs::from_json(read_json_file(inputs_path));
    } catch (const std::exception& e) {
      fail_config("/", e.what());
    }

    if (!sweep_field) {
      std::cout << thm1_bound(inputs).to_json().dump(2) << std::endl;
      return 0;
    }

    if (sweep_steps < 2) fail_config("/sweep/steps", "must be >= 2");
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < sweep_steps; ++i) {
      const double value = sweep_lo + (sweep_hi - sweep_lo) * i / (sweep_steps - 1);
      BoundInputs point = inputs;
      apply_sweep_field(point, *sweep_field, value);
      rows.push_back({{"field", *sweep_field},
                      {"value", value},
                      {"report", thm1_bound(point).to_json()}});
    }
    std::cout << rows.dump(2) << std::endl;
    return 0;
  } catch (const std::exception& e) {
    return emit_error(e);
  }
}

int cli_fit(const std::string& config_path, const std::string& output_root) {
  try {
    if (!fs::exists(config_path))
      fail_config("/", "config file does not exist: " + config_path);
    const nlohmann::json j = read_json_file(config_path);
    const std::string base_dir = fs::path(config_path).parent_path().string();

    std::vector<ConfigIssue> issues;
    if (!j.contains("target")) issues.push_back({"/target", "missing"});
    const double sigma_sq = j.value("sigma_sq", 0.0);
    if (sigma_sq <= 0) issues.push_back({"/sigma_sq", "must be > 0"});
    const int train_n = j.value("train_n", 0);
    if (train_n < 1) issues.push_back({"/train_n", "must be >= 1"});
    if (!issues.empty()) throw ConfigError(std::move(issues));

    nlohmann::json target_json = j["target"];
    DensitySpec target = DensitySpec::standard_normal(1);
    if (target_json.is_string()) {
      const std::string ref = target_json.get<std::string>();
      if (ref.rfind("zoo:", 0) == 0) {
        bool found = false;
        for (auto& [name, spec] : density_zoo())
          if (name == ref.substr(4)) {
            target = spec;
            found = true;
          }
        if (!found) fail_config("/target", "unknown zoo density: " + ref);
      } else {
        const fs::path p = fs::path(ref).is_absolute() ? fs::path(ref) : fs::path(base_dir) / ref;
        if (!fs::exists(p)) fail_config("/target", "file does not exist: " + p.string());
        target = DensitySpec::from_json(read_json_file(p.string()));
      }
    } else {
      target = DensitySpec::from_json(target_json);
    }

    FitConfig fit_config;
    fit_config.gamma = j.value("gamma", 1.0);
    fit_config.feature_count = j.value("features", 64);
    fit_config.include_linear = j.value("include_linear", false);
    fit_config.ridge = j.value("ridge", 1e-8);
    const std::uint64_t seed = j.value("seed", 1ULL);

    const ScoreModel model = fit_dae(target, sigma_sq, train_n, fit_config, seed);

    std::string out_path = j.value("output", std::string());
    if (!out_path.empty()) {
      fs::path p(out_path);
      if (!p.is_absolute() && !output_root.empty()) p = fs::path(output_root) / p;
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      std::ofstream out(p);
      out << model.to_json().dump(2) << "\n";
    }
    std::cout << model.to_json().dump(2) << std::endl;
    return 0;
  } catch (const std::exception& e) {
    return emit_error(e);
  }
}

int cli_w2(const std::string& a_path, const std::string& b_path, const std::string& method) {
  try {
    if (!fs::exists(a_path)) fail_config("/a", "file does not exist: " + a_path);
    if (!fs::exists(b_path)) fail_config("/b", "file does not exist: " + b_path);
    const SampleBatch a = read_csv_file(a_path);
    const SampleBatch b = read_csv_file(b_path);
    W2Estimate est;
    if (method == "exact")
      est = w2_exact(a, b);
    else if (method == "sliced")
      est = w2_sliced(a, b, 256, 1);
    else
      fail_config("/method", "must be \"exact\" or \"sliced\"");
    std::cout << est.to_json().dump(2) << std::endl;
    return 0;
  } catch (const std::exception& e) {
    return emit_error(e);
  }
}

}  // namespace sgs
