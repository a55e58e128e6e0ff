#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sgs/bounds.hpp"
#include "sgs/density.hpp"
#include "sgs/sampler.hpp"
#include "sgs/score_model.hpp"
#include "sgs/transport.hpp"

namespace sgs {

struct ConfigIssue {
  std::string pointer;  // JSON-pointer path of the offending field
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }
  nlohmann::json to_json() const;

 private:
  std::vector<ConfigIssue> issues_;
};

// How each leg's score estimate is built.
struct ModelSpec {
  enum class Kind { Oracle, Perturbed, Fitted, FittedFile };

  Kind kind = Kind::Oracle;
  double epsilon = 0.1;  // Perturbed
  int train_n = 10000;   // Fitted
  double gamma = 1.0;
  int features = 64;
  bool include_linear = false;
  double ridge = 1e-8;
  std::string path;                  // FittedFile
  std::optional<std::uint64_t> seed; // fixes the model's own randomness across runs

  ScoreModel build(const DensitySpec& target, double sigma_sq, std::uint64_t seed) const;

  nlohmann::json to_json() const;
};

struct EvaluationSpec {
  std::string w2_method = "exact";  // "exact" | "sliced"
  int eval_n = 512;
  long snapshot_every = 0;  // 0: only initial and final
  int projections = 128;    // sliced only
};

struct LegSpec {
  double eta = 0.01;
  double sigma_sq = 0.0;
  long steps = 100;
  std::optional<ModelSpec> model;  // defaults to the experiment-level model
};

struct ExperimentConfig {
  std::string experiment_id = "experiment";
  DensitySpec target = DensitySpec::standard_normal(1);
  ModelSpec model;
  std::vector<LegSpec> legs;
  int chains = 1024;
  InitSpec init = InitSpec::gaussian(Eigen::VectorXd::Zero(1), 0.01);
  bool init_given = false;
  EvaluationSpec evaluation;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir;
  nlohmann::json raw;  // config echo

  static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir,
                                    const std::string& root_pointer = "");
  static ExperimentConfig load(const std::string& path);
};

struct MetricRecord {
  std::string experiment_id;
  std::uint64_t seed = 0;
  int leg = 0;
  long iteration = 0;
  W2Estimate w2;
  double moment_mean_sq = 0.0;
  std::optional<std::string> bound_report_ref;
  double wall_ms = 0.0;  // in-memory only; artifacts stay byte-reproducible

  nlohmann::json to_json() const;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<MetricRecord> metrics;
  double final_w2 = 0.0;
};

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed);

struct ComparisonArmResult {
  std::string name;
  std::vector<double> final_w2_per_seed;
  double median_final_w2 = 0.0;
  std::vector<std::pair<long, double>> median_trace;  // iteration -> median W2
};

struct ComparisonReport {
  std::vector<ComparisonArmResult> arms;
  std::vector<std::vector<int>> wins;  // wins[i][j): seeds where arm i beat arm j
  nlohmann::json to_json() const;
};

ComparisonReport run_comparison(const std::vector<ExperimentConfig>& arms);

// CLI entry points; they write artifacts and return a process exit code.
int cli_sample(const std::string& config_path, std::optional<std::uint64_t> seed_override,
               const std::string& output_root);
int cli_compare(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                const std::string& output_root);
int cli_bounds(const std::string& inputs_path, const std::optional<std::string>& sweep_field,
               double sweep_lo, double sweep_hi, int sweep_steps);
int cli_fit(const std::string& config_path, const std::string& output_root);
int cli_w2(const std::string& a_path, const std::string& b_path, const std::string& method);

// Parses a comparison config into one ExperimentConfig per arm.
std::vector<ExperimentConfig> load_comparison(const std::string& path);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace sgs
