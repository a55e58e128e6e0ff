#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgs/density.hpp"
#include "sgs/score_model.hpp"

namespace sgs {

// Initialization of the chains: a point mass, an isotropic Gaussian, or a
// warm-start batch inherited from a previous run.
struct InitSpec {
  enum class Kind { Point, Gaussian, WarmStart };

  Kind kind = Kind::Gaussian;
  Eigen::VectorXd center;     // Point / Gaussian
  double variance = 0.01;     // Gaussian
  Eigen::MatrixXd batch;      // WarmStart, chains x d

  static InitSpec point(const Eigen::VectorXd& x0);
  static InitSpec gaussian(const Eigen::VectorXd& mu, double variance);
  static InitSpec warm_start(const Eigen::MatrixXd& batch);

  // Analytic (or empirical, for warm starts) E||W_0||^2.
  double mean_square_norm(int dim) const;
};

struct LangevinConfig {
  double eta = 0.01;
  long steps = 100;
  int chains = 1;
  int dim = 1;
  InitSpec init;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Snapshot {
  long iteration = 0;
  Eigen::MatrixXd batch;  // chains x d
};

struct MomentPoint {
  long iteration = 0;
  double mean_sq_norm = 0.0;
  double std_error = 0.0;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;       // iteration 0, cadence points, final
  std::vector<MomentPoint> moment_trace; // every iteration
  std::vector<long> leg_starts;          // global iteration where each leg begins
  LangevinConfig config;                 // echo of the (first-leg) configuration

  const Eigen::MatrixXd& final_batch() const { return snapshots.back().batch; }
};

// Raised when a chain norm crosses the 1e6 divergence guard.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int leg, long iteration);
  int leg() const { return leg_; }
  long iteration() const { return iteration_; }

 private:
  int leg_;
  long iteration_;
};

// Discrete Langevin iteration W <- W + eta f(W) + sqrt(2 eta) xi.  Refuses to
// start when eta times the model's reported Lipschitz constant reaches 1.
Trajectory ula_run(const ScoreModel& model, const LangevinConfig& config, long snapshot_every);

// The batch the configuration starts from (chains x d).
Eigen::MatrixXd draw_initial_batch(const LangevinConfig& config);

struct AnnealLeg {
  double eta = 0.0;
  double sigma_sq = 0.0;
  long steps = 0;
  ScoreModel model;
};

// Decreasing-noise schedule with warm restarts between legs.
struct AnnealSchedule {
  std::vector<AnnealLeg> legs;

  void validate() const;  // eta and sigma_sq non-increasing, models consistent
};

Trajectory annealed_run(const AnnealSchedule& schedule, const LangevinConfig& base_config,
                        long snapshot_every);

// Law of the continuous Langevin diffusion for the standard-Gaussian target,
// started at x0: mean x0 e^{-t}, per-coordinate variance 1 - e^{-2t}.
std::pair<Eigen::VectorXd, double> ou_exact_law(const Eigen::VectorXd& x0, double t);

// Max violation of E||W_k||^2 <= E||W_0||^2 + (b + d)/m over the trace,
// beyond three standard errors; 0 when the bound held everywhere.
double moment_trace_check(const Trajectory& traj, const RegularityConstants& constants,
                          std::optional<double> bound_override = {});

// Snapshot CSVs plus a manifest (config echo, seed, leg starts, moment trace).
void dump_trajectory(const Trajectory& traj, const std::string& directory);

nlohmann::json trajectory_manifest(const Trajectory& traj);

}  // namespace sgs
