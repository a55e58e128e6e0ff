#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <memory>
#include <vector>

#include "sgs/density.hpp"

namespace sgs {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// An estimate of the smoothed score grad log p_{sigma^2}: the analytic
// oracle, the oracle plus a calibrated smooth error field, or a fitted
// random-feature DAE.  Immutable; evaluation is deterministic and safe from
// concurrent callers.
class ScoreModel {
 public:
  enum class Kind { Oracle, PerturbedOracle, FittedDae };

  Kind kind() const { return kind_; }
  int dim() const;
  double sigma_sq() const { return sigma_sq_; }
  // Reported Lipschitz constant of the field.
  double lipschitz_bound() const { return lipschitz_bound_; }
  // Target root-mean-square L2(p_{sigma^2}) error; 0 for the oracle.
  double epsilon() const { return epsilon_; }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& points) const;

  // Analytic smoothed score of p (targets p_{sigma^2}).
  static ScoreModel oracle(const DensitySpec& base, double sigma_sq);
  static ScoreModel oracle(const DensitySpec& base, double sigma_sq, double lipschitz_bound);

  // Oracle plus a fixed seeded field of low-frequency sinusoidal modes,
  // rescaled so the measured RMS error equals epsilon within 1%.
  static ScoreModel perturbed_oracle(const DensitySpec& base, double sigma_sq, double epsilon,
                                     std::uint64_t seed);

  // FittedDae JSON round trip.
  nlohmann::json to_json() const;
  static ScoreModel fitted_from_json(const nlohmann::json& j);

 private:
  friend ScoreModel fit_dae(const DensitySpec&, double, int, const struct FitConfig&,
                            std::uint64_t);
  struct Impl;
  ScoreModel() = default;

  Kind kind_ = Kind::Oracle;
  double sigma_sq_ = 0.0;
  double lipschitz_bound_ = 0.0;
  double epsilon_ = 0.0;
  std::shared_ptr<const Impl> impl_;
};

// Sup of the spectral norm of the log-density Hessian over a grid; the
// reported Lipschitz constant of the analytic score.
double score_lipschitz_estimate(const DensitySpec& spec, double radius, int grid_points);

// Radius covering every component mean plus six standard deviations.
double default_probe_radius(const DensitySpec& spec);

struct LossEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n = 0;

  nlohmann::json to_json() const;
};

// Monte-Carlo E||r(X + eps) - X||^2 with X ~ p, eps ~ N(0, sigma_sq I).
LossEstimate dae_loss(const VectorField& r, const DensitySpec& spec, double sigma_sq, int n,
                      std::uint64_t seed);

// Monte-Carlo E||s(X) - grad log p_{sigma^2}(X)||^2 with X ~ p_{sigma^2}.
LossEstimate dsm_loss(const VectorField& s, const DensitySpec& spec, double sigma_sq, int n,
                      std::uint64_t seed);

struct EquivalenceGap {
  double spread = 0.0;               // max gap - min gap over handles
  std::vector<double> gaps;          // L_DAE(r_j) - sigma^2 L_DSM(s_j)
  std::vector<double> std_errors;
};

// Evaluates the DAE/DSM gap for each handle on one shared sample (common
// random numbers); the spread must be statistically zero.
EquivalenceGap equivalence_gap(const std::vector<VectorField>& r_handles,
                               const DensitySpec& spec, double sigma_sq, int n,
                               std::uint64_t seed);

struct FitConfig {
  double gamma = 1.0;       // random-feature bandwidth
  int feature_count = 64;   // number of cosine features
  bool include_linear = false;
  double ridge = 1e-8;
};

// Closed-form ridge solve of the empirical DAE objective over
// r(x) = x + sigma_sq * W * phi(x).
ScoreModel fit_dae(const DensitySpec& spec, double sigma_sq, int train_n, const FitConfig& config,
                   std::uint64_t seed);

// Monte-Carlo estimate of E_eps[max_k (1/n) sum_i eps_i g_k(X_i)] for the
// n x K matrix of function values.
double rademacher_mc(const Eigen::MatrixXd& function_values, int trials, std::uint64_t seed);

}  // namespace sgs
