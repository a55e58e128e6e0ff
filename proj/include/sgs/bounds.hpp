#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>

#include "sgs/density.hpp"
#include "sgs/sampler.hpp"
#include "sgs/score_model.hpp"

namespace sgs {

// Dissipativity pair of the smoothed score, plus the uniform-in-sigma
// fallback pair.
struct SmoothedDissipativity {
  double m_sigma = 0.0;
  double b_sigma = 0.0;
  double m_uniform = 0.0;
  double b_uniform = 0.0;
};

SmoothedDissipativity smoothed_dissipativity(const RegularityConstants& constants,
                                             double sigma_sq);

struct LogSobolevBound {
  double c_poincare = 0.0;
  double c_log_sobolev = 0.0;
  bool overflow = false;  // the bound evaluated past double range; vacuous, not wrong
};

LogSobolevBound log_sobolev_bound(const RegularityConstants& constants, double sigma_sq, int dim,
                                  double universal_c = 1.0);

// Everything the closed-form evaluators consume.  tau = steps * eta must be
// consistent when steps is supplied.
struct BoundInputs {
  RegularityConstants constants;
  int dim = 1;
  double sigma_sq = 0.0;
  double eta = 0.0;
  double tau = 0.0;
  std::optional<long> steps;
  double epsilon = 0.0;    // score L2 error
  double radius_R = 1.0;   // initialization ball radius
  double alpha = 0.0;      // exponential-moment pair
  double k_alpha = 0.0;
  double p_inf = 0.0;      // sup of the smoothed density
  double universal_c = 1.0;
  double w2_init = 0.0;    // W2 between the initialization and p_{sigma^2}
  double delta = 0.1;      // failure probability knob of the finite-sample rate
  double n = 3.0;          // sample count of the finite-sample rate
  double rademacher = 0.0; // Rademacher complexity of the fitting class

  nlohmann::json to_json() const;
  static BoundInputs from_json(const nlohmann::json& j);
};

// The four-term decomposition of W2(mu_k, p) with every intermediate
// constant.  The score-error term requires dim >= 3; below that it is
// reported as not covered and the total is left empty.
struct BoundReport {
  double smoothing_term = 0.0;
  double a_term = 0.0;
  double mixing_term = 0.0;
  std::optional<double> c_term;
  std::optional<double> c_term_relaxed;  // sqrt + fourth-root form
  std::optional<double> total;

  double m_sigma = 0.0;
  double b_sigma = 0.0;
  double c_poincare = 0.0;
  double c_log_sobolev = 0.0;
  std::optional<double> bolley_villani;

  bool c_term_covered = false;
  bool eps_small = false;  // the fourth root dominates the square root
  bool overflow = false;

  nlohmann::json to_json() const;
};

BoundReport thm1_bound(const BoundInputs& inputs);

struct EstimationRate {
  double rate = 0.0;          // DSM-side rate
  double dae_rate = 0.0;      // divided by sigma^4
  double failure_prob = 0.0;  // 4 delta + C n exp(-R^2 / m_sigma)
};

EstimationRate estimation_rate(const BoundInputs& inputs);

// 2 (3/(2 alpha) + k_alpha/alpha + 2 (b + d) t)^{1/2}; requires alpha <= m.
double bolley_villani_constant(const BoundInputs& inputs, double t);

struct PathKl {
  double estimate = 0.0;                // (1/2) eta sum_k mean ||oracle - fhat||^2
  std::optional<double> formula_bound;  // eps tau + C p_inf^{1/2-1/d} e^{M sqrt(d) tau/4} sqrt(tau) eps^{1/d}
};

// Girsanov path-KL estimate along the oracle-driven discrete chain.
PathKl path_kl_estimate(const ScoreModel& f_hat, const DensitySpec& spec, double sigma_sq,
                        const LangevinConfig& config);

}  // namespace sgs
