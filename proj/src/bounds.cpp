#include "sgs/bounds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgs/rng.hpp"

namespace sgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// exp that reports overflow instead of silently saturating
double checked_exp(double arg, bool& overflow) {
  if (arg > 709.0) {
    overflow = true;
    return kInf;
  }
  return std::exp(arg);
}

void json_set(nlohmann::json& j, const char* key, const std::optional<double>& v) {
  if (v && std::isfinite(*v))
    j[key] = *v;
  else
    j[key] = nullptr;
}

void json_set(nlohmann::json& j, const char* key, double v) {
  if (std::isfinite(v))
    j[key] = v;
  else
    j[key] = nullptr;
}

}  // namespace

SmoothedDissipativity smoothed_dissipativity(const RegularityConstants& constants,
                                             double sigma_sq) {
  if (sigma_sq < 0) throw std::invalid_argument("smoothed_dissipativity: sigma_sq must be >= 0");
  if (sigma_sq > constants.sigma_max_sq)
    throw std::invalid_argument(
        "smoothed_dissipativity: sigma_sq <= sigma_max_sq violated (sigma_sq = " +
        std::to_string(sigma_sq) + " > " + std::to_string(constants.sigma_max_sq) + ")");
  const double m = constants.dissip_m;
  const double M = constants.lipschitz_M;
  const double b = constants.dissip_b;
  const double B = constants.growth_B;
  const double gap = m - sigma_sq * M;

  SmoothedDissipativity out;
  out.m_sigma = 0.5 * gap;
  out.b_sigma = b + (B == 0.0 ? 0.0 : B * B / (2.0 * gap));
  out.m_uniform = 0.25 * m;
  out.b_uniform = b + (B == 0.0 ? 0.0 : m * B * B / (4.0 * M * M));
  return out;
}

LogSobolevBound log_sobolev_bound(const RegularityConstants& constants, double sigma_sq, int dim,
                                  double universal_c) {
  if (constants.lipschitz_M <= 0)
    throw std::invalid_argument("log_sobolev_bound: requires lipschitz_M > 0");
  const SmoothedDissipativity diss = smoothed_dissipativity(constants, sigma_sq);
  const double M = constants.lipschitz_M;
  const double b = constants.dissip_b;
  const double B = constants.growth_B;
  const double ms = diss.m_sigma;
  const double db = dim + b;

  LogSobolevBound out;
  const double grown = checked_exp(8.0 * (M + B) * db / ms, out.overflow);
  out.c_poincare = (2.0 / (ms * db)) * (1.0 + universal_c * db * db * grown);
  out.c_log_sobolev = 8.0 * M / (ms * ms) + 2.0 / M + out.c_poincare * (2.0 + 6.0 * M * db / ms);
  return out;
}

nlohmann::json BoundInputs::to_json() const {
  nlohmann::json j{{"schema", 1},
                   {"constants", constants.to_json()},
                   {"dim", dim},
                   {"sigma_sq", sigma_sq},
                   {"eta", eta},
                   {"tau", tau},
                   {"epsilon", epsilon},
                   {"radius_R", radius_R},
                   {"alpha", alpha},
                   {"k_alpha", k_alpha},
                   {"p_inf", p_inf},
                   {"universal_C", universal_c},
                   {"w2_init", w2_init},
                   {"delta", delta},
                   {"n", n},
                   {"rademacher", rademacher}};
  if (steps) j["steps"] = *steps;
  return j;
}

BoundInputs BoundInputs::from_json(const nlohmann::json& j) {
  BoundInputs in;
  in.constants = RegularityConstants::from_json(j.at("constants"));
  in.dim = j.at("dim").get<int>();
  in.sigma_sq = j.at("sigma_sq").get<double>();
  in.eta = j.value("eta", 0.0);
  in.tau = j.value("tau", 0.0);
  if (j.contains("steps") && !j["steps"].is_null()) in.steps = j["steps"].get<long>();
  in.epsilon = j.value("epsilon", 0.0);
  in.radius_R = j.value("radius_R", 1.0);
  in.alpha = j.value("alpha", 0.0);
  in.k_alpha = j.value("k_alpha", 0.0);
  in.p_inf = j.value("p_inf", 0.0);
  in.universal_c = j.value("universal_C", 1.0);
  in.w2_init = j.value("w2_init", 0.0);
  in.delta = j.value("delta", 0.1);
  in.n = j.value("n", 3.0);
  in.rademacher = j.value("rademacher", 0.0);
  return in;
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j{{"schema", 1}};
  json_set(j, "smoothing_term", smoothing_term);
  json_set(j, "A_term", a_term);
  json_set(j, "mixing_term", mixing_term);
  json_set(j, "C_term", c_term);
  json_set(j, "C_term_relaxed", c_term_relaxed);
  json_set(j, "total", total);
  json_set(j, "m_sigma", m_sigma);
  json_set(j, "b_sigma", b_sigma);
  json_set(j, "c_P", c_poincare);
  json_set(j, "c_LS", c_log_sobolev);
  json_set(j, "bolley_villani", bolley_villani);
  j["flags"] = {{"c_term_covered", c_term_covered},
                {"eps_small", eps_small},
                {"overflow", overflow}};
  return j;
}

BoundReport thm1_bound(const BoundInputs& in) {
  if (in.eta <= 0 || in.tau <= 0)
    throw std::invalid_argument("thm1_bound: eta and tau must be positive");
  if (in.steps) {
    const double implied = static_cast<double>(*in.steps) * in.eta;
    if (std::abs(implied - in.tau) > 1e-9 * std::max(1.0, std::abs(in.tau)))
      throw std::invalid_argument("thm1_bound: inconsistent (eta, steps, tau)");
  }
  if (in.epsilon < 0) throw std::invalid_argument("thm1_bound: epsilon must be >= 0");

  const double M = in.constants.lipschitz_M;
  const double b = in.constants.dissip_b;
  const double C = in.universal_c;
  const double d = static_cast<double>(in.dim);

  BoundReport out;
  const SmoothedDissipativity diss = smoothed_dissipativity(in.constants, in.sigma_sq);
  out.m_sigma = diss.m_sigma;
  out.b_sigma = diss.b_sigma;

  const LogSobolevBound ls = log_sobolev_bound(in.constants, in.sigma_sq, in.dim, C);
  out.c_poincare = ls.c_poincare;
  out.c_log_sobolev = ls.c_log_sobolev;
  out.overflow = ls.overflow;

  out.smoothing_term = std::sqrt(in.sigma_sq) * std::sqrt(d);
  out.a_term = C * std::sqrt(d * in.eta * in.tau) *
               checked_exp(0.5 * M * M * in.tau, out.overflow);
  out.mixing_term = in.w2_init * std::exp(-2.0 * in.tau / out.c_log_sobolev);

  if (in.alpha > 0 && in.alpha <= in.constants.dissip_m)
    out.bolley_villani = bolley_villani_constant(in, in.tau);

  if (in.dim >= 3) {
    out.c_term_covered = true;
    const double inner =
        in.epsilon * in.tau +
        C * std::pow(in.p_inf, 0.5 - 1.0 / d) *
            checked_exp(0.25 * M * std::sqrt(d) * in.tau, out.overflow) * std::sqrt(in.tau) *
            std::pow(in.epsilon, 1.0 / d);
    const double front = C * std::sqrt((b + d) * in.tau);
    out.eps_small = inner <= 1.0;
    out.c_term = front * std::pow(inner, 0.25);
    out.c_term_relaxed = front * (std::sqrt(inner) + std::pow(inner, 0.25));
    out.total = out.smoothing_term + out.a_term + out.mixing_term + *out.c_term;
  }
  return out;
}

EstimationRate estimation_rate(const BoundInputs& in) {
  if (in.n < 3) throw std::invalid_argument("estimation_rate: n must be >= 3");
  if (in.delta <= 0 || in.delta >= 1)
    throw std::invalid_argument("estimation_rate: delta must lie in (0,1)");

  const double M = in.constants.lipschitz_M;
  const double B = in.constants.growth_B;
  const double C = in.universal_c;
  const double log_n = std::log(in.n);
  const double beta_n = (std::log(1.0 / in.delta) + std::log(log_n)) / in.n;
  const double front = C * (M * in.radius_R + B) * (M * in.radius_R + B);

  EstimationRate out;
  out.rate = front * (log_n * log_n * log_n * in.rademacher * in.rademacher +
                      beta_n * static_cast<double>(in.dim));
  out.dae_rate = in.sigma_sq > 0 ? out.rate / (in.sigma_sq * in.sigma_sq) : kInf;
  const SmoothedDissipativity diss = smoothed_dissipativity(in.constants, in.sigma_sq);
  out.failure_prob =
      4.0 * in.delta + C * in.n * std::exp(-in.radius_R * in.radius_R / diss.m_sigma);
  return out;
}

double bolley_villani_constant(const BoundInputs& in, double t) {
  if (in.alpha <= 0) throw std::invalid_argument("bolley_villani_constant: alpha must be > 0");
  if (in.alpha > in.constants.dissip_m)
    throw std::invalid_argument(
        "bolley_villani_constant: alpha > m rejected (exponential-moment hypothesis fails)");
  if (t < 0) throw std::invalid_argument("bolley_villani_constant: t must be >= 0");
  const double b = in.constants.dissip_b;
  const double d = static_cast<double>(in.dim);
  return 2.0 * std::sqrt(1.5 / in.alpha + in.k_alpha / in.alpha + 2.0 * (b + d) * t);
}

PathKl path_kl_estimate(const ScoreModel& f_hat, const DensitySpec& spec, double sigma_sq,
                        const LangevinConfig& config) {
  config.validate();
  if (f_hat.dim() != config.dim)
    throw std::invalid_argument("path_kl_estimate: model/config dimension mismatch");
  const ScoreModel oracle = ScoreModel::oracle(spec, sigma_sq);
  if (config.eta * oracle.lipschitz_bound() >= 1.0)
    throw std::invalid_argument(
        "path_kl_estimate: stability audit failed (eta * lipschitz_bound >= 1)");

  Eigen::MatrixXd batch = draw_initial_batch(config);
  const double noise_scale = std::sqrt(2.0 * config.eta);
  double acc = 0.0;
  for (long k = 0; k < config.steps; ++k) {
    double step_sum = 0.0;
    for (int c = 0; c < config.chains; ++c) {
      Eigen::VectorXd w = batch.row(c).transpose();
      const Eigen::VectorXd drift = oracle.evaluate(w);
      step_sum += (drift - f_hat.evaluate(w)).squaredNorm();
      auto stream = rng::derive(config.seed, rng::Purpose::ChainStep,
                                static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k));
      w += config.eta * drift + noise_scale * stream.normal_vector(config.dim);
      if (!w.allFinite() || w.norm() > 1e6) throw DivergenceError(0, k + 1);
      batch.row(c) = w.transpose();
    }
    acc += step_sum / config.chains;
  }

  PathKl out;
  out.estimate = 0.5 * config.eta * acc;

  if ((f_hat.kind() == ScoreModel::Kind::Oracle ||
       f_hat.kind() == ScoreModel::Kind::PerturbedOracle) &&
      config.dim >= 3) {
    const double d = static_cast<double>(config.dim);
    const double tau = config.eta * static_cast<double>(config.steps);
    const double eps = f_hat.epsilon();
    const double M = 2.0 * oracle.lipschitz_bound();
    const double p_inf = spec.smooth(sigma_sq).sup_density_bound();
    out.formula_bound = eps * tau + std::pow(p_inf, 0.5 - 1.0 / d) *
                                        std::exp(0.25 * M * std::sqrt(d) * tau) *
                                        std::sqrt(tau) * std::pow(eps, 1.0 / d);
  }
  return out;
}

}  // namespace sgs
