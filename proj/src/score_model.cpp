#include "sgs/score_model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "sgs/rng.hpp"

namespace sgs {

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

struct ScoreModel::Impl {
  int dim = 0;

  // Oracle / PerturbedOracle
  std::optional<DensitySpec> smoothed;

  // PerturbedOracle modes: delta(x) = amp * sum_j sin(omega_j . x + phase_j) u_j
  Eigen::MatrixXd perturb_omegas;  // J x d
  Eigen::VectorXd perturb_phases;  // J
  Eigen::MatrixXd perturb_dirs;    // d x J, unit columns
  double perturb_amp = 0.0;

  // FittedDae: s(x) = W phi(x), phi_f(x) = sqrt(2/F) cos(omega_f . x + phase_f)
  double gamma = 0.0;
  Eigen::MatrixXd feature_omegas;   // F x d
  Eigen::VectorXd feature_phases;   // F
  Eigen::MatrixXd feature_weights;  // d x F
  Eigen::MatrixXd linear_weights;   // d x d or empty
  double ridge = 0.0;

  Eigen::VectorXd fitted_features(const Eigen::VectorXd& x) const {
    const Eigen::Index F = feature_omegas.rows();
    Eigen::VectorXd phi(F);
    const double scale = std::sqrt(2.0 / static_cast<double>(F));
    for (Eigen::Index f = 0; f < F; ++f)
      phi[f] = scale * std::cos(feature_omegas.row(f).dot(x) + feature_phases[f]);
    return phi;
  }

  Eigen::VectorXd eval(Kind kind, const Eigen::VectorXd& x) const {
    switch (kind) {
      case Kind::Oracle:
        return smoothed->score(x);
      case Kind::PerturbedOracle: {
        Eigen::VectorXd out = smoothed->score(x);
        if (perturb_amp != 0.0) {
          for (Eigen::Index j = 0; j < perturb_omegas.rows(); ++j) {
            const double s = std::sin(perturb_omegas.row(j).dot(x) + perturb_phases[j]);
            out.noalias() += perturb_amp * s * perturb_dirs.col(j);
          }
        }
        return out;
      }
      case Kind::FittedDae: {
        Eigen::VectorXd out = feature_weights * fitted_features(x);
        if (linear_weights.size() > 0) out.noalias() += linear_weights * x;
        return out;
      }
    }
    throw std::logic_error("ScoreModel: unknown kind");
  }
};

int ScoreModel::dim() const { return impl_->dim; }

Eigen::VectorXd ScoreModel::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != impl_->dim) throw std::invalid_argument("ScoreModel: dimension mismatch");
  return impl_->eval(kind_, x);
}

Eigen::MatrixXd ScoreModel::evaluate_batch(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out.row(i) = evaluate(points.row(i).transpose()).transpose();
  return out;
}

double default_probe_radius(const DensitySpec& spec) {
  double radius = 0.0;
  for (const auto& c : spec.components()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov, Eigen::EigenvaluesOnly);
    radius = std::max(radius, c.mean.norm() + 6.0 * std::sqrt(es.eigenvalues().maxCoeff()));
  }
  return radius;
}

double score_lipschitz_estimate(const DensitySpec& spec, double radius, int grid_points) {
  const int d = spec.dim();
  const int per_axis =
      std::max(3, static_cast<int>(std::floor(std::pow(static_cast<double>(grid_points), 1.0 / d) +
                                              1e-9)));
  double max_norm = 0.0;
  std::vector<int> index(d, 0);
  bool done = false;
  while (!done) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = -radius + 2.0 * radius * index[i] / (per_axis - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.log_density_hessian(x),
                                                      Eigen::EigenvaluesOnly);
    max_norm = std::max(max_norm, es.eigenvalues().cwiseAbs().maxCoeff());
    done = true;
    for (int i = 0; i < d; ++i) {
      if (++index[i] < per_axis) {
        done = false;
        break;
      }
      index[i] = 0;
    }
  }
  return max_norm;
}

ScoreModel ScoreModel::oracle(const DensitySpec& base, double sigma_sq) {
  const DensitySpec smoothed = base.smooth(sigma_sq);
  const int grid = smoothed.dim() <= 2 ? 4096 : (smoothed.dim() == 3 ? 3375 : 2401);
  const double bound =
      score_lipschitz_estimate(smoothed, default_probe_radius(smoothed), grid);
  return oracle(base, sigma_sq, bound);
}

ScoreModel ScoreModel::oracle(const DensitySpec& base, double sigma_sq, double lipschitz_bound) {
  ScoreModel model;
  model.kind_ = Kind::Oracle;
  model.sigma_sq_ = sigma_sq;
  model.lipschitz_bound_ = lipschitz_bound;
  auto impl = std::make_shared<Impl>();
  impl->dim = base.dim();
  impl->smoothed = base.smooth(sigma_sq);
  model.impl_ = std::move(impl);
  return model;
}

ScoreModel ScoreModel::perturbed_oracle(const DensitySpec& base, double sigma_sq, double epsilon,
                                        std::uint64_t seed) {
  if (epsilon < 0) throw std::invalid_argument("perturbed_oracle: epsilon must be >= 0");
  const ScoreModel plain = oracle(base, sigma_sq);
  const int d = base.dim();
  constexpr int kModes = 20;
  constexpr int kCalibration = 200000;

  auto impl = std::make_shared<Impl>();
  impl->dim = d;
  impl->smoothed = base.smooth(sigma_sq);
  impl->perturb_omegas.resize(kModes, d);
  impl->perturb_phases.resize(kModes);
  impl->perturb_dirs.resize(d, kModes);

  auto stream = rng::derive(seed, rng::Purpose::Perturbation);
  for (int j = 0; j < kModes; ++j) {
    impl->perturb_omegas.row(j) = 0.5 * stream.normal_vector(d).transpose();
    impl->perturb_phases[j] = 2.0 * M_PI * stream.next_unit();
    Eigen::VectorXd dir = stream.normal_vector(d);
    const double norm = dir.norm();
    impl->perturb_dirs.col(j) = norm > 0 ? Eigen::VectorXd(dir / norm) : Eigen::VectorXd::Unit(d, 0);
  }

  double amp = 0.0;
  if (epsilon > 0) {
    const SampleBatch calib =
        impl->smoothed->sample(kCalibration, rng::mix64(seed ^ rng::kGolden));
    double mean_sq = 0.0;
    for (int i = 0; i < kCalibration; ++i) {
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(d);
      const Eigen::VectorXd x = calib.points.row(i).transpose();
      for (int j = 0; j < kModes; ++j) {
        const double s = std::sin(impl->perturb_omegas.row(j).dot(x) + impl->perturb_phases[j]);
        delta.noalias() += s * impl->perturb_dirs.col(j);
      }
      mean_sq += delta.squaredNorm();
    }
    mean_sq /= kCalibration;
    if (mean_sq <= 0) throw std::runtime_error("perturbed_oracle: degenerate perturbation field");
    amp = epsilon / std::sqrt(mean_sq);
  }
  impl->perturb_amp = amp;

  double mode_lipschitz = 0.0;
  for (int j = 0; j < kModes; ++j) mode_lipschitz += impl->perturb_omegas.row(j).norm();

  ScoreModel model;
  model.kind_ = Kind::PerturbedOracle;
  model.sigma_sq_ = sigma_sq;
  model.epsilon_ = epsilon;
  model.lipschitz_bound_ = plain.lipschitz_bound() + amp * mode_lipschitz;
  model.impl_ = std::move(impl);
  return model;
}

nlohmann::json ScoreModel::to_json() const {
  if (kind_ != Kind::FittedDae)
    throw std::invalid_argument("ScoreModel::to_json: only fitted models serialize");
  const auto& im = *impl_;
  nlohmann::json features = nlohmann::json::array();
  for (Eigen::Index f = 0; f < im.feature_omegas.rows(); ++f) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < im.feature_omegas.cols(); ++j)
      row.push_back(im.feature_omegas(f, j));
    features.push_back(row);
  }
  nlohmann::json phases = nlohmann::json::array();
  for (Eigen::Index f = 0; f < im.feature_phases.size(); ++f)
    phases.push_back(im.feature_phases[f]);
  nlohmann::json weights = nlohmann::json::array();
  for (Eigen::Index r = 0; r < im.feature_weights.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < im.feature_weights.cols(); ++c)
      row.push_back(im.feature_weights(r, c));
    weights.push_back(row);
  }
  nlohmann::json j{{"schema", 1},       {"gamma", im.gamma},   {"features", features},
                   {"phases", phases},  {"weights", weights},  {"ridge", im.ridge},
                   {"sigma_sq", sigma_sq_}};
  if (im.linear_weights.size() > 0) {
    nlohmann::json lw = nlohmann::json::array();
    for (Eigen::Index r = 0; r < im.linear_weights.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < im.linear_weights.cols(); ++c)
        row.push_back(im.linear_weights(r, c));
      lw.push_back(row);
    }
    j["linear_weights"] = lw;
  }
  return j;
}

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

double fitted_lipschitz_bound(const Eigen::MatrixXd& omegas, const Eigen::MatrixXd& weights,
                              const Eigen::MatrixXd& linear) {
  const Eigen::Index F = omegas.rows();
  double feat_grad_sq = 0.0;
  for (Eigen::Index f = 0; f < F; ++f)
    feat_grad_sq += (2.0 / static_cast<double>(F)) * omegas.row(f).squaredNorm();
  double bound = spectral_norm(weights) * std::sqrt(feat_grad_sq);
  if (linear.size() > 0) bound += spectral_norm(linear);
  return bound;
}

}  // namespace

ScoreModel ScoreModel::fitted_from_json(const nlohmann::json& j) {
  auto impl = std::make_shared<Impl>();
  impl->gamma = j.at("gamma").get<double>();
  impl->feature_omegas = matrix_from_json(j.at("features"));
  const auto& jp = j.at("phases");
  impl->feature_phases.resize(static_cast<Eigen::Index>(jp.size()));
  for (std::size_t i = 0; i < jp.size(); ++i)
    impl->feature_phases[static_cast<Eigen::Index>(i)] = jp[i].get<double>();
  impl->feature_weights = matrix_from_json(j.at("weights"));
  if (j.contains("linear_weights")) impl->linear_weights = matrix_from_json(j["linear_weights"]);
  impl->ridge = j.at("ridge").get<double>();
  impl->dim = static_cast<int>(impl->feature_weights.rows());

  ScoreModel model;
  model.kind_ = Kind::FittedDae;
  model.sigma_sq_ = j.at("sigma_sq").get<double>();
  if (model.sigma_sq_ <= 0)
    throw std::invalid_argument("fitted model: sigma_sq must be positive");
  model.lipschitz_bound_ =
      fitted_lipschitz_bound(impl->feature_omegas, impl->feature_weights, impl->linear_weights);
  model.impl_ = std::move(impl);
  return model;
}

ScoreModel fit_dae(const DensitySpec& spec, double sigma_sq, int train_n, const FitConfig& config,
                   std::uint64_t seed) {
  if (sigma_sq <= 0) throw std::invalid_argument("fit_dae: sigma_sq must be positive");
  if (train_n < 1) throw std::invalid_argument("fit_dae: train_n must be >= 1");
  if (config.feature_count < 0 || (config.feature_count == 0 && !config.include_linear))
    throw std::invalid_argument("fit_dae: empty feature map");
  if (config.ridge < 0) throw std::invalid_argument("fit_dae: ridge must be >= 0");

  const int d = spec.dim();
  const int F = config.feature_count;
  const int total_features = F + (config.include_linear ? d : 0);
  const double sigma = std::sqrt(sigma_sq);

  auto impl = std::make_shared<ScoreModel::Impl>();
  impl->dim = d;
  impl->gamma = config.gamma;
  impl->ridge = config.ridge;
  impl->feature_omegas.resize(F, d);
  impl->feature_phases.resize(F);
  auto feature_stream = rng::derive(seed, rng::Purpose::Features);
  for (int f = 0; f < F; ++f) {
    impl->feature_omegas.row(f) = feature_stream.normal_vector(d).transpose() / config.gamma;
    impl->feature_phases[f] = 2.0 * M_PI * feature_stream.next_unit();
  }

  const SampleBatch clean = spec.sample(train_n, seed);
  Eigen::MatrixXd phi(total_features, train_n);
  Eigen::MatrixXd targets(d, train_n);
  const double scale = F > 0 ? std::sqrt(2.0 / static_cast<double>(F)) : 0.0;
  for (int i = 0; i < train_n; ++i) {
    auto noise_stream = rng::derive(seed, rng::Purpose::FitData, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd xi = noise_stream.normal_vector(d);
    const Eigen::VectorXd x = clean.points.row(i).transpose();
    const Eigen::VectorXd y = x + sigma * xi;
    for (int f = 0; f < F; ++f)
      phi(f, i) = scale * std::cos(impl->feature_omegas.row(f).dot(y) + impl->feature_phases[f]);
    if (config.include_linear) phi.block(F, i, d, 1) = y;
    targets.col(i) = -xi / sigma;
  }

  const double s4 = sigma_sq * sigma_sq;
  Eigen::MatrixXd gram = s4 * (phi * phi.transpose());
  gram.diagonal().array() += config.ridge;
  const Eigen::MatrixXd rhs = s4 * (phi * targets.transpose());  // total_features x d

  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::MatrixXd solution = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !solution.allFinite() ||
      (gram * solution - rhs).cwiseAbs().maxCoeff() >
          1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff()))
    throw std::runtime_error("fit_dae: singular normal equations; set ridge > 0");

  const Eigen::MatrixXd W = solution.transpose();  // d x total_features
  impl->feature_weights = W.leftCols(F);
  if (config.include_linear) impl->linear_weights = W.rightCols(d);

  ScoreModel model;
  model.kind_ = ScoreModel::Kind::FittedDae;
  model.sigma_sq_ = sigma_sq;
  model.lipschitz_bound_ =
      fitted_lipschitz_bound(impl->feature_omegas, impl->feature_weights, impl->linear_weights);
  model.impl_ = std::move(impl);
  return model;
}

nlohmann::json LossEstimate::to_json() const {
  return {{"schema", 1}, {"value", value}, {"std_error", std_error}, {"n", n}};
}

namespace {

LossEstimate summarize(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  var = n > 1 ? var / (n - 1) : 0.0;
  return LossEstimate{mean, std::sqrt(var / n), n};
}

}  // namespace

LossEstimate dae_loss(const VectorField& r, const DensitySpec& spec, double sigma_sq, int n,
                      std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("dae_loss: n must be >= 2");
  if (sigma_sq <= 0) throw std::invalid_argument("dae_loss: sigma_sq must be positive");
  const int d = spec.dim();
  const double sigma = std::sqrt(sigma_sq);
  const SampleBatch clean = spec.sample(n, seed);
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) {
    auto stream = rng::derive(seed, rng::Purpose::LossEval, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd x = clean.points.row(i).transpose();
    const Eigen::VectorXd noisy = x + sigma * stream.normal_vector(d);
    const Eigen::VectorXd rec = r(noisy);
    if (!rec.allFinite()) throw std::domain_error("dae_loss: estimator produced non-finite output");
    values[i] = (rec - x).squaredNorm();
  }
  return summarize(values);
}

LossEstimate dsm_loss(const VectorField& s, const DensitySpec& spec, double sigma_sq, int n,
                      std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("dsm_loss: n must be >= 2");
  if (sigma_sq < 0) throw std::invalid_argument("dsm_loss: sigma_sq must be >= 0");
  const DensitySpec smoothed = spec.smooth(sigma_sq);
  const SampleBatch batch = smoothed.sample(n, seed);
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = batch.points.row(i).transpose();
    const Eigen::VectorXd est = s(x);
    if (!est.allFinite()) throw std::domain_error("dsm_loss: estimator produced non-finite output");
    values[i] = (est - smoothed.score(x)).squaredNorm();
  }
  return summarize(values);
}

EquivalenceGap equivalence_gap(const std::vector<VectorField>& r_handles,
                               const DensitySpec& spec, double sigma_sq, int n,
                               std::uint64_t seed) {
  if (r_handles.empty()) throw std::invalid_argument("equivalence_gap: no handles");
  if (n < 2) throw std::invalid_argument("equivalence_gap: n must be >= 2");
  if (sigma_sq <= 0) throw std::invalid_argument("equivalence_gap: sigma_sq must be positive");

  const int d = spec.dim();
  const double sigma = std::sqrt(sigma_sq);
  const DensitySpec smoothed = spec.smooth(sigma_sq);
  const SampleBatch clean = spec.sample(n, seed);
  const std::size_t K = r_handles.size();

  std::vector<std::vector<double>> per_handle(K, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    auto stream = rng::derive(seed, rng::Purpose::LossEval, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd x = clean.points.row(i).transpose();
    const Eigen::VectorXd y = x + sigma * stream.normal_vector(d);
    const Eigen::VectorXd target = smoothed.score(y);
    for (std::size_t k = 0; k < K; ++k) {
      const Eigen::VectorXd rec = r_handles[k](y);
      const Eigen::VectorXd s_val = (rec - y) / sigma_sq;
      per_handle[k][i] = (rec - x).squaredNorm() - sigma_sq * (s_val - target).squaredNorm();
    }
  }

  EquivalenceGap out;
  out.gaps.reserve(K);
  out.std_errors.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    const LossEstimate est = summarize(per_handle[k]);
    out.gaps.push_back(est.value);
    out.std_errors.push_back(est.std_error);
  }
  const auto [lo, hi] = std::minmax_element(out.gaps.begin(), out.gaps.end());
  out.spread = *hi - *lo;
  return out;
}

double rademacher_mc(const Eigen::MatrixXd& function_values, int trials, std::uint64_t seed) {
  const Eigen::Index n = function_values.rows();
  const Eigen::Index K = function_values.cols();
  if (n < 1 || K < 1) throw std::invalid_argument("rademacher_mc: need n >= 1 and K >= 1");
  if (trials < 1) throw std::invalid_argument("rademacher_mc: trials must be >= 1");

  double total = 0.0;
  Eigen::VectorXd signs(n);
  for (int t = 0; t < trials; ++t) {
    auto stream = rng::derive(seed, rng::Purpose::Rademacher, static_cast<std::uint64_t>(t));
    for (Eigen::Index i = 0; i < n; ++i) signs[i] = (stream.next_u64() & 1u) ? 1.0 : -1.0;
    total += (function_values.transpose() * signs).maxCoeff() / static_cast<double>(n);
  }
  return total / trials;
}

}  // namespace sgs
