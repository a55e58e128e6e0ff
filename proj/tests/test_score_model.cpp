#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <json.hpp>

#include "sgs/density.hpp"
#include "sgs/rng.hpp"
#include "sgs/score_model.hpp"

using namespace sgs;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

const VectorField identity_field = [](const Eigen::VectorXd& x) { return x; };
const VectorField zero_field = [](const Eigen::VectorXd& x) {
  return Eigen::VectorXd::Zero(x.size()).eval();
};
const VectorField half_field = [](const Eigen::VectorXd& x) { return (0.5 * x).eval(); };

}  // namespace

TEST_CASE("dae_loss closed-form values on the standard normal") {
  const auto spec = DensitySpec::standard_normal(1);
  const int n = 100000;

  const auto id_loss = dae_loss(identity_field, spec, 1.0, n, 1);
  CHECK(std::abs(id_loss.value - 1.0) < 3.0 * id_loss.std_error);

  const auto zero_loss = dae_loss(zero_field, spec, 1.0, n, 2);
  CHECK(std::abs(zero_loss.value - 1.0) < 3.0 * zero_loss.std_error);

  // optimal DAE for N(0,1) at sigma^2 = 1 is x/2, with population loss 1/2
  const auto half_loss = dae_loss(half_field, spec, 1.0, n, 3);
  CHECK(std::abs(half_loss.value - 0.5) < 3.0 * half_loss.std_error);

  CHECK_THROWS_AS(dae_loss(identity_field, spec, 0.0, n, 1), std::invalid_argument);
  CHECK_THROWS_AS(dae_loss(identity_field, spec, 1.0, 1, 1), std::invalid_argument);
  const VectorField bad = [](const Eigen::VectorXd& x) {
    return (x / 0.0).eval();
  };
  CHECK_THROWS_AS(dae_loss(bad, spec, 1.0, 10, 1), std::domain_error);
}

TEST_CASE("dsm_loss closed-form values") {
  const auto spec = DensitySpec::standard_normal(1);
  const int n = 100000;

  const DensitySpec smoothed = spec.smooth(1.0);
  const VectorField oracle = [&](const Eigen::VectorXd& x) { return smoothed.score(x); };
  const auto zero_exact = dsm_loss(oracle, spec, 1.0, n, 4);
  CHECK(zero_exact.value == 0.0);
  CHECK(zero_exact.std_error == 0.0);

  const auto zero_loss = dsm_loss(zero_field, spec, 1.0, n, 5);
  CHECK(std::abs(zero_loss.value - 0.5) < 3.0 * zero_loss.std_error);

  // s(x) = -x against N(0,2) directly (sigma^2 = 0)
  const auto wide = DensitySpec::gaussian(Eigen::VectorXd::Zero(1),
                                          2.0 * Eigen::MatrixXd::Identity(1, 1));
  const VectorField neg = [](const Eigen::VectorXd& x) { return (-x).eval(); };
  const auto neg_loss = dsm_loss(neg, wide, 0.0, n, 6);
  CHECK(std::abs(neg_loss.value - 0.5) < 3.0 * neg_loss.std_error);
}

TEST_CASE("equivalence gap is constant across DAE handles under common random numbers") {
  const auto spec = DensitySpec::standard_normal(1);
  const int n = 100000;

  const auto result = equivalence_gap({identity_field, zero_field, half_field}, spec, 1.0, n, 7);
  const double max_se = *std::max_element(result.std_errors.begin(), result.std_errors.end());
  CHECK(result.spread <= 5.0 * max_se);
  // the shared constant is E||eps||^2 - sigma^2 E||grad log p_sigma||^2 = 1/2
  for (const double gap : result.gaps) CHECK(std::abs(gap - 0.5) < 5.0 * max_se);

  const auto single = equivalence_gap({identity_field}, spec, 1.0, 1000, 8);
  CHECK(single.spread == 0.0);

  const VectorField shift = [](const Eigen::VectorXd& x) {
    return (x + Eigen::VectorXd::Ones(x.size())).eval();
  };
  const auto shifted = equivalence_gap({identity_field, shift}, spec, 1.0, n, 9);
  const double band = 5.0 * *std::max_element(shifted.std_errors.begin(),
                                              shifted.std_errors.end());
  CHECK(shifted.spread <= band);
  CHECK(std::abs(shifted.gaps[1] - 0.5) < band);
}

TEST_CASE("fit_dae with the linear feature recovers the optimal DAE of the standard normal") {
  const auto spec = DensitySpec::standard_normal(1);
  FitConfig config;
  config.feature_count = 0;
  config.include_linear = true;
  config.ridge = 1e-8;
  const auto model = fit_dae(spec, 1.0, 10000, config, 11);
  // Tweedie closed form: s(x) = -x/2
  const double coefficient = model.evaluate(vec1(1.0))[0];
  CHECK(std::abs(coefficient - (-0.5)) / 0.5 <= 0.05);
  CHECK(model.sigma_sq() == 1.0);
  CHECK(model.kind() == ScoreModel::Kind::FittedDae);
  CHECK(std::isfinite(model.lipschitz_bound()));
}

TEST_CASE("fit_dae is reproducible and rejects degenerate problems") {
  const auto spec = DensitySpec::standard_normal(1);
  FitConfig config;
  config.feature_count = 8;
  config.gamma = 1.5;
  config.ridge = 1e-6;
  const auto a = fit_dae(spec, 0.5, 500, config, 21);
  const auto b = fit_dae(spec, 0.5, 500, config, 21);
  for (double x : {-1.7, 0.0, 0.4, 2.2})
    CHECK(a.evaluate(vec1(x))[0] == b.evaluate(vec1(x))[0]);

  CHECK_THROWS_AS(fit_dae(spec, 0.0, 100, config, 1), std::invalid_argument);
  FitConfig empty;
  empty.feature_count = 0;
  empty.include_linear = false;
  CHECK_THROWS_AS(fit_dae(spec, 1.0, 100, empty, 1), std::invalid_argument);

  // duplicated features with no ridge: singular normal equations
  FitConfig degenerate;
  degenerate.feature_count = 64;
  degenerate.ridge = 0.0;
  CHECK_THROWS_AS(fit_dae(spec, 1.0, 16, degenerate, 1), std::runtime_error);
}

TEST_CASE("closed-form solve matches an independent gradient-descent solver") {
  const auto spec = DensitySpec::standard_normal(1);
  const double sigma_sq = 1.0;
  const int train_n = 100;
  FitConfig config;
  config.feature_count = 8;
  config.gamma = 2.0;
  config.ridge = 0.05;  // keeps the normal equations well conditioned for plain GD
  const std::uint64_t seed = 33;
  const auto model = fit_dae(spec, sigma_sq, train_n, config, seed);

  // rebuild the training problem exactly as fit_dae sees it
  const int F = config.feature_count;
  Eigen::MatrixXd omegas(F, 1);
  Eigen::VectorXd phases(F);
  auto feature_stream = rng::derive(seed, rng::Purpose::Features);
  for (int f = 0; f < F; ++f) {
    omegas.row(f) = feature_stream.normal_vector(1).transpose() / config.gamma;
    phases[f] = 2.0 * M_PI * feature_stream.next_unit();
  }
  const auto clean = spec.sample(train_n, seed);
  const double sigma = std::sqrt(sigma_sq);
  Eigen::MatrixXd phi(F, train_n);
  Eigen::MatrixXd targets(1, train_n);
  const double scale = std::sqrt(2.0 / F);
  for (int i = 0; i < train_n; ++i) {
    auto noise = rng::derive(seed, rng::Purpose::FitData, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd xi = noise.normal_vector(1);
    const double y = clean.points(i, 0) + sigma * xi[0];
    for (int f = 0; f < F; ++f) phi(f, i) = scale * std::cos(omegas(f, 0) * y + phases[f]);
    targets(0, i) = -xi[0] / sigma;
  }

  // gradient descent on sigma^4 ||W phi - T||^2 + ridge ||W||^2
  const double s4 = sigma_sq * sigma_sq;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(1, F);
  const Eigen::MatrixXd gram = s4 * (phi * phi.transpose());
  const double lips = 2.0 * (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram)
                                 .eigenvalues()
                                 .maxCoeff() +
                             config.ridge);
  for (int iter = 0; iter < 200000; ++iter) {
    const Eigen::MatrixXd grad =
        2.0 * (W * gram - s4 * targets * phi.transpose()) + 2.0 * config.ridge * W;
    W -= grad / lips;
    if (grad.cwiseAbs().maxCoeff() < 1e-13) break;
  }

  for (double x : {-2.0, -0.5, 0.0, 0.8, 1.9}) {
    Eigen::VectorXd feats(F);
    for (int f = 0; f < F; ++f) feats[f] = scale * std::cos(omegas(f, 0) * x + phases[f]);
    const double gd_value = (W * feats)(0, 0);
    CHECK(std::abs(model.evaluate(vec1(x))[0] - gd_value) < 1e-6);
  }
}

TEST_CASE("held-out DSM loss is non-increasing in the training-set size") {
  const auto spec = DensitySpec::standard_normal(1);
  FitConfig config;
  config.feature_count = 32;
  config.gamma = 2.0;
  config.include_linear = false;
  config.ridge = 1e-4;

  const std::vector<int> sizes = {1000, 10000, 100000};
  std::vector<std::vector<double>> losses(sizes.size());
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const auto model = fit_dae(spec, 1.0, sizes[k], config, seed);
      const VectorField s = [&](const Eigen::VectorXd& x) { return model.evaluate(x); };
      losses[k].push_back(dsm_loss(s, spec, 1.0, 20000, 777).value);
    }
  }

  const auto mean_and_se = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= v.size();
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    var /= (v.size() - 1);
    return std::pair<double, double>(mean, std::sqrt(var / v.size()));
  };

  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const auto [small_mean, small_se] = mean_and_se(losses[k]);
    const auto [big_mean, big_se] = mean_and_se(losses[k + 1]);
    CHECK(big_mean <= small_mean + 2.0 * std::sqrt(small_se * small_se + big_se * big_se));
  }
}

TEST_CASE("ridge shrinkage limit sends the fitted score to zero") {
  const auto spec = DensitySpec::standard_normal(1);
  FitConfig config;
  config.feature_count = 16;
  config.ridge = 1e12;
  const auto model = fit_dae(spec, 1.0, 2000, config, 5);
  CHECK(std::abs(model.evaluate(vec1(1.3))[0]) < 1e-6);

  const VectorField s = [&](const Eigen::VectorXd& x) { return model.evaluate(x); };
  const auto loss = dsm_loss(s, spec, 1.0, 50000, 6);
  // E||grad log p_2||^2 = 1/2
  CHECK(std::abs(loss.value - 0.5) < 3.0 * loss.std_error);
}

TEST_CASE("optimal DAE beats random linear perturbations of itself") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.8;
  Eigen::VectorXd mean(2);
  mean << 0.5, -0.2;
  const auto spec = DensitySpec::gaussian(mean, cov);
  const double sigma_sq = 0.5;
  const DensitySpec smoothed = spec.smooth(sigma_sq);
  const VectorField optimal = [&](const Eigen::VectorXd& x) {
    return (x + sigma_sq * smoothed.score(x)).eval();
  };

  const int n = 20000;
  const double sigma = std::sqrt(sigma_sq);
  auto stream = rng::derive(99, rng::Purpose::SteinCheck);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::MatrixXd A(2, 2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) A(r, c) = 0.05 * stream.next_normal();
    const Eigen::VectorXd shift = 0.05 * stream.normal_vector(2);

    // paired per-sample loss difference on shared (X, eps) draws
    const std::uint64_t seed = 4000 + rep;
    const auto clean = spec.sample(n, seed);
    double mean_diff = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      auto noise = rng::derive(seed, rng::Purpose::LossEval, static_cast<std::uint64_t>(i));
      const Eigen::VectorXd x = clean.points.row(i).transpose();
      const Eigen::VectorXd y = x + sigma * noise.normal_vector(2);
      const double base = (optimal(y) - x).squaredNorm();
      const double worse = (optimal(y) + A * y + shift - x).squaredNorm();
      const double diff = worse - base;
      const double delta = diff - mean_diff;
      mean_diff += delta / (i + 1);
      m2 += delta * (diff - mean_diff);
    }
    const double se = std::sqrt(m2 / (n - 1) / n);
    CHECK(mean_diff > 3.0 * se);
  }
}

TEST_CASE("perturbed oracle calibration") {
  const auto spec = DensitySpec::standard_normal(1);
  const double sigma_sq = 0.25;
  const DensitySpec smoothed = spec.smooth(sigma_sq);

  const auto exact = ScoreModel::perturbed_oracle(spec, sigma_sq, 0.0, 1);
  for (double x : {-2.0, 0.0, 1.5})
    CHECK(exact.evaluate(vec1(x))[0] == doctest::Approx(smoothed.score(vec1(x))[0]));

  const int n = 100000;
  for (const double epsilon : {0.01, 0.1, 1.0}) {
    CAPTURE(epsilon);
    const auto model = ScoreModel::perturbed_oracle(spec, sigma_sq, epsilon, 2);
    const auto fresh = smoothed.sample(n, 555);
    double mean_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = fresh.points.row(i).transpose();
      mean_sq += (model.evaluate(x) - smoothed.score(x)).squaredNorm();
    }
    const double rms = std::sqrt(mean_sq / n);
    CHECK(std::abs(rms - epsilon) / epsilon <= 0.01);
  }

  // different seeds give different fields with the same calibrated size
  const auto m1 = ScoreModel::perturbed_oracle(spec, sigma_sq, 0.1, 10);
  const auto m2 = ScoreModel::perturbed_oracle(spec, sigma_sq, 0.1, 11);
  CHECK(m1.evaluate(vec1(0.7))[0] != m2.evaluate(vec1(0.7))[0]);
}

TEST_CASE("rademacher_mc") {
  // constant function: signs average out
  const int n = 4096;
  Eigen::MatrixXd constant(n, 1);
  constant.setConstant(3.0);
  const double est = rademacher_mc(constant, 64, 1);
  CHECK(std::abs(est) < 3.0 * 3.0 / std::sqrt(static_cast<double>(n) * 64));

  Eigen::MatrixXd ones(n, 1);
  ones.setOnes();
  CHECK(std::abs(rademacher_mc(ones, 64, 2)) <
        3.0 / std::sqrt(static_cast<double>(n) * 64));

  // n = 2, K = 2: exact value 1/2 by enumerating all four sign vectors
  Eigen::MatrixXd tiny(2, 2);
  tiny << 1.0, 1.0, 1.0, -1.0;
  const double mc = rademacher_mc(tiny, 20000, 3);
  double exact_value = 0.0;
  for (int mask = 0; mask < 4; ++mask) {
    const double e0 = (mask & 1) ? 1.0 : -1.0;
    const double e1 = (mask & 2) ? 1.0 : -1.0;
    exact_value += std::max((e0 * tiny(0, 0) + e1 * tiny(1, 0)) / 2.0,
                            (e0 * tiny(0, 1) + e1 * tiny(1, 1)) / 2.0);
  }
  exact_value /= 4.0;
  CHECK(exact_value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(mc - exact_value) < 0.02);
}

TEST_CASE("fitted model JSON round trip") {
  const auto spec = DensitySpec::standard_normal(2);
  FitConfig config;
  config.feature_count = 12;
  config.gamma = 1.3;
  config.include_linear = true;
  config.ridge = 1e-5;
  const auto model = fit_dae(spec, 0.5, 2000, config, 77);
  const auto j = model.to_json();
  CHECK(j["sigma_sq"] == 0.5);
  CHECK(j["schema"] == 1);
  const auto back = ScoreModel::fitted_from_json(j);
  Eigen::VectorXd x(2);
  x << 0.3, -1.2;
  CHECK((back.evaluate(x) - model.evaluate(x)).norm() == 0.0);
  CHECK(back.lipschitz_bound() == doctest::Approx(model.lipschitz_bound()).epsilon(1e-12));

  const auto oracle = ScoreModel::oracle(spec, 0.5);
  CHECK_THROWS_AS(oracle.to_json(), std::invalid_argument);
}
