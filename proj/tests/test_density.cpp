#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "sgs/density.hpp"
#include "sgs/rng.hpp"

using namespace sgs;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

DensitySpec bimodal(double mu) {
  const Eigen::MatrixXd unit = Eigen::MatrixXd::Identity(1, 1);
  return DensitySpec({{0.5, vec1(-mu), unit}, {0.5, vec1(mu), unit}});
}

}  // namespace

TEST_CASE("log_density of the standard normal") {
  const auto spec = DensitySpec::standard_normal(1);
  CHECK(spec.log_density(vec1(0.0)) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
  CHECK(spec.log_density(vec1(2.0)) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI) - 2.0).epsilon(1e-12));
}

TEST_CASE("log_density of a symmetric two-component mixture") {
  const auto spec = bimodal(3.0);
  // direct evaluation of the two-component sum
  const double phi3 = std::exp(-4.5) / std::sqrt(2.0 * M_PI);
  const double expected = std::log(phi3);  // both components contribute phi(3)/2 + phi(-3)/2
  CHECK(spec.log_density(vec1(0.0)) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(spec.log_density(vec1(0.0)) == doctest::Approx(-5.4189385332).epsilon(1e-9));
}

TEST_CASE("log_density rejects dimension mismatch") {
  const auto spec = DensitySpec::standard_normal(2);
  CHECK_THROWS_AS(spec.log_density(vec1(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(spec.score(vec1(0.0)), std::invalid_argument);
}

TEST_CASE("score closed forms") {
  const auto spec = DensitySpec::standard_normal(1);
  CHECK(spec.score(vec1(0.5))[0] == doctest::Approx(-0.5).epsilon(1e-12));

  CHECK(bimodal(3.0).score(vec1(0.0))[0] == doctest::Approx(0.0).epsilon(1e-12));

  const auto spec3 = DensitySpec::standard_normal(3);
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  CHECK((spec3.score(x) + x).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("score equals the finite-difference gradient of log_density") {
  const auto zoo = density_zoo();
  auto stream = rng::derive(7, rng::Purpose::SteinCheck);
  for (const auto& [name, spec] : zoo) {
    CAPTURE(name);
    const int checks = 100 / static_cast<int>(zoo.size()) + 10;
    for (int rep = 0; rep < checks; ++rep) {
      const Eigen::VectorXd x = 2.5 * stream.normal_vector(spec.dim());
      const Eigen::VectorXd analytic = spec.score(x);
      Eigen::VectorXd numeric(spec.dim());
      const double h = 1e-4;
      for (int i = 0; i < spec.dim(); ++i) {
        Eigen::VectorXd hi = x, lo = x;
        hi[i] += h;
        lo[i] -= h;
        numeric[i] = (spec.log_density(hi) - spec.log_density(lo)) / (2.0 * h);
      }
      CHECK((analytic - numeric).norm() <= 1e-5 * std::max(1.0, analytic.norm()));
    }
  }
}

TEST_CASE("smooth adds variance exactly and composes additively") {
  const auto spec = DensitySpec::standard_normal(1);
  const auto smoothed = spec.smooth(1.0);
  CHECK(smoothed.components()[0].cov(0, 0) == doctest::Approx(2.0).epsilon(1e-15));

  const auto mix = bimodal(3.0).smooth(0.5);
  CHECK(mix.components()[0].cov(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(mix.components()[1].cov(0, 0) == doctest::Approx(1.5).epsilon(1e-15));

  const auto two_step = bimodal(3.0).smooth(0.3).smooth(0.7);
  const auto one_step = bimodal(3.0).smooth(1.0);
  CHECK((two_step.components()[0].cov - one_step.components()[0].cov).norm() == 0.0);

  const auto same = spec.smooth(0.0);
  CHECK((same.components()[0].cov - spec.components()[0].cov).norm() == 0.0);

  CHECK_THROWS_AS(spec.smooth(-0.1), std::invalid_argument);
}

TEST_CASE("sampling moments and determinism") {
  const int n = 100000;
  const auto spec = DensitySpec::standard_normal(1);
  const auto batch = spec.sample(n, 42);
  CHECK(std::abs(batch.points.col(0).mean()) < 3.0 / std::sqrt(static_cast<double>(n)));

  const auto spec2 = DensitySpec::gaussian(Eigen::VectorXd::Zero(2),
                                           2.0 * Eigen::MatrixXd::Identity(2, 2));
  const auto batch2 = spec2.sample(n, 43);
  const Eigen::MatrixXd centered = batch2.points.rowwise() - batch2.points.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  CHECK((cov - 2.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.1);

  const auto again = spec.sample(n, 42);
  CHECK((again.points - batch.points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("estimate_constants on single Gaussians") {
  const auto std_normal = DensitySpec::standard_normal(1);
  const auto c = estimate_constants(std_normal, 10.0, 10000);
  CHECK(c.lipschitz_M == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(c.dissip_m == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(c.dissip_b == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(c.growth_B == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(c.sigma_max_sq == doctest::Approx(0.125).epsilon(1e-9));

  const auto wide = DensitySpec::gaussian(Eigen::VectorXd::Zero(1),
                                          4.0 * Eigen::MatrixXd::Identity(1, 1));
  const auto cw = estimate_constants(wide, 15.0, 10000);
  CHECK(cw.lipschitz_M == doctest::Approx(0.5).epsilon(1e-9));

  // constant Hessian: M/2 equals the largest eigenvalue of the precision
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  const auto aniso = DensitySpec::gaussian(Eigen::VectorXd::Zero(2), cov);
  const auto ca = estimate_constants(aniso, 12.0, 10000);
  const double precision_max =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov.inverse()).eigenvalues().maxCoeff();
  CHECK(ca.lipschitz_M == doctest::Approx(2.0 * precision_max).epsilon(1e-9));
}

TEST_CASE("estimate_constants rejects bad grids and radii") {
  const auto spec = DensitySpec::standard_normal(1);
  CHECK_THROWS_AS(estimate_constants(spec, 10.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(estimate_constants(spec, 1.0, 100), std::invalid_argument);  // mass not covered
  CHECK_THROWS_AS(estimate_constants(spec, -1.0, 100), std::invalid_argument);
}

TEST_CASE("estimate_constants on the two-mode mixture matches a dense 1-D grid oracle") {
  const auto spec = bimodal(3.0);
  const auto c = estimate_constants(spec, 10.0, 10000);

  // independent dense evaluation of <-score(x), x>/||x||^2 at the boundary
  double shell_min = std::numeric_limits<double>::infinity();
  for (const double x : {-10.0, 10.0})
    shell_min = std::min(shell_min, -spec.score(vec1(x))[0] * x / (x * x));
  CHECK(c.dissip_m == doctest::Approx(0.5 * shell_min).epsilon(1e-12));

  double b_oracle = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = -10.0 + 20.0 * i / 10000.0;
    if (x == 0.0) continue;
    b_oracle = std::max(b_oracle, c.dissip_m * x * x + spec.score(vec1(x))[0] * x);
  }
  CHECK(c.dissip_b == doctest::Approx(b_oracle).epsilon(1e-3));
  CHECK(c.dissip_b > 0.0);
}

namespace {

double zoo_scale(const DensitySpec& spec) {
  double max_std = 0.0, max_mean = 0.0;
  for (const auto& c : spec.components()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov, Eigen::EigenvaluesOnly);
    max_std = std::max(max_std, std::sqrt(es.eigenvalues().maxCoeff()));
    max_mean = std::max(max_mean, c.mean.norm());
  }
  return max_std + max_mean;
}

int zoo_grid_points(int dim) {
  switch (dim) {
    case 1: return 4001;
    case 2: return 4096;
    default: return 6561;
  }
}

}  // namespace

TEST_CASE("sub-Gaussian tail bound holds empirically across the zoo") {
  const int n = 100000;
  for (const auto& [name, spec] : density_zoo()) {
    CAPTURE(name);
    const double scale = zoo_scale(spec);
    const double radius = 8.0 * scale;
    const auto c = estimate_constants(spec, radius, zoo_grid_points(spec.dim()));
    const auto batch = spec.sample(n, 11);
    for (const double mult : {2.0, 4.0, 6.0}) {
      const double R = mult * scale;
      int outside = 0;
      for (int i = 0; i < n; ++i)
        if (batch.points.row(i).norm() > R) ++outside;
      const double fraction = static_cast<double>(outside) / n;
      const double bound = c.subgauss_C * std::exp(-0.25 * c.dissip_m * R * R);
      CAPTURE(R);
      CHECK(fraction <= bound);
      CHECK(subgaussian_tail_bound(c, spec.dim(), R) <= bound + 1e-12);
    }
  }
}

TEST_CASE("stein identity residuals vanish") {
  const int n = 100000;
  const double band = 3.0 / std::sqrt(static_cast<double>(n));

  const auto id = [](const Eigen::VectorXd& x) { return x[0]; };
  const auto one = [](const Eigen::VectorXd& x) {
    (void)x;
    return Eigen::VectorXd::Ones(1).eval();
  };
  CHECK(stein_identity_check(id, one, 1, n, 5) < band);

  const auto sq = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
  const auto two_x = [](const Eigen::VectorXd& x) { return (2.0 * x).eval(); };
  CHECK(stein_identity_check(sq, two_x, 1, n, 6) < 3.0 * band);

  const auto sin_g = [](const Eigen::VectorXd& x) { return std::sin(x[0]); };
  const auto cos_g = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(1);
    g << std::cos(x[0]);
    return g;
  };
  CHECK(stein_identity_check(sin_g, cos_g, 1, n, 7) < 3.0 * band);
}

TEST_CASE("density JSON round trip") {
  const auto spec = bimodal(3.0);
  const auto j = spec.to_json();
  const auto back = DensitySpec::from_json(j);
  CHECK(back.dim() == spec.dim());
  CHECK(back.log_density(vec1(0.7)) == doctest::Approx(spec.log_density(vec1(0.7))).epsilon(1e-15));
}

TEST_CASE("sample batch CSV round trip") {
  const auto batch = DensitySpec::standard_normal(3).sample(17, 9);
  std::stringstream ss;
  write_csv(batch, ss);
  CHECK(ss.str().substr(0, 9) == "x0,x1,x2\n");
  const auto back = read_csv(ss);
  CHECK(back.points.rows() == 17);
  CHECK((back.points - batch.points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("invalid specs are rejected") {
  const Eigen::MatrixXd unit = Eigen::MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(DensitySpec({{0.6, vec1(0), unit}, {0.6, vec1(1), unit}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(DensitySpec({{-0.2, vec1(0), unit}, {1.2, vec1(1), unit}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(DensitySpec({{1.0, vec1(0), -unit}}), std::invalid_argument);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.1, 1.0;
  CHECK_THROWS_AS(DensitySpec({{1.0, Eigen::VectorXd::Zero(2), asym}}), std::invalid_argument);
}
