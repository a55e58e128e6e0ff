#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sgs/density.hpp"
#include "sgs/rng.hpp"
#include "sgs/transport.hpp"

using namespace sgs;
using oracles::brute_force_w2;

namespace {

Eigen::MatrixXd random_batch(int n, int d, std::uint64_t seed) {
  auto stream = rng::derive(seed, rng::Purpose::SteinCheck, 999);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) m.row(i) = stream.normal_vector(d).transpose();
  return m;
}

}  // namespace

TEST_CASE("w2_exact on hand-checkable batches") {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 0.0, 1.0;
  b << 1.0, 2.0;
  CHECK(w2_exact(a, b).value == doctest::Approx(1.0).epsilon(1e-15));

  Eigen::MatrixXd c(2, 1), d(2, 1);
  c << 0.0, 10.0;
  d << 10.0, 0.0;
  CHECK(w2_exact(c, d).value == doctest::Approx(0.0).epsilon(1e-15));

  const Eigen::MatrixXd identical = random_batch(64, 3, 1);
  CHECK(w2_exact(identical, identical).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("w2_exact input validation") {
  const Eigen::MatrixXd a = random_batch(8, 2, 2);
  const Eigen::MatrixXd b = random_batch(9, 2, 3);
  CHECK_THROWS_AS(w2_exact(a, b), std::invalid_argument);
  const Eigen::MatrixXd c = random_batch(8, 3, 4);
  CHECK_THROWS_AS(w2_exact(a, c), std::invalid_argument);
  const Eigen::MatrixXd big_a = random_batch(4097, 2, 5);
  const Eigen::MatrixXd big_b = random_batch(4097, 2, 6);
  CHECK_THROWS_WITH_AS(w2_exact(big_a, big_b), doctest::Contains("w2_sliced"),
                       std::invalid_argument);
}

TEST_CASE("w2_exact matches brute-force permutation search on 50 random instances") {
  auto stream = rng::derive(123, rng::Purpose::SteinCheck);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(stream.next_u64() % 6);  // 2..7
    const int d = 1 + static_cast<int>(stream.next_u64() % 3);  // 1..3
    const Eigen::MatrixXd a = random_batch(n, d, 1000 + rep);
    const Eigen::MatrixXd b = random_batch(n, d, 2000 + rep);
    CHECK(w2_exact(a, b).value == doctest::Approx(brute_force_w2(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("w2_exact is a metric on equal-size batches") {
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 16;
    const int d = 2;
    const Eigen::MatrixXd a = random_batch(n, d, 10000 + rep);
    const Eigen::MatrixXd b = random_batch(n, d, 20000 + rep);
    const Eigen::MatrixXd c = random_batch(n, d, 30000 + rep);
    const double ab = w2_exact(a, b).value;
    const double ba = w2_exact(b, a).value;
    const double bc = w2_exact(b, c).value;
    const double ac = w2_exact(a, c).value;
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("w2_exact never exceeds the identity-matching cost") {
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd a = random_batch(32, 2, 500 + rep);
    const Eigen::MatrixXd b = random_batch(32, 2, 600 + rep);
    long double identity_cost = 0.0L;
    for (int i = 0; i < 32; ++i) identity_cost += (a.row(i) - b.row(i)).squaredNorm();
    const double w2 = w2_exact(a, b).value;
    CHECK(w2 * w2 <= static_cast<double>(identity_cost / 32) + 1e-12);
  }
}

TEST_CASE("w2_gaussian closed forms") {
  const Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  CHECK(w2_gaussian(mu0, one, mu0, 4.0 * one).value == doctest::Approx(1.0).epsilon(1e-12));

  const Eigen::VectorXd mu4 = Eigen::VectorXd::Zero(4);
  const Eigen::MatrixXd id4 = Eigen::MatrixXd::Identity(4, 4);
  CHECK(w2_gaussian(mu4, id4, mu4, 2.0 * id4).value ==
        doctest::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-12));

  Eigen::MatrixXd cov(2, 2);
  cov << 1.2, 0.4, 0.4, 0.9;
  Eigen::VectorXd mean(2);
  mean << 0.3, -1.1;
  CHECK(w2_gaussian(mean, cov, mean, cov).value < 1e-6);

  Eigen::MatrixXd not_psd(2, 2);
  not_psd << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(w2_gaussian(mean, not_psd, mean, cov), std::invalid_argument);
}

TEST_CASE("w2_gaussian agrees with the plug-in estimate for Gaussian batches") {
  // plug-in bias acknowledged; generous 10% tolerance at n = 512, 5-seed median
  Eigen::MatrixXd cov1(2, 2), cov2(2, 2);
  cov1 << 1.0, 0.2, 0.2, 0.7;
  cov2 << 1.5, -0.3, -0.3, 1.1;
  Eigen::VectorXd mu1(2), mu2(2);
  mu1 << 0.0, 0.0;
  mu2 << 1.5, -0.5;
  const auto spec1 = DensitySpec::gaussian(mu1, cov1);
  const auto spec2 = DensitySpec::gaussian(mu2, cov2);
  const double closed = w2_gaussian(mu1, cov1, mu2, cov2).value;

  std::vector<double> estimates;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = spec1.sample(512, seed);
    const auto b = spec2.sample(512, seed + 100);
    estimates.push_back(w2_exact(a, b).value);
  }
  std::sort(estimates.begin(), estimates.end());
  CHECK(std::abs(estimates[2] - closed) / closed <= 0.10);
}

TEST_CASE("w2_sliced basics") {
  const Eigen::MatrixXd a = random_batch(256, 3, 71);
  CHECK(w2_sliced(a, a, 32, 5).value == doctest::Approx(0.0).epsilon(1e-12));

  // d = 1: every direction reduces to the sorting coupling
  const Eigen::MatrixXd x = random_batch(128, 1, 72);
  const Eigen::MatrixXd y = random_batch(128, 1, 73);
  CHECK(w2_sliced(x, y, 8, 6).value == doctest::Approx(w2_exact(x, y).value).epsilon(1e-12));
}

TEST_CASE("w2_sliced matches the analytic projection average for shifted Gaussians") {
  const auto spec = DensitySpec::standard_normal(2);
  Eigen::VectorXd shift(2);
  shift << 3.0, 0.0;
  const auto a = spec.sample(10000, 21);
  Eigen::MatrixXd b = spec.sample(10000, 22).points;
  b.rowwise() += shift.transpose();
  // E[(u . shift)^2] = ||shift||^2 / d = 4.5, so the sliced value tends to 3/sqrt(2)
  const auto est = w2_sliced(a.points, b, 256, 7);
  CHECK(std::abs(est.value - 3.0 / std::sqrt(2.0)) / (3.0 / std::sqrt(2.0)) < 0.05);
}

TEST_CASE("sliced is dominated by the exact distance") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Eigen::MatrixXd a = random_batch(256, 2, 800 + seed);
    Eigen::MatrixXd b = random_batch(256, 2, 900 + seed);
    b.array() += 0.5;
    const auto sliced = w2_sliced(a, b, 128, seed);
    const auto exact = w2_exact(a, b);
    CHECK(sliced.value <= exact.value + 3.0 * *sliced.std_error);
  }
}

TEST_CASE("smoothing gap check") {
  const auto spec = DensitySpec::standard_normal(1);

  const auto zero = smoothing_gap_check(spec, 0.0, 256, 3, /*coupled=*/true);
  CHECK(zero.measured == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(zero.bound == 0.0);

  // true W2(N(0,1), N(0,2)) = sqrt(2) - 1 <= 1
  const auto gap = smoothing_gap_check(spec, 1.0, 512, 4, /*coupled=*/false);
  CHECK(gap.bound == doctest::Approx(1.0));
  const double true_w2 = std::sqrt(2.0) - 1.0;
  CHECK(gap.measured < 1.0);
  CHECK(gap.measured > 0.5 * true_w2);

  const auto spec4 = DensitySpec::standard_normal(4);
  const double true4 = w2_gaussian(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4),
                                   Eigen::VectorXd::Zero(4),
                                   1.25 * Eigen::MatrixXd::Identity(4, 4))
                           .value;
  CHECK(true4 == doctest::Approx(2.0 * (std::sqrt(1.25) - 1.0)).epsilon(1e-12));
  const auto gap4 = smoothing_gap_check(spec4, 0.25, 256, 5, /*coupled=*/true);
  CHECK(gap4.bound == doctest::Approx(1.0));
  CHECK(gap4.measured <= gap4.bound);
}

TEST_CASE("W2 estimate serializes with method names") {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 0.0, 1.0;
  b << 1.0, 2.0;
  const auto j = w2_exact(a, b).to_json();
  CHECK(j["method"] == "exact-assignment");
  CHECK(j["n"] == 2);
  CHECK(j["std_error"].is_null());
  const auto js = w2_sliced(a, b, 4, 1).to_json();
  CHECK(js["method"] == "sliced");
  CHECK(js["std_error"].is_number());
}
