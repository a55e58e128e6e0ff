#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

namespace sgs {

// A batch of d-dimensional points (one per row) with seed provenance.
struct SampleBatch {
  Eigen::MatrixXd points;  // n x d
  std::uint64_t seed = 0;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

void write_csv(const SampleBatch& batch, std::ostream& out);
void write_csv(const SampleBatch& batch, const std::string& path);
SampleBatch read_csv(std::istream& in);
SampleBatch read_csv_file(const std::string& path);

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Gaussian-mixture target density with closed-form score, Hessian, exact
// Gaussian smoothing and seeded sampling.  Immutable after construction;
// all methods are const and safe to call concurrently.
class DensitySpec {
 public:
  explicit DensitySpec(std::vector<GaussianComponent> components);

  static DensitySpec gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
  static DensitySpec standard_normal(int dim);

  int dim() const { return dim_; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd score(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd log_density_hessian(const Eigen::VectorXd& x) const;

  // Exact convolution with a centred Gaussian of variance sigma_sq.
  DensitySpec smooth(double sigma_sq) const;

  SampleBatch sample(int n, std::uint64_t seed) const;

  // Analytic E||X||^2 = sum_i w_i (||mu_i||^2 + tr Sigma_i).
  double mean_square_norm() const;

  // Upper envelope sum_i w_i (2 pi)^{-d/2} det(Sigma_i)^{-1/2}; exact for a
  // single Gaussian.
  double sup_density_bound() const;

  nlohmann::json to_json() const;
  static DensitySpec from_json(const nlohmann::json& j);

 private:
  struct ComponentCache {
    Eigen::MatrixXd chol_lower;
    Eigen::MatrixXd cov_inv;
    double log_norm = 0.0;  // -(d/2) log(2 pi) - (1/2) log det
  };

  void check_dim(const Eigen::VectorXd& x) const;
  // log w_i + log N(x; mu_i, Sigma_i) for each component
  Eigen::VectorXd component_log_terms(const Eigen::VectorXd& x) const;

  int dim_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<ComponentCache> cache_;
};

// Constants of the confinement/regularity assumptions, estimated on a grid.
// lipschitz_M is the M with score (M/2)-Lipschitz; (dissip_m, dissip_b) the
// dissipativity pair with a 1/2 safety factor on m; growth_B the offset in
// ||score(x)|| <= M||x|| + B; subgauss_C the tail constant with
// P(||X|| > R) <= subgauss_C * exp(-m R^2 / 4).
struct RegularityConstants {
  double lipschitz_M = 0.0;
  double dissip_m = 0.0;
  double dissip_b = 0.0;
  double growth_B = 0.0;
  double sigma_max_sq = 0.0;
  double subgauss_C = 0.0;

  nlohmann::json to_json() const;
  static RegularityConstants from_json(const nlohmann::json& j);
};

RegularityConstants estimate_constants(const DensitySpec& spec, double radius,
                                       int grid_points, double sigma_tilde_max_sq = 1.0);

// Upper bound on P(||X|| > R) implied by the estimated constants.
double subgaussian_tail_bound(const RegularityConstants& c, int dim, double radius);

// || E[g(xi) xi] - E[grad g(xi)] || over n standard-Gaussian draws.
double stein_identity_check(const std::function<double(const Eigen::VectorXd&)>& g,
                            const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_g,
                            int dim, int n, std::uint64_t seed);

// The fixed menu of synthetic targets used across experiments and tests.
std::vector<std::pair<std::string, DensitySpec>> density_zoo();

}  // namespace sgs
