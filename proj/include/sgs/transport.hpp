#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>

#include "sgs/density.hpp"

namespace sgs {

struct W2Estimate {
  enum class Method { ExactAssignment, GaussianClosedForm, Sliced };

  double value = 0.0;
  Method method = Method::ExactAssignment;
  int n_used = 0;
  std::optional<double> std_error;

  nlohmann::json to_json() const;
};

std::string to_string(W2Estimate::Method method);

// Plug-in W2 between equal-size batches: exact optimal matching under squared
// Euclidean cost.  d = 1 uses the sorting coupling; d >= 2 solves the
// assignment problem (n capped at 4096).
W2Estimate w2_exact(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

inline W2Estimate w2_exact(const SampleBatch& a, const SampleBatch& b) {
  return w2_exact(a.points, b.points);
}

// Closed form between N(mu1, S1) and N(mu2, S2).
W2Estimate w2_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& S1,
                       const Eigen::VectorXd& mu2, const Eigen::MatrixXd& S2);

// Average of squared 1-D distances over random unit directions; a
// lower-bound-flavored surrogate for large n, never a substitute where a
// result calls for w2_exact.
W2Estimate w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections,
                     std::uint64_t seed);

inline W2Estimate w2_sliced(const SampleBatch& a, const SampleBatch& b, int projections,
                            std::uint64_t seed) {
  return w2_sliced(a.points, b.points, projections, seed);
}

struct SmoothingGap {
  double measured = 0.0;
  double bound = 0.0;  // sigma * sqrt(d)
};

// Plug-in W2 between n draws of p and n draws of its smoothed version,
// against the sigma*sqrt(d) coupling bound.
SmoothingGap smoothing_gap_check(const DensitySpec& spec, double sigma_sq, int n,
                                 std::uint64_t seed, bool coupled = true);

// Exact optimal assignment (row i of a -> column match in b) used by w2_exact;
// exposed for tests.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace sgs
