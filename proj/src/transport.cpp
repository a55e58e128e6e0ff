#include "sgs/transport.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sgs/rng.hpp"

namespace sgs {

namespace {

constexpr int kExactCap = 4096;

double sorted_w2_sq(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double diff = static_cast<long double>(a[i]) - b[i];
    acc += diff * diff;
  }
  return static_cast<double>(acc / static_cast<long double>(a.size()));
}

}  // namespace

std::string to_string(W2Estimate::Method method) {
  switch (method) {
    case W2Estimate::Method::ExactAssignment: return "exact-assignment";
    case W2Estimate::Method::GaussianClosedForm: return "gaussian-closed-form";
    case W2Estimate::Method::Sliced: return "sliced";
  }
  return "unknown";
}

nlohmann::json W2Estimate::to_json() const {
  nlohmann::json j{{"schema", 1},
                   {"value", value},
                   {"method", to_string(method)},
                   {"n", n_used}};
  if (std_error)
    j["std_error"] = *std_error;
  else
    j["std_error"] = nullptr;
  return j;
}

// Shortest-augmenting-path assignment with dual potentials (exact optimum).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n, 0.0), v(n, 0.0), shortest(n, 0.0);
  std::vector<int> col4row(n, -1), row4col(n, -1), pred(n, -1), remaining(n), scanned_cols;
  std::vector<int> scanned_rows;

  for (int cur_row = 0; cur_row < n; ++cur_row) {
    std::fill(shortest.begin(), shortest.end(), inf);
    std::iota(remaining.begin(), remaining.end(), 0);
    int n_remaining = n;
    scanned_rows.clear();
    scanned_cols.clear();

    double min_val = 0.0;
    int i = cur_row;
    int sink = -1;
    while (sink == -1) {
      scanned_rows.push_back(i);
      int index = -1;
      double lowest = inf;
      for (int it = 0; it < n_remaining; ++it) {
        const int j = remaining[it];
        const double r = min_val + cost(i, j) - u[i] - v[j];
        if (r < shortest[j]) {
          shortest[j] = r;
          pred[j] = i;
        }
        if (shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == -1)) {
          lowest = shortest[j];
          index = it;
        }
      }
      min_val = lowest;
      if (index == -1 || min_val == inf)
        throw std::runtime_error("solve_assignment: infeasible cost matrix");
      const int j = remaining[index];
      if (row4col[j] == -1)
        sink = j;
      else
        i = row4col[j];
      scanned_cols.push_back(j);
      remaining[index] = remaining[--n_remaining];
    }

    u[cur_row] += min_val;
    for (const int row : scanned_rows)
      if (row != cur_row) u[row] += min_val - shortest[col4row[row]];
    for (const int j : scanned_cols) v[j] -= min_val - shortest[j];

    int j = sink;
    while (true) {
      const int row = pred[j];
      row4col[j] = row;
      std::swap(col4row[row], j);
      if (row == cur_row) break;
    }
  }
  return col4row;
}

W2Estimate w2_exact(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows())
    throw std::invalid_argument("w2_exact: batches must have equal size");
  if (a.cols() != b.cols())
    throw std::invalid_argument("w2_exact: batches must have equal dimension");
  const int n = static_cast<int>(a.rows());
  if (n < 1) throw std::invalid_argument("w2_exact: empty batches");

  W2Estimate est;
  est.method = W2Estimate::Method::ExactAssignment;
  est.n_used = n;

  if (a.cols() == 1) {
    std::vector<double> av(a.col(0).data(), a.col(0).data() + n);
    std::vector<double> bv(b.col(0).data(), b.col(0).data() + n);
    est.value = std::sqrt(sorted_w2_sq(std::move(av), std::move(bv)));
    return est;
  }

  if (n > kExactCap)
    throw std::invalid_argument(
        "w2_exact: batch size exceeds the exact-assignment cap (4096); use w2_sliced");

  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();

  const std::vector<int> match = solve_assignment(cost);
  long double acc = 0.0L;
  for (int i = 0; i < n; ++i) acc += static_cast<long double>(cost(i, match[i]));
  est.value = std::sqrt(static_cast<double>(acc / n));
  return est;
}

W2Estimate w2_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& S1,
                       const Eigen::VectorXd& mu2, const Eigen::MatrixXd& S2) {
  const auto check_psd = [](const Eigen::MatrixXd& S, const char* name) {
    if (S.rows() != S.cols()) throw std::invalid_argument(std::string(name) + ": not square");
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw std::invalid_argument(std::string(name) + ": not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
      throw std::invalid_argument(std::string(name) + ": not positive semi-definite");
  };
  check_psd(S1, "w2_gaussian: S1");
  check_psd(S2, "w2_gaussian: S2");
  if (mu1.size() != mu2.size() || S1.rows() != mu1.size() || S2.rows() != mu2.size())
    throw std::invalid_argument("w2_gaussian: dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(S2);
  const Eigen::VectorXd sqrt_eigs = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_S2 =
      es2.eigenvectors() * sqrt_eigs.asDiagonal() * es2.eigenvectors().transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_mid(sqrt_S2 * S1 * sqrt_S2);
  const double cross = es_mid.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double w2_sq =
      std::max(0.0, (mu1 - mu2).squaredNorm() + S1.trace() + S2.trace() - 2.0 * cross);

  W2Estimate est;
  est.method = W2Estimate::Method::GaussianClosedForm;
  est.n_used = 0;
  est.value = std::sqrt(w2_sq);
  return est;
}

W2Estimate w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections,
                     std::uint64_t seed) {
  if (a.rows() != b.rows())
    throw std::invalid_argument("w2_sliced: batches must have equal size");
  if (a.cols() != b.cols())
    throw std::invalid_argument("w2_sliced: batches must have equal dimension");
  if (projections < 1) throw std::invalid_argument("w2_sliced: projections must be >= 1");
  const int n = static_cast<int>(a.rows());
  const int d = static_cast<int>(a.cols());

  std::vector<double> per_direction(projections);
  for (int p = 0; p < projections; ++p) {
    auto stream = rng::derive(seed, rng::Purpose::SlicedDirections, static_cast<std::uint64_t>(p));
    Eigen::VectorXd dir = stream.normal_vector(d);
    const double norm = dir.norm();
    dir = norm > 0 ? Eigen::VectorXd(dir / norm) : Eigen::VectorXd::Unit(d, 0);
    std::vector<double> pa(n), pb(n);
    for (int i = 0; i < n; ++i) {
      pa[i] = a.row(i).dot(dir);
      pb[i] = b.row(i).dot(dir);
    }
    per_direction[p] = sorted_w2_sq(std::move(pa), std::move(pb));
  }

  double mean_sq = 0.0;
  for (const double w : per_direction) mean_sq += w;
  mean_sq /= projections;
  double var = 0.0;
  for (const double w : per_direction) var += (w - mean_sq) * (w - mean_sq);
  var = projections > 1 ? var / (projections - 1) : 0.0;
  const double se_mean_sq = std::sqrt(var / projections);

  W2Estimate est;
  est.method = W2Estimate::Method::Sliced;
  est.n_used = n;
  est.value = std::sqrt(mean_sq);
  est.std_error = est.value > 0 ? se_mean_sq / (2.0 * est.value) : 0.0;
  return est;
}

SmoothingGap smoothing_gap_check(const DensitySpec& spec, double sigma_sq, int n,
                                 std::uint64_t seed, bool coupled) {
  if (sigma_sq < 0) throw std::invalid_argument("smoothing_gap_check: sigma_sq >= 0 required");
  const int d = spec.dim();

  SampleBatch base, smoothed;
  if (coupled) {
    // Common-draw coupling: each pair shares the component choice and the
    // underlying Gaussian draw, so the plug-in tracks the population W2
    // instead of the independent-cloud matching floor.
    base = spec.sample(n, seed);
    smoothed.seed = seed;
    smoothed.points.resize(n, d);
    const DensitySpec wide = spec.smooth(sigma_sq);
    std::vector<Eigen::LLT<Eigen::MatrixXd>> base_chol, wide_chol;
    for (std::size_t k = 0; k < spec.components().size(); ++k) {
      base_chol.emplace_back(spec.components()[k].cov);
      wide_chol.emplace_back(wide.components()[k].cov);
    }
    std::vector<double> cumulative(spec.components().size());
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.components().size(); ++k) {
      acc += spec.components()[k].weight;
      cumulative[k] = acc;
    }
    for (int i = 0; i < n; ++i) {
      // mirrors DensitySpec::sample so row i of `base` reuses this draw
      auto stream = rng::derive(seed, rng::Purpose::DensitySample, static_cast<std::uint64_t>(i));
      const double u = stream.next_unit();
      std::size_t k = 0;
      while (k + 1 < cumulative.size() && u > cumulative[k]) ++k;
      const Eigen::VectorXd z = stream.normal_vector(d);
      smoothed.points.row(i) =
          (wide.components()[k].mean + Eigen::MatrixXd(wide_chol[k].matrixL()) * z).transpose();
    }
  } else {
    base = spec.sample(n, seed);
    smoothed = spec.smooth(sigma_sq).sample(n, rng::mix64(seed ^ rng::kGolden));
  }

  SmoothingGap gap;
  gap.measured = w2_exact(base, smoothed).value;
  gap.bound = std::sqrt(sigma_sq) * std::sqrt(static_cast<double>(d));
  return gap;
}

}  // namespace sgs
