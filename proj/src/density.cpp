#include "sgs/density.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sgs/rng.hpp"

namespace sgs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

// Chernoff bound for P(chi^2_d > s), s > d; 1 otherwise.
double chi_square_tail(int d, double s) {
  if (s <= d) return 1.0;
  return std::exp(0.5 * (d - s) + 0.5 * d * std::log(s / d));
}

}  // namespace

DensitySpec::DensitySpec(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("DensitySpec: no components");
  dim_ = static_cast<int>(components_[0].mean.size());
  if (dim_ <= 0) throw std::invalid_argument("DensitySpec: dim must be positive");

  double weight_sum = 0.0;
  for (const auto& c : components_) {
    if (c.weight < 0) throw std::invalid_argument("DensitySpec: negative weight");
    weight_sum += c.weight;
    if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_)
      throw std::invalid_argument("DensitySpec: component dimension mismatch");
    if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("DensitySpec: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0)
      throw std::invalid_argument("DensitySpec: covariance not positive definite");
  }
  if (std::abs(weight_sum - 1.0) > 1e-12)
    throw std::invalid_argument("DensitySpec: weights must sum to 1");

  cache_.reserve(components_.size());
  for (const auto& c : components_) {
    Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("DensitySpec: covariance factorization failed");
    ComponentCache cc;
    cc.chol_lower = llt.matrixL();
    cc.cov_inv = llt.solve(Eigen::MatrixXd::Identity(dim_, dim_));
    double log_det = 0.0;
    for (int i = 0; i < dim_; ++i) log_det += 2.0 * std::log(cc.chol_lower(i, i));
    cc.log_norm = -0.5 * (dim_ * kLog2Pi + log_det);
    cache_.push_back(std::move(cc));
  }
}

DensitySpec DensitySpec::gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  return DensitySpec({GaussianComponent{1.0, mean, cov}});
}

DensitySpec DensitySpec::standard_normal(int dim) {
  return gaussian(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim));
}

void DensitySpec::check_dim(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::invalid_argument("DensitySpec: input dimension mismatch");
}

Eigen::VectorXd DensitySpec::component_log_terms(const Eigen::VectorXd& x) const {
  Eigen::VectorXd terms(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    const auto& cc = cache_[i];
    const Eigen::VectorXd centered = x - c.mean;
    const double quad = centered.dot(cc.cov_inv * centered);
    const double log_w =
        c.weight > 0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
    terms[static_cast<Eigen::Index>(i)] = log_w + cc.log_norm - 0.5 * quad;
  }
  return terms;
}

double DensitySpec::log_density(const Eigen::VectorXd& x) const {
  check_dim(x);
  return log_sum_exp(component_log_terms(x));
}

Eigen::VectorXd DensitySpec::score(const Eigen::VectorXd& x) const {
  check_dim(x);
  const Eigen::VectorXd terms = component_log_terms(x);
  const double total = log_sum_exp(terms);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(dim_);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const double resp = std::exp(terms[static_cast<Eigen::Index>(i)] - total);
    if (resp == 0.0) continue;
    s.noalias() += resp * (cache_[i].cov_inv * (components_[i].mean - x));
  }
  return s;
}

Eigen::MatrixXd DensitySpec::log_density_hessian(const Eigen::VectorXd& x) const {
  check_dim(x);
  const Eigen::VectorXd terms = component_log_terms(x);
  const double total = log_sum_exp(terms);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim_, dim_);
  Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(dim_);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const double resp = std::exp(terms[static_cast<Eigen::Index>(i)] - total);
    if (resp == 0.0) continue;
    const Eigen::VectorXd g = cache_[i].cov_inv * (components_[i].mean - x);
    hess.noalias() += resp * (g * g.transpose() - cache_[i].cov_inv);
    mean_grad.noalias() += resp * g;
  }
  hess.noalias() -= mean_grad * mean_grad.transpose();
  return hess;
}

DensitySpec DensitySpec::smooth(double sigma_sq) const {
  if (sigma_sq < 0) throw std::invalid_argument("smooth: sigma_sq must be nonnegative");
  if (sigma_sq == 0.0) return *this;
  std::vector<GaussianComponent> comps = components_;
  for (auto& c : comps) c.cov += sigma_sq * Eigen::MatrixXd::Identity(dim_, dim_);
  return DensitySpec(std::move(comps));
}

SampleBatch DensitySpec::sample(int n, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  SampleBatch batch;
  batch.seed = seed;
  batch.points.resize(n, dim_);
  std::vector<double> cumulative(components_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    acc += components_[i].weight;
    cumulative[i] = acc;
  }
  for (int i = 0; i < n; ++i) {
    auto stream = rng::derive(seed, rng::Purpose::DensitySample, static_cast<std::uint64_t>(i));
    const double u = stream.next_unit();
    std::size_t k = 0;
    while (k + 1 < cumulative.size() && u > cumulative[k]) ++k;
    const Eigen::VectorXd z = stream.normal_vector(dim_);
    batch.points.row(i) = (components_[k].mean + cache_[k].chol_lower * z).transpose();
  }
  return batch;
}

double DensitySpec::mean_square_norm() const {
  double total = 0.0;
  for (const auto& c : components_) total += c.weight * (c.mean.squaredNorm() + c.cov.trace());
  return total;
}

double DensitySpec::sup_density_bound() const {
  double total = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i)
    total += components_[i].weight * std::exp(cache_[i].log_norm);
  return total;
}

nlohmann::json DensitySpec::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : components_) {
    nlohmann::json mean = nlohmann::json::array();
    for (int i = 0; i < dim_; ++i) mean.push_back(c.mean[i]);
    nlohmann::json cov = nlohmann::json::array();
    for (int r = 0; r < dim_; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int col = 0; col < dim_; ++col) row.push_back(c.cov(r, col));
      cov.push_back(row);
    }
    comps.push_back({{"weight", c.weight}, {"mean", mean}, {"cov", cov}});
  }
  return {{"schema", 1}, {"dim", dim_}, {"components", comps}};
}

DensitySpec DensitySpec::from_json(const nlohmann::json& j) {
  if (!j.contains("dim") || !j.contains("components"))
    throw std::invalid_argument("DensitySpec JSON: missing dim or components");
  const int dim = j.at("dim").get<int>();
  std::vector<GaussianComponent> comps;
  for (const auto& jc : j.at("components")) {
    GaussianComponent c;
    c.weight = jc.at("weight").get<double>();
    const auto& jm = jc.at("mean");
    c.mean.resize(static_cast<Eigen::Index>(jm.size()));
    for (std::size_t i = 0; i < jm.size(); ++i)
      c.mean[static_cast<Eigen::Index>(i)] = jm[i].get<double>();
    const auto& jv = jc.at("cov");
    c.cov.resize(static_cast<Eigen::Index>(jv.size()), static_cast<Eigen::Index>(jv.size()));
    for (std::size_t r = 0; r < jv.size(); ++r)
      for (std::size_t col = 0; col < jv[r].size(); ++col)
        c.cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
            jv[r][col].get<double>();
    comps.push_back(std::move(c));
  }
  DensitySpec spec(std::move(comps));
  if (spec.dim() != dim) throw std::invalid_argument("DensitySpec JSON: dim mismatch");
  return spec;
}

void write_csv(const SampleBatch& batch, std::ostream& out) {
  const Eigen::Index d = batch.dim();
  for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << "x" << j;
  out << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", batch.points(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

void write_csv(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_csv(batch, out);
}

SampleBatch read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("CSV: empty input");
  Eigen::Index d = 1 + static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index col = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++col;
    }
    if (col != d) throw std::runtime_error("CSV: ragged row");
  }
  SampleBatch batch;
  const Eigen::Index n = static_cast<Eigen::Index>(values.size()) / d;
  batch.points.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) batch.points(i, j) = values[i * d + j];
  return batch;
}

SampleBatch read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_csv(in);
}

nlohmann::json RegularityConstants::to_json() const {
  return {{"schema", 1},          {"lipschitz_M", lipschitz_M}, {"dissip_m", dissip_m},
          {"dissip_b", dissip_b}, {"growth_B", growth_B},       {"sigma_max_sq", sigma_max_sq},
          {"subgauss_C", subgauss_C}};
}

RegularityConstants RegularityConstants::from_json(const nlohmann::json& j) {
  RegularityConstants c;
  c.lipschitz_M = j.at("lipschitz_M").get<double>();
  c.dissip_m = j.at("dissip_m").get<double>();
  c.dissip_b = j.at("dissip_b").get<double>();
  c.growth_B = j.at("growth_B").get<double>();
  c.sigma_max_sq = j.at("sigma_max_sq").get<double>();
  c.subgauss_C = j.value("subgauss_C", 0.0);
  return c;
}

namespace {

// Odometer over a tensor grid on [-radius, radius]^d.
class GridIterator {
 public:
  GridIterator(int dim, int per_axis, double radius)
      : dim_(dim), per_axis_(per_axis), radius_(radius), index_(dim, 0) {}

  bool done() const { return done_; }

  Eigen::VectorXd point() const {
    Eigen::VectorXd x(dim_);
    for (int i = 0; i < dim_; ++i)
      x[i] = -radius_ + 2.0 * radius_ * index_[i] / (per_axis_ - 1);
    return x;
  }

  bool on_boundary() const {
    for (int i = 0; i < dim_; ++i)
      if (index_[i] == 0 || index_[i] == per_axis_ - 1) return true;
    return false;
  }

  void advance() {
    for (int i = 0; i < dim_; ++i) {
      if (++index_[i] < per_axis_) return;
      index_[i] = 0;
    }
    done_ = true;
  }

 private:
  int dim_;
  int per_axis_;
  double radius_;
  std::vector<int> index_;
  bool done_ = false;
};

}  // namespace

RegularityConstants estimate_constants(const DensitySpec& spec, double radius, int grid_points,
                                       double sigma_tilde_max_sq) {
  if (radius <= 0) throw std::invalid_argument("estimate_constants: radius must be positive");
  const int d = spec.dim();
  const int per_axis = static_cast<int>(std::floor(std::pow(static_cast<double>(grid_points),
                                                            1.0 / d) +
                                                   1e-9));
  if (per_axis < 3)
    throw std::invalid_argument("estimate_constants: grid too coarse (need >= 3 points per axis)");

  // The ball of the given radius must carry all but 1e-6 of the mass.
  double outside = 0.0;
  for (const auto& c : spec.components()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov, Eigen::EigenvaluesOnly);
    const double sd_max = std::sqrt(es.eigenvalues().maxCoeff());
    const double slack = radius - c.mean.norm();
    if (slack <= 0) {
      outside += c.weight;
      continue;
    }
    outside += c.weight * chi_square_tail(d, (slack / sd_max) * (slack / sd_max));
  }
  if (outside > 1e-6)
    throw std::invalid_argument(
        "estimate_constants: radius too small, grid does not cover 1-1e-6 of the mass");

  double max_hess_norm = 0.0;
  double min_shell_ratio = std::numeric_limits<double>::infinity();
  double max_density_shift = -std::numeric_limits<double>::infinity();  // log p + m||x||^2/4
  std::vector<Eigen::VectorXd> grid;
  for (GridIterator it(d, per_axis, radius); !it.done(); it.advance()) {
    const Eigen::VectorXd x = it.point();
    grid.push_back(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.log_density_hessian(x),
                                                      Eigen::EigenvaluesOnly);
    max_hess_norm = std::max(max_hess_norm, es.eigenvalues().cwiseAbs().maxCoeff());
    if (it.on_boundary()) {
      const double ns = x.squaredNorm();
      if (ns > 0) min_shell_ratio = std::min(min_shell_ratio, -spec.score(x).dot(x) / ns);
    }
  }
  if (min_shell_ratio <= 0)
    throw std::invalid_argument("estimate_constants: non-dissipative on the boundary shell");

  RegularityConstants out;
  out.lipschitz_M = 2.0 * max_hess_norm;
  out.dissip_m = 0.5 * min_shell_ratio;

  double b = 0.0;
  double B = spec.score(Eigen::VectorXd::Zero(d)).norm();
  for (const auto& x : grid) {
    const Eigen::VectorXd s = spec.score(x);
    b = std::max(b, out.dissip_m * x.squaredNorm() + s.dot(x));
    B = std::max(B, s.norm() - out.lipschitz_M * x.norm());
    max_density_shift = std::max(max_density_shift,
                                 spec.log_density(x) + 0.25 * out.dissip_m * x.squaredNorm());
  }
  out.dissip_b = b;
  out.growth_B = B;
  out.sigma_max_sq = out.lipschitz_M > 0
                         ? std::min(out.dissip_m / (2.0 * out.lipschitz_M), sigma_tilde_max_sq)
                         : sigma_tilde_max_sq;
  out.subgauss_C =
      std::exp(max_density_shift + 0.5 * d * std::log(4.0 * M_PI / out.dissip_m));
  return out;
}

double subgaussian_tail_bound(const RegularityConstants& c, int dim, double radius) {
  (void)dim;
  return c.subgauss_C * std::exp(-0.25 * c.dissip_m * radius * radius);
}

double stein_identity_check(const std::function<double(const Eigen::VectorXd&)>& g,
                            const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_g,
                            int dim, int n, std::uint64_t seed) {
  Eigen::VectorXd lhs = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    auto stream = rng::derive(seed, rng::Purpose::SteinCheck, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd xi = stream.normal_vector(dim);
    lhs += g(xi) * xi;
    rhs += grad_g(xi);
  }
  return (lhs / n - rhs / n).norm();
}

std::vector<std::pair<std::string, DensitySpec>> density_zoo() {
  std::vector<std::pair<std::string, DensitySpec>> zoo;
  zoo.emplace_back("std_normal_1d", DensitySpec::standard_normal(1));

  zoo.emplace_back("wide_normal_1d",
                   DensitySpec::gaussian(Eigen::VectorXd::Zero(1),
                                         4.0 * Eigen::MatrixXd::Identity(1, 1)));

  auto bimodal = [](double mu) {
    Eigen::VectorXd m1(1), m2(1);
    m1 << -mu;
    m2 << mu;
    const Eigen::MatrixXd unit = Eigen::MatrixXd::Identity(1, 1);
    return DensitySpec({{0.5, m1, unit}, {0.5, m2, unit}});
  };
  zoo.emplace_back("bimodal_3_1d", bimodal(3.0));
  zoo.emplace_back("bimodal_4_1d", bimodal(4.0));

  zoo.emplace_back("iso_gauss_2d", DensitySpec::standard_normal(2));

  {
    Eigen::VectorXd mean(2);
    mean << 1.0, -1.0;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    cov(0, 0) = 1.0;
    cov(1, 1) = 0.25;
    zoo.emplace_back("aniso_gauss_2d", DensitySpec::gaussian(mean, cov));
  }

  {
    Eigen::VectorXd m1(2), m2(2), m3(2);
    m1 << -2.0, 0.0;
    m2 << 2.0, 1.0;
    m3 << 0.0, -2.0;
    const Eigen::MatrixXd unit = Eigen::MatrixXd::Identity(2, 2);
    zoo.emplace_back("trimodal_2d",
                     DensitySpec({{0.5, m1, unit}, {0.3, m2, unit}, {0.2, m3, 0.5 * unit}}));
  }

  zoo.emplace_back("iso_gauss_4d", DensitySpec::standard_normal(4));
  return zoo;
}

}  // namespace sgs
