#include "sgs/sampler.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sgs/rng.hpp"

namespace sgs {

namespace {

constexpr double kDivergenceGuard = 1e6;

}  // namespace

InitSpec InitSpec::point(const Eigen::VectorXd& x0) {
  InitSpec init;
  init.kind = Kind::Point;
  init.center = x0;
  return init;
}

InitSpec InitSpec::gaussian(const Eigen::VectorXd& mu, double variance) {
  if (variance < 0) throw std::invalid_argument("InitSpec: variance must be >= 0");
  InitSpec init;
  init.kind = Kind::Gaussian;
  init.center = mu;
  init.variance = variance;
  return init;
}

InitSpec InitSpec::warm_start(const Eigen::MatrixXd& batch) {
  if (batch.rows() < 1) throw std::invalid_argument("InitSpec: empty warm-start batch");
  InitSpec init;
  init.kind = Kind::WarmStart;
  init.batch = batch;
  return init;
}

double InitSpec::mean_square_norm(int dim) const {
  switch (kind) {
    case Kind::Point:
      return center.squaredNorm();
    case Kind::Gaussian:
      return center.squaredNorm() + dim * variance;
    case Kind::WarmStart:
      return batch.rowwise().squaredNorm().mean();
  }
  return 0.0;
}

void LangevinConfig::validate() const {
  if (eta <= 0) throw std::invalid_argument("LangevinConfig: eta must be positive");
  if (steps < 1) throw std::invalid_argument("LangevinConfig: steps must be >= 1");
  if (chains < 1) throw std::invalid_argument("LangevinConfig: chains must be >= 1");
  if (dim < 1) throw std::invalid_argument("LangevinConfig: dim must be >= 1");
  switch (init.kind) {
    case InitSpec::Kind::Point:
    case InitSpec::Kind::Gaussian:
      if (init.center.size() != dim)
        throw std::invalid_argument("LangevinConfig: init dimension mismatch");
      break;
    case InitSpec::Kind::WarmStart:
      if (init.batch.cols() != dim || init.batch.rows() != chains)
        throw std::invalid_argument("LangevinConfig: warm-start batch shape mismatch");
      break;
  }
}

DivergenceError::DivergenceError(int leg, long iteration)
    : std::runtime_error("chain diverged (leg " + std::to_string(leg) + ", iteration " +
                         std::to_string(iteration) + ")"),
      leg_(leg),
      iteration_(iteration) {}

Eigen::MatrixXd draw_initial_batch(const LangevinConfig& config) {
  switch (config.init.kind) {
    case InitSpec::Kind::Point:
      return config.init.center.transpose().replicate(config.chains, 1);
    case InitSpec::Kind::Gaussian: {
      Eigen::MatrixXd batch(config.chains, config.dim);
      const double sd = std::sqrt(config.init.variance);
      for (int c = 0; c < config.chains; ++c) {
        auto stream =
            rng::derive(config.seed, rng::Purpose::ChainInit, static_cast<std::uint64_t>(c));
        batch.row(c) =
            (config.init.center + sd * stream.normal_vector(config.dim)).transpose();
      }
      return batch;
    }
    case InitSpec::Kind::WarmStart:
      return config.init.batch;
  }
  throw std::logic_error("InitSpec: unknown kind");
}

namespace {

void record_moment(Trajectory& traj, long iteration, const Eigen::MatrixXd& batch) {
  const Eigen::VectorXd sq = batch.rowwise().squaredNorm();
  const double mean = sq.mean();
  double var = 0.0;
  for (Eigen::Index i = 0; i < sq.size(); ++i) var += (sq[i] - mean) * (sq[i] - mean);
  var = sq.size() > 1 ? var / (sq.size() - 1) : 0.0;
  traj.moment_trace.push_back({iteration, mean, std::sqrt(var / sq.size())});
}

// Advances the batch in place over one leg; snapshots/moments are recorded at
// global iteration indices so warm restarts share one noise layout.
void advance_leg(Eigen::MatrixXd& batch, const ScoreModel& model, double eta, long steps,
                 std::uint64_t seed, long global_offset, int leg_index, long snapshot_every,
                 long total_steps, Trajectory& traj) {
  const int chains = static_cast<int>(batch.rows());
  const int dim = static_cast<int>(batch.cols());
  const double noise_scale = std::sqrt(2.0 * eta);
  for (long k = 0; k < steps; ++k) {
    const long global_iter = global_offset + k;
    for (int c = 0; c < chains; ++c) {
      auto stream = rng::derive(seed, rng::Purpose::ChainStep, static_cast<std::uint64_t>(c),
                                static_cast<std::uint64_t>(global_iter));
      Eigen::VectorXd w = batch.row(c).transpose();
      w += eta * model.evaluate(w) + noise_scale * stream.normal_vector(dim);
      if (!w.allFinite() || w.norm() > kDivergenceGuard)
        throw DivergenceError(leg_index, global_iter + 1);
      batch.row(c) = w.transpose();
    }
    const long done = global_iter + 1;
    record_moment(traj, done, batch);
    if ((snapshot_every > 0 && done % snapshot_every == 0) || done == total_steps)
      traj.snapshots.push_back({done, batch});
  }
}

}  // namespace

Trajectory ula_run(const ScoreModel& model, const LangevinConfig& config, long snapshot_every) {
  config.validate();
  if (model.dim() != config.dim)
    throw std::invalid_argument("ula_run: model/config dimension mismatch");
  if (config.eta * model.lipschitz_bound() >= 1.0)
    throw std::invalid_argument(
        "ula_run: stability audit failed (eta * lipschitz_bound >= 1); reduce eta");

  Trajectory traj;
  traj.config = config;
  traj.leg_starts = {0};
  Eigen::MatrixXd batch = draw_initial_batch(config);
  traj.snapshots.push_back({0, batch});
  record_moment(traj, 0, batch);
  advance_leg(batch, model, config.eta, config.steps, config.seed, 0, 0, snapshot_every,
              config.steps, traj);
  return traj;
}

void AnnealSchedule::validate() const {
  if (legs.empty()) throw std::invalid_argument("AnnealSchedule: no legs");
  for (std::size_t i = 0; i < legs.size(); ++i) {
    const auto& leg = legs[i];
    if (leg.eta <= 0) throw std::invalid_argument("AnnealSchedule: eta must be positive");
    if (leg.steps < 1) throw std::invalid_argument("AnnealSchedule: steps must be >= 1");
    if (leg.sigma_sq < 0) throw std::invalid_argument("AnnealSchedule: sigma_sq must be >= 0");
    if (leg.model.sigma_sq() != leg.sigma_sq)
      throw std::invalid_argument("AnnealSchedule: model sigma_sq differs from leg sigma_sq");
    if (i > 0) {
      if (leg.eta > legs[i - 1].eta)
        throw std::invalid_argument("AnnealSchedule: eta must be non-increasing");
      if (leg.sigma_sq > legs[i - 1].sigma_sq)
        throw std::invalid_argument("AnnealSchedule: sigma_sq must be non-increasing");
    }
  }
}

Trajectory annealed_run(const AnnealSchedule& schedule, const LangevinConfig& base_config,
                        long snapshot_every) {
  schedule.validate();
  LangevinConfig first = base_config;
  first.eta = schedule.legs[0].eta;
  first.steps = schedule.legs[0].steps;
  first.validate();

  long total_steps = 0;
  for (const auto& leg : schedule.legs) {
    if (leg.model.dim() != base_config.dim)
      throw std::invalid_argument("annealed_run: model/config dimension mismatch");
    if (leg.eta * leg.model.lipschitz_bound() >= 1.0)
      throw std::invalid_argument(
          "annealed_run: stability audit failed (eta * lipschitz_bound >= 1) on leg " +
          std::to_string(&leg - schedule.legs.data()));
    total_steps += leg.steps;
  }

  Trajectory traj;
  traj.config = first;
  Eigen::MatrixXd batch = draw_initial_batch(first);
  traj.snapshots.push_back({0, batch});
  record_moment(traj, 0, batch);

  long offset = 0;
  for (std::size_t i = 0; i < schedule.legs.size(); ++i) {
    const auto& leg = schedule.legs[i];
    traj.leg_starts.push_back(offset);
    advance_leg(batch, leg.model, leg.eta, leg.steps, base_config.seed, offset,
                static_cast<int>(i), snapshot_every, total_steps, traj);
    offset += leg.steps;
  }
  return traj;
}

std::pair<Eigen::VectorXd, double> ou_exact_law(const Eigen::VectorXd& x0, double t) {
  if (t < 0) throw std::invalid_argument("ou_exact_law: t must be >= 0");
  return {x0 * std::exp(-t), 1.0 - std::exp(-2.0 * t)};
}

double moment_trace_check(const Trajectory& traj, const RegularityConstants& constants,
                          std::optional<double> bound_override) {
  double bound;
  if (bound_override) {
    bound = *bound_override;
  } else {
    if (constants.dissip_m <= 0)
      throw std::invalid_argument("moment_trace_check: dissip_m must be positive");
    bound = traj.config.init.mean_square_norm(traj.config.dim) +
            (constants.dissip_b + traj.config.dim) / constants.dissip_m;
  }
  double max_violation = 0.0;
  for (const auto& point : traj.moment_trace)
    max_violation =
        std::max(max_violation, point.mean_sq_norm - bound - 3.0 * point.std_error);
  return max_violation;
}

nlohmann::json trajectory_manifest(const Trajectory& traj) {
  nlohmann::json moments = nlohmann::json::array();
  for (const auto& p : traj.moment_trace)
    moments.push_back(
        {{"iteration", p.iteration}, {"mean_sq_norm", p.mean_sq_norm}, {"std_error", p.std_error}});
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : traj.snapshots) snaps.push_back(s.iteration);
  return {{"schema", 1},
          {"seed", traj.config.seed},
          {"eta", traj.config.eta},
          {"chains", traj.config.chains},
          {"dim", traj.config.dim},
          {"leg_starts", traj.leg_starts},
          {"snapshot_iterations", snaps},
          {"moment_trace", moments}};
}

void dump_trajectory(const Trajectory& traj, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  for (const auto& snap : traj.snapshots) {
    char name[64];
    std::snprintf(name, sizeof(name), "snapshot_%08ld.csv", snap.iteration);
    SampleBatch batch{snap.batch, traj.config.seed};
    write_csv(batch, (fs::path(directory) / name).string());
  }
  std::ofstream manifest(fs::path(directory) / "trajectory.json");
  manifest << trajectory_manifest(traj).dump(2) << "\n";
}

}  // namespace sgs
