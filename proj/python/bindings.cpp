#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "sgs/bounds.hpp"
#include "sgs/density.hpp"
#include "sgs/harness.hpp"
#include "sgs/sampler.hpp"
#include "sgs/score_model.hpp"
#include "sgs/transport.hpp"
#include "sgs/version.hpp"

namespace py = pybind11;
using namespace sgs;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return py::none();
    case nlohmann::json::value_t::boolean: return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float: return py::float_(j.get<double>());
    case nlohmann::json::value_t::string: return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items()) out[py::str(key)] = json_to_py(value);
      return out;
    }
    default: return py::none();
  }
}

}  // namespace

PYBIND11_MODULE(sgs, m) {
  m.doc() = "Score-guided Langevin sampling lab";
  m.attr("__version__") = kVersion;

  py::class_<SampleBatch>(m, "SampleBatch")
      .def_readonly("points", &SampleBatch::points)
      .def_readonly("seed", &SampleBatch::seed)
      .def("__len__", [](const SampleBatch& b) { return b.size(); });

  py::class_<DensitySpec>(m, "DensitySpec")
      .def_static("standard_normal", &DensitySpec::standard_normal, py::arg("dim"))
      .def_static("gaussian", &DensitySpec::gaussian, py::arg("mean"), py::arg("cov"))
      .def_static(
          "mixture",
          [](const std::vector<double>& weights, const std::vector<Eigen::VectorXd>& means,
             const std::vector<Eigen::MatrixXd>& covs) {
            std::vector<GaussianComponent> comps;
            for (std::size_t i = 0; i < weights.size(); ++i)
              comps.push_back({weights[i], means[i], covs[i]});
            return DensitySpec(std::move(comps));
          },
          py::arg("weights"), py::arg("means"), py::arg("covs"))
      .def_property_readonly("dim", &DensitySpec::dim)
      .def("log_density", &DensitySpec::log_density, py::arg("x"))
      .def("score", &DensitySpec::score, py::arg("x"))
      .def("log_density_hessian", &DensitySpec::log_density_hessian, py::arg("x"))
      .def("smooth", &DensitySpec::smooth, py::arg("sigma_sq"))
      .def("sample", &DensitySpec::sample, py::arg("n"), py::arg("seed"))
      .def("mean_square_norm", &DensitySpec::mean_square_norm)
      .def("sup_density_bound", &DensitySpec::sup_density_bound)
      .def("to_json", [](const DensitySpec& spec) { return spec.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return DensitySpec::from_json(nlohmann::json::parse(text));
      });

  m.def("zoo", [] {
    py::dict out;
    for (auto& [name, spec] : density_zoo()) out[py::str(name)] = spec;
    return out;
  });

  py::class_<RegularityConstants>(m, "RegularityConstants")
      .def(py::init<>())
      .def_readwrite("lipschitz_M", &RegularityConstants::lipschitz_M)
      .def_readwrite("dissip_m", &RegularityConstants::dissip_m)
      .def_readwrite("dissip_b", &RegularityConstants::dissip_b)
      .def_readwrite("growth_B", &RegularityConstants::growth_B)
      .def_readwrite("sigma_max_sq", &RegularityConstants::sigma_max_sq)
      .def_readwrite("subgauss_C", &RegularityConstants::subgauss_C);

  m.def("estimate_constants", &estimate_constants, py::arg("spec"), py::arg("radius"),
        py::arg("grid_points"), py::arg("sigma_tilde_max_sq") = 1.0);
  m.def("subgaussian_tail_bound", &subgaussian_tail_bound, py::arg("constants"), py::arg("dim"),
        py::arg("radius"));
  m.def("stein_identity_check", &stein_identity_check, py::arg("g"), py::arg("grad_g"),
        py::arg("dim"), py::arg("n"), py::arg("seed"));

  py::class_<ScoreModel>(m, "ScoreModel")
      .def_static("oracle",
                  py::overload_cast<const DensitySpec&, double>(&ScoreModel::oracle),
                  py::arg("base"), py::arg("sigma_sq"))
      .def_static("perturbed_oracle", &ScoreModel::perturbed_oracle, py::arg("base"),
                  py::arg("sigma_sq"), py::arg("epsilon"), py::arg("seed"))
      .def_property_readonly("sigma_sq", &ScoreModel::sigma_sq)
      .def_property_readonly("lipschitz_bound", &ScoreModel::lipschitz_bound)
      .def_property_readonly("epsilon", &ScoreModel::epsilon)
      .def_property_readonly("kind",
                             [](const ScoreModel& model) {
                               switch (model.kind()) {
                                 case ScoreModel::Kind::Oracle: return "oracle";
                                 case ScoreModel::Kind::PerturbedOracle:
                                   return "perturbed_oracle";
                                 case ScoreModel::Kind::FittedDae: return "fitted_dae";
                               }
                               return "unknown";
                             })
      .def("evaluate", &ScoreModel::evaluate, py::arg("x"))
      .def("evaluate_batch", &ScoreModel::evaluate_batch, py::arg("points"))
      .def("to_json", [](const ScoreModel& model) { return model.to_json().dump(); })
      .def_static("fitted_from_json", [](const std::string& text) {
        return ScoreModel::fitted_from_json(nlohmann::json::parse(text));
      });

  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &FitConfig::gamma)
      .def_readwrite("feature_count", &FitConfig::feature_count)
      .def_readwrite("include_linear", &FitConfig::include_linear)
      .def_readwrite("ridge", &FitConfig::ridge);

  m.def("fit_dae", &fit_dae, py::arg("spec"), py::arg("sigma_sq"), py::arg("train_n"),
        py::arg("config"), py::arg("seed"));

  py::class_<LossEstimate>(m, "LossEstimate")
      .def_readonly("value", &LossEstimate::value)
      .def_readonly("std_error", &LossEstimate::std_error)
      .def_readonly("n", &LossEstimate::n);

  m.def("dae_loss", &dae_loss, py::arg("r"), py::arg("spec"), py::arg("sigma_sq"), py::arg("n"),
        py::arg("seed"));
  m.def("dsm_loss", &dsm_loss, py::arg("s"), py::arg("spec"), py::arg("sigma_sq"), py::arg("n"),
        py::arg("seed"));

  py::class_<EquivalenceGap>(m, "EquivalenceGap")
      .def_readonly("spread", &EquivalenceGap::spread)
      .def_readonly("gaps", &EquivalenceGap::gaps)
      .def_readonly("std_errors", &EquivalenceGap::std_errors);

  m.def("equivalence_gap", &equivalence_gap, py::arg("r_handles"), py::arg("spec"),
        py::arg("sigma_sq"), py::arg("n"), py::arg("seed"));
  m.def("rademacher_mc", &rademacher_mc, py::arg("function_values"), py::arg("trials"),
        py::arg("seed"));

  py::class_<InitSpec>(m, "InitSpec")
      .def_static("point", &InitSpec::point, py::arg("x0"))
      .def_static("gaussian", &InitSpec::gaussian, py::arg("mu"), py::arg("variance"))
      .def_static("warm_start", &InitSpec::warm_start, py::arg("batch"))
      .def("mean_square_norm", &InitSpec::mean_square_norm, py::arg("dim"));

  py::class_<LangevinConfig>(m, "LangevinConfig")
      .def(py::init([](double eta, long steps, int chains, int dim, const InitSpec& init,
                       std::uint64_t seed) {
             LangevinConfig config;
             config.eta = eta;
             config.steps = steps;
             config.chains = chains;
             config.dim = dim;
             config.init = init;
             config.seed = seed;
             return config;
           }),
           py::arg("eta"), py::arg("steps"), py::arg("chains"), py::arg("dim"), py::arg("init"),
           py::arg("seed"))
      .def_readwrite("eta", &LangevinConfig::eta)
      .def_readwrite("steps", &LangevinConfig::steps)
      .def_readwrite("chains", &LangevinConfig::chains)
      .def_readwrite("dim", &LangevinConfig::dim)
      .def_readwrite("seed", &LangevinConfig::seed);

  py::class_<Snapshot>(m, "Snapshot")
      .def_readonly("iteration", &Snapshot::iteration)
      .def_readonly("batch", &Snapshot::batch);

  py::class_<MomentPoint>(m, "MomentPoint")
      .def_readonly("iteration", &MomentPoint::iteration)
      .def_readonly("mean_sq_norm", &MomentPoint::mean_sq_norm)
      .def_readonly("std_error", &MomentPoint::std_error);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("snapshots", &Trajectory::snapshots)
      .def_readonly("moment_trace", &Trajectory::moment_trace)
      .def_readonly("leg_starts", &Trajectory::leg_starts)
      .def_property_readonly("final_batch",
                             [](const Trajectory& t) { return t.final_batch(); });

  m.def("ula_run", &ula_run, py::arg("model"), py::arg("config"), py::arg("snapshot_every"));
  m.def(
      "annealed_run",
      [](const std::vector<std::tuple<double, double, long, ScoreModel>>& legs,
         const LangevinConfig& base, long snapshot_every) {
        AnnealSchedule schedule;
        for (const auto& [eta, sigma_sq, steps, model] : legs)
          schedule.legs.push_back({eta, sigma_sq, steps, model});
        return annealed_run(schedule, base, snapshot_every);
      },
      py::arg("legs"), py::arg("base_config"), py::arg("snapshot_every"));
  m.def("ou_exact_law", &ou_exact_law, py::arg("x0"), py::arg("t"));
  m.def(
      "moment_trace_check",
      [](const Trajectory& traj, const RegularityConstants& constants, py::object bound) {
        std::optional<double> override;
        if (!bound.is_none()) override = bound.cast<double>();
        return moment_trace_check(traj, constants, override);
      },
      py::arg("trajectory"), py::arg("constants"), py::arg("bound_override") = py::none());

  py::class_<W2Estimate>(m, "W2Estimate")
      .def_readonly("value", &W2Estimate::value)
      .def_readonly("n_used", &W2Estimate::n_used)
      .def_property_readonly("method",
                             [](const W2Estimate& est) { return to_string(est.method); })
      .def_property_readonly("std_error",
                             [](const W2Estimate& est) -> py::object {
                               if (est.std_error) return py::float_(*est.std_error);
                               return py::none();
                             })
      .def("to_json", [](const W2Estimate& est) { return est.to_json().dump(); });

  m.def("w2_exact",
        py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&>(&w2_exact),
        py::arg("a"), py::arg("b"));
  m.def("w2_gaussian", &w2_gaussian, py::arg("mu1"), py::arg("S1"), py::arg("mu2"),
        py::arg("S2"));
  m.def("w2_sliced",
        py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&, int, std::uint64_t>(
            &w2_sliced),
        py::arg("a"), py::arg("b"), py::arg("projections"), py::arg("seed"));
  m.def(
      "smoothing_gap_check",
      [](const DensitySpec& spec, double sigma_sq, int n, std::uint64_t seed, bool coupled) {
        const auto gap = smoothing_gap_check(spec, sigma_sq, n, seed, coupled);
        return py::make_tuple(gap.measured, gap.bound);
      },
      py::arg("spec"), py::arg("sigma_sq"), py::arg("n"), py::arg("seed"),
      py::arg("coupled") = true);

  py::class_<BoundInputs>(m, "BoundInputs")
      .def(py::init<>())
      .def_readwrite("constants", &BoundInputs::constants)
      .def_readwrite("dim", &BoundInputs::dim)
      .def_readwrite("sigma_sq", &BoundInputs::sigma_sq)
      .def_readwrite("eta", &BoundInputs::eta)
      .def_readwrite("tau", &BoundInputs::tau)
      .def_readwrite("epsilon", &BoundInputs::epsilon)
      .def_readwrite("radius_R", &BoundInputs::radius_R)
      .def_readwrite("alpha", &BoundInputs::alpha)
      .def_readwrite("k_alpha", &BoundInputs::k_alpha)
      .def_readwrite("p_inf", &BoundInputs::p_inf)
      .def_readwrite("universal_c", &BoundInputs::universal_c)
      .def_readwrite("w2_init", &BoundInputs::w2_init)
      .def_readwrite("delta", &BoundInputs::delta)
      .def_readwrite("n", &BoundInputs::n)
      .def_readwrite("rademacher", &BoundInputs::rademacher)
      .def_property(
          "steps",
          [](const BoundInputs& in) -> py::object {
            if (in.steps) return py::int_(*in.steps);
            return py::none();
          },
          [](BoundInputs& in, py::object value) {
            if (value.is_none())
              in.steps.reset();
            else
              in.steps = value.cast<long>();
          })
      .def_static("from_json", [](const std::string& text) {
        return BoundInputs::from_json(nlohmann::json::parse(text));
      });

  m.def(
      "smoothed_dissipativity",
      [](const RegularityConstants& constants, double sigma_sq) {
        const auto d = smoothed_dissipativity(constants, sigma_sq);
        return py::make_tuple(d.m_sigma, d.b_sigma, d.m_uniform, d.b_uniform);
      },
      py::arg("constants"), py::arg("sigma_sq"));
  m.def(
      "log_sobolev_bound",
      [](const RegularityConstants& constants, double sigma_sq, int dim, double universal_c) {
        const auto ls = log_sobolev_bound(constants, sigma_sq, dim, universal_c);
        return py::make_tuple(ls.c_poincare, ls.c_log_sobolev, ls.overflow);
      },
      py::arg("constants"), py::arg("sigma_sq"), py::arg("dim"), py::arg("universal_c") = 1.0);
  m.def("thm1_bound",
        [](const BoundInputs& inputs) { return json_to_py(thm1_bound(inputs).to_json()); },
        py::arg("inputs"));
  m.def(
      "estimation_rate",
      [](const BoundInputs& inputs) {
        const auto rate = estimation_rate(inputs);
        return py::make_tuple(rate.rate, rate.dae_rate, rate.failure_prob);
      },
      py::arg("inputs"));
  m.def("bolley_villani_constant", &bolley_villani_constant, py::arg("inputs"), py::arg("t"));
  m.def(
      "path_kl_estimate",
      [](const ScoreModel& f_hat, const DensitySpec& spec, double sigma_sq,
         const LangevinConfig& config) {
        const auto kl = path_kl_estimate(f_hat, spec, sigma_sq, config);
        py::object bound = kl.formula_bound ? py::object(py::float_(*kl.formula_bound))
                                            : py::object(py::none());
        return py::make_tuple(kl.estimate, bound);
      },
      py::arg("f_hat"), py::arg("spec"), py::arg("sigma_sq"), py::arg("config"));

  py::register_exception<DivergenceError>(m, "DivergenceError");
}
