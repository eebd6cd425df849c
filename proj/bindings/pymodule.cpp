#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "kbandit/experiments.hpp"
#include "kbandit/rounding.hpp"

namespace py = pybind11;
using namespace kbandit;

namespace {

KernelSpec make_kernel(const std::string& kind, double bandwidth, const MatrixXd& gram) {
  if (kind == "linear") return KernelSpec::Linear();
  if (kind == "rbf") return KernelSpec::Rbf(bandwidth);
  if (kind == "precomputed") return KernelSpec::Precomputed(gram);
  throw ConfigError("unknown kernel kind: " + kind);
}

ArmSet make_arms(const MatrixXd& points, const std::string& kind, double bandwidth,
                 const MatrixXd& gram) {
  return ArmSet(points, make_kernel(kind, bandwidth, gram));
}

std::vector<DualVector> directions_from_matrix(const MatrixXd& coeffs, int n) {
  std::vector<DualVector> dirs;
  if (coeffs.size() == 0) {
    for (int i = 0; i < n; ++i) dirs.push_back(DualVector::unit(n, i));
    return dirs;
  }
  if (coeffs.cols() != n) throw ConfigError("direction coefficients must have one column per arm");
  for (Eigen::Index v = 0; v < coeffs.rows(); ++v)
    dirs.push_back(DualVector{coeffs.row(v).transpose()});
  return dirs;
}

SolverConfig make_solver(int max_iters, const std::string& rule, double lr0, double tol) {
  SolverConfig cfg;
  cfg.max_iters = max_iters;
  cfg.lr0 = lr0;
  cfg.tol = tol;
  if (rule == "mirror_descent")
    cfg.step_rule = SolverConfig::StepRule::mirror_descent;
  else if (rule == "frank_wolfe")
    cfg.step_rule = SolverConfig::StepRule::frank_wolfe;
  else
    throw ConfigError("unknown step rule: " + rule);
  return cfg;
}

py::dict solution_dict(const DesignSolution& sol) {
  py::dict out;
  out["weights"] = sol.design.weights;
  out["objective_value"] = sol.objective_value;
  out["argmax_direction"] = sol.argmax_direction;
  out["iterations_used"] = sol.iterations_used;
  out["converged"] = sol.converged;
  return out;
}

}  // namespace

PYBIND11_MODULE(_kbandit, m) {
  m.doc() = "experimental design, robust estimation and kernel bandits";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UnsupportedModeError>(m, "UnsupportedModeError", PyExc_RuntimeError);
  py::register_exception<InsufficientSamplesError>(m, "InsufficientSamplesError",
                                                   PyExc_ValueError);

  m.def(
      "gram_matrix",
      [](const MatrixXd& points, const std::string& kernel, double bandwidth,
         const MatrixXd& gram) { return make_arms(points, kernel, bandwidth, gram).gram(); },
      py::arg("points"), py::arg("kernel") = "linear", py::arg("bandwidth") = 1.0,
      py::arg("gram") = MatrixXd());

  m.def(
      "solve_design",
      [](const MatrixXd& points, const MatrixXd& directions, double gamma,
         const std::string& kernel, double bandwidth, const MatrixXd& gram,
         const std::vector<int>& support, const VectorXd& weights, int max_iters,
         const std::string& step_rule, double lr0, double tol) {
        const ArmSet arms = make_arms(points, kernel, bandwidth, gram);
        DesignProblem p;
        p.arms = &arms;
        p.gamma = gamma;
        p.directions = directions_from_matrix(directions, arms.n());
        p.support = support;
        if (weights.size()) p.weights = weights;
        return solution_dict(solve_design(p, make_solver(max_iters, step_rule, lr0, tol)));
      },
      py::arg("points"), py::arg("directions") = MatrixXd(), py::arg("gamma") = 0.0,
      py::arg("kernel") = "linear", py::arg("bandwidth") = 1.0, py::arg("gram") = MatrixXd(),
      py::arg("support") = std::vector<int>(), py::arg("weights") = VectorXd(),
      py::arg("max_iters") = 5000, py::arg("step_rule") = "mirror_descent",
      py::arg("lr0") = 1.0, py::arg("tol") = 1e-7);

  m.def(
      "solve_logdet",
      [](const MatrixXd& points, double gamma, const std::string& kernel, double bandwidth,
         const MatrixXd& gram, int max_iters) {
        const ArmSet arms = make_arms(points, kernel, bandwidth, gram);
        SolverConfig cfg;
        cfg.max_iters = max_iters;
        return solution_dict(solve_logdet(arms, gamma, cfg));
      },
      py::arg("points"), py::arg("gamma"), py::arg("kernel") = "linear",
      py::arg("bandwidth") = 1.0, py::arg("gram") = MatrixXd(), py::arg("max_iters") = 5000);

  m.def(
      "info_gain",
      [](const MatrixXd& points, long T, double gamma, const std::string& kernel,
         double bandwidth, const MatrixXd& gram, int max_iters) {
        const ArmSet arms = make_arms(points, kernel, bandwidth, gram);
        SolverConfig cfg;
        cfg.max_iters = max_iters;
        return info_gain(arms, T, gamma, cfg);
      },
      py::arg("points"), py::arg("T"), py::arg("gamma") = 1.0, py::arg("kernel") = "linear",
      py::arg("bandwidth") = 1.0, py::arg("gram") = MatrixXd(), py::arg("max_iters") = 3000);

  m.def(
      "round_ceiling",
      [](const VectorXd& weights, long T) {
        const Allocation a = round_ceiling(Design{weights}, T);
        return py::make_tuple(a.counts, a.total);
      },
      py::arg("weights"), py::arg("T"));

  m.def(
      "caratheodory_reduce",
      [](const MatrixXd& points, const VectorXd& weights) {
        const ArmSet arms(points, KernelSpec::Linear());
        return caratheodory_reduce(arms, Design{weights}).weights;
      },
      py::arg("points"), py::arg("weights"));

  m.def(
      "round_swap",
      [](const MatrixXd& points, const VectorXd& weights, long T, double eps, double gamma,
         const MatrixXd& directions) {
        const ArmSet arms(points, KernelSpec::Linear());
        DesignProblem p;
        p.arms = &arms;
        p.gamma = gamma;
        p.directions = directions_from_matrix(directions, arms.n());
        const Allocation a = round_swap(p, Design{weights}, T, eps);
        return py::make_tuple(a.counts, a.total);
      },
      py::arg("points"), py::arg("weights"), py::arg("T"), py::arg("eps") = 1.0,
      py::arg("gamma") = 0.0, py::arg("directions") = MatrixXd());

  m.def(
      "ptr_round",
      [](const MatrixXd& points, const VectorXd& weights, double gamma, long T, double eps,
         const std::string& kernel, double bandwidth, const MatrixXd& gram,
         const MatrixXd& directions) {
        const ArmSet arms = make_arms(points, kernel, bandwidth, gram);
        const PtrReport report = ptr_round(
            arms, directions_from_matrix(directions, arms.n()), Design{weights}, gamma, T, eps);
        py::dict out;
        out["counts"] = report.allocation.counts;
        out["total"] = report.allocation.total;
        out["effective_dim"] = report.effective_dim;
        out["projection_rank"] = report.projection_rank;
        out["inflation_factor"] = report.inflation_factor;
        return out;
      },
      py::arg("points"), py::arg("weights"), py::arg("gamma"), py::arg("T"),
      py::arg("eps") = 1.0, py::arg("kernel") = "linear", py::arg("bandwidth") = 1.0,
      py::arg("gram") = MatrixXd(), py::arg("directions") = MatrixXd());

  m.def(
      "catoni",
      [](const std::vector<double>& samples, double delta, double variance) {
        return catoni(samples, delta, variance);
      },
      py::arg("samples"), py::arg("delta"), py::arg("variance"));

  m.def(
      "median_of_means",
      [](const std::vector<double>& samples, double delta) {
        return median_of_means(samples, delta);
      },
      py::arg("samples"), py::arg("delta"));

  m.def(
      "rips_estimate",
      [](const MatrixXd& points, const VectorXd& design_weights, double gamma, long tau,
         double delta, const VectorXd& mu, double sigma, std::uint64_t seed,
         const std::string& kernel, double bandwidth, const MatrixXd& gram,
         const MatrixXd& directions, const std::string& robust_kind, bool fit_theta) {
        const ArmSet arms = make_arms(points, kernel, bandwidth, gram);
        if (mu.size() != arms.n()) throw ConfigError("mu must list one mean per arm");
        RobustMeanConfig robust;
        robust.delta = delta;
        robust.kind = robust_kind == "median_of_means" ? RobustKind::median_of_means
                                                       : RobustKind::catoni;
        const double bound = mu.cwiseAbs().maxCoeff();
        robust.variance_bound = bound * bound + sigma * sigma;

        Rng noise(split_seed(seed, 0xD));
        const EstimateSet est = rips_estimate(
            arms, directions_from_matrix(directions, arms.n()), Design{design_weights}, gamma,
            tau, robust, [&](int arm) { return mu[arm] + sigma * noise.normal(); }, seed,
            fit_theta);
        py::dict out;
        out["w_values"] = est.w_values;
        if (est.has_theta) {
          out["theta_coeffs"] = est.theta_hat.coeffs;
          out["minmax_value"] = est.minmax_value;
        }
        return out;
      },
      py::arg("points"), py::arg("design_weights"), py::arg("gamma"), py::arg("tau"),
      py::arg("delta"), py::arg("mu"), py::arg("sigma") = 1.0, py::arg("seed") = 1,
      py::arg("kernel") = "linear", py::arg("bandwidth") = 1.0, py::arg("gram") = MatrixXd(),
      py::arg("directions") = MatrixXd(), py::arg("robust_kind") = "catoni",
      py::arg("fit_theta") = true);

  m.def(
      "run_bandit_regret",
      [](const MatrixXd& points, const VectorXd& mu, double sigma, long horizon, double delta,
         double gamma, std::uint64_t seed, const std::string& algo) {
        const ArmSet arms(points, KernelSpec::Linear());
        NoiseSpec noise{sigma > 0.0 ? NoiseSpec::Kind::gaussian : NoiseSpec::Kind::none, sigma,
                        3};
        Environment env(mu, noise, mu.cwiseAbs().maxCoeff() + 1e-12, seed);
        BanditConfig cfg;
        cfg.delta = delta;
        cfg.gamma = gamma;
        cfg.sigma = sigma;
        cfg.B = env.reward_bound();
        cfg.horizon = horizon;
        cfg.solver.max_iters = 1500;
        const RunResult run =
            algo == "ptr" ? run_ptr_regret(arms, env, cfg) : run_rips_regret(arms, env, cfg);
        py::dict out;
        out["total_pulls"] = run.total_pulls;
        out["final_regret"] = run.regret_trace.empty() ? 0.0 : run.regret_trace.back();
        out["returned_arm"] = run.returned_arm;
        out["phases"] = run.phases.size();
        return out;
      },
      py::arg("points"), py::arg("mu"), py::arg("sigma"), py::arg("horizon"),
      py::arg("delta") = 0.05, py::arg("gamma") = 1e-4, py::arg("seed") = 1,
      py::arg("algo") = "rips");

  m.def(
      "run_bandit_pe",
      [](const MatrixXd& points, const VectorXd& mu, double sigma, double eps_target,
         double delta, double gamma, std::uint64_t seed, const std::string& algo) {
        const ArmSet arms(points, KernelSpec::Linear());
        NoiseSpec noise{sigma > 0.0 ? NoiseSpec::Kind::gaussian : NoiseSpec::Kind::none, sigma,
                        3};
        Environment env(mu, noise, mu.cwiseAbs().maxCoeff() + 1e-12, seed);
        BanditConfig cfg;
        cfg.delta = delta;
        cfg.gamma = gamma;
        cfg.sigma = sigma;
        cfg.B = env.reward_bound();
        cfg.eps_target = eps_target;
        cfg.solver.max_iters = 1500;
        std::vector<int> all;
        for (int i = 0; i < arms.n(); ++i) all.push_back(i);
        const RunResult run = algo == "ptr" ? run_ptr_pe(arms, all, all, env, cfg)
                                            : run_rips_pe(arms, all, all, env, cfg);
        py::dict out;
        out["total_pulls"] = run.total_pulls;
        out["returned_arm"] = run.returned_arm;
        out["returned_gap"] = run.returned_gap;
        return out;
      },
      py::arg("points"), py::arg("mu"), py::arg("sigma"), py::arg("eps_target"),
      py::arg("delta") = 0.05, py::arg("gamma") = 1e-4, py::arg("seed") = 1,
      py::arg("algo") = "rips");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig config =
            config_from_json(nlohmann::json::parse(config_json));
        const ExperimentOutput out = run_experiment(config);
        py::list rows;
        for (const ResultRow& r : out.rows)
          rows.append(py::make_tuple(r.experiment, r.estimator, r.T, r.rep, r.metric, r.value,
                                     r.seed));
        return py::make_tuple(rows, out.summary.dump());
      },
      py::arg("config_json"));

  m.def("emit_results_csv",
        [](const std::string& config_json, const std::string& out_path) {
          const ExperimentConfig config =
              config_from_json(nlohmann::json::parse(config_json));
          const ExperimentOutput out = run_experiment(config);
          emit_results(out.rows, out.summary, out_path);
        },
        py::arg("config_json"), py::arg("out_path"));
}
