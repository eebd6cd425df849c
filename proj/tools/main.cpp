// Command line front end: continuous designs, rounding, robust estimation and
// the Monte-Carlo experiment harness, all driven by JSON configs.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "kbandit/experiments.hpp"
#include "kbandit/rounding.hpp"

namespace {

using nlohmann::json;
using namespace kbandit;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return j;
}

void write_output(const json& payload, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << payload.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open output file: " + out_path);
  out << payload.dump(2) << '\n';
}

// Instance description shared by design/round/estimate:
//   points: [[...], ...]            explicit rows, or
//   scenario: {name, d|m, n, seed}  one of the built-in generators
//   kernel: {kind, bandwidth, gram}
//   gamma, directions ("arms" | "pairs" | [[coeffs], ...]), support, weights
struct Instance {
  ArmSet arms;
  DesignProblem problem;
  VectorXd arm_truth;  // scenario ground truth when available
  double reward_bound = 1.0;

  explicit Instance(ArmSet a) : arms(std::move(a)) {}
};

KernelSpec kernel_from_json(const json& j) {
  if (!j.contains("kernel")) return KernelSpec::Linear();
  const json& k = j.at("kernel");
  const std::string kind = k.value("kind", "linear");
  if (kind == "linear") return KernelSpec::Linear();
  if (kind == "rbf") return KernelSpec::Rbf(k.value("bandwidth", 0.025));
  if (kind == "precomputed") {
    const auto rows = k.at("gram").get<std::vector<std::vector<double>>>();
    MatrixXd gram(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < rows.size(); ++c) gram(i, c) = rows[i][c];
    return KernelSpec::Precomputed(gram);
  }
  throw ConfigError("unknown kernel kind: " + kind);
}

Instance instance_from_json(const json& j, std::uint64_t seed) {
  std::optional<Scenario> scenario;
  std::optional<ArmSet> arms;
  if (j.contains("scenario")) {
    const json& s = j.at("scenario");
    const std::string name = s.at("name").get<std::string>();
    const std::uint64_t sc_seed = s.value("seed", seed);
    if (name == "g_optimal")
      scenario = gen_g_optimal_scenario(s.value("d", 20), s.value("n", -1), sc_seed);
    else if (name == "kernel_rbf")
      scenario = gen_kernel_scenario(s.value("m", 100), s.value("bandwidth", 0.025), sc_seed);
    else if (name == "ips_vs_rips")
      scenario = gen_ips_vs_rips_scenario(s.value("m", 8), sc_seed);
    else
      throw ConfigError("unknown scenario: " + name);
    arms = scenario->arms;
  } else if (j.contains("points")) {
    const auto rows = j.at("points").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw ConfigError("instance: empty point list");
    MatrixXd pts(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size())
        throw ConfigError("instance: ragged point list");
      for (std::size_t c = 0; c < rows[i].size(); ++c) pts(i, c) = rows[i][c];
    }
    arms = ArmSet(pts, kernel_from_json(j));
  } else {
    throw ConfigError("instance needs either points or a scenario");
  }

  Instance inst(std::move(*arms));
  inst.problem.arms = &inst.arms;
  inst.problem.gamma = j.value("gamma", 0.0);

  const json dirs = j.value("directions", json("arms"));
  if (dirs.is_string() && dirs.get<std::string>() == "arms") {
    if (scenario && !scenario->metric_directions.empty())
      inst.problem.directions = scenario->metric_directions;
    else
      for (int i = 0; i < inst.arms.n(); ++i)
        inst.problem.directions.push_back(DualVector::unit(inst.arms.n(), i));
  } else if (dirs.is_string() && dirs.get<std::string>() == "pairs") {
    for (int i = 0; i < inst.arms.n(); ++i)
      for (int k = 0; k < inst.arms.n(); ++k) {
        if (i == k) continue;
        DualVector v = DualVector::zero(inst.arms.n());
        v.coeffs[i] = 1.0;
        v.coeffs[k] = -1.0;
        inst.problem.directions.push_back(std::move(v));
      }
  } else if (dirs.is_array()) {
    for (const auto& row : dirs) {
      const auto coeffs = row.get<std::vector<double>>();
      if (static_cast<int>(coeffs.size()) != inst.arms.n())
        throw ConfigError("instance: direction coefficient length mismatch");
      DualVector v;
      v.coeffs = Eigen::Map<const VectorXd>(coeffs.data(),
                                            static_cast<Eigen::Index>(coeffs.size()));
      inst.problem.directions.push_back(std::move(v));
    }
  } else {
    throw ConfigError("instance: directions must be \"arms\", \"pairs\" or an array");
  }

  if (j.contains("support")) inst.problem.support = j.at("support").get<std::vector<int>>();
  if (scenario) {
    inst.arm_truth = scenario->arm_truth;
    inst.reward_bound = scenario->reward_bound;
  }
  return inst;
}

SolverConfig solver_from_json(const json& j) {
  SolverConfig cfg;
  if (!j.contains("solver")) return cfg;
  const json& s = j.at("solver");
  cfg.max_iters = s.value("max_iters", cfg.max_iters);
  cfg.lr0 = s.value("lr0", cfg.lr0);
  cfg.tol = s.value("tol", cfg.tol);
  cfg.seed = s.value("seed", cfg.seed);
  const std::string rule = s.value("step_rule", "mirror_descent");
  if (rule == "mirror_descent")
    cfg.step_rule = SolverConfig::StepRule::mirror_descent;
  else if (rule == "frank_wolfe")
    cfg.step_rule = SolverConfig::StepRule::frank_wolfe;
  else
    throw ConfigError("unknown step_rule: " + rule);
  return cfg;
}

json design_to_json(const DesignSolution& sol) {
  json out;
  out["weights"] = std::vector<double>(sol.design.weights.data(),
                                       sol.design.weights.data() + sol.design.weights.size());
  out["objective_value"] = sol.objective_value;
  out["argmax_direction"] = sol.argmax_direction;
  out["iterations_used"] = sol.iterations_used;
  out["converged"] = sol.converged;
  return out;
}

int cmd_design(const std::string& config_path, const std::string& out_path,
               std::uint64_t seed) {
  const json j = load_json(config_path);
  const Instance inst = instance_from_json(j, seed);
  SolverConfig solver = solver_from_json(j);
  solver.seed = seed;
  const DesignSolution sol = solve_design(inst.problem, solver);

  json out = design_to_json(sol);
  RegularizedOperator op(inst.arms, sol.design, inst.problem.gamma);
  const double cond = op.condition_estimate();
  out["condition_estimate"] = cond;
  if (cond > 1e12)
    std::cerr << "warning: regularized solve condition estimate " << cond
              << " exceeds 1e12; results may be inaccurate\n";
  write_output(out, out_path);
  return 0;
}

int cmd_round(const std::string& config_path, const std::string& out_path,
              std::uint64_t seed) {
  const json j = load_json(config_path);
  const Instance inst = instance_from_json(j, seed);
  const std::string method = j.value("method", "ceiling");
  const long T = j.at("T").get<long>();
  const double eps = j.value("eps", 1.0);

  Design lambda = Design::uniform(inst.arms.n());
  if (j.contains("design")) {
    const auto w = j.at("design").get<std::vector<double>>();
    lambda.weights = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    lambda.validate();
  } else {
    SolverConfig solver = solver_from_json(j);
    solver.seed = seed;
    lambda = solve_design(inst.problem, solver).design;
  }

  json out;
  const auto allocation_json = [](const Allocation& a) {
    json al;
    al["counts"] = std::vector<int>(a.counts.data(), a.counts.data() + a.counts.size());
    al["total"] = a.total;
    return al;
  };
  if (method == "ceiling") {
    out = allocation_json(round_ceiling(lambda, T));
  } else if (method == "caratheodory") {
    const Design reduced = caratheodory_reduce(inst.arms, lambda);
    out["weights"] = std::vector<double>(reduced.weights.data(),
                                         reduced.weights.data() + reduced.weights.size());
    out["support"] = static_cast<long>((reduced.weights.array() > 0.0).count());
    out["allocation"] = allocation_json(round_ceiling(reduced, T));
  } else if (method == "swap") {
    out = allocation_json(round_swap(inst.problem, lambda, T, eps));
  } else if (method == "ptr") {
    const PtrReport report =
        ptr_round(inst.arms, inst.problem.directions, lambda, inst.problem.gamma, T, eps,
                  inst.problem.support);
    out = allocation_json(report.allocation);
    out["effective_dim"] = report.effective_dim;
    out["projection_rank"] = report.projection_rank;
    out["inflation_factor"] = report.inflation_factor;
  } else {
    throw ConfigError("unknown rounding method: " + method);
  }
  write_output(out, out_path);
  return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& out_path,
                 std::uint64_t seed) {
  const json j = load_json(config_path);
  const Instance inst = instance_from_json(j, seed);
  const std::string estimator = j.value("estimator", "rips");
  const long tau = j.at("tau").get<long>();

  VectorXd mu = inst.arm_truth;
  if (j.contains("mu")) {
    const auto m = j.at("mu").get<std::vector<double>>();
    mu = Eigen::Map<const VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  }
  if (mu.size() != inst.arms.n())
    throw ConfigError("estimate: mu must list one mean per arm (or use a scenario)");
  const double bound = std::max(mu.cwiseAbs().maxCoeff(), 1e-12);

  NoiseSpec noise;
  noise.kind = NoiseSpec::Kind::gaussian;
  if (j.contains("noise")) {
    const json& nj = j.at("noise");
    const std::string kind = nj.value("kind", "gaussian");
    noise.kind = kind == "none"
                     ? NoiseSpec::Kind::none
                     : (kind == "student_t" ? NoiseSpec::Kind::student_t
                                            : NoiseSpec::Kind::gaussian);
    noise.sigma = nj.value("sigma", 1.0);
    noise.dof = nj.value("dof", 3);
  }
  Environment env(mu, noise, bound, split_seed(seed, 0xE));

  SolverConfig solver = solver_from_json(j);
  const Design lambda = j.contains("design")
                            ? Design{Eigen::Map<const VectorXd>(
                                  j.at("design").get<std::vector<double>>().data(),
                                  static_cast<Eigen::Index>(
                                      j.at("design").get<std::vector<double>>().size()))}
                            : solve_design(inst.problem, solver).design;

  json out;
  if (estimator == "rips" || estimator == "ips") {
    RobustMeanConfig robust;
    robust.delta = j.value("delta", 0.05);
    robust.variance_bound = bound * bound + noise.sigma * noise.sigma;
    const std::string kind = j.value("robust", std::string("catoni"));
    robust.kind = kind == "median_of_means" ? RobustKind::median_of_means : RobustKind::catoni;

    const SampleBatch batch = draw_batch(lambda, inst.problem.gamma, tau,
                                         split_seed(seed, 0xF),
                                         [&](int arm) { return env.pull(arm); });
    if (estimator == "ips") {
      const VectorXd vals = ips_estimate(inst.arms, inst.problem.directions, batch);
      out["w_values"] = std::vector<double>(vals.data(), vals.data() + vals.size());
    } else {
      const EstimateSet est =
          rips_from_batch(inst.arms, inst.problem.directions, batch, robust, true);
      out["w_values"] = std::vector<double>(est.w_values.data(),
                                            est.w_values.data() + est.w_values.size());
      out["theta_coeffs"] = std::vector<double>(
          est.theta_hat.coeffs.data(), est.theta_hat.coeffs.data() + est.theta_hat.coeffs.size());
      out["minmax_value"] = est.minmax_value;
    }
  } else if (estimator == "rls") {
    const SampleBatch batch = draw_batch(lambda, inst.problem.gamma, tau,
                                         split_seed(seed, 0xF),
                                         [&](int arm) { return env.pull(arm); });
    const double reg = j.value("rls_gamma", static_cast<double>(tau) * inst.problem.gamma);
    const DualVector theta = rls_fit(inst.arms, batch, reg);
    out["theta_coeffs"] = std::vector<double>(theta.coeffs.data(),
                                              theta.coeffs.data() + theta.coeffs.size());
  } else {
    throw ConfigError("unknown estimator: " + estimator);
  }
  write_output(out, out_path);
  return 0;
}

int cmd_experiment(const std::string& name, const std::string& config_path,
                   const std::string& out_path, const std::optional<std::uint64_t>& seed,
                   const std::optional<int>& reps, const std::optional<int>& parallelism,
                   const std::string& scale) {
  ExperimentConfig config;
  if (!config_path.empty()) config = config_from_json(load_json(config_path));
  if (!name.empty()) config.experiment = name;
  if (seed) config.seed = *seed;
  if (reps) config.replications = *reps;
  if (parallelism) config.parallelism = *parallelism;
  if (!scale.empty()) config.scale = scale;
  if (!out_path.empty()) config.output_path = out_path;
  apply_defaults(config);

  const ExperimentOutput out = run_experiment(config);
  emit_results(out.rows, out.summary, config.output_path);
  std::cout << "wrote " << out.rows.size() << " rows to " << config.output_path << " and "
            << summary_json_path(config.output_path) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"experimental design, robust estimation and kernel bandit toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, scale;
  std::optional<std::uint64_t> seed_opt;
  std::optional<int> reps_opt, par_opt;
  std::string experiment_name;

  const auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "JSON config file");
    if (needs_config) opt->required();
    cmd->add_option("--out", out_path, "output path");
    cmd->add_option("--seed", seed_opt, "seed override");
  };

  CLI::App* design = app.add_subcommand("design", "solve a continuous design");
  add_common(design, true);
  CLI::App* round = app.add_subcommand("round", "round a design to an allocation");
  add_common(round, true);
  CLI::App* estimate = app.add_subcommand("estimate", "run one estimator on a schedule");
  add_common(estimate, true);

  const auto add_experiment_flags = [&](CLI::App* cmd) {
    add_common(cmd, false);
    cmd->add_option("--reps", reps_opt, "replication count");
    cmd->add_option("--parallelism", par_opt, "worker count");
    cmd->add_option("--scale", scale, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
  };
  CLI::App* bregret = app.add_subcommand("bandit-regret", "regret-minimization experiment");
  add_experiment_flags(bregret);
  CLI::App* bpe = app.add_subcommand("bandit-pe", "pure-exploration experiment");
  add_experiment_flags(bpe);
  CLI::App* experiment = app.add_subcommand("experiment", "named experiment harness");
  experiment->add_option("name", experiment_name, "experiment name")->required();
  add_experiment_flags(experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    const std::uint64_t seed = seed_opt.value_or(1);
    if (design->parsed()) return cmd_design(config_path, out_path, seed);
    if (round->parsed()) return cmd_round(config_path, out_path, seed);
    if (estimate->parsed()) return cmd_estimate(config_path, out_path, seed);
    if (bregret->parsed())
      return cmd_experiment("bandit_regret", config_path, out_path, seed_opt, reps_opt,
                            par_opt, scale);
    if (bpe->parsed())
      return cmd_experiment("bandit_pe", config_path, out_path, seed_opt, reps_opt, par_opt,
                            scale);
    if (experiment->parsed())
      return cmd_experiment(experiment_name, config_path, out_path, seed_opt, reps_opt,
                            par_opt, scale);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
