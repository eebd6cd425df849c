#include "kbandit/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "kbandit/estimation.hpp"
#include "kbandit/rounding.hpp"

namespace kbandit {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
  static const std::vector<std::string> known = {"g_optimal", "kernel_rbf", "ips_vs_rips",
                                                 "bandit_regret", "bandit_pe"};
  if (std::find(known.begin(), known.end(), experiment) == known.end())
    throw ConfigError("unknown experiment: " + experiment);
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (scale != "desk" && scale != "paper") throw ConfigError("scale must be desk or paper");
  for (std::size_t i = 1; i < T_grid.size(); ++i)
    if (T_grid[i] <= T_grid[i - 1]) throw ConfigError("T_grid must be strictly increasing");
  if (noise != "gaussian" && noise != "student_t" && noise != "none")
    throw ConfigError("noise must be gaussian, student_t or none");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  read_field(j, "experiment", c.experiment);
  read_field(j, "scale", c.scale);
  read_field(j, "d", c.d);
  read_field(j, "n", c.n);
  read_field(j, "m", c.m);
  read_field(j, "m_list", c.m_list);
  read_field(j, "T_grid", c.T_grid);
  read_field(j, "noise", c.noise);
  read_field(j, "sigma", c.sigma);
  read_field(j, "student_dof", c.student_dof);
  read_field(j, "kernel_noise", c.kernel_noise);
  read_field(j, "kernel_noise_is_std", c.kernel_noise_is_std);
  read_field(j, "misspec_h", c.misspec_h);
  read_field(j, "replications", c.replications);
  read_field(j, "seed", c.seed);
  read_field(j, "output_path", c.output_path);
  read_field(j, "parallelism", c.parallelism);
  read_field(j, "delta", c.delta);
  read_field(j, "gamma", c.gamma);
  read_field(j, "bandwidth", c.bandwidth);
  read_field(j, "solver_iters", c.solver_iters);
  read_field(j, "solver_lr0", c.solver_lr0);
  read_field(j, "algo", c.algo);
  read_field(j, "horizon", c.horizon);
  read_field(j, "eps_target", c.eps_target);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["scale"] = c.scale;
  j["d"] = c.d;
  j["n"] = c.n;
  j["m"] = c.m;
  j["m_list"] = c.m_list;
  j["T_grid"] = c.T_grid;
  j["noise"] = c.noise;
  j["sigma"] = c.sigma;
  j["student_dof"] = c.student_dof;
  j["kernel_noise"] = c.kernel_noise;
  j["kernel_noise_is_std"] = c.kernel_noise_is_std;
  j["misspec_h"] = c.misspec_h;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["output_path"] = c.output_path;
  j["parallelism"] = c.parallelism;
  j["delta"] = c.delta;
  j["gamma"] = c.gamma;
  j["bandwidth"] = c.bandwidth;
  j["solver_iters"] = c.solver_iters;
  j["solver_lr0"] = c.solver_lr0;
  j["algo"] = c.algo;
  j["horizon"] = c.horizon;
  j["eps_target"] = c.eps_target;
  return j;
}

void apply_defaults(ExperimentConfig& c) {
  const bool paper = c.scale == "paper";
  if (c.experiment == "g_optimal") {
    if (c.d < 0) c.d = paper ? 50 : 20;
    if (c.n < 0) c.n = c.d * (c.d + 1) / 2;
    if (c.gamma < 0.0) c.gamma = 0.0;
    if (c.solver_iters < 0) c.solver_iters = 4000;
    if (c.T_grid.empty()) {
      const long s = c.n;
      c.T_grid = {s / 7, s / 4, s / 2, s, 2 * s, 4 * s};
      std::sort(c.T_grid.begin(), c.T_grid.end());
    }
  } else if (c.experiment == "kernel_rbf") {
    if (c.m < 0) c.m = paper ? 500 : 100;
    if (c.gamma < 0.0) c.gamma = 0.005;
    if (c.solver_iters < 0) c.solver_iters = 3000;
    if (c.T_grid.empty()) {
      c.T_grid = {c.m / 10, c.m / 5,      c.m * 3 / 10, c.m * 2 / 5,
                  c.m / 2,  c.m * 7 / 10, c.m * 9 / 10, static_cast<long>(c.m) - 1};
      std::sort(c.T_grid.begin(), c.T_grid.end());
      c.T_grid.erase(std::unique(c.T_grid.begin(), c.T_grid.end()), c.T_grid.end());
    }
  } else if (c.experiment == "ips_vs_rips") {
    if (c.m_list.empty()) c.m_list = paper ? std::vector<int>{12, 14, 16}
                                           : std::vector<int>{8, 12, 16};
    if (c.gamma < 0.0) c.gamma = 0.0;
    if (c.solver_iters < 0) c.solver_iters = 800;
  } else {  // bandit experiments
    if (c.d < 0) c.d = 5;
    if (c.n < 0) c.n = 8;
    if (c.gamma < 0.0) c.gamma = 1e-4;
    if (c.solver_iters < 0) c.solver_iters = 1500;
    if (c.T_grid.empty() && c.experiment == "bandit_regret")
      c.T_grid = {c.horizon / 4, c.horizon / 2, c.horizon};
  }
  c.validate();
}

// ---------------------------------------------------------------------------
// Scenario generators
// ---------------------------------------------------------------------------

Scenario gen_g_optimal_scenario(int d, int n, std::uint64_t seed) {
  if (d <= 10) throw std::invalid_argument("g_optimal scenario needs d > 10");
  if (n < 1) n = d * (d + 1) / 2;

  Rng rng(split_seed(seed, 0xA));
  MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double sd = j < d - 10 ? 1.0 : std::sqrt(0.1);
      pts(i, j) = sd * rng.normal();
    }
    pts.row(i) /= pts.row(i).norm();
  }

  Scenario sc{ArmSet(std::move(pts), KernelSpec::Linear()), {}, {}, {}, 0.0, 0.0};
  const VectorXd theta = VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  sc.arm_truth = sc.arms.points() * theta;
  sc.metric_directions.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sc.metric_directions.push_back(DualVector::unit(n, i));
  sc.metric_truth = sc.arm_truth;
  sc.reward_bound = sc.arm_truth.cwiseAbs().maxCoeff();
  sc.theta_norm = theta.norm();
  return sc;
}

Scenario gen_kernel_scenario(int m, double bandwidth, std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("kernel scenario needs m >= 2");
  const int n = m + 1;
  MatrixXd pts(n, 1);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(m);
    pts(i, 0) = t * t;
  }

  Scenario sc{ArmSet(std::move(pts), KernelSpec::Rbf(bandwidth)), {}, {}, {}, 0.0, 0.0};

  // Smooth two-bump target in the span of the features, unit RKHS norm. Bump
  // width is twice the kernel bandwidth so the target lives at the kernel's
  // own length scale.
  Rng rng(split_seed(seed, 0xB));
  VectorXd beta(n);
  const double width = 2.0 * bandwidth;
  const double a1 = 0.8 + 0.4 * rng.uniform();
  const double a2 = -(0.8 + 0.4 * rng.uniform());
  for (int i = 0; i < n; ++i) {
    const double x = sc.arms.points()(i, 0);
    beta[i] = a1 * std::exp(-std::pow((x - 0.25) / width, 2)) +
              a2 * std::exp(-std::pow((x - 0.75) / width, 2));
  }
  const double norm = std::sqrt(beta.dot(sc.arms.gram() * beta));
  beta /= norm;

  sc.arm_truth = sc.arms.gram() * beta;
  sc.metric_directions.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sc.metric_directions.push_back(DualVector::unit(n, i));
  sc.metric_truth = sc.arm_truth;
  sc.reward_bound = sc.arm_truth.cwiseAbs().maxCoeff();
  sc.theta_norm = 1.0;
  return sc;
}

Scenario gen_ips_vs_rips_scenario(int m, std::uint64_t seed) {
  (void)seed;  // the instance is deterministic
  if (m < 2) throw std::invalid_argument("ips_vs_rips scenario needs m >= 2");
  const int d = m * m + m;

  Scenario sc{ArmSet(MatrixXd::Identity(d, d), KernelSpec::Linear()), {}, {}, {}, 0.0, 0.0};
  sc.arm_truth = VectorXd::Constant(d, -1.0);  // theta* = -1 on basis arms
  sc.metric_directions.reserve(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m * m; ++i) {
    DualVector v = DualVector::zero(d);
    for (int j = 0; j < m; ++j) v.coeffs[j] = 1.0;
    v.coeffs[i + m] += 1.0;
    sc.metric_directions.push_back(std::move(v));
  }
  sc.metric_truth = VectorXd::Constant(m * m, -static_cast<double>(m + 1));
  sc.reward_bound = 1.0;
  sc.theta_norm = std::sqrt(static_cast<double>(d));
  return sc;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kSupError = "sup_error";
constexpr const char* kNoEstimate = "no_estimate";

// Least squares over an accumulated moment matrix; nullopt when singular.
std::optional<VectorXd> solve_ols(const MatrixXd& moment, const VectorXd& rhs) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(moment, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::nullopt;
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > hi * 1e-10) || hi <= 0.0) return std::nullopt;
  return Eigen::LDLT<MatrixXd>(moment).solve(rhs);
}

double noise_std(const ExperimentConfig& c) {
  if (c.experiment == "kernel_rbf")
    return c.kernel_noise_is_std ? c.kernel_noise : std::sqrt(c.kernel_noise);
  return c.sigma;
}

double draw_noise(const ExperimentConfig& c, double sd, Rng& rng) {
  if (c.noise == "none") return 0.0;
  if (c.noise == "student_t") {
    const double dof = static_cast<double>(c.student_dof);
    return sd * std::sqrt((dof - 2.0) / dof) * rng.student_t(c.student_dof);
  }
  return sd * rng.normal();
}

// <theta_hat, v> for every metric direction of the scenario, from the dual
// coefficients.
VectorXd dual_predictions(const Scenario& sc, const DualVector& theta) {
  const VectorXd arm_vals = sc.arms.gram() * theta.coeffs;
  VectorXd out(static_cast<Eigen::Index>(sc.metric_directions.size()));
  for (std::size_t v = 0; v < sc.metric_directions.size(); ++v)
    out[static_cast<Eigen::Index>(v)] = sc.metric_directions[v].coeffs.dot(arm_vals);
  return out;
}

VectorXd explicit_predictions(const Scenario& sc, const VectorXd& theta_d) {
  const VectorXd arm_vals = sc.arms.points() * theta_d;
  VectorXd out(static_cast<Eigen::Index>(sc.metric_directions.size()));
  for (std::size_t v = 0; v < sc.metric_directions.size(); ++v)
    out[static_cast<Eigen::Index>(v)] = sc.metric_directions[v].coeffs.dot(arm_vals);
  return out;
}

double sup_error(const Scenario& sc, const VectorXd& predictions) {
  return (predictions - sc.metric_truth).cwiseAbs().maxCoeff();
}

struct OlsAccumulator {
  MatrixXd moment;
  VectorXd rhs;

  explicit OlsAccumulator(int d) : moment(MatrixXd::Zero(d, d)), rhs(VectorXd::Zero(d)) {}

  void add(const Eigen::RowVectorXd& x, double y) {
    moment.noalias() += x.transpose() * x;
    rhs.noalias() += x.transpose() * y;
  }
};

// Pull every arm `counts[i]` times in index order against fresh noise.
void pull_allocation(const Scenario& sc, const VectorXi& counts, const ExperimentConfig& cfg,
                     double sd, Rng& rng, OlsAccumulator& acc) {
  for (int i = 0; i < counts.size(); ++i)
    for (int c = 0; c < counts[i]; ++c)
      acc.add(sc.arms.points().row(i), sc.arm_truth[i] + draw_noise(cfg, sd, rng));
}

struct RowSink {
  std::vector<ResultRow>& rows;
  std::string experiment;
  std::uint64_t seed;

  void value(const std::string& estimator, long T, int rep, double v) {
    rows.push_back({experiment, estimator, T, rep, kSupError, v, seed});
  }
  void sentinel(const std::string& estimator, long T, int rep) {
    rows.push_back({experiment, estimator, T, rep, kNoEstimate, 1.0, seed});
  }
  void metric(const std::string& estimator, long T, int rep, const std::string& name, double v) {
    rows.push_back({experiment, estimator, T, rep, name, v, seed});
  }
};

void run_replications(int reps, int parallelism,
                      const std::function<std::vector<ResultRow>(int)>& body,
                      std::vector<ResultRow>& out) {
  std::vector<std::vector<ResultRow>> buffers(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  const int workers = std::max(1, std::min(parallelism, reps));
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
        try {
          buffers[static_cast<std::size_t>(r)] = body(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  for (auto& buf : buffers) out.insert(out.end(), buf.begin(), buf.end());
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.experiment, a.estimator, a.T, a.rep, a.metric) <
           std::tie(b.experiment, b.estimator, b.T, b.rep, b.metric);
  });
}

json summarize(const ExperimentConfig& config, const std::vector<ResultRow>& rows) {
  json groups;  // estimator -> T -> metric -> value list
  for (const ResultRow& row : rows) {
    auto& cell = groups[row.estimator][std::to_string(row.T)][row.metric];
    if (cell.is_null()) cell = json::array();
    cell.push_back(row.value);
  }
  json out;
  out["experiment"] = config.experiment;
  out["config"] = config_to_json(config);
  json est_summary;
  for (auto& [est, by_t] : groups.items()) {
    for (auto& [t, by_metric] : by_t.items()) {
      for (auto& [metric, values] : by_metric.items()) {
        const std::size_t n = values.size();
        double mean = 0.0;
        for (const auto& v : values) mean += v.get<double>();
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& v : values) {
          const double d = v.get<double>() - mean;
          var += d * d;
        }
        const double stderr_v =
            n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
        est_summary[est][t][metric] = {{"mean", mean}, {"stderr", stderr_v}, {"n", n}};
      }
    }
  }
  out["estimators"] = est_summary;
  return out;
}

// ------------------------- estimation experiments --------------------------

struct EstimationShared {
  Scenario scenario;
  DesignSolution design;
  Design reduced;                       // caratheodory output (g_optimal only)
  long reduced_support = 0;
  std::vector<std::optional<Allocation>> regsel;  // per T
  std::vector<std::optional<Allocation>> ptr;     // per T (kernel only)
  std::vector<std::optional<Allocation>> carath;  // per T
};

SolverConfig experiment_solver(const ExperimentConfig& c) {
  SolverConfig s;
  s.max_iters = c.solver_iters;
  s.lr0 = c.solver_lr0;
  s.tol = 1e-9;
  return s;
}

EstimationShared prepare_g_optimal(const ExperimentConfig& c) {
  EstimationShared sh{gen_g_optimal_scenario(c.d, c.n, c.seed), {}, {}, 0, {}, {}, {}};
  DesignProblem problem;
  problem.arms = &sh.scenario.arms;
  problem.directions = sh.scenario.metric_directions;
  problem.gamma = c.gamma;
  sh.design = solve_design(problem, experiment_solver(c));

  sh.reduced = caratheodory_reduce(sh.scenario.arms, sh.design.design);
  sh.reduced_support = (sh.reduced.weights.array() > 0.0).count();

  for (long T : c.T_grid) {
    if (T > sh.reduced_support)
      sh.carath.push_back(round_ceiling(sh.reduced, T));
    else
      sh.carath.push_back(std::nullopt);
    try {
      sh.regsel.push_back(round_swap(problem, sh.design.design, T, 1.0));
    } catch (const std::invalid_argument&) {
      sh.regsel.push_back(std::nullopt);
    }
  }
  return sh;
}

EstimationShared prepare_kernel(const ExperimentConfig& c) {
  EstimationShared sh{gen_kernel_scenario(c.m, c.bandwidth, c.seed), {}, {}, 0, {}, {}, {}};
  DesignProblem problem;
  problem.arms = &sh.scenario.arms;
  problem.directions = sh.scenario.metric_directions;
  problem.gamma = c.gamma;
  sh.design = solve_design(problem, experiment_solver(c));

  for (long T : c.T_grid) {
    try {
      sh.ptr.push_back(ptr_round(sh.scenario.arms, sh.scenario.metric_directions,
                                 sh.design.design, c.gamma, T, 1.0)
                           .allocation);
    } catch (const std::invalid_argument&) {
      sh.ptr.push_back(std::nullopt);
    }
  }
  return sh;
}

std::vector<ResultRow> g_optimal_rep(const ExperimentConfig& c, const EstimationShared& sh,
                                     int rep) {
  std::vector<ResultRow> rows;
  const std::uint64_t rep_seed = split_seed(c.seed, 1000 + static_cast<std::uint64_t>(rep));
  RowSink sink{rows, c.experiment, rep_seed};
  const Scenario& sc = sh.scenario;
  const double var_term = sc.reward_bound * sc.reward_bound + c.sigma * c.sigma;

  for (std::size_t ti = 0; ti < c.T_grid.size(); ++ti) {
    const long T = c.T_grid[ti];
    Rng noise_rng(split_seed(rep_seed, 10 * ti + 1));
    const SampleBatch batch =
        draw_batch(sh.design.design, c.gamma, T, split_seed(rep_seed, 10 * ti + 2),
                   [&](int arm) { return sc.arm_truth[arm] + draw_noise(c, c.sigma, noise_rng); });

    RobustMeanConfig robust;
    robust.kind = RobustKind::catoni;
    robust.delta = c.delta;
    robust.variance_bound = var_term;
    try {
      const EstimateSet est = rips_from_batch(sc.arms, sc.metric_directions, batch, robust, true);
      sink.value("RIPS", T, rep, sup_error(sc, dual_predictions(sc, est.theta_hat)));
    } catch (const InsufficientSamplesError&) {
      sink.sentinel("RIPS", T, rep);
    }

    const VectorXd ips = ips_estimate(sc.arms, sc.metric_directions, batch);
    sink.value("IPS", T, rep, (ips - sc.metric_truth).cwiseAbs().maxCoeff());

    const auto run_ls = [&](const char* name, const std::optional<Allocation>& alloc,
                            std::uint64_t stream) {
      if (!alloc) {
        sink.sentinel(name, T, rep);
        return;
      }
      Rng rng(split_seed(rep_seed, stream));
      OlsAccumulator acc(sc.arms.dim());
      pull_allocation(sc, alloc->counts, c, c.sigma, rng, acc);
      const auto theta = solve_ols(acc.moment, acc.rhs);
      if (!theta) {
        sink.sentinel(name, T, rep);
        return;
      }
      sink.value(name, T, rep, sup_error(sc, explicit_predictions(sc, *theta)));
    };
    run_ls("LS Caratheodory", sh.carath[ti], 10 * ti + 3);
    run_ls("LS Regsel", sh.regsel[ti], 10 * ti + 4);

    // LS Sampling: i.i.d. draws, ordinary least squares.
    {
      Rng rng(split_seed(rep_seed, 10 * ti + 5));
      Rng pick(split_seed(rep_seed, 10 * ti + 6));
      std::vector<double> cumulative(static_cast<std::size_t>(sc.arms.n()));
      double accum = 0.0;
      for (int i = 0; i < sc.arms.n(); ++i) {
        accum += sh.design.design.weights[i];
        cumulative[static_cast<std::size_t>(i)] = accum;
      }
      OlsAccumulator acc(sc.arms.dim());
      for (long t = 0; t < T; ++t) {
        const int arm = pick.categorical(cumulative);
        acc.add(sc.arms.points().row(arm), sc.arm_truth[arm] + draw_noise(c, c.sigma, rng));
      }
      const auto theta = solve_ols(acc.moment, acc.rhs);
      if (!theta)
        sink.sentinel("LS Sampling", T, rep);
      else
        sink.value("LS Sampling", T, rep, sup_error(sc, explicit_predictions(sc, *theta)));
    }
  }
  return rows;
}

std::vector<ResultRow> kernel_rep(const ExperimentConfig& c, const EstimationShared& sh,
                                  int rep) {
  std::vector<ResultRow> rows;
  const std::uint64_t rep_seed = split_seed(c.seed, 2000 + static_cast<std::uint64_t>(rep));
  RowSink sink{rows, c.experiment, rep_seed};
  const Scenario& sc = sh.scenario;
  const double sd = noise_std(c);
  const double var_term = sc.reward_bound * sc.reward_bound + sd * sd;

  for (std::size_t ti = 0; ti < c.T_grid.size(); ++ti) {
    const long T = c.T_grid[ti];
    Rng noise_rng(split_seed(rep_seed, 10 * ti + 1));
    const SampleBatch batch =
        draw_batch(sh.design.design, c.gamma, T, split_seed(rep_seed, 10 * ti + 2),
                   [&](int arm) { return sc.arm_truth[arm] + draw_noise(c, sd, noise_rng); });

    RobustMeanConfig robust;
    robust.kind = RobustKind::catoni;
    robust.delta = c.delta;
    robust.variance_bound = var_term;
    try {
      const EstimateSet est = rips_from_batch(sc.arms, sc.metric_directions, batch, robust, true);
      sink.value("RIPS", T, rep, sup_error(sc, dual_predictions(sc, est.theta_hat)));
    } catch (const InsufficientSamplesError&) {
      sink.sentinel("RIPS", T, rep);
    }

    const VectorXd ips = ips_estimate(sc.arms, sc.metric_directions, batch);
    sink.value("IPS", T, rep, (ips - sc.metric_truth).cwiseAbs().maxCoeff());

    if (!sh.ptr[ti]) {
      sink.sentinel("PTR", T, rep);
    } else {
      Rng rng(split_seed(rep_seed, 10 * ti + 3));
      SampleBatch alloc_batch;
      alloc_batch.design_used = sh.design.design;
      alloc_batch.gamma = c.gamma;
      std::vector<double> ys;
      for (int i = 0; i < sh.ptr[ti]->counts.size(); ++i)
        for (int k = 0; k < sh.ptr[ti]->counts[i]; ++k) {
          alloc_batch.arm_indices.push_back(i);
          ys.push_back(sc.arm_truth[i] + draw_noise(c, sd, rng));
        }
      alloc_batch.rewards =
          Eigen::Map<const VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
      const DualVector theta =
          rls_fit(sc.arms, alloc_batch, static_cast<double>(T) * c.gamma);
      sink.value("PTR", T, rep, sup_error(sc, dual_predictions(sc, theta)));
    }
  }
  return rows;
}

std::vector<ResultRow> run_estimation_experiment(const ExperimentConfig& c) {
  const EstimationShared shared =
      c.experiment == "g_optimal" ? prepare_g_optimal(c) : prepare_kernel(c);
  std::vector<ResultRow> rows;
  run_replications(
      c.replications, c.parallelism,
      [&](int rep) {
        return c.experiment == "g_optimal" ? g_optimal_rep(c, shared, rep)
                                           : kernel_rep(c, shared, rep);
      },
      rows);
  return rows;
}

std::vector<ResultRow> run_ips_vs_rips(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  for (int m : c.m_list) {
    const long T = 4L * m;
    Scenario sc = gen_ips_vs_rips_scenario(m, c.seed);
    DesignProblem problem;
    problem.arms = &sc.arms;
    problem.directions = sc.metric_directions;
    problem.gamma = c.gamma;
    const DesignSolution design = solve_design(problem, experiment_solver(c));
    const double var_term = sc.reward_bound * sc.reward_bound + c.sigma * c.sigma;

    run_replications(
        c.replications, c.parallelism,
        [&](int rep) {
          std::vector<ResultRow> local;
          const std::uint64_t rep_seed =
              split_seed(c.seed, 3000 + 97 * static_cast<std::uint64_t>(m) +
                                      static_cast<std::uint64_t>(rep));
          RowSink sink{local, c.experiment, rep_seed};
          Rng noise_rng(split_seed(rep_seed, 1));
          const SampleBatch batch = draw_batch(
              design.design, c.gamma, T, split_seed(rep_seed, 2),
              [&](int arm) { return sc.arm_truth[arm] + draw_noise(c, c.sigma, noise_rng); });

          RobustMeanConfig robust;
          robust.kind = RobustKind::catoni;
          robust.delta = c.delta;
          robust.variance_bound = var_term;
          const EstimateSet est =
              rips_from_batch(sc.arms, sc.metric_directions, batch, robust, true);
          sink.value("RIPS", T, rep, sup_error(sc, dual_predictions(sc, est.theta_hat)));

          const VectorXd ips = ips_estimate(sc.arms, sc.metric_directions, batch);
          sink.value("IPS", T, rep, (ips - sc.metric_truth).cwiseAbs().maxCoeff());
          return local;
        },
        rows);
  }
  return rows;
}

// --------------------------- bandit experiments ----------------------------

struct BanditInstance {
  ArmSet arms;
  VectorXd mu;
  double B = 0.0;
  double h = 0.0;
};

BanditInstance gen_bandit_instance(int d, int n, double h, std::uint64_t seed) {
  Rng rng(split_seed(seed, 0xC));
  MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) pts(i, j) = rng.normal();
    pts.row(i) /= pts.row(i).norm();
  }
  BanditInstance inst{ArmSet(std::move(pts), KernelSpec::Linear()), {}, 0.0, h};
  const VectorXd theta = inst.arms.points().row(0).transpose();
  VectorXd truth = inst.arms.points() * theta;
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (truth[i] > truth[best]) best = i;
  inst.mu = truth;
  for (int i = 0; i < n; ++i) {
    const double sign = (i == best) ? -1.0 : (i % 2 == 0 ? 1.0 : -1.0);
    inst.mu[i] += sign * h;
  }
  inst.B = inst.mu.cwiseAbs().maxCoeff() + 1e-9;
  return inst;
}

NoiseSpec noise_spec(const ExperimentConfig& c) {
  NoiseSpec spec;
  spec.sigma = c.sigma;
  spec.dof = c.student_dof;
  if (c.noise == "none")
    spec.kind = NoiseSpec::Kind::none;
  else if (c.noise == "student_t")
    spec.kind = NoiseSpec::Kind::student_t;
  else
    spec.kind = NoiseSpec::Kind::gaussian;
  return spec;
}

std::vector<ResultRow> run_bandit_experiment(const ExperimentConfig& c) {
  const BanditInstance inst = gen_bandit_instance(c.d, c.n, c.misspec_h, c.seed);
  const bool regret_mode = c.experiment == "bandit_regret";
  const std::string estimator = c.algo == "ptr" ? "PTR" : "RIPS";

  std::vector<ResultRow> rows;
  run_replications(
      c.replications, c.parallelism,
      [&](int rep) {
        std::vector<ResultRow> local;
        const std::uint64_t rep_seed =
            split_seed(c.seed, 4000 + static_cast<std::uint64_t>(rep));
        RowSink sink{local, c.experiment, rep_seed};

        Environment env(inst.mu, noise_spec(c), inst.B, rep_seed, inst.h);
        BanditConfig bc;
        bc.delta = c.delta;
        bc.gamma = c.gamma;
        bc.sigma = c.sigma;
        bc.B = inst.B;
        bc.solver = experiment_solver(c);
        bc.horizon = c.horizon;
        bc.eps_target = c.eps_target;

        if (regret_mode) {
          const RunResult run = c.algo == "ptr" ? run_ptr_regret(inst.arms, env, bc)
                                                : run_rips_regret(inst.arms, env, bc);
          for (long T : c.T_grid) {
            const std::size_t at = static_cast<std::size_t>(
                std::min<long>(T, static_cast<long>(run.regret_trace.size())));
            const double v = at == 0 ? 0.0 : run.regret_trace[at - 1];
            sink.metric(estimator, T, rep, "cumulative_regret", v);
          }
          sink.metric(estimator, c.horizon, rep, "phases",
                      static_cast<double>(run.phases.size()));
        } else {
          std::vector<int> all;
          for (int i = 0; i < inst.arms.n(); ++i) all.push_back(i);
          const RunResult run = c.algo == "ptr"
                                    ? run_ptr_pe(inst.arms, all, all, env, bc)
                                    : run_rips_pe(inst.arms, all, all, env, bc);
          sink.metric(estimator, 0, rep, "pulls", static_cast<double>(run.total_pulls));
          sink.metric(estimator, 0, rep, "returned_gap", run.returned_gap);
          sink.metric(estimator, 0, rep, "eps_good",
                      run.returned_gap <= c.eps_target ? 1.0 : 0.0);
        }
        return local;
      },
      rows);
  return rows;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config_in) {
  ExperimentConfig config = config_in;
  apply_defaults(config);

  ExperimentOutput out;
  if (config.experiment == "g_optimal" || config.experiment == "kernel_rbf")
    out.rows = run_estimation_experiment(config);
  else if (config.experiment == "ips_vs_rips")
    out.rows = run_ips_vs_rips(config);
  else
    out.rows = run_bandit_experiment(config);

  sort_rows(out.rows);
  out.summary = summarize(config, out.rows);
  return out;
}

std::string summary_json_path(const std::string& output_path) {
  const std::string suffix = ".csv";
  if (output_path.size() > suffix.size() &&
      output_path.compare(output_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return output_path.substr(0, output_path.size() - suffix.size()) + ".json";
  return output_path + ".json";
}

void emit_results(const std::vector<ResultRow>& rows, const nlohmann::json& summary,
                  const std::string& output_path) {
  std::ofstream csv(output_path);
  if (!csv) throw std::runtime_error("emit_results: cannot open " + output_path);
  csv << "experiment,estimator,T,rep,metric,value,seed\n";
  char buf[64];
  for (const ResultRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.value);
    csv << row.experiment << ',' << row.estimator << ',' << row.T << ',' << row.rep << ','
        << row.metric << ',' << buf << ',' << row.seed << '\n';
  }
  csv.close();
  if (!csv) throw std::runtime_error("emit_results: write failed for " + output_path);

  const std::string json_path = summary_json_path(output_path);
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("emit_results: cannot open " + json_path);
  js << summary.dump(2) << '\n';
  js.close();
  if (!js) throw std::runtime_error("emit_results: write failed for " + json_path);
}

}  // namespace kbandit
