#include "kbandit/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kbandit/rounding.hpp"

namespace kbandit {

Environment::Environment(VectorXd mu, NoiseSpec noise, double B, std::uint64_t rng_seed,
                         std::optional<double> h_report)
    : mu_(std::move(mu)), noise_(noise), bound_(B), h_report_(h_report), seed_(rng_seed),
      rng_(rng_seed) {
  if (mu_.size() < 1) throw ConfigError("environment: empty mean vector");
  if (mu_.cwiseAbs().maxCoeff() > B + 1e-12)
    throw ConfigError("environment: means exceed the reward bound B");
  if (noise_.kind == NoiseSpec::Kind::student_t && noise_.dof <= 2)
    throw ConfigError("environment: student_t noise needs dof > 2");
  if (noise_.sigma < 0.0) throw ConfigError("environment: sigma must be nonnegative");
}

double Environment::pull(int arm) {
  if (arm < 0 || arm >= mu_.size()) throw ConfigError("environment: arm index out of range");
  switch (noise_.kind) {
    case NoiseSpec::Kind::none:
      return mu_[arm];
    case NoiseSpec::Kind::gaussian:
      return mu_[arm] + noise_.sigma * rng_.normal();
    case NoiseSpec::Kind::student_t: {
      const double dof = static_cast<double>(noise_.dof);
      const double scale = noise_.sigma * std::sqrt((dof - 2.0) / dof);
      return mu_[arm] + scale * rng_.student_t(noise_.dof);
    }
  }
  throw ConfigError("environment: unknown noise kind");
}

namespace {

std::vector<int> all_indices(int n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

std::vector<DualVector> unit_directions(int n, const std::vector<int>& arms) {
  std::vector<DualVector> dirs;
  dirs.reserve(arms.size());
  for (int a : arms) dirs.push_back(DualVector::unit(n, a));
  return dirs;
}

// Ordered pairs phi(z) - phi(z'), z != z'. pair_of[i*|Z|+j] maps (z_i, z_j)
// to its direction row, -1 on the diagonal.
std::vector<DualVector> pair_directions(int n, const std::vector<int>& zs,
                                        std::vector<int>& pair_of) {
  const int m = static_cast<int>(zs.size());
  std::vector<DualVector> dirs;
  dirs.reserve(static_cast<std::size_t>(m) * (m - 1));
  pair_of.assign(static_cast<std::size_t>(m) * m, -1);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      DualVector v = DualVector::zero(n);
      v.coeffs[zs[static_cast<std::size_t>(i)]] = 1.0;
      v.coeffs[zs[static_cast<std::size_t>(j)]] = -1.0;
      pair_of[static_cast<std::size_t>(i) * m + j] = static_cast<int>(dirs.size());
      dirs.push_back(std::move(v));
    }
  return dirs;
}

long phase_budget(double q1, double q2) {
  return static_cast<long>(std::ceil(std::max(q1, q2)));
}

}  // namespace

RunResult run_rips_regret(const ArmSet& arms, Environment& env, const BanditConfig& config) {
  if (env.mu().size() != arms.n()) throw ConfigError("run_rips_regret: env/arm size mismatch");
  const int n = arms.n();
  const double mu_star = env.mu().maxCoeff();

  RunResult result;
  result.mode = RunResult::Mode::regret;
  result.regret_trace.reserve(static_cast<std::size_t>(config.horizon));

  std::vector<int> active = all_indices(n);
  double regret = 0.0;
  long pulls = 0;
  const auto play = [&](int arm) {
    env.pull(arm);
    regret += mu_star - env.mu()[arm];
    result.regret_trace.push_back(regret);
    ++pulls;
  };

  const double var_term = config.B * config.B + config.sigma * config.sigma;
  for (int ell = 1; pulls < config.horizon; ++ell) {
    if (active.size() == 1) {
      while (pulls < config.horizon) play(active.front());
      break;
    }
    const double eps = std::ldexp(1.0, -ell);

    DesignProblem problem;
    problem.arms = &arms;
    problem.gamma = config.gamma;
    problem.support = active;
    problem.directions = unit_directions(n, active);
    const DesignSolution sol = solve_design(problem, config.solver);

    // q1 carries the same phase-adjusted log as q2: the plain log(n/delta)
    // can undercut the robust estimator's own sample gate at the per-phase
    // confidence delta/(2 l^2) when the design value is tiny.
    const double phase_log = std::log(4.0 * ell * ell * n / config.delta);
    const double q1 = config.robust.c1() * phase_log;
    const double q2 = config.robust.c0 * config.robust.c0 * var_term / (eps * eps) *
                      sol.objective_value * phase_log;
    const long tau = phase_budget(q1, q2);

    const long take = std::min<long>(tau, config.horizon - pulls);
    SampleBatch batch = draw_batch(
        sol.design, config.gamma, take, split_seed(env.seed(), static_cast<std::uint64_t>(ell)),
        [&](int arm) {
          const double y = env.pull(arm);
          regret += mu_star - env.mu()[arm];
          result.regret_trace.push_back(regret);
          ++pulls;
          return y;
        });

    PhaseRecord rec;
    rec.ell = ell;
    rec.epsilon = eps;
    rec.tau = tau;
    rec.f_value = sol.objective_value;

    if (take < tau) {  // horizon exhausted mid-phase
      rec.surviving = active;
      rec.cum_pulls = pulls;
      rec.cum_regret = regret;
      result.phases.push_back(std::move(rec));
      break;
    }

    RobustMeanConfig robust = config.robust;
    robust.delta = config.delta / (2.0 * ell * ell);
    robust.variance_bound = var_term;
    const EstimateSet est = rips_from_batch(arms, problem.directions, batch, robust,
                                            !config.eliminate_with_w_differences);

    VectorXd values(static_cast<Eigen::Index>(active.size()));
    if (config.eliminate_with_w_differences) {
      values = est.w_values;
    } else {
      const VectorXd all_values = arms.gram() * est.theta_hat.coeffs;
      for (std::size_t i = 0; i < active.size(); ++i)
        values[static_cast<Eigen::Index>(i)] = all_values[active[i]];
    }
    const double top = values.maxCoeff();
    const double threshold = config.eliminate_with_w_differences ? 2.0 * eps : 4.0 * eps;

    std::vector<int> next;
    for (std::size_t i = 0; i < active.size(); ++i)
      if (top - values[static_cast<Eigen::Index>(i)] < threshold) next.push_back(active[i]);

    rec.surviving = next;
    rec.cum_pulls = pulls;
    rec.cum_regret = regret;
    result.phases.push_back(std::move(rec));
    active = std::move(next);
  }

  result.total_pulls = pulls;
  result.returned_arm = active.size() == 1 ? active.front() : -1;
  if (result.returned_arm >= 0)
    result.returned_gap = mu_star - env.mu()[result.returned_arm];
  return result;
}

RunResult run_rips_pe(const ArmSet& joint, const std::vector<int>& x_idx,
                      const std::vector<int>& z_idx, Environment& env,
                      const BanditConfig& config) {
  if (env.mu().size() != joint.n()) throw ConfigError("run_rips_pe: env/arm size mismatch");
  if (z_idx.empty()) throw ConfigError("run_rips_pe: empty target set");
  if (static_cast<int>(z_idx.size()) > config.z_cap)
    throw ConfigError("run_rips_pe: target set exceeds the configured cap");

  RunResult result;
  result.mode = RunResult::Mode::pure_exploration;

  double mu_best = env.mu()[z_idx.front()];
  for (int z : z_idx) mu_best = std::max(mu_best, env.mu()[z]);

  std::vector<int> active = z_idx;
  long pulls = 0;
  const long nz = static_cast<long>(z_idx.size());
  const double var_term = config.B * config.B + config.sigma * config.sigma;

  for (int ell = 1; active.size() > 1; ++ell) {
    const double eps = std::ldexp(1.0, -ell);
    if (eps < config.eps_target / 8.0) break;

    std::vector<int> pair_of;
    DesignProblem problem;
    problem.arms = &joint;
    problem.gamma = config.gamma;
    problem.support = x_idx;
    problem.directions = pair_directions(joint.n(), active, pair_of);
    const DesignSolution sol = solve_design(problem, config.solver);

    // as in the regret loop, q1 uses the phase-adjusted log so the robust
    // estimator's gate is always met
    const double phase_log = std::log(2.0 * ell * ell * nz * nz / config.delta);
    const double q1 = config.robust.c1() * phase_log;
    const double q2 = config.robust.c0 * config.robust.c0 / (eps * eps) * sol.objective_value *
                      var_term * phase_log;
    const long tau = phase_budget(q1, q2);

    SampleBatch batch =
        draw_batch(sol.design, config.gamma, tau,
                   split_seed(env.seed(), static_cast<std::uint64_t>(ell)), [&](int arm) {
                     ++pulls;
                     return env.pull(arm);
                   });

    RobustMeanConfig robust = config.robust;
    robust.delta = config.delta / (2.0 * ell * ell);
    robust.variance_bound = var_term;
    const EstimateSet est = rips_from_batch(joint, problem.directions, batch, robust,
                                            /*fit_theta=*/false);

    // W-differences directly: direction (z', z) estimates <phi(z')-phi(z), theta>.
    const int m = static_cast<int>(active.size());
    std::vector<int> next;
    for (int j = 0; j < m; ++j) {
      double worst = 0.0;
      for (int i = 0; i < m; ++i) {
        if (i == j) continue;
        worst = std::max(worst, est.w_values[pair_of[static_cast<std::size_t>(i) * m + j]]);
      }
      if (worst <= 2.0 * eps) next.push_back(active[static_cast<std::size_t>(j)]);
    }

    PhaseRecord rec;
    rec.ell = ell;
    rec.epsilon = eps;
    rec.tau = tau;
    rec.f_value = sol.objective_value;
    rec.surviving = next;
    rec.cum_pulls = pulls;
    rec.cum_regret = 0.0;
    result.phases.push_back(std::move(rec));
    active = std::move(next);
  }

  result.total_pulls = pulls;
  result.returned_arm = active.front();
  result.returned_gap = mu_best - env.mu()[result.returned_arm];
  return result;
}

namespace {

// Shared phase body for the PTR variants: effective dimension, budget,
// rounded allocation, pulls in arm order, regularized least squares.
struct PtrPhase {
  long tau = 0;
  int d_tilde = 0;
  DualVector theta;
  double f_value = 0.0;
  Design design;
};

PtrPhase ptr_phase(const ArmSet& arms, const DesignProblem& problem, const BanditConfig& config,
                   double eps, int ell, long log_count, long max_pull_budget,
                   const std::function<double(int)>& pull, bool* exhausted) {
  PtrPhase phase;
  const DesignSolution sol = solve_design(problem, config.solver);
  phase.f_value = sol.objective_value;
  phase.design = sol.design;

  RegularizedOperator op(arms, sol.design, config.gamma);
  phase.d_tilde = effective_dim_cutoff(op, config.gamma);

  const double q2 = 2.0 * config.sigma * config.sigma / (eps * eps) * sol.objective_value *
                    std::log(4.0 * ell * ell * log_count / config.delta);
  phase.tau = phase_budget(static_cast<double>(phase.d_tilde), q2);

  const PtrReport report = ptr_round(arms, problem.directions, sol.design, config.gamma,
                                     phase.tau, config.ptr_eps, problem.support);

  SampleBatch batch;
  batch.design_used = sol.design;
  batch.gamma = config.gamma;
  long taken = 0;
  *exhausted = false;
  for (int a = 0; a < report.allocation.counts.size() && !*exhausted; ++a) {
    for (int c = 0; c < report.allocation.counts[a]; ++c) {
      if (taken >= max_pull_budget) {
        *exhausted = true;
        break;
      }
      batch.arm_indices.push_back(a);
      ++taken;
    }
  }
  batch.rewards.resize(taken);
  for (long t = 0; t < taken; ++t)
    batch.rewards[t] = pull(batch.arm_indices[static_cast<std::size_t>(t)]);

  if (!*exhausted)
    phase.theta = rls_fit(arms, batch, static_cast<double>(phase.tau) * config.gamma);
  return phase;
}

}  // namespace

RunResult run_ptr_regret(const ArmSet& arms, Environment& env, const BanditConfig& config) {
  if (env.mu().size() != arms.n()) throw ConfigError("run_ptr_regret: env/arm size mismatch");
  if (!(config.gamma > 0.0)) throw ConfigError("run_ptr_regret: gamma must be positive");
  const int n = arms.n();
  const double mu_star = env.mu().maxCoeff();

  RunResult result;
  result.mode = RunResult::Mode::regret;
  result.regret_trace.reserve(static_cast<std::size_t>(config.horizon));

  std::vector<int> active = all_indices(n);
  double regret = 0.0;
  long pulls = 0;
  const auto play = [&](int arm) {
    const double y = env.pull(arm);
    regret += mu_star - env.mu()[arm];
    result.regret_trace.push_back(regret);
    ++pulls;
    return y;
  };

  for (int ell = 1; pulls < config.horizon; ++ell) {
    if (active.size() == 1) {
      while (pulls < config.horizon) play(active.front());
      break;
    }
    const double eps = std::ldexp(1.0, -ell);

    DesignProblem problem;
    problem.arms = &arms;
    problem.gamma = config.gamma;
    problem.support = active;
    problem.directions = unit_directions(n, active);

    bool exhausted = false;
    const PtrPhase phase = ptr_phase(arms, problem, config, eps, ell, n,
                                     config.horizon - pulls, play, &exhausted);

    PhaseRecord rec;
    rec.ell = ell;
    rec.epsilon = eps;
    rec.tau = phase.tau;
    rec.f_value = phase.f_value;
    if (exhausted) {
      rec.surviving = active;
      rec.cum_pulls = pulls;
      rec.cum_regret = regret;
      result.phases.push_back(std::move(rec));
      break;
    }

    const VectorXd all_values = arms.gram() * phase.theta.coeffs;
    double top = all_values[active.front()];
    for (int a : active) top = std::max(top, all_values[a]);
    std::vector<int> next;
    for (int a : active)
      if (top - all_values[a] < 8.0 * eps) next.push_back(a);

    rec.surviving = next;
    rec.cum_pulls = pulls;
    rec.cum_regret = regret;
    result.phases.push_back(std::move(rec));
    active = std::move(next);
  }

  result.total_pulls = pulls;
  result.returned_arm = active.size() == 1 ? active.front() : -1;
  if (result.returned_arm >= 0)
    result.returned_gap = mu_star - env.mu()[result.returned_arm];
  return result;
}

RunResult run_ptr_pe(const ArmSet& joint, const std::vector<int>& x_idx,
                     const std::vector<int>& z_idx, Environment& env,
                     const BanditConfig& config) {
  if (env.mu().size() != joint.n()) throw ConfigError("run_ptr_pe: env/arm size mismatch");
  if (z_idx.empty()) throw ConfigError("run_ptr_pe: empty target set");
  if (!(config.gamma > 0.0)) throw ConfigError("run_ptr_pe: gamma must be positive");
  if (static_cast<int>(z_idx.size()) > config.z_cap)
    throw ConfigError("run_ptr_pe: target set exceeds the configured cap");

  RunResult result;
  result.mode = RunResult::Mode::pure_exploration;

  double mu_best = env.mu()[z_idx.front()];
  for (int z : z_idx) mu_best = std::max(mu_best, env.mu()[z]);

  std::vector<int> active = z_idx;
  long pulls = 0;
  const long nz = static_cast<long>(z_idx.size());

  for (int ell = 1; active.size() > 1; ++ell) {
    const double eps = std::ldexp(1.0, -ell);
    if (eps < config.eps_target / 8.0) break;

    std::vector<int> pair_of;
    DesignProblem problem;
    problem.arms = &joint;
    problem.gamma = config.gamma;
    problem.support = x_idx;
    problem.directions = pair_directions(joint.n(), active, pair_of);

    bool exhausted = false;
    const PtrPhase phase = ptr_phase(
        joint, problem, config, eps, ell, nz, std::numeric_limits<long>::max(),
        [&](int arm) {
          ++pulls;
          return env.pull(arm);
        },
        &exhausted);

    const VectorXd all_values = joint.gram() * phase.theta.coeffs;
    double top = all_values[active.front()];
    for (int z : active) top = std::max(top, all_values[z]);
    std::vector<int> next;
    for (int z : active)
      if (top - all_values[z] <= eps) next.push_back(z);

    PhaseRecord rec;
    rec.ell = ell;
    rec.epsilon = eps;
    rec.tau = phase.tau;
    rec.f_value = phase.f_value;
    rec.surviving = next;
    rec.cum_pulls = pulls;
    rec.cum_regret = 0.0;
    result.phases.push_back(std::move(rec));
    active = std::move(next);
  }

  result.total_pulls = pulls;
  result.returned_arm = active.front();
  result.returned_gap = mu_best - env.mu()[result.returned_arm];
  return result;
}

}  // namespace kbandit
