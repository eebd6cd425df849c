#pragma once

#include <optional>
#include <vector>

#include "kbandit/design_opt.hpp"
#include "kbandit/estimation.hpp"
#include "kbandit/rng.hpp"

namespace kbandit {

struct NoiseSpec {
  enum class Kind { none, gaussian, student_t };
  Kind kind = Kind::gaussian;
  double sigma = 1.0;  // target standard deviation of the noise
  int dof = 3;         // student_t only, must be > 2
};

// Stochastic reward source. Pulls mutate the internal RNG; the reward stream
// is fully determined by the seed and the call order.
class Environment {
public:
  Environment(VectorXd mu, NoiseSpec noise, double B, std::uint64_t rng_seed,
              std::optional<double> h_report = std::nullopt);

  double pull(int arm);

  const VectorXd& mu() const { return mu_; }
  const NoiseSpec& noise() const { return noise_; }
  double reward_bound() const { return bound_; }
  std::optional<double> h_report() const { return h_report_; }
  std::uint64_t seed() const { return seed_; }

private:
  VectorXd mu_;
  NoiseSpec noise_;
  double bound_;
  std::optional<double> h_report_;
  std::uint64_t seed_;
  Rng rng_;
};

struct PhaseRecord {
  int ell = 0;
  double epsilon = 0.0;
  long tau = 0;
  std::vector<int> surviving;
  double f_value = 0.0;
  long cum_pulls = 0;
  double cum_regret = 0.0;
};

struct RunResult {
  enum class Mode { regret, pure_exploration };
  Mode mode = Mode::regret;
  std::vector<double> regret_trace;  // cumulative, one entry per pull (regret mode)
  int returned_arm = -1;
  double returned_gap = 0.0;
  long total_pulls = 0;
  std::vector<PhaseRecord> phases;
};

struct BanditConfig {
  double delta = 0.05;
  double gamma = 1e-6;
  double sigma = 1.0;
  double B = 1.0;
  RobustMeanConfig robust;  // kind and c0; delta and variance set per phase
  SolverConfig solver;
  bool eliminate_with_w_differences = false;  // halves the threshold when set
  long horizon = 10000;                       // regret mode
  double eps_target = 0.01;                   // pure-exploration stop: eps_l < eps_target / 8
  int z_cap = 200;
  double ptr_eps = 1.0;  // rounding slack for the PTR variants
};

// Phased elimination with the robust per-direction estimator; directions are
// the surviving arms themselves.
RunResult run_rips_regret(const ArmSet& arms, Environment& env, const BanditConfig& config);

// Pure exploration over a target set. `joint` holds sampling and target arms
// together; designs are supported on x_idx while elimination runs on z_idx.
// env.mu is indexed by the joint set.
RunResult run_rips_pe(const ArmSet& joint, const std::vector<int>& x_idx,
                      const std::vector<int>& z_idx, Environment& env,
                      const BanditConfig& config);

// Project-then-round variants: rounded allocations and regularized
// least-squares estimates instead of robust IPS scores.
RunResult run_ptr_regret(const ArmSet& arms, Environment& env, const BanditConfig& config);
RunResult run_ptr_pe(const ArmSet& joint, const std::vector<int>& x_idx,
                     const std::vector<int>& z_idx, Environment& env,
                     const BanditConfig& config);

}  // namespace kbandit
