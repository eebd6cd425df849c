#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kbandit/feature_space.hpp"

namespace kbandit {

// Continuous design instance: minimize over the simplex
//   f(lambda) = max_v w_v * || v ||^2_{(sum_x lambda_x phi(x) phi(x)^T + gamma I)^{-1}}.
// `support` restricts the simplex to a subset of arms (empty = all arms);
// `weights` are optional per-direction multipliers (empty = all ones).
struct DesignProblem {
  const ArmSet* arms = nullptr;
  std::vector<DualVector> directions;
  double gamma = 0.0;
  std::vector<int> support;
  VectorXd weights;

  void validate() const;
  bool in_support(int arm) const;
};

struct SolverConfig {
  enum class StepRule { mirror_descent, frank_wolfe };

  int max_iters = 5000;
  StepRule step_rule = StepRule::mirror_descent;
  double lr0 = 1.0;
  double tol = 1e-7;  // relative best-value improvement over a 100-iteration window
  std::uint64_t seed = 0;
};

struct DesignSolution {
  Design design;
  double objective_value = 0.0;
  int argmax_direction = 0;
  int iterations_used = 0;
  bool converged = false;
};

// max over directions (ties broken by lowest index).
std::pair<double, int> eval_objective(const DesignProblem& problem, const Design& lambda);

// Supergradient of the max: entry i is -w * (vbar^T A^(gamma)(lambda)^{-1} phi(x_i))^2
// with vbar the argmax direction. All entries <= 0.
VectorXd grad_objective(const DesignProblem& problem, const Design& lambda);

DesignSolution solve_design(const DesignProblem& problem, const SolverConfig& config);

// lambda_D^* maximizing log det(A^(gamma)(lambda)), computed on the Gram side
// as log det(K_lambda + gamma I). objective_value holds the log-determinant.
DesignSolution solve_logdet(const ArmSet& arms, double gamma, const SolverConfig& config,
                            const std::vector<int>& support = {});

// Information gain: max over designs of log det(T K_lambda + gamma I).
double info_gain(const ArmSet& arms, long T, double gamma, const SolverConfig& config);

// Gap-weighted transductive design value
//   rho^*(gamma, eps) = inf_lambda sup_{z != z*}
//     ||phi(z*) - phi(z)||^2_{A^(gamma)(lambda)^{-1}} / max{eps^2, gap_z^2}.
// theta_star is a dual vector over arms_x; designs are supported on X.
double rho_star(const ArmSet& arms_x, const ArmSet& arms_z, const DualVector& theta_star,
                double gamma, double eps, const SolverConfig& config);

// Restricted design value g(eps): sup over z with gap <= eps of the design
// norm of phi(z*) - phi(z), minimized over designs on X.
double g_restricted(const ArmSet& arms_x, const ArmSet& arms_z, const DualVector& theta_star,
                    double gamma, double eps, const SolverConfig& config);

// Smallest attainable scale under misspecification:
//   8 * min{ eps on the grid 2^-j, j in [-10, 30] : 4 (sqrt(gamma) ||theta*|| + h)
//            (2 + sqrt(g(eps))) <= eps },
// +infinity if no grid point satisfies the inequality, 0 when the multiplier
// vanishes.
double bar_epsilon(const ArmSet& arms_x, const ArmSet& arms_z, const DualVector& theta_star,
                   double gamma, double h, const SolverConfig& config);

// Characteristic-time integrand of the constrained lower bound:
//   F = max{(x* - x')^T (A + g I)^{-1} A theta*, 0}^2 / (2 ||x' - x*||^2_{(A+gI)^{-1}})
//       + g/2 (||theta*||^2_{(A+gI)^{-1} A} - R^2).
double lower_bound_F(const ArmSet& arms, const Design& lambda, int x_prime, double gamma,
                     const DualVector& theta_star, double R);

// Grid-search estimate of 1 / T*(theta*): max over sampled designs of
// inf over x' != x* of sup over a gamma grid of F. Diagnostic only.
double characteristic_time_inverse(const ArmSet& arms, const DualVector& theta_star, double R,
                                   int n_design_samples, const std::vector<double>& gamma_grid,
                                   std::uint64_t seed);

// argmax_z <theta, phi(z)>, ties to the lowest index.
int best_arm_index(const ArmSet& arms, const DualVector& theta, const std::vector<int>& candidates);

// Worst-case design value over arm subsets, max_{V subset X} f(V; gamma).
// Exhaustive only up to `exact_cap` arms; beyond that f(X; gamma) is returned
// as a proxy with exact=false. Diagnostic, exponential in |X|.
struct SubsetDesignValue {
  double value = 0.0;
  bool exact = false;
};
SubsetDesignValue f_bar_subsets(const ArmSet& arms, double gamma, const SolverConfig& config,
                                int exact_cap = 12);

}  // namespace kbandit
