#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kbandit/feature_space.hpp"

namespace kbandit {

enum class RobustKind { catoni, median_of_means, mean };

struct RobustMeanConfig {
  RobustKind kind = RobustKind::catoni;
  double delta = 0.05;
  double variance_bound = 1.0;  // second-moment scale, B^2 + sigma^2 in the score setting
  bool use_empirical_variance = false;
  double c0 = 1.4142135623730951;  // leading deviation constant used in sample budgets

  // Sample gate multiplier: n >= c1 * log(1/delta).
  double c1() const;
};

// Catoni M-estimate with influence psi(t) = sign(t) log(1 + |t| + t^2/2),
// solved by bisection to 1e-10. Requires n > 2 log(1/delta).
double catoni(const std::vector<double>& samples, double delta, double variance);

// ceil(8 log(1/delta)) contiguous blocks, lower-middle median of block means.
double median_of_means(const std::vector<double>& samples, double delta);

double robust_mean(const std::vector<double>& samples, const RobustMeanConfig& config,
                   double variance);

// Deviation bound of the Catoni estimate at confidence 1 - delta:
// sqrt(2 v log(1/delta) / (n - 2 log(1/delta))).
double catoni_radius(long n, double delta, double variance);

struct SampleBatch {
  std::vector<int> arm_indices;
  VectorXd rewards;
  Design design_used;
  double gamma = 0.0;
};

using RewardFn = std::function<double(int)>;

// tau i.i.d. draws from the design; rewards queried in draw order.
SampleBatch draw_batch(const Design& design, double gamma, long tau, std::uint64_t seed,
                       const RewardFn& reward);

// Kernel ridge fit over the sampled rows: dual coefficients solve
// (K_S + gamma I) alpha = Y, aggregated back onto the reference arms.
DualVector rls_fit(const ArmSet& arms, const SampleBatch& batch, double gamma);

// Plain averages of the per-sample scores v^T A^(gamma)(lambda)^{-1} phi(x_t) y_t.
VectorXd ips_estimate(const ArmSet& arms, const std::vector<DualVector>& directions,
                      const SampleBatch& batch);

struct EstimateSet {
  VectorXd w_values;
  DualVector theta_hat;
  double minmax_value = 0.0;
  bool has_theta = false;
};

// Chebyshev fit of theta = sum_i alpha_i phi(x_i) to the per-direction
// estimates: minimize max_v |<theta, v> - W_v| / ||v||_{A^(gamma)(lambda)^{-1}}.
// Solved by annealed log-sum-exp smoothing with damped Newton steps; the
// terminal smoothing gap is below 1e-7 of the residual scale.
std::pair<DualVector, double> fit_dual_minmax(const ArmSet& arms,
                                              const std::vector<DualVector>& directions,
                                              const VectorXd& w_values, const Design& design,
                                              double gamma);

// Robust per-direction estimates from an existing batch; the per-direction
// confidence is robust.delta / |directions| and the variance plug-in is
// robust.variance_bound * ||v||^2 unless empirical variance is requested.
EstimateSet rips_from_batch(const ArmSet& arms, const std::vector<DualVector>& directions,
                            const SampleBatch& batch, const RobustMeanConfig& robust,
                            bool fit_theta = true);

// Full pipeline: gate tau >= c1 log(|V|/delta), draw the batch, robust means,
// optional min-max fit. Deterministic given the seed.
EstimateSet rips_estimate(const ArmSet& arms, const std::vector<DualVector>& directions,
                          const Design& design, double gamma, long tau,
                          const RobustMeanConfig& robust, const RewardFn& reward,
                          std::uint64_t seed, bool fit_theta = true);

}  // namespace kbandit
