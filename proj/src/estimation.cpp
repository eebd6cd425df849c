#include "kbandit/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kbandit/rng.hpp"

namespace kbandit {

namespace {

double psi_catoni(double t) {
  const double a = std::abs(t);
  const double v = std::log1p(a + 0.5 * a * a);
  return t >= 0.0 ? v : -v;
}

}  // namespace

double RobustMeanConfig::c1() const {
  switch (kind) {
    case RobustKind::catoni:
      return 2.0;
    case RobustKind::median_of_means:
      return 8.0;
    case RobustKind::mean:
      return 1.0;
  }
  return 2.0;
}

double catoni(const std::vector<double>& samples, double delta, double variance) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("catoni: delta must lie in (0,1)");
  if (!(variance > 0.0)) throw ConfigError("catoni: variance plug-in must be positive");
  const double n = static_cast<double>(samples.size());
  const double big_l = std::log(1.0 / delta);
  if (!(n > 2.0 * big_l))
    throw InsufficientSamplesError("catoni: needs n > 2 log(1/delta) = " +
                                   std::to_string(2.0 * big_l));

  const double alpha =
      std::sqrt(2.0 * big_l / (n * variance * (1.0 + 2.0 * big_l / (n - 2.0 * big_l))));

  double lo = samples.front(), hi = samples.front();
  for (double x : samples) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi - lo < 1e-300) return lo;

  const auto influence_sum = [&](double mu) {
    double s = 0.0;
    for (double x : samples) s += psi_catoni(alpha * (x - mu));
    return s;
  };
  // sum is decreasing in mu, nonnegative at lo, nonpositive at hi
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (influence_sum(mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double median_of_means(const std::vector<double>& samples, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("median_of_means: delta must lie in (0,1)");
  const long n = static_cast<long>(samples.size());
  const long k = static_cast<long>(std::ceil(8.0 * std::log(1.0 / delta) - 1e-12));
  const long blocks = std::max(k, 1L);
  if (n < blocks)
    throw InsufficientSamplesError("median_of_means: needs n >= ceil(8 log(1/delta)) = " +
                                   std::to_string(blocks));

  const long base = n / blocks;
  const long rem = n % blocks;
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(blocks));
  long pos = 0;
  for (long b = 0; b < blocks; ++b) {
    const long len = base + (b < rem ? 1 : 0);
    double s = 0.0;
    for (long i = 0; i < len; ++i) s += samples[static_cast<std::size_t>(pos + i)];
    means.push_back(s / static_cast<double>(len));
    pos += len;
  }
  const auto mid = means.begin() + (blocks - 1) / 2;  // lower-middle for even counts
  std::nth_element(means.begin(), mid, means.end());
  return *mid;
}

double robust_mean(const std::vector<double>& samples, const RobustMeanConfig& config,
                   double variance) {
  switch (config.kind) {
    case RobustKind::catoni:
      return catoni(samples, config.delta, variance);
    case RobustKind::median_of_means:
      return median_of_means(samples, config.delta);
    case RobustKind::mean: {
      if (samples.empty()) throw InsufficientSamplesError("mean: empty sample list");
      double s = 0.0;
      for (double x : samples) s += x;
      return s / static_cast<double>(samples.size());
    }
  }
  throw ConfigError("robust_mean: unknown estimator kind");
}

double catoni_radius(long n, double delta, double variance) {
  const double big_l = std::log(1.0 / delta);
  if (!(static_cast<double>(n) > 2.0 * big_l))
    throw InsufficientSamplesError("catoni_radius: needs n > 2 log(1/delta)");
  return std::sqrt(2.0 * variance * big_l / (static_cast<double>(n) - 2.0 * big_l));
}

SampleBatch draw_batch(const Design& design, double gamma, long tau, std::uint64_t seed,
                       const RewardFn& reward) {
  design.validate();
  if (tau < 1) throw ConfigError("draw_batch: tau must be >= 1");
  std::vector<double> cumulative(static_cast<std::size_t>(design.weights.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < design.weights.size(); ++i) {
    acc += design.weights[i];
    cumulative[static_cast<std::size_t>(i)] = acc;
  }

  SampleBatch batch;
  batch.design_used = design;
  batch.gamma = gamma;
  batch.arm_indices.reserve(static_cast<std::size_t>(tau));
  batch.rewards.resize(tau);
  Rng rng(seed);
  for (long t = 0; t < tau; ++t) {
    const int arm = rng.categorical(cumulative);
    batch.arm_indices.push_back(arm);
    batch.rewards[t] = reward(arm);
  }
  return batch;
}

DualVector rls_fit(const ArmSet& arms, const SampleBatch& batch, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("rls_fit: gamma must be positive");
  const long tau = static_cast<long>(batch.arm_indices.size());
  if (tau < 1) throw ConfigError("rls_fit: empty batch");

  // Aggregate repeated pulls: the tau x tau dual system collapses onto the
  // distinct sampled arms, (C^(1/2) K_S C^(1/2) + gamma I) u = C^(-1/2) s
  // with C the pull counts and s the per-arm reward sums.
  VectorXd counts = VectorXd::Zero(arms.n());
  VectorXd sums = VectorXd::Zero(arms.n());
  for (long t = 0; t < tau; ++t) {
    const int arm = batch.arm_indices[static_cast<std::size_t>(t)];
    if (arm < 0 || arm >= arms.n()) throw ConfigError("rls_fit: arm index out of range");
    counts[arm] += 1.0;
    sums[arm] += batch.rewards[t];
  }
  std::vector<int> support;
  for (int a = 0; a < arms.n(); ++a)
    if (counts[a] > 0.0) support.push_back(a);
  const int ns = static_cast<int>(support.size());

  MatrixXd sys(ns, ns);
  VectorXd rhs(ns);
  for (int i = 0; i < ns; ++i) {
    const double ci = std::sqrt(counts[support[static_cast<std::size_t>(i)]]);
    for (int j = 0; j < ns; ++j)
      sys(i, j) = ci * arms.gram()(support[static_cast<std::size_t>(i)],
                                   support[static_cast<std::size_t>(j)]) *
                  std::sqrt(counts[support[static_cast<std::size_t>(j)]]);
    rhs[i] = sums[support[static_cast<std::size_t>(i)]] / ci;
  }
  sys.diagonal().array() += gamma;
  const VectorXd u = Eigen::LDLT<MatrixXd>(sys).solve(rhs);

  DualVector theta = DualVector::zero(arms.n());
  for (int i = 0; i < ns; ++i)
    theta.coeffs[support[static_cast<std::size_t>(i)]] =
        std::sqrt(counts[support[static_cast<std::size_t>(i)]]) * u[i];
  return theta;
}

VectorXd ips_estimate(const ArmSet& arms, const std::vector<DualVector>& directions,
                      const SampleBatch& batch) {
  if (batch.arm_indices.empty()) throw ConfigError("ips_estimate: empty batch");
  RegularizedOperator op(arms, batch.design_used, batch.gamma);
  const MatrixXd cross = op.bilinear_cross(directions);
  const long tau = static_cast<long>(batch.arm_indices.size());
  VectorXd out(static_cast<Eigen::Index>(directions.size()));
  for (Eigen::Index v = 0; v < out.size(); ++v) {
    double s = 0.0;
    for (long t = 0; t < tau; ++t)
      s += cross(v, batch.arm_indices[static_cast<std::size_t>(t)]) * batch.rewards[t];
    out[v] = s / static_cast<double>(tau);
  }
  return out;
}

std::pair<DualVector, double> fit_dual_minmax(const ArmSet& arms,
                                              const std::vector<DualVector>& directions,
                                              const VectorXd& w_values, const Design& design,
                                              double gamma) {
  const int nv = static_cast<int>(directions.size());
  if (nv == 0) throw std::invalid_argument("fit_dual_minmax: no directions");
  if (w_values.size() != nv) throw ConfigError("fit_dual_minmax: W count mismatch");
  const int n = arms.n();

  RegularizedOperator op(arms, design, gamma);
  MatrixXd rows(nv, n);  // row v: (K beta_v)^T / s_v
  VectorXd targets(nv);
  for (int v = 0; v < nv; ++v) {
    const DualVector& dir = directions[static_cast<std::size_t>(v)];
    const double s = std::sqrt(op.norm_sq(dir));
    if (!(s > 1e-150))
      throw std::invalid_argument("fit_dual_minmax: direction " + std::to_string(v) +
                                  " has zero norm");
    rows.row(v) = (arms.gram() * dir.coeffs).transpose() / s;
    targets[v] = w_values[v] / s;
  }

  const auto exact_max = [&](const VectorXd& alpha) {
    return (rows * alpha - targets).cwiseAbs().maxCoeff();
  };

  // Ridge warm start.
  MatrixXd gtg = rows.transpose() * rows;
  gtg.diagonal().array() += 1e-10 * std::max(1.0, gtg.trace() / n);
  VectorXd alpha = Eigen::LDLT<MatrixXd>(gtg).solve(rows.transpose() * targets);

  // Annealed log-sum-exp smoothing of max_v |r_v|; each level is minimized
  // with damped Newton steps. Final smoothing gap <= mu log(2 nv).
  const double scale = std::max(1.0, exact_max(alpha));
  const double mu_min = 1e-9 * scale / std::log(2.0 * nv + 2.0);
  VectorXd residual(nv), p_plus(nv), p_minus(nv);

  const auto smoothed = [&](const VectorXd& a, double mu, VectorXd* grad, MatrixXd* hess) {
    residual = rows * a - targets;
    double m = 0.0;
    for (int v = 0; v < nv; ++v) m = std::max(m, std::abs(residual[v]));
    double z = 0.0;
    for (int v = 0; v < nv; ++v) {
      p_plus[v] = std::exp((residual[v] - m) / mu);
      p_minus[v] = std::exp((-residual[v] - m) / mu);
      z += p_plus[v] + p_minus[v];
    }
    const double value = m + mu * std::log(z);
    if (grad) {
      p_plus /= z;
      p_minus /= z;
      const VectorXd s = p_plus - p_minus;
      *grad = rows.transpose() * s;
      if (hess) {
        const VectorXd w = p_plus + p_minus;
        hess->noalias() = rows.transpose() * w.asDiagonal() * rows;
        hess->noalias() -= (*grad) * grad->transpose();
        *hess /= mu;
      }
    }
    return value;
  };

  VectorXd grad(n);
  MatrixXd hess(n, n);
  for (double mu = 0.25 * scale; mu >= mu_min; mu /= 8.0) {
    for (int it = 0; it < 60; ++it) {
      const double value = smoothed(alpha, mu, &grad, &hess);
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(1.0, value)) break;

      double damping = 1e-12 * std::max(1.0, hess.trace() / n);
      VectorXd step;
      bool accepted = false;
      for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
        MatrixXd h = hess;
        h.diagonal().array() += damping;
        step = Eigen::LDLT<MatrixXd>(h).solve(-grad);
        double t = 1.0;
        const double slope = grad.dot(step);
        if (!(slope < 0.0)) {
          damping *= 100.0;
          continue;
        }
        for (int ls = 0; ls < 40; ++ls) {
          const double cand = smoothed(alpha + t * step, mu, nullptr, nullptr);
          if (cand <= value + 1e-4 * t * slope) {
            alpha += t * step;
            accepted = true;
            break;
          }
          t *= 0.5;
        }
        if (!accepted) damping *= 100.0;
      }
      if (!accepted) break;
    }
    if (mu == mu_min) break;
    if (mu / 8.0 < mu_min) mu = 8.0 * mu_min;  // land exactly on the floor
  }

  return {DualVector{alpha}, exact_max(alpha)};
}

EstimateSet rips_from_batch(const ArmSet& arms, const std::vector<DualVector>& directions,
                            const SampleBatch& batch, const RobustMeanConfig& robust,
                            bool fit_theta) {
  const int nv = static_cast<int>(directions.size());
  if (nv == 0) throw ConfigError("rips: directions must be nonempty");
  const long tau = static_cast<long>(batch.arm_indices.size());

  RegularizedOperator op(arms, batch.design_used, batch.gamma);
  const MatrixXd cross = op.bilinear_cross(directions);
  const double delta_dir = robust.delta / nv;

  RobustMeanConfig per_direction = robust;
  per_direction.delta = delta_dir;

  EstimateSet out;
  out.w_values.resize(nv);
  std::vector<double> scores(static_cast<std::size_t>(tau));
  for (int v = 0; v < nv; ++v) {
    for (long t = 0; t < tau; ++t)
      scores[static_cast<std::size_t>(t)] =
          cross(v, batch.arm_indices[static_cast<std::size_t>(t)]) * batch.rewards[t];

    double variance;
    if (robust.use_empirical_variance) {
      double mean = 0.0;
      for (double s : scores) mean += s;
      mean /= static_cast<double>(tau);
      double ss = 0.0;
      for (double s : scores) ss += (s - mean) * (s - mean);
      variance = std::max(ss / std::max<double>(1.0, static_cast<double>(tau - 1)), 1e-300);
    } else {
      const double norm_sq = cross.row(v).dot(directions[static_cast<std::size_t>(v)].coeffs);
      variance = std::max(robust.variance_bound * std::max(norm_sq, 0.0), 1e-300);
    }
    out.w_values[v] = robust_mean(scores, per_direction, variance);
  }

  if (fit_theta) {
    auto [theta, value] = fit_dual_minmax(arms, directions, out.w_values, batch.design_used,
                                          batch.gamma);
    out.theta_hat = std::move(theta);
    out.minmax_value = value;
    out.has_theta = true;
  }
  return out;
}

EstimateSet rips_estimate(const ArmSet& arms, const std::vector<DualVector>& directions,
                          const Design& design, double gamma, long tau,
                          const RobustMeanConfig& robust, const RewardFn& reward,
                          std::uint64_t seed, bool fit_theta) {
  const int nv = static_cast<int>(directions.size());
  if (nv == 0) throw ConfigError("rips_estimate: directions must be nonempty");
  const double gate = robust.c1() * std::log(nv / robust.delta);
  if (static_cast<double>(tau) < gate)
    throw InsufficientSamplesError("rips_estimate: tau must be at least c1 log(|V|/delta) = " +
                                   std::to_string(gate));
  const SampleBatch batch = draw_batch(design, gamma, tau, seed, reward);
  return rips_from_batch(arms, directions, batch, robust, fit_theta);
}

}  // namespace kbandit
