#include "kbandit/design_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "kbandit/rng.hpp"

namespace kbandit {

namespace {

constexpr int kConvergenceWindow = 100;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> resolve_support(const DesignProblem& p) {
  if (p.support.empty()) {
    std::vector<int> all(static_cast<std::size_t>(p.arms->n()));
    for (int i = 0; i < p.arms->n(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  std::vector<int> s = p.support;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  if (s.front() < 0 || s.back() >= p.arms->n())
    throw ConfigError("design problem: support index out of range");
  return s;
}

// Shared per-iterate evaluation for the first-order solvers. Direction data is
// prepared once; each iterate costs one factorization plus batched solves.
class BatchEvaluator {
public:
  BatchEvaluator(const DesignProblem& p, const std::vector<int>& support)
      : arms_(*p.arms), gamma_(p.gamma), support_(support) {
    const int n = arms_.n();
    const int nv = static_cast<int>(p.directions.size());
    weights_ = p.weights.size() ? p.weights : VectorXd::Ones(nv);
    MatrixXd coeffs(nv, n);
    for (int v = 0; v < nv; ++v) {
      if (p.directions[static_cast<std::size_t>(v)].coeffs.size() != n)
        throw ConfigError("design problem: direction coefficient length mismatch");
      coeffs.row(v) = p.directions[static_cast<std::size_t>(v)].coeffs.transpose();
    }
    explicit_mode_ = arms_.has_explicit_features();
    if (explicit_mode_) {
      dmat_ = coeffs * arms_.points();  // |V| x d
    } else {
      if (!(gamma_ > 0.0))
        throw UnsupportedModeError("design objective needs gamma > 0 in kernel-only mode");
      kb_ = arms_.gram() * coeffs.transpose();                       // n x |V|
      self_inner_ = (coeffs * kb_).diagonal();                       // v^T v in feature space
    }
  }

  // Factorizes at lambda, fills norms (weighted), returns (value, argmax).
  std::pair<double, int> factorize(const VectorXd& lambda) {
    const int nv = static_cast<int>(weights_.size());
    norms_.resize(nv);
    if (explicit_mode_) {
      MatrixXd a = arms_.points().transpose() * lambda.asDiagonal() * arms_.points();
      a.diagonal().array() += gamma_;
      ldlt_.compute(a);
      solved_ = ldlt_.solve(dmat_.transpose());  // d x |V|
      for (int v = 0; v < nv; ++v) norms_[v] = dmat_.row(v).dot(solved_.col(v));
    } else {
      sqrt_lambda_ = lambda.cwiseSqrt();
      MatrixXd m = sqrt_lambda_.asDiagonal() * arms_.gram() * sqrt_lambda_.asDiagonal();
      m.diagonal().array() += gamma_;
      ldlt_.compute(m);
      b_ = sqrt_lambda_.asDiagonal() * kb_;  // n x |V|
      solved_ = ldlt_.solve(b_);
      for (int v = 0; v < nv; ++v)
        norms_[v] = (self_inner_[v] - b_.col(v).dot(solved_.col(v))) / gamma_;
    }
    norms_ = norms_.cwiseProduct(weights_);
    int arg = 0;
    double best = norms_[0];
    for (int v = 1; v < nv; ++v)
      if (norms_[v] > best) {
        best = norms_[v];
        arg = v;
      }
    return {best, arg};
  }

  // Gradient entries over the support for the argmax direction; zero elsewhere.
  VectorXd gradient(int argmax) const {
    VectorXd cross;
    if (explicit_mode_) {
      cross = arms_.points() * solved_.col(argmax);
    } else {
      const VectorXd corr = arms_.gram() * (sqrt_lambda_.cwiseProduct(solved_.col(argmax)));
      cross = (kb_.col(argmax) - corr) / gamma_;
    }
    VectorXd g = VectorXd::Zero(arms_.n());
    for (int i : support_) g[i] = -weights_[argmax] * cross[i] * cross[i];
    return g;
  }

  const VectorXd& norms() const { return norms_; }

private:
  const ArmSet& arms_;
  double gamma_;
  const std::vector<int>& support_;
  bool explicit_mode_;
  VectorXd weights_;
  MatrixXd dmat_;      // explicit directions
  MatrixXd kb_;        // K * coeffs^T
  VectorXd self_inner_;
  Eigen::LDLT<MatrixXd> ldlt_;
  MatrixXd solved_;
  MatrixXd b_;
  VectorXd sqrt_lambda_;
  VectorXd norms_;
};

VectorXd uniform_on(const std::vector<int>& support, int n) {
  VectorXd lambda = VectorXd::Zero(n);
  for (int i : support) lambda[i] = 1.0 / static_cast<double>(support.size());
  return lambda;
}

bool window_converged(const std::vector<double>& best_trace, double tol) {
  const int t = static_cast<int>(best_trace.size());
  const int window = std::max(kConvergenceWindow, t / 3);
  if (t <= window) return false;
  const double prev = best_trace[static_cast<std::size_t>(t - 1 - window)];
  const double now = best_trace.back();
  return (prev - now) <= tol * std::max(std::abs(now), 1e-15);
}

}  // namespace

void DesignProblem::validate() const {
  if (arms == nullptr) throw ConfigError("design problem: missing arm set");
  if (directions.empty()) throw ConfigError("design problem: directions must be nonempty");
  if (gamma < 0.0) throw ConfigError("design problem: gamma must be nonnegative");
  if (weights.size() && weights.size() != static_cast<Eigen::Index>(directions.size()))
    throw ConfigError("design problem: weight count does not match direction count");
}

bool DesignProblem::in_support(int arm) const {
  if (support.empty()) return arm >= 0 && arm < arms->n();
  return std::find(support.begin(), support.end(), arm) != support.end();
}

std::pair<double, int> eval_objective(const DesignProblem& problem, const Design& lambda) {
  problem.validate();
  lambda.validate();
  const std::vector<int> support = resolve_support(problem);
  BatchEvaluator eval(problem, support);
  return eval.factorize(lambda.weights);
}

VectorXd grad_objective(const DesignProblem& problem, const Design& lambda) {
  problem.validate();
  lambda.validate();
  const std::vector<int> support = resolve_support(problem);
  BatchEvaluator eval(problem, support);
  const auto [value, argmax] = eval.factorize(lambda.weights);
  (void)value;
  return eval.gradient(argmax);
}

DesignSolution solve_design(const DesignProblem& problem, const SolverConfig& config) {
  problem.validate();
  if (config.max_iters < 1) throw ConfigError("solver: max_iters must be >= 1");
  if (!(config.tol > 0.0)) throw ConfigError("solver: tol must be positive");

  const int n = problem.arms->n();
  const std::vector<int> support = resolve_support(problem);
  BatchEvaluator eval(problem, support);

  VectorXd lambda = uniform_on(support, n);
  auto [value, argmax] = eval.factorize(lambda);
  if (!std::isfinite(value))
    throw NumericalError("solve_design: objective not finite at the uniform design");

  DesignSolution best;
  best.design.weights = lambda;
  best.objective_value = value;
  best.argmax_direction = argmax;
  best.iterations_used = 0;
  best.converged = support.size() == 1;
  if (best.converged) return best;

  std::vector<double> best_trace;
  best_trace.reserve(static_cast<std::size_t>(config.max_iters));

  // Weighted running average of the iterates; mirror descent's averaged
  // sequence converges where the last iterate can keep cycling.
  VectorXd averaged = lambda;
  double average_mass = 1.0;

  const auto consider = [&](const VectorXd& w, double val, int arg) {
    if (std::isfinite(val) && val < best.objective_value) {
      best.objective_value = val;
      best.design.weights = w;
      best.argmax_direction = arg;
    }
  };

  for (int t = 1; t <= config.max_iters; ++t) {
    const VectorXd g = eval.gradient(argmax);
    double gmax = 0.0;
    for (int i : support) gmax = std::max(gmax, std::abs(g[i]));
    if (gmax == 0.0) {  // flat objective (e.g. all-zero directions)
      best.converged = true;
      best.iterations_used = t;
      return best;
    }

    if (config.step_rule == SolverConfig::StepRule::mirror_descent) {
      const double eta = config.lr0 / (std::sqrt(static_cast<double>(t)) * gmax);
      double z = 0.0;
      for (int i : support) {
        lambda[i] *= std::exp(-eta * g[i] - config.lr0);  // shift keeps exponents <= 0
        z += lambda[i];
      }
      for (int i : support) lambda[i] /= z;
    } else {
      int vertex = support.front();
      for (int i : support)
        if (g[i] < g[vertex]) vertex = i;
      const double step = 2.0 / (static_cast<double>(t) + 2.0);
      for (int i : support) lambda[i] *= (1.0 - step);
      lambda[vertex] += step;
    }

    std::tie(value, argmax) = eval.factorize(lambda);
    consider(lambda, value, argmax);

    const double weight = 1.0 / std::sqrt(static_cast<double>(t));
    averaged = (average_mass * averaged + weight * lambda) / (average_mass + weight);
    average_mass += weight;
    if (t % 25 == 0) {
      const auto [avg_value, avg_arg] = eval.factorize(averaged);
      consider(averaged, avg_value, avg_arg);
      std::tie(value, argmax) = eval.factorize(lambda);  // restore iterate state
    }

    best.iterations_used = t;
    best_trace.push_back(best.objective_value);
    if (window_converged(best_trace, config.tol)) {
      best.converged = true;
      return best;
    }
  }
  return best;
}

DesignSolution solve_logdet(const ArmSet& arms, double gamma, const SolverConfig& config,
                            const std::vector<int>& support_in) {
  if (!(gamma > 0.0) && !arms.has_explicit_features())
    throw UnsupportedModeError("solve_logdet needs gamma > 0 in kernel-only mode");

  DesignProblem shape;
  shape.arms = &arms;
  shape.support = support_in;
  shape.gamma = gamma;
  shape.directions.push_back(DualVector::zero(arms.n()));  // support resolution only
  const std::vector<int> support = resolve_support(shape);

  VectorXd lambda = uniform_on(support, arms.n());
  const auto objective = [&](const VectorXd& w) {
    RegularizedOperator op(arms, Design{w}, gamma);
    return std::make_pair(op.gram_log_det(), op.arm_leverages());
  };

  auto [value, lev] = objective(lambda);
  DesignSolution best;
  best.design.weights = lambda;
  best.objective_value = value;
  best.argmax_direction = 0;
  best.converged = support.size() == 1;
  if (best.converged) return best;

  std::vector<double> trace;
  for (int t = 1; t <= config.max_iters; ++t) {
    double gmax = 0.0;
    for (int i : support) gmax = std::max(gmax, std::abs(lev[i]));
    if (gmax == 0.0) {
      best.converged = true;
      best.iterations_used = t;
      return best;
    }
    if (config.step_rule == SolverConfig::StepRule::mirror_descent) {
      const double eta = config.lr0 / (std::sqrt(static_cast<double>(t)) * gmax);
      double z = 0.0;
      for (int i : support) {
        lambda[i] *= std::exp(eta * lev[i] - config.lr0);  // ascent
        z += lambda[i];
      }
      for (int i : support) lambda[i] /= z;
    } else {
      int vertex = support.front();
      for (int i : support)
        if (lev[i] > lev[vertex]) vertex = i;
      const double step = 2.0 / (static_cast<double>(t) + 2.0);
      for (int i : support) lambda[i] *= (1.0 - step);
      lambda[vertex] += step;
    }

    std::tie(value, lev) = objective(lambda);
    if (std::isfinite(value) && value > best.objective_value) {
      best.objective_value = value;
      best.design.weights = lambda;
    }
    best.iterations_used = t;
    trace.push_back(-best.objective_value);  // reuse the descent-style window
    if (window_converged(trace, config.tol)) {
      best.converged = true;
      return best;
    }
  }
  return best;
}

double info_gain(const ArmSet& arms, long T, double gamma, const SolverConfig& config) {
  if (T < 1) throw ConfigError("info_gain: T must be >= 1");
  const DesignSolution sol = solve_logdet(arms, gamma / static_cast<double>(T), config);
  const VectorXd sqrt_w = sol.design.weights.cwiseSqrt();
  MatrixXd m = static_cast<double>(T) * (sqrt_w.asDiagonal() * arms.gram() * sqrt_w.asDiagonal());
  m.diagonal().array() += gamma;
  Eigen::LDLT<MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw NumericalError("info_gain: LDLT failed");
  return ldlt.vectorD().array().max(1e-300).log().sum();
}

SubsetDesignValue f_bar_subsets(const ArmSet& arms, double gamma, const SolverConfig& config,
                                int exact_cap) {
  const int n = arms.n();
  SubsetDesignValue out;
  if (n > exact_cap) {
    DesignProblem p;
    p.arms = &arms;
    p.gamma = gamma;
    for (int i = 0; i < n; ++i) p.directions.push_back(DualVector::unit(n, i));
    out.value = solve_design(p, config).objective_value;
    out.exact = false;
    return out;
  }
  for (long mask = 1; mask < (1L << n); ++mask) {
    DesignProblem p;
    p.arms = &arms;
    p.gamma = gamma;
    for (int i = 0; i < n; ++i)
      if (mask & (1L << i)) {
        p.support.push_back(i);
        p.directions.push_back(DualVector::unit(n, i));
      }
    out.value = std::max(out.value, solve_design(p, config).objective_value);
  }
  out.exact = true;
  return out;
}

int best_arm_index(const ArmSet& arms, const DualVector& theta,
                   const std::vector<int>& candidates) {
  const VectorXd values = arms.gram() * theta.coeffs;
  int best = candidates.front();
  for (int z : candidates)
    if (values[z] > values[best]) best = z;
  return best;
}

namespace {

// Joint view over X and Z: when the two sets are one object the indices
// coincide, otherwise points are concatenated.
struct TransductiveView {
  ArmSet joint;
  std::vector<int> x_idx;
  std::vector<int> z_idx;
  DualVector theta;  // zero-padded onto the joint set

  static TransductiveView make(const ArmSet& arms_x, const ArmSet& arms_z,
                               const DualVector& theta_x) {
    if (theta_x.coeffs.size() != arms_x.n())
      throw ConfigError("theta_star must be a dual vector over the sampling set");
    if (&arms_x == &arms_z) {
      std::vector<int> all(static_cast<std::size_t>(arms_x.n()));
      for (int i = 0; i < arms_x.n(); ++i) all[static_cast<std::size_t>(i)] = i;
      return {arms_x, all, all, theta_x};
    }
    ArmSet joint = ArmSet::merged(arms_x, arms_z);
    std::vector<int> xi, zi;
    for (int i = 0; i < arms_x.n(); ++i) xi.push_back(i);
    for (int i = 0; i < arms_z.n(); ++i) zi.push_back(arms_x.n() + i);
    DualVector theta;
    theta.coeffs = VectorXd::Zero(joint.n());
    theta.coeffs.head(arms_x.n()) = theta_x.coeffs;
    return {std::move(joint), std::move(xi), std::move(zi), std::move(theta)};
  }
};

}  // namespace

double rho_star(const ArmSet& arms_x, const ArmSet& arms_z, const DualVector& theta_star,
                double gamma, double eps, const SolverConfig& config) {
  const TransductiveView view = TransductiveView::make(arms_x, arms_z, theta_star);
  const VectorXd values = view.joint.gram() * view.theta.coeffs;
  const int zstar = best_arm_index(view.joint, view.theta, view.z_idx);

  DesignProblem p;
  p.arms = &view.joint;
  p.gamma = gamma;
  p.support = view.x_idx;
  std::vector<double> w;
  for (int z : view.z_idx) {
    if (z == zstar) continue;
    DualVector v = DualVector::zero(view.joint.n());
    v.coeffs[zstar] = 1.0;
    v.coeffs[z] = -1.0;
    p.directions.push_back(std::move(v));
    const double gap = std::max(values[zstar] - values[z], 0.0);
    w.push_back(1.0 / std::max(eps * eps, gap * gap));
  }
  if (p.directions.empty()) return 0.0;
  p.weights = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return solve_design(p, config).objective_value;
}

double g_restricted(const ArmSet& arms_x, const ArmSet& arms_z, const DualVector& theta_star,
                    double gamma, double eps, const SolverConfig& config) {
  const TransductiveView view = TransductiveView::make(arms_x, arms_z, theta_star);
  const VectorXd values = view.joint.gram() * view.theta.coeffs;
  const int zstar = best_arm_index(view.joint, view.theta, view.z_idx);

  DesignProblem p;
  p.arms = &view.joint;
  p.gamma = gamma;
  p.support = view.x_idx;
  for (int z : view.z_idx) {
    if (z == zstar) continue;
    if (values[zstar] - values[z] > eps) continue;
    DualVector v = DualVector::zero(view.joint.n());
    v.coeffs[zstar] = 1.0;
    v.coeffs[z] = -1.0;
    p.directions.push_back(std::move(v));
  }
  if (p.directions.empty()) return 0.0;
  return solve_design(p, config).objective_value;
}

double bar_epsilon(const ArmSet& arms_x, const ArmSet& arms_z, const DualVector& theta_star,
                   double gamma, double h, const SolverConfig& config) {
  const double theta_norm =
      std::sqrt(std::max(0.0, dual_inner(arms_x, theta_star, theta_star)));
  const double multiplier = std::sqrt(gamma) * theta_norm + h;
  if (multiplier == 0.0) return 0.0;

  // g(eps) only changes when the restricted arm set changes; cache by eps
  // since the sets are nested along the grid.
  std::map<double, double> cache;
  for (int j = 30; j >= -10; --j) {
    const double eps = std::ldexp(1.0, -j);
    auto it = cache.find(eps);
    double g = it != cache.end() ? it->second
                                 : g_restricted(arms_x, arms_z, theta_star, gamma, eps, config);
    cache.emplace(eps, g);
    if (4.0 * multiplier * (2.0 + std::sqrt(std::max(g, 0.0))) <= eps) return 8.0 * eps;
  }
  return kInf;
}

double lower_bound_F(const ArmSet& arms, const Design& lambda, int x_prime, double gamma,
                     const DualVector& theta_star, double R) {
  if (x_prime < 0 || x_prime >= arms.n()) throw ConfigError("lower_bound_F: bad arm index");
  std::vector<int> all(static_cast<std::size_t>(arms.n()));
  for (int i = 0; i < arms.n(); ++i) all[static_cast<std::size_t>(i)] = i;
  const int xstar = best_arm_index(arms, theta_star, all);
  if (x_prime == xstar)
    throw std::invalid_argument("lower_bound_F: x_prime must differ from the best arm");

  RegularizedOperator op(arms, lambda, gamma);
  DualVector diff = DualVector::zero(arms.n());
  diff.coeffs[xstar] = 1.0;
  diff.coeffs[x_prime] = -1.0;

  // y^T (A+gI)^{-1} A theta = <y, theta> - g y^T (A+gI)^{-1} theta
  double num = dual_inner(arms, diff, theta_star);
  if (gamma > 0.0) num -= gamma * op.bilinear(diff, theta_star);
  const double den = 2.0 * op.norm_sq(diff);

  double value = 0.0;
  if (num > 0.0 && den > 0.0) value = num * num / den;
  if (gamma > 0.0) {
    const double theta_part =
        dual_inner(arms, theta_star, theta_star) - gamma * op.bilinear(theta_star, theta_star);
    value += 0.5 * gamma * (theta_part - R * R);
  }
  return value;
}

double characteristic_time_inverse(const ArmSet& arms, const DualVector& theta_star, double R,
                                   int n_design_samples, const std::vector<double>& gamma_grid,
                                   std::uint64_t seed) {
  std::vector<int> all(static_cast<std::size_t>(arms.n()));
  for (int i = 0; i < arms.n(); ++i) all[static_cast<std::size_t>(i)] = i;
  const int xstar = best_arm_index(arms, theta_star, all);

  Rng rng(seed);
  double best = -kInf;
  for (int s = 0; s <= n_design_samples; ++s) {
    Design lambda;
    if (s == 0) {
      lambda = Design::uniform(arms.n());
    } else {
      VectorXd w(arms.n());
      for (int i = 0; i < arms.n(); ++i) w[i] = -std::log(std::max(rng.uniform(), 1e-300));
      lambda.weights = w / w.sum();
    }
    double worst = kInf;
    for (int xp = 0; xp < arms.n(); ++xp) {
      if (xp == xstar) continue;
      double sup = -kInf;
      for (double g : gamma_grid)
        sup = std::max(sup, lower_bound_F(arms, lambda, xp, g, theta_star, R));
      worst = std::min(worst, sup);
    }
    best = std::max(best, worst);
  }
  return best;
}

}  // namespace kbandit
