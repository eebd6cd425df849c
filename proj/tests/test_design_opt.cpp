#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "kbandit/design_opt.hpp"
#include "kbandit/rng.hpp"

using namespace kbandit;

namespace {

MatrixXd random_points(int n, int d, Rng& rng) {
  MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) pts(i, j) = rng.normal();
  return pts;
}

Design random_design(int n, Rng& rng) {
  VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = -std::log(rng.uniform() + 1e-12);
  return Design{w / w.sum()};
}

std::vector<DualVector> arm_directions(int n) {
  std::vector<DualVector> dirs;
  for (int i = 0; i < n; ++i) dirs.push_back(DualVector::unit(n, i));
  return dirs;
}

// Direct per-direction loop over explicit features.
std::pair<double, int> brute_objective(const MatrixXd& pts, const VectorXd& lambda, double gamma,
                                       const std::vector<DualVector>& dirs) {
  const int d = static_cast<int>(pts.cols());
  MatrixXd a = MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    a += lambda[i] * pts.row(i).transpose() * pts.row(i);
  a.diagonal().array() += gamma;
  const MatrixXd inv = a.fullPivLu().inverse();
  double best = -1.0;
  int arg = 0;
  for (std::size_t v = 0; v < dirs.size(); ++v) {
    const VectorXd vec = pts.transpose() * dirs[v].coeffs;
    const double val = vec.dot(inv * vec);
    if (val > best) {
      best = val;
      arg = static_cast<int>(v);
    }
  }
  return {best, arg};
}

}  // namespace

TEST_CASE("eval_objective: zero direction set gives zero") {
  ArmSet arms(MatrixXd::Identity(3, 3), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.0;
  p.directions = {DualVector::zero(3)};
  const auto [value, arg] = eval_objective(p, Design::uniform(3));
  CHECK(value == doctest::Approx(0.0));
  CHECK(arg == 0);
}

TEST_CASE("eval_objective: orthonormal symmetric instance") {
  const int d = 5;
  ArmSet arms(MatrixXd::Identity(d, d), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.0;
  p.directions = arm_directions(d);
  const auto [value, arg] = eval_objective(p, Design::uniform(d));
  CHECK(value == doctest::Approx(static_cast<double>(d)));
  CHECK(arg == 0);  // ties break to the lowest index
}

TEST_CASE("eval_objective: random instance matches brute-force loop") {
  Rng rng(101);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 3, n = 7;
    ArmSet arms(random_points(n, d, rng), KernelSpec::Linear());
    DesignProblem p;
    p.arms = &arms;
    p.gamma = 0.05;
    p.directions = arm_directions(n);
    const Design lambda = random_design(n, rng);
    const auto [value, arg] = eval_objective(p, lambda);
    const auto [bvalue, barg] = brute_objective(arms.points(), lambda.weights, 0.05,
                                                p.directions);
    CHECK(value == doctest::Approx(bvalue).epsilon(1e-9));
    CHECK(arg == barg);
  }
}

TEST_CASE("grad_objective: zero directions give a zero gradient") {
  ArmSet arms(MatrixXd::Identity(3, 3), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.0;
  p.directions = {DualVector::zero(3)};
  CHECK(grad_objective(p, Design::uniform(3)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("grad_objective: scalar hand value on a dirac design") {
  // One arm x = 1 in R^1, v = phi(x), gamma = 1: A = 2, entry = -(1 * 1/2 * 1)^2.
  ArmSet arms(MatrixXd::Ones(1, 1), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 1.0;
  p.directions = {DualVector::unit(1, 0)};
  const VectorXd g = grad_objective(p, Design::dirac(1, 0));
  CHECK(g[0] == doctest::Approx(-0.25));
}

TEST_CASE("grad_objective: central finite differences along simplex tangents") {
  Rng rng(103);
  const int d = 3, n = 6;
  ArmSet arms(random_points(n, d, rng), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.1;
  p.directions = arm_directions(n);
  const Design lambda = random_design(n, rng);

  const VectorXd g = grad_objective(p, lambda);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd delta(n);
    for (int i = 0; i < n; ++i) delta[i] = rng.normal();
    delta.array() -= delta.mean();  // tangent to the simplex
    delta /= delta.norm();

    VectorXd wp = lambda.weights + h * delta;
    VectorXd wm = lambda.weights - h * delta;
    if (wp.minCoeff() <= 0.0 || wm.minCoeff() <= 0.0) continue;
    const double fd = (brute_objective(arms.points(), wp, 0.1, p.directions).first -
                       brute_objective(arms.points(), wm, 0.1, p.directions).first) /
                      (2.0 * h);
    CHECK(std::abs(fd - g.dot(delta)) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("solve_design: single arm is trivially optimal") {
  ArmSet arms(MatrixXd::Ones(1, 1), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.0;
  p.directions = {DualVector::unit(1, 0)};
  const DesignSolution sol = solve_design(p, SolverConfig{});
  CHECK(sol.design.weights[0] == doctest::Approx(1.0));
  CHECK(sol.converged);
}

TEST_CASE("solve_design: orthonormal instance reaches the dimension bound") {
  const int d = 5;
  ArmSet arms(MatrixXd::Identity(d, d), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.0;
  p.directions = arm_directions(d);
  SolverConfig cfg;
  cfg.max_iters = 2000;
  const DesignSolution sol = solve_design(p, cfg);
  CHECK(sol.objective_value <= 1.01 * d);
  CHECK(sol.objective_value >= d - 1e-9);
}

TEST_CASE("solve_design: three arms in the plane against a simplex grid") {
  MatrixXd pts(3, 2);
  pts << 1.0, 0.1, -0.2, 1.0, 0.7, 0.7;
  ArmSet arms(pts, KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.0;
  p.directions = arm_directions(3);

  SolverConfig cfg;
  cfg.max_iters = 4000;
  const DesignSolution sol = solve_design(p, cfg);

  double best = 1e300;
  const double step = 1e-3;
  for (double l1 = step; l1 < 1.0; l1 += step)
    for (double l2 = step; l1 + l2 < 1.0; l2 += step) {
      VectorXd w(3);
      w << l1, l2, 1.0 - l1 - l2;
      best = std::min(best, brute_objective(pts, w, 0.0, p.directions).first);
    }
  CHECK(sol.objective_value <= best * 1.005);
  CHECK(sol.objective_value >= best * 0.995);
}

TEST_CASE("solve_design: monotone best objective and determinism") {
  Rng rng(109);
  ArmSet arms(random_points(8, 3, rng), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.01;
  p.directions = arm_directions(8);
  SolverConfig cfg;
  cfg.max_iters = 500;

  const DesignSolution a = solve_design(p, cfg);
  const DesignSolution b = solve_design(p, cfg);
  CHECK(a.objective_value == b.objective_value);
  CHECK(std::memcmp(a.design.weights.data(), b.design.weights.data(),
                    sizeof(double) * 8) == 0);

  const double uniform_obj = eval_objective(p, Design::uniform(8)).first;
  CHECK(a.objective_value <= uniform_obj + 1e-12);
  const auto [reval, rarg] = eval_objective(p, a.design);
  CHECK(reval == doctest::Approx(a.objective_value).epsilon(1e-9));
  CHECK(rarg == a.argmax_direction);
}

TEST_CASE("objective convexity probe") {
  Rng rng(113);
  ArmSet arms(random_points(7, 3, rng), KernelSpec::Linear());
  DesignProblem p;
  p.arms = &arms;
  p.gamma = 0.05;
  p.directions = arm_directions(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Design l1 = random_design(7, rng);
    const Design l2 = random_design(7, rng);
    const double f1 = eval_objective(p, l1).first;
    const double f2 = eval_objective(p, l2).first;
    for (double t : {0.25, 0.5, 0.75}) {
      Design mix{t * l1.weights + (1.0 - t) * l2.weights};
      const double fm = eval_objective(p, mix).first;
      CHECK(fm <= t * f1 + (1.0 - t) * f2 + 1e-9);
    }
  }
}

TEST_CASE("solve_logdet: orthonormal symmetry gives the uniform design") {
  const int d = 4;
  ArmSet arms(MatrixXd::Identity(d, d), KernelSpec::Linear());
  SolverConfig cfg;
  cfg.max_iters = 2000;
  const DesignSolution sol = solve_logdet(arms, 0.1, cfg);
  for (int i = 0; i < d; ++i) CHECK(sol.design.weights[i] == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("solve_logdet: two collinear arms against a 1-d sweep") {
  MatrixXd pts(2, 1);
  pts << 1.0, 2.0;
  ArmSet arms(pts, KernelSpec::Linear());
  SolverConfig cfg;
  cfg.max_iters = 4000;
  const DesignSolution sol = solve_logdet(arms, 0.1, cfg);

  double best_l = 0.0, best_v = -1e300;
  for (double l = 0.0; l <= 1.0 + 1e-12; l += 1e-4) {
    // gram side: K_lambda + gamma I with K = [[1,2],[2,4]]
    const double k11 = l * 1.0 + 0.1, k12 = std::sqrt(l * (1 - l)) * 2.0;
    const double k22 = (1 - l) * 4.0 + 0.1;
    const double v = std::log(k11 * k22 - k12 * k12);
    if (v > best_v) {
      best_v = v;
      best_l = l;
    }
  }
  CHECK(std::abs(sol.design.weights[0] - best_l) <= 1e-3);
}

TEST_CASE("solve_logdet: first-order condition ties max leverage to the trace") {
  Rng rng(127);
  for (double gamma : {0.05, 0.2}) {
    ArmSet arms(random_points(9, 4, rng), KernelSpec::Linear());
    SolverConfig cfg;
    cfg.max_iters = 6000;
    const DesignSolution sol = solve_logdet(arms, gamma, cfg);
    RegularizedOperator op(arms, sol.design, gamma, RegularizedOperator::Mode::kernel_path);
    const double max_leverage = op.arm_leverages().maxCoeff();
    const double trace = trace_effective_dim(op);
    CHECK(max_leverage == doctest::Approx(trace).epsilon(0.02));
  }
}

TEST_CASE("spike instance keeps cutoff dimension one as the ambient dimension grows") {
  const int d = 6;
  MatrixXd pts(d + 1, d);
  pts.setZero();
  pts(0, 0) = 100.0;  // a e_1 with a >> gamma = 1
  for (int i = 0; i < d; ++i) pts(i + 1, i) = 1.0;
  ArmSet arms(pts, KernelSpec::Linear());

  DesignProblem p;
  p.arms = &arms;
  p.gamma = 1.0;
  p.directions = arm_directions(d + 1);
  SolverConfig cfg;
  cfg.max_iters = 3000;
  const DesignSolution sol = solve_design(p, cfg);
  RegularizedOperator op(arms, sol.design, 1.0, RegularizedOperator::Mode::kernel_path);
  CHECK(effective_dim_cutoff(op, 1.0) == 1);
}

TEST_CASE("info_gain: single arm scalar value") {
  ArmSet arms(MatrixXd::Ones(1, 1), KernelSpec::Linear());
  SolverConfig cfg;
  cfg.max_iters = 50;
  CHECK(info_gain(arms, 1, 1.0, cfg) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("info_gain: nondecreasing in T") {
  Rng rng(131);
  ArmSet arms(random_points(5, 3, rng), KernelSpec::Linear());
  SolverConfig cfg;
  cfg.max_iters = 1500;
  double prev = -1e300;
  for (long T : {1L, 10L, 100L}) {
    const double v = info_gain(arms, T, 1.0, cfg);
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
}

TEST_CASE("info_gain bounds the design value over subsets") {
  Rng rng(137);
  const int n = 5;
  ArmSet arms(random_points(n, 3, rng), KernelSpec::Linear());
  SolverConfig cfg;
  cfg.max_iters = 2000;
  const long T = 10;
  const double gamma_t = info_gain(arms, T, 1.0, cfg);

  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> subset;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) subset.push_back(i);
    DesignProblem p;
    p.arms = &arms;
    p.gamma = 1.0 / static_cast<double>(T);
    p.support = subset;
    for (int i : subset) p.directions.push_back(DualVector::unit(n, i));
    const DesignSolution sol = solve_design(p, cfg);
    CHECK(sol.objective_value <= 1.5 * gamma_t + 1e-9);
  }
}

TEST_CASE("design value bounded by the trace effective dimension") {
  Rng rng(139);
  for (double gamma : {1e-2, 1e-1}) {
    ArmSet arms(random_points(8, 4, rng), KernelSpec::Linear());
    DesignProblem p;
    p.arms = &arms;
    p.gamma = gamma;
    p.directions = arm_directions(8);
    SolverConfig cfg;
    cfg.max_iters = 4000;
    const DesignSolution fsol = solve_design(p, cfg);
    const DesignSolution dsol = solve_logdet(arms, gamma, cfg);
    RegularizedOperator op(arms, dsol.design, gamma, RegularizedOperator::Mode::kernel_path);
    CHECK(fsol.objective_value <= trace_effective_dim(op) * 1.01);
  }
}

TEST_CASE("rho_star: single target arm gives zero") {
  ArmSet arms(MatrixXd::Identity(2, 2), KernelSpec::Linear());
  MatrixXd zpts(1, 2);
  zpts << 1.0, 0.0;
  ArmSet z(zpts, KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(2)};
  theta.coeffs[0] = 1.0;
  SolverConfig cfg;
  CHECK(rho_star(arms, z, theta, 0.0, 0.1, cfg) == doctest::Approx(0.0));
}

TEST_CASE("rho_star: two orthonormal arms against a grid oracle") {
  const double gap = 0.5;
  ArmSet arms(MatrixXd::Identity(2, 2), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(2)};
  theta.coeffs << 1.0, 1.0 - gap;
  SolverConfig cfg;
  cfg.max_iters = 4000;
  const double eps = 0.1;  // < gap, so the denominator is gap^2
  const double value = rho_star(arms, arms, theta, 0.0, eps, cfg);

  double best = 1e300;
  for (double l = 1e-3; l < 1.0; l += 1e-3)
    best = std::min(best, (1.0 / l + 1.0 / (1.0 - l)) / (gap * gap));
  CHECK(value <= best * 1.01);
  CHECK(value >= best * 0.99);
}

TEST_CASE("rho_star: nonincreasing in eps") {
  Rng rng(149);
  ArmSet arms(random_points(4, 3, rng), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(4)};
  theta.coeffs << 1.0, 0.2, -0.4, 0.1;
  SolverConfig cfg;
  cfg.max_iters = 1500;
  double prev = 1e300;
  for (double eps : {0.01, 0.1, 1.0}) {
    const double v = rho_star(arms, arms, theta, 0.0, eps, cfg);
    CHECK(v <= prev + 1e-6);
    prev = v;
  }
}

TEST_CASE("bar_epsilon: zero multiplier short-circuits to zero") {
  ArmSet arms(MatrixXd::Identity(2, 2), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(2)};
  theta.coeffs << 1.0, 0.5;
  SolverConfig cfg;
  CHECK(bar_epsilon(arms, arms, theta, 0.0, 0.0, cfg) == doctest::Approx(0.0));
}

TEST_CASE("g_restricted: monotone nondecreasing in eps") {
  Rng rng(151);
  ArmSet arms(random_points(5, 3, rng), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(5)};
  theta.coeffs << 1.0, 0.3, 0.2, -0.5, 0.0;
  SolverConfig cfg;
  cfg.max_iters = 1500;
  double prev = -1.0;
  for (double eps : {0.01, 0.1, 0.5, 2.0}) {
    const double g = g_restricted(arms, arms, theta, 0.05, eps, cfg);
    CHECK(g >= prev - 1e-7);
    prev = g;
  }
}

TEST_CASE("bar_epsilon: two arms against a bisection oracle") {
  const double gap = 0.5, h = 0.01;
  ArmSet arms(MatrixXd::Identity(2, 2), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(2)};
  theta.coeffs << 1.0, 1.0 - gap;
  SolverConfig cfg;
  cfg.max_iters = 2000;
  const double value = bar_epsilon(arms, arms, theta, 0.0, h, cfg);

  // Oracle: g(eps) = 0 below the gap, min_lambda ||e1-e2||^2 = 4 at or above it.
  const auto condition = [&](double eps) {
    const double g = eps >= gap ? 4.0 : 0.0;
    return 4.0 * h * (2.0 + std::sqrt(g)) <= eps;
  };
  double lo = 0.0, hi = 1024.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (condition(mid))
      hi = mid;
    else
      lo = mid;
  }
  const double oracle_eps = hi;
  CHECK(value / 8.0 >= oracle_eps - 1e-9);
  CHECK(value / 8.0 <= 2.0 * oracle_eps + 1e-9);  // one grid step
}

TEST_CASE("lower_bound_F: hand value on two orthonormal arms") {
  const double gap = 0.3;
  ArmSet arms(MatrixXd::Identity(2, 2), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(2)};
  theta.coeffs << 1.0, 1.0 - gap;
  const double f = lower_bound_F(arms, Design::uniform(2), 1, 0.0, theta, 1.5);
  CHECK(f == doctest::Approx(gap * gap / 8.0));
  CHECK_THROWS_AS(lower_bound_F(arms, Design::uniform(2), 0, 0.0, theta, 1.5),
                  std::invalid_argument);
}

TEST_CASE("lower_bound_F: finite over a gamma grid") {
  Rng rng(157);
  ArmSet arms(random_points(5, 3, rng), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(5)};
  theta.coeffs << 1.0, 0.1, -0.3, 0.2, 0.05;
  const Design lambda = random_design(5, rng);
  std::vector<int> all{0, 1, 2, 3, 4};
  const int xstar = best_arm_index(arms, theta, all);
  for (double g = 0.0; g <= 10.0; g += 0.5) {
    for (int xp = 0; xp < 5; ++xp) {
      if (xp == xstar) continue;
      CHECK(std::isfinite(lower_bound_F(arms, lambda, xp, g, theta, 2.0)));
    }
  }
}

TEST_CASE("f_bar_subsets: matches a per-subset grid oracle") {
  MatrixXd pts(3, 2);
  pts << 1.0, 0.0, 0.0, 1.0, 0.6, 0.6;
  ArmSet arms(pts, KernelSpec::Linear());
  const double gamma = 0.05;
  SolverConfig cfg;
  cfg.max_iters = 2500;
  const SubsetDesignValue fb = f_bar_subsets(arms, gamma, cfg);
  CHECK(fb.exact);

  // independent oracle: simplex grid per subset, explicit 2x2 inverse
  const auto subset_value = [&](const std::vector<int>& subset) {
    const double step = 2e-3;
    double best = 1e300;
    const auto eval_at = [&](const VectorXd& w) {
      MatrixXd a = gamma * MatrixXd::Identity(2, 2);
      for (std::size_t k = 0; k < subset.size(); ++k)
        a += w[static_cast<Eigen::Index>(k)] * pts.row(subset[k]).transpose() *
             pts.row(subset[k]);
      const MatrixXd inv = a.inverse();
      double worst = 0.0;
      for (int i : subset)
        worst = std::max(worst, double(pts.row(i) * inv * pts.row(i).transpose()));
      return worst;
    };
    if (subset.size() == 1) {
      return eval_at(VectorXd::Ones(1));
    } else if (subset.size() == 2) {
      for (double l = 0.0; l <= 1.0 + 1e-12; l += step)
        best = std::min(best, eval_at((VectorXd(2) << l, 1.0 - l).finished()));
    } else {
      for (double l1 = 0.0; l1 <= 1.0 + 1e-12; l1 += step)
        for (double l2 = 0.0; l1 + l2 <= 1.0 + 1e-12; l2 += step)
          best = std::min(best, eval_at((VectorXd(3) << l1, l2, 1.0 - l1 - l2).finished()));
    }
    return best;
  };
  double oracle = 0.0;
  for (int mask = 1; mask < 8; ++mask) {
    std::vector<int> subset;
    for (int i = 0; i < 3; ++i)
      if (mask & (1 << i)) subset.push_back(i);
    oracle = std::max(oracle, subset_value(subset));
  }
  CHECK(fb.value == doctest::Approx(oracle).epsilon(0.01));

  const SubsetDesignValue proxy = f_bar_subsets(arms, gamma, cfg, 2);
  CHECK(!proxy.exact);
  DesignProblem full;
  full.arms = &arms;
  full.gamma = gamma;
  for (int i = 0; i < 3; ++i) full.directions.push_back(DualVector::unit(3, i));
  CHECK(proxy.value == doctest::Approx(solve_design(full, cfg).objective_value));
}

TEST_CASE("characteristic_time_inverse: positive on a separated instance") {
  ArmSet arms(MatrixXd::Identity(2, 2), KernelSpec::Linear());
  DualVector theta{VectorXd::Zero(2)};
  theta.coeffs << 1.0, 0.5;
  const double v = characteristic_time_inverse(arms, theta, 1.2, 64, {0.0, 0.1, 1.0}, 5);
  CHECK(v > 0.0);
  CHECK(std::isfinite(v));
}
