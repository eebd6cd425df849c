#include "kbandit/rounding.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kbandit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tracks max_v ||v||^2_{M^{-1}} under rank-one pull updates, where
// M = sum_i c_i f_i f_i^T + reg I over explicit features.
//
// State kept: G = F M^{-1} F^T (arms x arms), D = V M^{-1} F^T
// (directions x arms) and the direction diagonal. A remove/add of one pull is
// a Sherman-Morrison update of all three; candidate moves are scored without
// committing. Rebuilds from scratch periodically to stop drift.
class SwapTracker {
public:
  SwapTracker(const MatrixXd& features, const MatrixXd& directions, double reg)
      : f_(features), v_(directions), reg_(reg) {}

  void rebuild(const VectorXi& counts) {
    counts_ = counts;
    MatrixXd m = f_.transpose() * counts.cast<double>().asDiagonal() * f_;
    m.diagonal().array() += reg_;
    Eigen::LDLT<MatrixXd> ldlt(m);
    const MatrixXd minv_ft = ldlt.solve(f_.transpose());  // k x n
    g_ = f_ * minv_ft;
    d_ = v_ * minv_ft;
    diag_.resize(v_.rows());
    const MatrixXd minv_vt = ldlt.solve(v_.transpose());
    for (Eigen::Index i = 0; i < v_.rows(); ++i) diag_[i] = v_.row(i).dot(minv_vt.col(i));
    commits_since_rebuild_ = 0;
  }

  double objective() const { return diag_.maxCoeff(); }

  // Objective after adding one pull of arm b.
  double peek_add(int b) const {
    const double denom = 1.0 + g_(b, b);
    return (diag_ - d_.col(b).cwiseAbs2() / denom).maxCoeff();
  }

  // Objective after removing one pull of arm a; +inf when the downdate would
  // lose rank.
  double peek_remove(int a) const {
    const double denom = 1.0 - g_(a, a);
    if (denom <= 1e-10) return kInf;
    return (diag_ + d_.col(a).cwiseAbs2() / denom).maxCoeff();
  }

  void apply(int arm, int sign) {
    const double denom = 1.0 + sign * g_(arm, arm);
    const VectorXd r = g_.col(arm);
    const VectorXd q = d_.col(arm);
    const double scale = static_cast<double>(sign) / denom;
    g_.noalias() -= scale * (r * r.transpose());
    d_.noalias() -= scale * (q * r.transpose());
    diag_ -= scale * q.cwiseAbs2();
    counts_[arm] += sign;
    if (++commits_since_rebuild_ >= 64) rebuild(counts_);
  }

  // Scratch copy used to score all adds following one removal.
  struct RemovalScratch {
    MatrixXd g;
    MatrixXd d;
    VectorXd diag;
    bool valid = false;

    double peek_add(int b) const {
      const double denom = 1.0 + g(b, b);
      return (diag - d.col(b).cwiseAbs2() / denom).maxCoeff();
    }
  };

  void removal_scratch(int a, RemovalScratch& out) const {
    const double denom = 1.0 - g_(a, a);
    if (denom <= 1e-10) {
      out.valid = false;
      return;
    }
    const VectorXd r = g_.col(a);
    const VectorXd q = d_.col(a);
    out.g = g_ + (r * r.transpose()) / denom;
    out.d = d_ + (q * r.transpose()) / denom;
    out.diag = diag_ + q.cwiseAbs2() / denom;
    out.valid = true;
  }

  const VectorXi& counts() const { return counts_; }

private:
  MatrixXd f_;
  MatrixXd v_;
  double reg_;
  VectorXi counts_;
  MatrixXd g_;
  MatrixXd d_;
  VectorXd diag_;
  int commits_since_rebuild_ = 0;
};

int effective_rank(const MatrixXd& features, const VectorXd& lambda, double gamma) {
  MatrixXd a = features.transpose() * lambda.asDiagonal() * features;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("round_swap: eigensolver failed");
  const VectorXd ev = es.eigenvalues();
  const double cutoff =
      gamma > 0.0 ? gamma
                  : std::max(ev.maxCoeff(), 0.0) * 1e-12 * static_cast<double>(a.rows()) + 1e-300;
  int count = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] >= cutoff) ++count;
  return count;
}

}  // namespace

Allocation round_ceiling(const Design& lambda, long T) {
  lambda.validate();
  if (T < 1) throw ConfigError("round_ceiling: T must be >= 1");
  Allocation out;
  out.counts = VectorXi::Zero(lambda.weights.size());
  for (Eigen::Index i = 0; i < lambda.weights.size(); ++i) {
    if (lambda.weights[i] > 0.0) {
      out.counts[i] =
          static_cast<int>(std::ceil(lambda.weights[i] * static_cast<double>(T) - 1e-12));
      if (out.counts[i] < 1) out.counts[i] = 1;
    }
  }
  out.total = out.counts.cast<long>().sum();
  return out;
}

Design caratheodory_reduce(const ArmSet& arms, const Design& lambda) {
  lambda.validate();
  if (!arms.has_explicit_features())
    throw UnsupportedModeError("caratheodory_reduce requires explicit features");
  const int d = arms.dim();
  const int target = d * (d + 1) / 2 + 1;

  VectorXd w = lambda.weights;
  std::vector<int> support;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) support.push_back(static_cast<int>(i));
  if (static_cast<int>(support.size()) <= target) return lambda;

  // Rows: upper-triangle moment coordinates of x x^T plus the mass constraint.
  const int rows = d * (d + 1) / 2 + 1;
  const auto moment_column = [&](int arm, VectorXd& col) {
    const auto x = arms.points().row(arm);
    int r = 0;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) col[r++] = x[i] * x[j];
    col[r] = 1.0;
  };

  while (static_cast<int>(support.size()) > target) {
    const int s = static_cast<int>(support.size());
    MatrixXd m(rows, s);
    VectorXd col(rows);
    for (int c = 0; c < s; ++c) {
      moment_column(support[static_cast<std::size_t>(c)], col);
      m.col(c) = col;
    }
    Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeFullV);
    VectorXd null_dir = svd.matrixV().col(s - 1);
    if ((m * null_dir).norm() > 1e-8 * std::max(1.0, m.norm()))
      throw NumericalError("caratheodory_reduce: null direction not found");
    if (null_dir.maxCoeff() <= 0.0) null_dir = -null_dir;

    double step = kInf;
    int hit = -1;
    for (int c = 0; c < s; ++c) {
      if (null_dir[c] > 1e-14) {
        const double ratio = w[support[static_cast<std::size_t>(c)]] / null_dir[c];
        if (ratio < step) {
          step = ratio;
          hit = c;
        }
      }
    }
    if (hit < 0) throw NumericalError("caratheodory_reduce: no positive null entry");
    for (int c = 0; c < s; ++c) w[support[static_cast<std::size_t>(c)]] -= step * null_dir[c];
    w[support[static_cast<std::size_t>(hit)]] = 0.0;

    std::vector<int> next;
    for (int idx : support)
      if (w[idx] > 1e-15)
        next.push_back(idx);
      else
        w[idx] = 0.0;
    if (static_cast<int>(next.size()) >= s)
      throw NumericalError("caratheodory_reduce: support did not shrink");
    support = std::move(next);
  }

  w /= w.sum();
  return Design{w};
}

Allocation round_swap(const DesignProblem& problem, const Design& lambda, long T, double eps) {
  problem.validate();
  lambda.validate();
  if (T < 1) throw ConfigError("round_swap: T must be >= 1");
  if (!(eps > 0.0)) throw ConfigError("round_swap: eps must be positive");
  const ArmSet& arms = *problem.arms;
  if (!arms.has_explicit_features())
    throw UnsupportedModeError("round_swap needs explicit or projected features");

  const int n = arms.n();
  const int d_eff = effective_rank(arms.points(), lambda.weights, problem.gamma);
  const long t_min = static_cast<long>(std::ceil(static_cast<double>(d_eff) / eps));
  if (T < t_min)
    throw std::invalid_argument("round_swap: T=" + std::to_string(T) +
                                " below the required minimum " + std::to_string(t_min) +
                                " (= ceil(effective dim " + std::to_string(d_eff) + " / eps))");

  MatrixXd dirs(static_cast<Eigen::Index>(problem.directions.size()), arms.dim());
  for (std::size_t v = 0; v < problem.directions.size(); ++v)
    dirs.row(static_cast<Eigen::Index>(v)) =
        (arms.points().transpose() * problem.directions[v].coeffs).transpose();

  std::vector<int> candidates = problem.support;
  if (candidates.empty())
    for (int i = 0; i < n; ++i) candidates.push_back(i);

  SwapTracker tracker(arms.points(), dirs, static_cast<double>(T) * problem.gamma);
  Allocation alloc = round_ceiling(lambda, T);
  tracker.rebuild(alloc.counts);

  // Strip the ceiling overshoot, cheapest pull first.
  while (alloc.total > T) {
    int best_arm = -1;
    double best_val = kInf;
    for (int a = 0; a < n; ++a) {
      if (tracker.counts()[a] <= 0) continue;
      const double val = tracker.peek_remove(a);
      if (val < best_val) {
        best_val = val;
        best_arm = a;
      }
    }
    if (best_arm < 0)
      throw NumericalError("round_swap: no removable pull keeps the moment matrix invertible");
    tracker.apply(best_arm, -1);
    --alloc.total;
  }

  // Local swaps: best improving (remove a, add b) per sweep.
  const long budget = 50 * T;
  long evaluations = 0;
  SwapTracker::RemovalScratch scratch;
  bool improved = true;
  while (improved && evaluations < budget) {
    improved = false;
    const double current = tracker.objective();
    double best_val = current;
    int best_a = -1, best_b = -1;
    for (int a = 0; a < n && evaluations < budget; ++a) {
      if (tracker.counts()[a] <= 0) continue;
      tracker.removal_scratch(a, scratch);
      if (!scratch.valid) continue;
      for (int b : candidates) {
        if (b == a) continue;
        if (evaluations++ >= budget) break;
        const double val = scratch.peek_add(b);
        if (val < best_val) {
          best_val = val;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a >= 0 && best_val < current - 1e-12 * std::max(1.0, std::abs(current))) {
      tracker.apply(best_a, -1);
      tracker.apply(best_b, +1);
      improved = true;
    }
  }

  alloc.counts = tracker.counts();
  alloc.total = alloc.counts.cast<long>().sum();
  return alloc;
}

PtrReport ptr_round(const ArmSet& arms, const std::vector<DualVector>& directions,
                    const Design& lambda, double gamma, long T, double eps,
                    const std::vector<int>& candidates) {
  lambda.validate();
  if (!(gamma > 0.0)) throw ConfigError("ptr_round: gamma must be positive");
  if (directions.empty()) throw ConfigError("ptr_round: directions must be nonempty");

  // K = Phi_hat Phi_hat^T via the eigendecomposition of the Gram matrix.
  Eigen::SelfAdjointEigenSolver<MatrixXd> kes(arms.gram());
  if (kes.info() != Eigen::Success) throw NumericalError("ptr_round: gram eigensolver failed");
  const MatrixXd phi_hat =
      kes.eigenvectors() * kes.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  // Diagonalize A_hat(lambda) = sum_i lambda_i phi_hat_i phi_hat_i^T.
  const MatrixXd a_hat = phi_hat.transpose() * lambda.weights.asDiagonal() * phi_hat;
  Eigen::SelfAdjointEigenSolver<MatrixXd> aes(a_hat);
  if (aes.info() != Eigen::Success) throw NumericalError("ptr_round: eigensolver failed");

  const int n = arms.n();
  int d_tilde = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (aes.eigenvalues()[i] >= gamma) ++d_tilde;
  if (d_tilde == 0)
    throw ConfigError("ptr_round: effective dimension is zero (gamma above all eigenvalues)");
  if (T < d_tilde)
    throw std::invalid_argument("ptr_round: T=" + std::to_string(T) +
                                " below the effective dimension " + std::to_string(d_tilde));

  // Top-k eigenvectors (Eigen sorts ascending).
  MatrixXd vk(n, d_tilde);
  for (int i = 0; i < d_tilde; ++i) vk.col(i) = aes.eigenvectors().col(n - 1 - i);
  const MatrixXd projected = phi_hat * vk;  // row i = V_k^T phi_hat(x_i)

  ArmSet projected_arms(projected, KernelSpec::Linear());
  DesignProblem rounded;
  rounded.arms = &projected_arms;
  rounded.directions = directions;
  rounded.gamma = gamma;
  rounded.support = candidates;

  PtrReport report;
  report.allocation = round_swap(rounded, lambda, T, eps);
  report.effective_dim = d_tilde;
  report.projection_rank = d_tilde;

  // Measured inflation in the original space, both sides through the same
  // regularized form at scale 1/T.
  Design alloc_design{report.allocation.counts.cast<double>() /
                      static_cast<double>(report.allocation.total)};
  RegularizedOperator op_design(arms, lambda, gamma);
  RegularizedOperator op_alloc(arms, alloc_design, gamma);
  double design_obj = 0.0, alloc_obj = 0.0;
  for (const DualVector& v : directions) {
    design_obj = std::max(design_obj, op_design.norm_sq(v));
    alloc_obj = std::max(alloc_obj, op_alloc.norm_sq(v));
  }
  report.inflation_factor = design_obj > 0.0 ? alloc_obj / design_obj : 0.0;
  return report;
}

}  // namespace kbandit
