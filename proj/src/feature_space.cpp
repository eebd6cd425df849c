#include "kbandit/feature_space.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace kbandit {

namespace {

constexpr double kPsdTol = 1e-8;

void check_symmetric(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw ConfigError(std::string(what) + ": matrix not square");
  const double dev = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (dev > 1e-10 * scale) throw ConfigError(std::string(what) + ": matrix not symmetric");
}

}  // namespace

KernelSpec KernelSpec::Rbf(double bandwidth) {
  if (!(bandwidth > 0.0)) throw ConfigError("rbf kernel: bandwidth must be positive");
  return KernelSpec{Kind::rbf, bandwidth, {}};
}

KernelSpec KernelSpec::Precomputed(MatrixXd gram) {
  check_symmetric(gram, "precomputed kernel");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("precomputed kernel: eigensolver failed");
  if (es.eigenvalues().minCoeff() < -kPsdTol)
    throw ConfigError("precomputed kernel: gram is not positive semidefinite");
  return KernelSpec{Kind::precomputed, 0.0, std::move(gram)};
}

MatrixXd gram_matrix(const MatrixXd& points, const KernelSpec& kernel) {
  const auto n = points.rows();
  switch (kernel.kind) {
    case KernelSpec::Kind::linear:
      return points * points.transpose();
    case KernelSpec::Kind::rbf: {
      MatrixXd k(n, n);
      const double inv = 1.0 / (2.0 * kernel.bandwidth * kernel.bandwidth);
      for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double d2 = (points.row(i) - points.row(j)).squaredNorm();
          const double v = std::exp(-d2 * inv);
          k(i, j) = v;
          k(j, i) = v;
        }
      }
      return k;
    }
    case KernelSpec::Kind::precomputed:
      if (kernel.gram.rows() != n)
        throw ConfigError("precomputed kernel: gram size does not match point count");
      return kernel.gram;
  }
  throw ConfigError("unknown kernel kind");
}

ArmSet::ArmSet(MatrixXd points, KernelSpec kernel)
    : points_(std::move(points)), kernel_(std::move(kernel)) {
  if (points_.rows() < 1) throw ConfigError("arm set: need at least one point");
  gram_ = gram_matrix(points_, kernel_);
}

ArmSet ArmSet::merged(const ArmSet& a, const ArmSet& b) {
  if (a.kernel().kind == KernelSpec::Kind::precomputed ||
      b.kernel().kind == KernelSpec::Kind::precomputed)
    throw UnsupportedModeError("merged arm sets require a linear or rbf kernel");
  if (a.kernel().kind != b.kernel().kind || a.kernel().bandwidth != b.kernel().bandwidth)
    throw ConfigError("merged arm sets must share one kernel");
  if (a.dim() != b.dim()) throw ConfigError("merged arm sets must share the ambient dimension");
  MatrixXd pts(a.n() + b.n(), a.dim());
  pts.topRows(a.n()) = a.points();
  pts.bottomRows(b.n()) = b.points();
  return ArmSet(std::move(pts), a.kernel());
}

const MatrixXd& gram_matrix(const ArmSet& arms) { return arms.gram(); }

double dual_inner(const ArmSet& arms, const DualVector& a, const DualVector& b) {
  return a.coeffs.dot(arms.gram() * b.coeffs);
}

void Design::validate() const {
  if (weights.size() == 0) throw ConfigError("design: empty weight vector");
  if (weights.minCoeff() < 0.0) throw ConfigError("design: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ConfigError("design: weights must sum to 1");
}

RegularizedOperator::RegularizedOperator(const ArmSet& arms, Design design, double gamma,
                                         Mode mode)
    : arms_(&arms), design_(std::move(design)), gamma_(gamma) {
  design_.validate();
  if (design_.weights.size() != arms.n())
    throw ConfigError("regularized operator: design length does not match arm count");
  if (gamma < 0.0) throw ConfigError("regularized operator: gamma must be nonnegative");

  if (mode == Mode::automatic)
    mode = arms.has_explicit_features() ? Mode::explicit_path : Mode::kernel_path;
  mode_ = mode;

  const VectorXd sqrt_w = design_.weights.cwiseSqrt();
  sqrt_w_gram_ = sqrt_w.asDiagonal() * arms.gram();
  weighted_gram_ = sqrt_w_gram_ * sqrt_w.asDiagonal();

  if (mode_ == Mode::kernel_path) {
    if (!(gamma_ > 0.0))
      throw UnsupportedModeError(
          "kernel-path bilinear forms need gamma > 0; use explicit features at gamma = 0");
    MatrixXd reg = weighted_gram_;
    reg.diagonal().array() += gamma_;
    gram_ldlt_.compute(reg);
    if (gram_ldlt_.info() != Eigen::Success)
      throw NumericalError("regularized operator: LDLT of K_lambda + gamma I failed");
  } else {
    if (!arms.has_explicit_features())
      throw UnsupportedModeError("explicit path requires a linear kernel");
    const MatrixXd& x = arms.points();
    a_mat_ = x.transpose() * design_.weights.asDiagonal() * x;
    a_mat_.diagonal().array() += gamma_;
    a_ldlt_.compute(a_mat_);
    if (a_ldlt_.info() != Eigen::Success)
      throw NumericalError("regularized operator: LDLT of A(lambda) + gamma I failed");
  }
}

VectorXd RegularizedOperator::explicit_vector(const DualVector& a) const {
  return arms_->points().transpose() * a.coeffs;
}

double RegularizedOperator::bilinear(const DualVector& a, const DualVector& b) const {
  if (a.coeffs.size() != arms_->n() || b.coeffs.size() != arms_->n())
    throw ConfigError("bilinear: dual coefficient length does not match arm count");
  if (mode_ == Mode::explicit_path) {
    const VectorXd av = explicit_vector(a);
    const VectorXd bv = explicit_vector(b);
    return av.dot(a_ldlt_.solve(bv));
  }
  const double ab = a.coeffs.dot(arms_->gram() * b.coeffs);
  const VectorXd ka = sqrt_w_gram_ * a.coeffs;
  const VectorXd kb = sqrt_w_gram_ * b.coeffs;
  return (ab - ka.dot(gram_ldlt_.solve(kb))) / gamma_;
}

double RegularizedOperator::norm_sq(const DualVector& v) const {
  const double val = bilinear(v, v);
  return val < 0.0 ? 0.0 : val;
}

VectorXd RegularizedOperator::bilinear_all_arms(const DualVector& a) const {
  if (mode_ == Mode::explicit_path) {
    const VectorXd z = a_ldlt_.solve(explicit_vector(a));
    return arms_->points() * z;
  }
  const VectorXd ka = arms_->gram() * a.coeffs;  // [a^T phi(x_i)]_i, gram symmetric
  const VectorXd w = gram_ldlt_.solve(sqrt_w_gram_ * a.coeffs);
  const VectorXd correction = sqrt_w_gram_.transpose() * w;
  return (ka - correction) / gamma_;
}

MatrixXd RegularizedOperator::bilinear_cross(const std::vector<DualVector>& directions) const {
  MatrixXd out(static_cast<Eigen::Index>(directions.size()), arms_->n());
  for (std::size_t i = 0; i < directions.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = bilinear_all_arms(directions[i]).transpose();
  return out;
}

VectorXd RegularizedOperator::arm_leverages() const {
  if (mode_ == Mode::explicit_path) {
    const MatrixXd z = a_ldlt_.solve(arms_->points().transpose());  // d x n
    return (arms_->points().transpose().cwiseProduct(z)).colwise().sum().transpose();
  }
  const MatrixXd w = gram_ldlt_.solve(sqrt_w_gram_);  // (K_l + gI)^{-1} diag(sqrt(l)) K
  const VectorXd corr = (sqrt_w_gram_.cwiseProduct(w)).colwise().sum().transpose();
  return (arms_->gram().diagonal() - corr) / gamma_;
}

double RegularizedOperator::gram_log_det() const {
  MatrixXd reg = weighted_gram_;
  reg.diagonal().array() += gamma_;
  Eigen::LDLT<MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("gram_log_det: LDLT failed");
  return ldlt.vectorD().array().max(1e-300).log().sum();
}

double RegularizedOperator::condition_estimate() const {
  const MatrixXd& m = (mode_ == Mode::explicit_path) ? a_mat_ : weighted_gram_;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("condition estimate: eigensolver failed");
  const double lo = es.eigenvalues().minCoeff() + (mode_ == Mode::explicit_path ? 0.0 : gamma_);
  const double hi = es.eigenvalues().maxCoeff() + (mode_ == Mode::explicit_path ? 0.0 : gamma_);
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

EigResult eig_weighted_gram(const RegularizedOperator& op) {
  const MatrixXd& k = op.weighted_gram();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
  if (es.info() != Eigen::Success) throw NumericalError("eig_weighted_gram: eigensolver failed");

  const auto n = k.rows();
  EigResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = es.eigenvalues()[n - 1 - i];  // descending
    if (v < 0.0) {
      if (v < -1e-10) throw NumericalError("eig_weighted_gram: weighted gram not PSD");
      v = 0.0;
    }
    out.values[i] = v;
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }

  const double recon =
      (k - out.vectors * out.values.asDiagonal() * out.vectors.transpose()).cwiseAbs().maxCoeff();
  if (recon > 1e-8 * std::max(1.0, k.cwiseAbs().maxCoeff()))
    throw NumericalError("eig_weighted_gram: reconstruction check failed");
  return out;
}

int effective_dim_cutoff(const EigResult& eig, double gamma) {
  int count = 0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    if (eig.values[i] >= gamma) ++count;
  return count;
}

int effective_dim_cutoff(const RegularizedOperator& op, double gamma) {
  return effective_dim_cutoff(eig_weighted_gram(op), gamma);
}

double trace_effective_dim(const RegularizedOperator& op) {
  const EigResult eig = eig_weighted_gram(op);
  const double gamma = op.gamma();
  double total = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    const double d = eig.values[i];
    if (d > 0.0) total += d / (d + gamma);
  }
  return total;
}

}  // namespace kbandit
