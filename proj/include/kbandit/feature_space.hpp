#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "kbandit/errors.hpp"

namespace kbandit {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// ---------------------------------------------------------------------------
// Kernels and arm sets
// ---------------------------------------------------------------------------

struct KernelSpec {
  enum class Kind { linear, rbf, precomputed };

  Kind kind = Kind::linear;
  double bandwidth = 0.0;  // rbf only
  MatrixXd gram;           // precomputed only

  static KernelSpec Linear() { return KernelSpec{Kind::linear, 0.0, {}}; }
  static KernelSpec Rbf(double bandwidth);
  // Gram must be symmetric PSD; the minimum eigenvalue is checked against -1e-8.
  static KernelSpec Precomputed(MatrixXd gram);
};

// k(x_i, x_j) for all pairs of rows of `points`.
MatrixXd gram_matrix(const MatrixXd& points, const KernelSpec& kernel);

// A finite measurement set. Points are rows; the Gram matrix is built once at
// construction. Immutable afterwards.
class ArmSet {
public:
  ArmSet(MatrixXd points, KernelSpec kernel);

  int n() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const MatrixXd& points() const { return points_; }
  const KernelSpec& kernel() const { return kernel_; }
  const MatrixXd& gram() const { return gram_; }

  // True when phi is the identity map, i.e. the d-dimensional classical path
  // is available.
  bool has_explicit_features() const { return kernel_.kind == KernelSpec::Kind::linear; }

  // Concatenates two sets sharing the same linear/rbf kernel. Used for
  // transductive problems where directions live on a target set Z while the
  // design samples from X.
  static ArmSet merged(const ArmSet& a, const ArmSet& b);

private:
  MatrixXd points_;
  KernelSpec kernel_;
  MatrixXd gram_;
};

const MatrixXd& gram_matrix(const ArmSet& arms);

// An element of the feature space represented as sum_i coeffs[i] * phi(x_i)
// over a reference arm set.
struct DualVector {
  VectorXd coeffs;

  static DualVector unit(int n, int index) {
    DualVector v;
    v.coeffs = VectorXd::Zero(n);
    v.coeffs[index] = 1.0;
    return v;
  }
  static DualVector zero(int n) { return DualVector{VectorXd::Zero(n)}; }
};

// <a, b> in the feature space, via the Gram matrix.
double dual_inner(const ArmSet& arms, const DualVector& a, const DualVector& b);

// A probability vector over arms.
struct Design {
  VectorXd weights;

  // Throws ConfigError unless weights are nonnegative and sum to 1 (1e-12).
  void validate() const;

  static Design uniform(int n) { return Design{VectorXd::Constant(n, 1.0 / n)}; }
  static Design dirac(int n, int index) {
    Design d{VectorXd::Zero(n)};
    d.weights[index] = 1.0;
    return d;
  }
};

// ---------------------------------------------------------------------------
// Regularized bilinear forms
// ---------------------------------------------------------------------------

struct EigResult {
  VectorXd values;   // descending, clamped at 0 below -1e-10
  MatrixXd vectors;  // orthonormal columns, matching order
};

// Evaluates a^T (sum_x lambda_x phi(x) phi(x)^T + gamma I)^{-1} b.
//
// Two routes are available behind the same interface:
//  * kernel_path: the Gram-side identity
//      a^T (A + gI)^{-1} b = a^T b / g - k_l(a)^T (K_l + g I)^{-1} k_l(b) / g
//    with K_l[i,j] = sqrt(l_i l_j) k(x_i, x_j); requires gamma > 0.
//  * explicit_path: the direct d x d solve; requires explicit features.
// `automatic` picks explicit for linear kernels and the Gram route otherwise.
//
// The regularized factorization is computed once at construction and shared by
// every evaluation; instances are immutable and safe to use concurrently.
class RegularizedOperator {
public:
  enum class Mode { automatic, kernel_path, explicit_path };

  RegularizedOperator(const ArmSet& arms, Design design, double gamma,
                      Mode mode = Mode::automatic);

  const ArmSet& arms() const { return *arms_; }
  const Design& design() const { return design_; }
  double gamma() const { return gamma_; }
  Mode mode() const { return mode_; }
  const MatrixXd& weighted_gram() const { return weighted_gram_; }

  double bilinear(const DualVector& a, const DualVector& b) const;
  double norm_sq(const DualVector& v) const;

  // reg_bilinear(a, phi(x_i)) for every arm i, in one shot.
  VectorXd bilinear_all_arms(const DualVector& a) const;

  // Rows: one direction; columns: arms. Row v equals bilinear_all_arms(v).
  MatrixXd bilinear_cross(const std::vector<DualVector>& directions) const;

  // ||phi(x_i)||^2_{(A + gamma I)^{-1}} for every arm i.
  VectorXd arm_leverages() const;

  // log det(K_lambda + gamma I) from the cached weighted Gram.
  double gram_log_det() const;

  // Condition number estimate of the regularized solve (largest/smallest
  // eigenvalue of K_l + gamma I resp. A + gamma I).
  double condition_estimate() const;

private:
  const ArmSet* arms_;
  Design design_;
  double gamma_;
  Mode mode_;

  // kernel path
  MatrixXd weighted_gram_;           // K_l
  MatrixXd sqrt_w_gram_;             // diag(sqrt(l)) K
  Eigen::LDLT<MatrixXd> gram_ldlt_;  // K_l + gamma I

  // explicit path
  MatrixXd a_mat_;  // sum_x l_x x x^T + gamma I  (d x d)
  Eigen::LDLT<MatrixXd> a_ldlt_;

  VectorXd explicit_vector(const DualVector& a) const;
};

// Symmetric eigendecomposition of the weighted Gram K_l, descending.
// Reconstruction is verified to 1e-8 in the max norm.
EigResult eig_weighted_gram(const RegularizedOperator& op);

// d~(lambda, gamma): number of eigenvalues of the weighted second-moment
// operator that are >= gamma.
int effective_dim_cutoff(const RegularizedOperator& op, double gamma);
int effective_dim_cutoff(const EigResult& eig, double gamma);

// Trace(K_l (K_l + gamma I)^{-1}), the regularized degrees of freedom.
double trace_effective_dim(const RegularizedOperator& op);

}  // namespace kbandit
