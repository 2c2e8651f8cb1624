#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rkg/bifurcation.hpp"
#include "rkg/coupling.hpp"
#include "rkg/field_algebra.hpp"

namespace rkg {

/// How ||Lop^{-1}|| is obtained per class: power iteration (a lower bound), the
/// explicit inverse's min(Frobenius, sqrt(||.||_1 ||.||_inf)) (an upper bound), or SVD.
enum class InverseNormMethod { Estimate, Bound, Exact };

/**
 * The linearized range operator on W^(n) = {(l, j) : l <= Ln, j <= Jmax, l != omega_j},
 *
 *   Lop h = L_omega h - eps P_n Pi_W (b (h + d_w v[h])),   b = 3 (v + w)^2,
 *
 * with omega^2 = 1 + eps. It is assembled class by class over the invariant classes of
 * b (see CouplingPattern), in stored coordinates; within a class
 *
 *   Lop = Lambda - eps K,   K = K1 + B J^{-1} C,
 *
 * where K1 is multiplication by b, C maps h to Pi_V(b h) in kernel coordinates, J is
 * the kernel Jacobian and B multiplies a kernel field by b. Solves are done on the
 * norm-weighted matrix W Lop W^{-1}, whose 2-norm is the operator norm in X_{sigma,s}.
 *
 * Factorizations are cached per class on first use; the object is not thread-safe.
 */
class LinearizedOperator {
 public:
  LinearizedOperator(double eps, std::shared_ptr<const KernelJacobian> jac, int Ln, int Jmax,
                     const NormParams& scale);
  /// Builds the kernel Jacobian at (v, w) first.
  static LinearizedOperator assemble(double eps, const CoeffField& w, const KernelField& v,
                                     int Ln, int Jmax, const NormParams& scale);

  double eps() const { return eps_; }
  double omega2() const { return 1.0 + eps_; }
  int Ln() const { return Ln_; }
  int Jmax() const { return Jmax_; }
  const NormParams& scale() const { return scale_; }
  const KernelJacobian& jacobian() const { return *jac_; }
  /// Time mean b_0 of b.
  Profile b0() const;

  int classes() const { return static_cast<int>(modes_.size()); }
  /// W modes of class c as (l, j), ordered by l then j.
  const std::vector<std::pair<int, int>>& class_modes(int c) const { return modes_[c]; }
  /// Kernel group coupled to class c, or -1.
  int class_kernel_group(int c) const { return kgroup_[c]; }
  int class_of(int l, int j) const;
  size_t dimension() const;

  /// Unperturbed symbol omega^2 l^2 - omega_j^2 on the modes of class c.
  Eigen::VectorXd symbol(int c) const;
  /// K1 + B J^{-1} C on class c.
  Eigen::MatrixXd coupling(int c) const;
  Eigen::MatrixXd matrix(int c) const;

  /// Lop = D - eps M1 - eps M2: D is the l-diagonal part carrying the time mean b_0,
  /// M1 the remaining multiplication by b, M2 = B J^{-1} C.
  struct Parts {
    Eigen::MatrixXd D, M1, M2;
  };
  Parts parts(int c) const;

  /// Full matrix in the order of modes(); only for small truncations.
  Eigen::MatrixXd dense() const;
  std::vector<std::pair<int, int>> modes() const;

  CoeffField apply(const CoeffField& h) const;
  /// P_n Pi_W D_w Gamma(w)[h], Gamma(w) = (v(w) + w)^3.
  CoeffField dgamma(const CoeffField& h) const;
  /// Solves Lop h = rhs on W^(n); rhs entries outside W^(n) are ignored.
  CoeffField solve(const CoeffField& rhs) const;

  /// ||Lop^{-1}|| in X_{sigma,s} on class c.
  double class_inverse_norm(int c, InverseNormMethod method = InverseNormMethod::Exact) const;
  struct InverseNorm {
    double value = 0.0;
    int worst_class = -1;
    int classes = 0;
  };
  /// Maximum over all classes, or only those in `which`.
  InverseNorm inverse_norm(InverseNormMethod method = InverseNormMethod::Exact,
                           const std::vector<int>* which = nullptr) const;
  /// Classes containing a nonzero entry of f.
  std::vector<int> touched_classes(const CoeffField& f) const;

 private:
  struct Cache {
    Eigen::MatrixXd K;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  };
  const Cache& cache(int c) const;
  Eigen::VectorXd log_weights(int c, const NormParams& p) const;
  Eigen::MatrixXd scaled(int c, const Eigen::MatrixXd& L) const;

  double eps_;
  std::shared_ptr<const KernelJacobian> jac_;
  int Ln_, Jmax_;
  NormParams scale_;
  RowMultipliers T_;
  std::vector<std::vector<std::pair<int, int>>> modes_;
  std::vector<int> kgroup_;
  std::vector<int> class_id_;  // per flat (l, j), -1 on the kernel diagonal
  mutable std::unordered_map<int, Cache> cache_;
};

/// Eigen-decomposition of S_l(eps) = A + eps pi_l b0 pi_l on span{e_j : j <= Jmax, j != l-1}.
struct SpectralBlock {
  int ell = 0;
  int Jmax = 0;
  double eps = 0.0;
  /// lambda[j] is the eigenvalue continuing omega_j^2; NaN at the removed index.
  std::vector<double> lambda;
  /// Column j is the H^0-normalized eigenvector labelled j (empty if not requested).
  Eigen::MatrixXd phi;

  bool has(int j) const { return j >= 0 && j <= Jmax && j != ell - 1; }
};

/// Labels follow the largest overlap with the unperturbed basis. Throws
/// std::domain_error when |eps| is not below 1 / (1.05 sup|b0|).
SpectralBlock diagonalize_block(int ell, double eps, const Profile& b0, int Jmax,
                                bool vectors = true);

/// |lambda_j - omega_j^2 - eps mean(b0)| against 2 c(delta) eps ||b0||_{H^2} / omega_j^{1-delta}.
struct DriftReport {
  double max_ratio = 0.0;
  int worst_j = -1;
  bool ok = true;
};
DriftReport drift_check(const SpectralBlock& blk, const Profile& b0, double delta = 0.5);

/// Central differences of each labelled eigenvalue in eps, step h.
struct EpsDerivatives {
  std::vector<double> first, second;
};
EpsDerivatives eigen_derivatives(int ell, double eps, const Profile& b0, int Jmax, double h);

struct DivisorRow {
  int ell = 0;
  double alpha = 0.0;
  int jmin = -1;
  double lambda = 0.0;
  double floor = 0.0;
  bool pass = true;
};
struct DivisorReport {
  double eps = 0.0, gamma = 0.0, tau = 0.0;
  std::vector<DivisorRow> rows;  // l = 0..Ln

  bool all_pass() const;
  std::vector<int> failures() const;
  double alpha(int l) const { return rows[static_cast<size_t>(l < 0 ? -l : l)].alpha; }
};
/// alpha_l = min_j |omega^2 l^2 - lambda_{l,j}| with floor gamma / (20 <l>^{tau-1}).
DivisorReport small_divisors(double eps, const Profile& b0, int Ln, int Jmax, double gamma,
                             double tau);

/// Best constant C in 1/(alpha_l alpha_k) <= C |k-l|^{2(tau-1)/beta} / (gamma^2 eps^{tau-1}),
/// beta = (2 - tau)/tau, over all l != k in [-Ln, Ln]. Infinite for eps = 0.
struct ProductBound {
  double constant = 0.0;
  int ell = 0, k = 0;
};
ProductBound product_bound_constant(const DivisorReport& rep);

/// Norms of the pieces of Lop = |D|^{1/2} (U - eps R1 - eps R2) |D|^{1/2} on chosen
/// classes, and a cross-check of the Neumann-series inverse against the dense one.
struct SplitReport {
  double U_norm = 0.0;      // in X_{sigma,s}, bound 4
  double Dhalf_ratio = 0.0; // ||D|^{-1/2}|| from X_{sigma,s+(tau-1)/2} to X_{sigma,s}, over 9/sqrt(gamma)
  double R1_norm = 0.0;     // in X_{sigma,s+(tau-1)/2}
  double R2_norm = 0.0;
  double R1_constant = 0.0; // R1_norm gamma eps^{(tau-1)/2}
  double R2_constant = 0.0; // R2_norm gamma
  double neumann_norm = 0.0;  // ||eps U (R1 + R2)||
  bool neumann_converges = false;
  int neumann_terms = 0;
  double neumann_vs_dense = 0.0;  // max relative difference over probes
  int classes = 0;
};
SplitReport preconditioned_split_check(const LinearizedOperator& op, double gamma, double tau,
                                       const std::vector<int>& classes, int probes = 3);

void write_divisors_csv(std::ostream& os, const DivisorReport& rep);
/// Rows (l, j, lambda, alpha_l) for every labelled eigenvalue.
void write_spectrum_csv(std::ostream& os, const std::vector<SpectralBlock>& blocks,
                        const DivisorReport* rep = nullptr);

}  // namespace rkg
