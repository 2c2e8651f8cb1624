#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "rkg/coupling.hpp"
#include "rkg/field_algebra.hpp"

namespace rkg {

/// Kernel element v(t,x) = sum_j v[j] cos(omega_j t) e_j(x). In CoeffField storage the
/// mode j sits at (omega_j, j) with value v[j] / 2.
struct KernelField {
  std::vector<double> v;

  KernelField() = default;
  explicit KernelField(int JV) : v(static_cast<size_t>(JV + 1), 0.0) {}
  int JV() const { return static_cast<int>(v.size()) - 1; }
  double get(int j) const { return j < static_cast<int>(v.size()) ? v[j] : 0.0; }
};

/// sign * sqrt(4 omega_m / 3) at index m.
KernelField explicit_kernel_solution(int m, int sign, int JV = -1);
/// v as a CoeffField with truncation at least (L, J).
CoeffField embed(const KernelField& v, int L = 0, int J = 0);
/// Kernel coordinates of a field: v[j] = 2 u(omega_j, j).
KernelField extract_kernel(const CoeffField& u, int JV);
/// Norm of the embedded kernel field.
double kernel_norm(const KernelField& v, const NormParams& p);

/// A v - Pi_V (v + w)^3 on modes j <= v.JV(). Throws std::invalid_argument if w has a
/// kernel component.
KernelField kernel_residual(const KernelField& v, const CoeffField& w);

/// Dense matrix of h -> A h - 3 Pi_V((v + w)^2 h) on modes 0..v.JV().
Eigen::MatrixXd linearize_kernel(const KernelField& v, const CoeffField& w);

/// The 2x2 block coupling modes j and 2m - j at v = explicit_kernel_solution(m), w = 0.
struct BifBlock {
  int m = 0;
  int j = 0;
  std::array<int64_t, 4> a{};  // row-major

  int64_t det() const { return a[0] * a[3] - a[1] * a[2]; }
  /// -omega_j (omega_m - omega_j)^2 (4 omega_m - omega_j).
  static int64_t det_formula(int m, int j);
};
BifBlock bif_block(int m, int j);

/**
 * Jacobian of the kernel equation at a point, factorized once. Modes are grouped by the
 * invariant classes of (v + w)^2 so each group is factorized independently.
 */
class KernelJacobian {
 public:
  KernelJacobian() = default;
  KernelJacobian(const KernelField& v, const CoeffField& w);

  int JV() const { return JV_; }
  /// Square of the full field u = v + w, used by every product at this point.
  const CoeffField& u_squared() const { return u2_; }
  const CouplingPattern& pattern() const { return pattern_; }
  /// Group index of kernel mode i; modes of different groups do not couple.
  int group_of(int i) const { return group_of_[i]; }
  const std::vector<int>& group_modes(int g) const { return groups_[g]; }
  int groups() const { return static_cast<int>(groups_.size()); }

  /// Solves J x = rhs mode-wise; only groups with a nonzero right-hand side are touched.
  KernelField solve(const KernelField& rhs) const;
  /// LU factor of one group, in group_modes(g) order.
  const Eigen::PartialPivLU<Eigen::MatrixXd>& factor(int g) const { return lu_[g]; }
  Eigen::MatrixXd dense() const;

 private:
  int JV_ = -1;
  CoeffField u2_;
  CouplingPattern pattern_;
  std::vector<int> group_of_;
  std::vector<std::vector<int>> groups_;
  std::vector<Eigen::MatrixXd> blocks_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

struct KernelSolveOptions {
  double tol = 1e-12;
  int max_iter = 40;
  /// A run that stops improving counts as converged if its residual is below this.
  double stall_tol = 1e-9;
  NormParams norm{};
};

struct KernelSolveResult {
  KernelField v;
  std::vector<double> residuals;  // residual norm before each step, then the final one
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton from the explicit solution of branch (m, sign).
KernelSolveResult solve_kernel(const CoeffField& w, int m, int sign, int JV,
                               const KernelSolveOptions& opt = {});
/// Damped Newton from an arbitrary start.
KernelSolveResult solve_kernel_from(const CoeffField& w, KernelField v0,
                                    const KernelSolveOptions& opt = {});
/// Chord iteration with a frozen Jacobian; runs until the residual stops decreasing
/// or falls below opt.tol.
KernelSolveResult solve_kernel_chord(const CoeffField& w, KernelField v0,
                                     const KernelJacobian& jac,
                                     const KernelSolveOptions& opt = {});

/// Pi_V(b h) in kernel coordinates for b = 3 (v + w)^2 = 3 jac.u_squared().
KernelField kernel_coupling(const KernelJacobian& jac, const CoeffField& h, int JV);
/// d_w v[h]: solves linearize_kernel(v, w) dv = 3 Pi_V((v + w)^2 h).
KernelField kernel_derivative(const KernelField& v, const CoeffField& w, const CoeffField& h);
KernelField kernel_derivative(const KernelJacobian& jac, const CoeffField& h);

}  // namespace rkg
