#pragma once

#include <vector>

#include "rkg/spherical_basis.hpp"

namespace rkg {

/// Weights of the analytic-Sobolev scale X_{sigma,s,r}.
struct NormParams {
  double sigma = 0.0;
  double s = 1.0;
  double r = 2.0;
};

/**
 * Space-time coefficients of an even-in-time field
 *
 *   u(t,x) = c_0(x) + 2 sum_{l>=1} cos(l t) c_l(x),   c_l = sum_j u(l,j) e_j,
 *
 * which is the exponential series sum_{l in Z} e^{ilt} c_{|l|}. Storage is dense and
 * row-major in l; entries with l > L or j > J are implicitly zero.
 */
class CoeffField {
 public:
  CoeffField() = default;
  CoeffField(int L, int J);

  int L() const { return L_; }
  int J() const { return J_; }
  bool empty() const { return L_ < 0; }

  double operator()(int l, int j) const { return a_[static_cast<size_t>(l) * (J_ + 1) + j]; }
  double& operator()(int l, int j) { return a_[static_cast<size_t>(l) * (J_ + 1) + j]; }
  /// Bounds-checked read returning 0 outside the truncation.
  double get(int l, int j) const;

  double* row(int l) { return a_.data() + static_cast<size_t>(l) * (J_ + 1); }
  const double* row(int l) const { return a_.data() + static_cast<size_t>(l) * (J_ + 1); }
  Profile profile(int l) const;

  std::vector<double>& data() { return a_; }
  const std::vector<double>& data() const { return a_; }

  bool is_zero() const;
  /// Largest j with a nonzero entry in row l, or -1.
  int row_extent(int l) const;

  CoeffField& operator+=(const CoeffField& o);
  CoeffField& operator-=(const CoeffField& o);
  CoeffField& operator*=(double c);

 private:
  int L_ = -1;
  int J_ = -1;
  std::vector<double> a_;
};

CoeffField operator+(CoeffField a, const CoeffField& b);
CoeffField operator-(CoeffField a, const CoeffField& b);
CoeffField operator*(double c, CoeffField a);

/// Weight of entry (l,j) in the norm: sqrt(2 - [l==0]) e^{sigma l} <l>^s omega_j^r.
double norm_weight(int l, int j, const NormParams& p);

double field_norm(const CoeffField& u, const NormParams& p);
double field_inner(const CoeffField& u, const CoeffField& v, const NormParams& p);
/// Max-entry difference over the union of the two truncations.
double max_abs_diff(const CoeffField& u, const CoeffField& v);

/// Exact pointwise product; truncation (L_u + L_v, J_u + J_v).
CoeffField field_multiply(const CoeffField& u, const CoeffField& v);
/// Exact product restricted to the window l <= L_out, j <= J_out.
CoeffField field_multiply(const CoeffField& u, const CoeffField& v, int L_out, int J_out);
/// Entries (omega_j, j) of u*v for j = 0..jmax.
std::vector<double> product_diagonal(const CoeffField& u, const CoeffField& v, int jmax);

/// Keeps exactly the kernel entries l = j + 1.
CoeffField project_V(const CoeffField& u);
CoeffField project_W(const CoeffField& u);
/// Zeroes all l > Ln.
CoeffField project_Pn(const CoeffField& u, int Ln);
/// Zeroes the j = l - 1 coefficient; identity for l = 0.
Profile pi_ell(const Profile& p, int l);
bool in_W(const CoeffField& u);

CoeffField apply_dtt(const CoeffField& u);
CoeffField apply_A(const CoeffField& u);
/// L_omega = -omega^2 d_tt - A, symbol omega^2 l^2 - omega_j^2.
CoeffField apply_L_omega(const CoeffField& u, double omega_t);

struct Truncation {
  CoeffField field;
  double discarded_norm = 0.0;
};
Truncation truncate(const CoeffField& u, int L, int J, const NormParams& p);
/// Zero-pads or cuts to (L, J) without reporting.
CoeffField resized(const CoeffField& u, int L, int J);
/// Smallest truncation that holds all nonzero entries (at least 1x1).
CoeffField trimmed(const CoeffField& u);

/// ||u||_{sigma',s} <= e^{-L_n (sigma - sigma')} ||u||_{sigma,s} for u supported on l > L_n.
bool smoothing_bound_check(const CoeffField& u, double sigma, double sigma_p, int Ln,
                           double s = 1.0, double r = 2.0);
/// sup_{x>=0} e^{-alpha x} <x>^beta = max{1, e^{-beta} (beta/alpha)^beta}.
double trade_constant(double alpha, double beta);
/// ||u||_{sigma-alpha, s+beta} <= trade_constant(alpha, beta) ||u||_{sigma,s}.
bool sobolev_trade_check(const CoeffField& u, double sigma, double s, double alpha, double beta,
                         double r = 2.0);

/// Pointwise value u(t, x).
double evaluate(const CoeffField& u, double t, double x);

}  // namespace rkg
