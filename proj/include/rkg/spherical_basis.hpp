#pragma once

#include <vector>

namespace rkg {

/// Coefficients of a radial profile p(x) = sum_j p[j] e_j(x) on S^3,
/// where e_j(x) = sin((j+1)x) / sin(x) and x is the polar angle.
using Profile = std::vector<double>;

/// Frequency of mode j; omega_j^2 is the eigenvalue of -Laplacian + 1 on e_j.
constexpr double omega(int j) { return static_cast<double>(j + 1); }

/// e_j * e_k = sum_{l=0}^{min(j,k)} e_{|j-k|+2l}.
Profile eigen_product(int j, int k);

/// Exact product in coefficient space; result has a.size() + b.size() - 1 entries.
Profile profile_multiply(const Profile& a, const Profile& b);

/// out[n] += scale * (a*b)[n] for n <= nmax (nmax < 0: no cap). `out` must hold
/// na + nb - 1 entries, or nmax + 1 when capped. Zero entries of a and b are skipped.
void accumulate_product(const double* a, int na, const double* b, int nb, double scale,
                        double* out, int nmax = -1);

/// Exponential series on the circle: c[n + J] is the coefficient of e^{inx}, |n| <= J.
struct CircleSeries {
  int J = 0;
  std::vector<double> c;
  double at(int n) const { return (n < -J || n > J) ? 0.0 : c[n + J]; }
};

CircleSeries to_circle_fourier(const Profile& p);

/// ||f||^2_{H^r(S^1, dx)} = 2 pi sum_n <n>^{2r} |c_n|^2.
double circle_sobolev_norm_sq(const CircleSeries& f, double r);

/// (1/pi) int_0^pi p(x) dx, i.e. the sum of the even-index coefficients.
double mean_integral(const Profile& p);

/// <b e_j, e_k> in H^0_x, computed exactly from the product rule.
double matrix_element(const Profile& b, int j, int k);

/// ||p||_{H^r_x} = (sum_j p_j^2 omega_j^{2r})^{1/2}.
double space_norm(const Profile& p, double r);

/// Rigorous upper bound for c(delta) = sqrt(2 pi) (sum_j omega_j^{-1-2 delta})^{1/2}:
/// partial sum plus an integral bound of the tail.
double c_delta(double delta, int partial_terms = 100000);

/// Pointwise value, via the Chebyshev recurrence e_j(x) = U_j(cos x).
double evaluate(const Profile& p, double x);

/// max_x |p(x)| on a uniform grid of `points` nodes in [0, pi].
double grid_sup(const Profile& p, int points = 2048);

/// Drops trailing zero coefficients (keeps at least one entry).
Profile trim(Profile p);

}  // namespace rkg
