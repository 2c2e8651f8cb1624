#include "rkg/spherical_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rkg {

Profile eigen_product(int j, int k) {
  if (j < 0 || k < 0) throw std::invalid_argument("eigen_product: negative mode");
  Profile out(static_cast<size_t>(j + k + 1), 0.0);
  for (int n = std::abs(j - k); n <= j + k; n += 2) out[n] = 1.0;
  return out;
}

void accumulate_product(const double* a, int na, const double* b, int nb, double scale,
                        double* out, int nmax) {
  const int top = na + nb - 2;
  const int cap = nmax < 0 ? top : std::min(nmax, top);
  if (cap < 0) return;
  // Pair (j, k) adds a_j b_k on n = |j-k|, |j-k|+2, ..., j+k: a range update, kept as a
  // difference array along each parity class and summed once at the end.
  thread_local std::vector<double> d;
  d.assign(static_cast<size_t>(cap + 3), 0.0);
  bool any = false;
  for (int j = 0; j < na; ++j) {
    const double aj = a[j];
    if (aj == 0.0) continue;
    for (int k = 0; k < nb; ++k) {
      const double bk = b[k];
      const int lo = std::abs(j - k);
      if (bk == 0.0 || lo > cap) continue;
      const double t = aj * bk;
      d[lo] += t;
      if (j + k <= cap) d[j + k + 2] -= t;
      any = true;
    }
  }
  if (!any) return;
  for (int n = 0; n <= cap; ++n) {
    if (n >= 2) d[n] += d[n - 2];
    out[n] += scale * d[n];
  }
}

Profile profile_multiply(const Profile& a, const Profile& b) {
  if (a.empty() || b.empty()) return Profile{};
  Profile out(a.size() + b.size() - 1, 0.0);
  accumulate_product(a.data(), static_cast<int>(a.size()), b.data(), static_cast<int>(b.size()),
                     1.0, out.data());
  return out;
}

CircleSeries to_circle_fourier(const Profile& p) {
  CircleSeries f;
  f.J = p.empty() ? 0 : static_cast<int>(p.size()) - 1;
  f.c.assign(2 * f.J + 1, 0.0);
  for (int j = 0; j < static_cast<int>(p.size()); ++j) {
    if (p[j] == 0.0) continue;
    for (int m = 0; m <= j; ++m) f.c[2 * m - j + f.J] += p[j];
  }
  return f;
}

double circle_sobolev_norm_sq(const CircleSeries& f, double r) {
  double acc = 0.0;
  for (int n = -f.J; n <= f.J; ++n) {
    const double w = std::pow(std::max(1.0, std::abs(static_cast<double>(n))), 2.0 * r);
    acc += w * f.at(n) * f.at(n);
  }
  return 2.0 * std::numbers::pi * acc;
}

double mean_integral(const Profile& p) {
  double acc = 0.0;
  for (size_t j = 0; j < p.size(); j += 2) acc += p[j];
  return acc;
}

double matrix_element(const Profile& b, int j, int k) {
  // e_i e_j contains e_k iff |j-k| <= i <= j+k with i = j+k (mod 2).
  const int hi = std::min(j + k, static_cast<int>(b.size()) - 1);
  double acc = 0.0;
  for (int i = std::abs(j - k); i <= hi; i += 2) acc += b[i];
  return acc;
}

double space_norm(const Profile& p, double r) {
  double acc = 0.0;
  for (size_t j = 0; j < p.size(); ++j) {
    acc += p[j] * p[j] * std::pow(omega(static_cast<int>(j)), 2.0 * r);
  }
  return std::sqrt(acc);
}

double c_delta(double delta, int partial_terms) {
  if (delta <= 0.0) throw std::invalid_argument("c_delta: delta must be positive");
  const double p = 1.0 + 2.0 * delta;
  double sum = 0.0;
  for (int w = partial_terms; w >= 1; --w) sum += std::pow(static_cast<double>(w), -p);
  // sum_{w > N} w^{-p} <= int_N^inf x^{-p} dx
  sum += std::pow(static_cast<double>(partial_terms), 1.0 - p) / (p - 1.0);
  return std::sqrt(2.0 * std::numbers::pi * sum);
}

double evaluate(const Profile& p, double x) {
  // Clenshaw for sum p_j U_j(c).
  const double c = std::cos(x);
  double b1 = 0.0, b2 = 0.0;
  for (int j = static_cast<int>(p.size()) - 1; j >= 0; --j) {
    const double b0 = p[j] + 2.0 * c * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return b1;
}

double grid_sup(const Profile& p, int points) {
  double best = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = std::numbers::pi * i / (points - 1);
    best = std::max(best, std::abs(evaluate(p, x)));
  }
  return best;
}

Profile trim(Profile p) {
  while (p.size() > 1 && p.back() == 0.0) p.pop_back();
  return p;
}

}  // namespace rkg
