#include "rkg/field_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rkg/parallel.hpp"

namespace rkg {

CoeffField::CoeffField(int L, int J) : L_(L), J_(J) {
  if (L < 0 || J < 0) throw std::invalid_argument("CoeffField: negative truncation");
  a_.assign(static_cast<size_t>(L + 1) * (J + 1), 0.0);
}

double CoeffField::get(int l, int j) const {
  if (l < 0 || j < 0 || l > L_ || j > J_) return 0.0;
  return (*this)(l, j);
}

Profile CoeffField::profile(int l) const {
  if (l > L_) return Profile(static_cast<size_t>(J_ + 1), 0.0);
  return Profile(row(l), row(l) + J_ + 1);
}

bool CoeffField::is_zero() const {
  return std::all_of(a_.begin(), a_.end(), [](double x) { return x == 0.0; });
}

int CoeffField::row_extent(int l) const {
  const double* r = row(l);
  for (int j = J_; j >= 0; --j) {
    if (r[j] != 0.0) return j;
  }
  return -1;
}

namespace {

CoeffField& combine(CoeffField& a, const CoeffField& b, double sign) {
  if (b.empty()) return a;
  if (a.empty()) {
    a = CoeffField(b.L(), b.J());
  } else if (b.L() > a.L() || b.J() > a.J()) {
    a = resized(a, std::max(a.L(), b.L()), std::max(a.J(), b.J()));
  }
  for (int l = 0; l <= b.L(); ++l) {
    double* dst = a.row(l);
    const double* src = b.row(l);
    for (int j = 0; j <= b.J(); ++j) dst[j] += sign * src[j];
  }
  return a;
}

}  // namespace

CoeffField& CoeffField::operator+=(const CoeffField& o) { return combine(*this, o, 1.0); }
CoeffField& CoeffField::operator-=(const CoeffField& o) { return combine(*this, o, -1.0); }
CoeffField& CoeffField::operator*=(double c) {
  for (double& x : a_) x *= c;
  return *this;
}

CoeffField operator+(CoeffField a, const CoeffField& b) { return a += b; }
CoeffField operator-(CoeffField a, const CoeffField& b) { return a -= b; }
CoeffField operator*(double c, CoeffField a) { return a *= c; }

namespace {

double log_weight(int l, int j, const NormParams& p) {
  const double lt = std::max(1.0, static_cast<double>(l));
  double w = p.sigma * l + p.s * std::log(lt) + p.r * std::log(omega(j));
  if (l > 0) w += 0.5 * std::log(2.0);
  return w;
}

}  // namespace

double norm_weight(int l, int j, const NormParams& p) { return std::exp(log_weight(l, j, p)); }

double field_norm(const CoeffField& u, const NormParams& p) {
  // Sum of squares in log space: weights overflow long before the coefficients vanish.
  std::vector<double> logs;
  double top = -std::numeric_limits<double>::infinity();
  for (int l = 0; l <= u.L(); ++l) {
    const double* r = u.row(l);
    for (int j = 0; j <= u.J(); ++j) {
      if (r[j] == 0.0) continue;
      const double lg = log_weight(l, j, p) + std::log(std::abs(r[j]));
      logs.push_back(lg);
      top = std::max(top, lg);
    }
  }
  if (logs.empty()) return 0.0;
  double acc = 0.0;
  for (double lg : logs) acc += std::exp(2.0 * (lg - top));
  return std::exp(top) * std::sqrt(acc);
}

double field_inner(const CoeffField& u, const CoeffField& v, const NormParams& p) {
  const int L = std::min(u.L(), v.L());
  const int J = std::min(u.J(), v.J());
  double acc = 0.0;
  for (int l = 0; l <= L; ++l) {
    for (int j = 0; j <= J; ++j) {
      const double a = u(l, j), b = v(l, j);
      if (a == 0.0 || b == 0.0) continue;
      const double w = norm_weight(l, j, p);
      acc += a * b * w * w;
    }
  }
  return acc;
}

double max_abs_diff(const CoeffField& u, const CoeffField& v) {
  const int L = std::max(u.L(), v.L());
  const int J = std::max(u.J(), v.J());
  double m = 0.0;
  for (int l = 0; l <= L; ++l) {
    for (int j = 0; j <= J; ++j) m = std::max(m, std::abs(u.get(l, j) - v.get(l, j)));
  }
  return m;
}

namespace {

std::vector<int> extents(const CoeffField& u) {
  std::vector<int> e(static_cast<size_t>(u.L() + 1));
  for (int l = 0; l <= u.L(); ++l) e[l] = u.row_extent(l);
  return e;
}

// Adds factor * (u_l1 * v_l2) to `out` (length J_out + 1).
inline void row_product(const CoeffField& u, int l1, int eu, const CoeffField& v, int l2, int ev,
                        double factor, double* out, int J_out) {
  accumulate_product(u.row(l1), eu + 1, v.row(l2), ev + 1, factor, out, J_out);
}

}  // namespace

CoeffField field_multiply(const CoeffField& u, const CoeffField& v, int L_out, int J_out) {
  CoeffField w(L_out, J_out);
  if (u.empty() || v.empty()) return w;
  const std::vector<int> eu = extents(u), ev = extents(v);
  const int Lu = u.L(), Lv = v.L();

  // Gather form of sum_{k in Z} u_k v_{l-k} over the stored half-lines, one output row
  // per task; each row is accumulated in a fixed order so the result is deterministic.
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (int l = 0; l <= L_out; ++l) {
    double* out = w.row(l);
    for (int l1 = std::max(0, l - Lv); l1 <= std::min(l, Lu); ++l1) {
      const int l2 = l - l1;
      if (eu[l1] < 0 || ev[l2] < 0) continue;
      row_product(u, l1, eu[l1], v, l2, ev[l2], 1.0, out, J_out);
    }
    if (l == 0) {
      for (int l1 = 1; l1 <= std::min(Lu, Lv); ++l1) {
        if (eu[l1] < 0 || ev[l1] < 0) continue;
        row_product(u, l1, eu[l1], v, l1, ev[l1], 2.0, out, J_out);
      }
    } else {
      // l1 - l2 = l and l2 - l1 = l, both indices >= 1.
      for (int l2 = 1; l2 + l <= Lu && l2 <= Lv; ++l2) {
        if (eu[l2 + l] < 0 || ev[l2] < 0) continue;
        row_product(u, l2 + l, eu[l2 + l], v, l2, ev[l2], 1.0, out, J_out);
      }
      for (int l1 = 1; l1 + l <= Lv && l1 <= Lu; ++l1) {
        if (eu[l1] < 0 || ev[l1 + l] < 0) continue;
        row_product(u, l1, eu[l1], v, l1 + l, ev[l1 + l], 1.0, out, J_out);
      }
    }
  }
  return w;
}

CoeffField field_multiply(const CoeffField& u, const CoeffField& v) {
  if (u.empty() || v.empty()) return CoeffField{};
  return field_multiply(u, v, u.L() + v.L(), u.J() + v.J());
}

namespace {

// Coefficient of e_n in a*b where a, b are rows with extents ea, eb.
inline double product_coefficient(const double* a, int ea, const double* b, int eb, int n) {
  double acc = 0.0;
  for (int i = 0; i <= ea; ++i) {
    if (a[i] == 0.0) continue;
    const int lo = std::abs(i - n);
    const int hi = std::min(i + n, eb);
    double s = 0.0;
    for (int k = lo; k <= hi; k += 2) s += b[k];
    acc += a[i] * s;
  }
  return acc;
}

}  // namespace

std::vector<double> product_diagonal(const CoeffField& u, const CoeffField& v, int jmax) {
  std::vector<double> d(static_cast<size_t>(jmax + 1), 0.0);
  if (u.empty() || v.empty()) return d;
  const std::vector<int> eu = extents(u), ev = extents(v);
  const int Lu = u.L(), Lv = v.L();
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads())
  for (int j = 0; j <= jmax; ++j) {
    const int l = j + 1;
    double acc = 0.0;
    auto add = [&](int l1, int l2) {
      if (eu[l1] < 0 || ev[l2] < 0) return;
      acc += product_coefficient(u.row(l1), eu[l1], v.row(l2), ev[l2], j);
    };
    for (int l1 = std::max(0, l - Lv); l1 <= std::min(l, Lu); ++l1) add(l1, l - l1);
    for (int l2 = 1; l2 + l <= Lu && l2 <= Lv; ++l2) add(l2 + l, l2);
    for (int l1 = 1; l1 + l <= Lv && l1 <= Lu; ++l1) add(l1, l1 + l);
    d[j] = acc;
  }
  return d;
}

CoeffField project_V(const CoeffField& u) {
  CoeffField out(u.L(), u.J());
  for (int j = 0; j <= u.J() && j + 1 <= u.L(); ++j) out(j + 1, j) = u(j + 1, j);
  return out;
}

CoeffField project_W(const CoeffField& u) {
  CoeffField out = u;
  for (int j = 0; j <= u.J() && j + 1 <= u.L(); ++j) out(j + 1, j) = 0.0;
  return out;
}

CoeffField project_Pn(const CoeffField& u, int Ln) {
  CoeffField out = u;
  for (int l = Ln + 1; l <= u.L(); ++l) std::fill(out.row(l), out.row(l) + u.J() + 1, 0.0);
  return out;
}

Profile pi_ell(const Profile& p, int l) {
  Profile out = p;
  if (l >= 1 && l - 1 < static_cast<int>(out.size())) out[l - 1] = 0.0;
  return out;
}

bool in_W(const CoeffField& u) {
  for (int j = 0; j <= u.J() && j + 1 <= u.L(); ++j) {
    if (u(j + 1, j) != 0.0) return false;
  }
  return true;
}

CoeffField apply_dtt(const CoeffField& u) {
  CoeffField out = u;
  for (int l = 0; l <= u.L(); ++l) {
    for (int j = 0; j <= u.J(); ++j) out(l, j) *= -static_cast<double>(l) * l;
  }
  return out;
}

CoeffField apply_A(const CoeffField& u) {
  CoeffField out = u;
  for (int l = 0; l <= u.L(); ++l) {
    for (int j = 0; j <= u.J(); ++j) out(l, j) *= omega(j) * omega(j);
  }
  return out;
}

CoeffField apply_L_omega(const CoeffField& u, double omega_t) {
  CoeffField out = u;
  const double w2 = omega_t * omega_t;
  for (int l = 0; l <= u.L(); ++l) {
    for (int j = 0; j <= u.J(); ++j) {
      out(l, j) *= w2 * static_cast<double>(l) * l - omega(j) * omega(j);
    }
  }
  return out;
}

CoeffField resized(const CoeffField& u, int L, int J) {
  CoeffField out(L, J);
  if (u.empty()) return out;
  for (int l = 0; l <= std::min(L, u.L()); ++l) {
    std::copy(u.row(l), u.row(l) + std::min(J, u.J()) + 1, out.row(l));
  }
  return out;
}

Truncation truncate(const CoeffField& u, int L, int J, const NormParams& p) {
  Truncation t;
  t.field = resized(u, L, J);
  CoeffField rest = u;
  for (int l = 0; l <= std::min(L, u.L()); ++l) {
    for (int j = 0; j <= std::min(J, u.J()); ++j) rest(l, j) = 0.0;
  }
  t.discarded_norm = field_norm(rest, p);
  return t;
}

CoeffField trimmed(const CoeffField& u) {
  int L = 0, J = 0;
  for (int l = 0; l <= u.L(); ++l) {
    const int e = u.row_extent(l);
    if (e >= 0) {
      L = l;
      J = std::max(J, e);
    }
  }
  return resized(u, L, J);
}

bool smoothing_bound_check(const CoeffField& u, double sigma, double sigma_p, int Ln, double s,
                           double r) {
  if (sigma_p < 0.0 || sigma_p > sigma) {
    throw std::invalid_argument("smoothing_bound_check: need 0 <= sigma' <= sigma");
  }
  for (int l = 0; l <= std::min(Ln, u.L()); ++l) {
    if (u.row_extent(l) >= 0) {
      throw std::invalid_argument("smoothing_bound_check: field not supported on l > L_n");
    }
  }
  const double lhs = field_norm(u, {sigma_p, s, r});
  const double rhs = std::exp(-static_cast<double>(Ln) * (sigma - sigma_p)) *
                     field_norm(u, {sigma, s, r});
  return lhs <= rhs * (1.0 + 1e-14);
}

double trade_constant(double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("trade_constant: negative exponent");
  if (beta == 0.0) return 1.0;
  if (alpha == 0.0) return std::numeric_limits<double>::infinity();
  return std::max(1.0, std::exp(-beta) * std::pow(beta / alpha, beta));
}

bool sobolev_trade_check(const CoeffField& u, double sigma, double s, double alpha, double beta,
                         double r) {
  if (alpha > sigma) throw std::invalid_argument("sobolev_trade_check: alpha > sigma");
  const double lhs = field_norm(u, {sigma - alpha, s + beta, r});
  const double rhs = trade_constant(alpha, beta) * field_norm(u, {sigma, s, r});
  return lhs <= rhs * (1.0 + 1e-14);
}

double evaluate(const CoeffField& u, double t, double x) {
  double acc = 0.0;
  for (int l = 0; l <= u.L(); ++l) {
    if (u.row_extent(l) < 0) continue;
    const double c = (l == 0 ? 1.0 : 2.0 * std::cos(l * t));
    acc += c * evaluate(u.profile(l), x);
  }
  return acc;
}

}  // namespace rkg
