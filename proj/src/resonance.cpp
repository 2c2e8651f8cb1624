#include "rkg/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace rkg {

Profile time_mean_b(const CoeffField& w, const KernelField& v) {
  CoeffField u = w.empty() ? CoeffField(0, 0) : w;
  u = resized(u, std::max(u.L(), v.JV() + 1), std::max(u.J(), v.JV()));
  for (int j = 0; j <= v.JV(); ++j) u(j + 1, j) += 0.5 * v.v[j];
  // (u^2)_0 = c_0^2 + 2 sum_{l>=1} c_l^2
  const int n = u.J() + 1;
  Profile b(static_cast<size_t>(2 * n - 1), 0.0);
  for (int l = 0; l <= u.L(); ++l) {
    accumulate_product(u.row(l), n, u.row(l), n, l == 0 ? 3.0 : 6.0, b.data());
  }
  return trim(std::move(b));
}

double mean_functional(const CoeffField& w, const KernelField& v, MeanNormalization norm) {
  const double m = mean_integral(time_mean_b(w, v));
  return norm == MeanNormalization::Measure ? 2.0 * m : m;
}

ConditionCheck check_conditions(double eps, double M, const ResonanceParams& p, int l_max,
                                int wj_max, double factor, bool strict) {
  ConditionCheck out;
  if (!(eps > 0.0) || l_max < 1) return out;
  const double om = std::sqrt(1.0 + eps);
  const int l_lo = std::max(1, static_cast<int>(std::ceil(1.0 / (3.0 * eps) - 1e-12)));
  const double shift_max = std::abs(eps * M) / 2.0;
  const double th_max = factor * p.gamma / std::pow(2.0, p.tau);
  const double reach = shift_max + th_max + 1.0;
  auto ok = [strict](double lhs, double th) { return strict ? lhs > th : lhs >= th; };

  for (int l = l_lo; l <= l_max; ++l) {
    const double x = om * l;
    const int k_lo = std::max(1, static_cast<int>(std::floor(x - reach)));
    const int k_hi = std::min(wj_max, static_cast<int>(std::ceil(x + reach)));
    for (int k = k_lo; k <= k_hi; ++k) {
      if (k == l) continue;
      ConditionRecord rec;
      rec.ell = l;
      rec.j = k - 1;
      rec.lhs_plain = std::abs(x - k);
      rec.lhs_shift = std::abs(x - k - eps * M / (2.0 * k));
      rec.threshold = factor * p.gamma / std::pow(static_cast<double>(l + k), p.tau);
      rec.pass_plain = ok(rec.lhs_plain, rec.threshold);
      rec.pass_shift = ok(rec.lhs_shift, rec.threshold);
      ++out.checked;
      if (!rec.pass_plain || !rec.pass_shift) {
        out.pass = false;
        out.failures.push_back(rec);
      }
    }
  }
  return out;
}

ConditionCheck check_Gn(double eps, double M, const ResonanceParams& p, int Ln) {
  return check_conditions(eps, M, p, Ln, 2 * Ln, 1.0, true);
}

ConditionCheck check_Bn(double eps, double M, const ResonanceParams& p, int Ln) {
  return check_conditions(eps, M, p, Ln, 2 * Ln, 2.0, false);
}

ConditionCheck check_Binf(double eps, double M, const ResonanceParams& p, int l_max) {
  return check_conditions(eps, M, p, l_max, std::numeric_limits<int>::max() - 4, 2.0, false);
}

Interpolant::Interpolant(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size()) throw std::invalid_argument("Interpolant: size mismatch");
  if (x_.size() < 2) throw InsufficientGrid("Interpolant: need at least two samples");
  for (size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) throw InsufficientGrid("Interpolant: abscissae not increasing");
  }
}

namespace {

size_t segment(const std::vector<double>& x, double e) {
  const auto it = std::upper_bound(x.begin(), x.end(), e);
  const size_t i = static_cast<size_t>(it - x.begin());
  return std::clamp<size_t>(i == 0 ? 0 : i - 1, 0, x.size() - 2);
}

}  // namespace

double Interpolant::operator()(double e) const {
  const size_t i = segment(x_, e);
  const double t = (e - x_[i]) / (x_[i + 1] - x_[i]);
  return y_[i] + t * (y_[i + 1] - y_[i]);
}

double Interpolant::slope(double e) const {
  const size_t i = segment(x_, e);
  return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
}

namespace {

/// Root of sqrt(1+e) l = c + e m(e)/(2k) by fixed-point iteration, which contracts
/// because m/(l k) is tiny on the binding set; falls back to bisection otherwise.
double shifted_root(int l, int k, double c, const std::function<double(double)>& m,
                    double guess) {
  auto g = [&](double e) {
    const double r = (c + e * m(e) / (2.0 * k)) / l;
    return r * r - 1.0;
  };
  double e = guess;
  for (int it = 0; it < 60; ++it) {
    const double en = g(e);
    if (std::abs(en - e) <= 1e-16 * std::max(1.0, std::abs(e))) return en;
    e = en;
  }
  auto f = [&](double t) { return std::sqrt(1.0 + t) * l - c - t * m(t) / (2.0 * k); };
  double a = -0.5, b = 1.0;
  for (int it = 0; it < 200 && f(a) > 0; ++it) a = (a - 1.0) / 2.0;
  for (int it = 0; it < 200 && f(b) < 0; ++it) b *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    (f(mid) < 0 ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

double sample_max_abs(const std::function<double(double)>& m, double eta) {
  double mx = 0.0;
  for (int i = 0; i <= 64; ++i) mx = std::max(mx, std::abs(m(eta * i / 64.0)));
  return mx;
}

}  // namespace

std::vector<ExcludedInterval> excluded_intervals(double eta, const ResonanceParams& p,
                                                 const std::function<double(double)>& m_of_eps,
                                                 int l_max) {
  std::vector<ExcludedInterval> out;
  if (!(eta > 0.0)) return out;
  const int l_lo = std::max(1, static_cast<int>(std::ceil(1.0 / (3.0 * eta) - 1e-12)));
  const double m_max = sample_max_abs(m_of_eps, eta);
  const double th_max = 2.0 * p.gamma / std::pow(2.0, p.tau);
  for (int l = l_lo; l <= l_max; ++l) {
    const double e_min = 1.0 / (3.0 * l);
    if (e_min > eta) continue;
    const double reach = th_max + eta * m_max / 2.0 + 1.0;
    const int k_lo = std::max(1, static_cast<int>(std::floor(l * std::sqrt(1.0 + e_min) - reach)));
    const int k_hi = static_cast<int>(std::ceil(l * std::sqrt(1.0 + eta) + reach));
    for (int k = k_lo; k <= k_hi; ++k) {
      if (k == l) continue;
      // binding window omega_j / l in [1 - 4 eta, 1 + 4 eta]
      if (k < (1.0 - 4.0 * eta) * l || k > (1.0 + 4.0 * eta) * l) continue;
      const double th = 2.0 * p.gamma / std::pow(static_cast<double>(l + k), p.tau);
      for (int fam = 0; fam < 2; ++fam) {
        double lo, hi;
        if (fam == 0) {
          const double a = (k - th) / l, b = (k + th) / l;
          lo = a * a - 1.0;
          hi = b * b - 1.0;
        } else {
          const double a = (k - th) / static_cast<double>(l), b = (k + th) / static_cast<double>(l);
          lo = shifted_root(l, k, k - th, m_of_eps, a * a - 1.0);
          hi = shifted_root(l, k, k + th, m_of_eps, b * b - 1.0);
        }
        lo = std::max(lo, e_min);
        hi = std::min(hi, eta);
        if (hi > lo) out.push_back({lo, hi, l, k - 1, fam == 1});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const ExcludedInterval& a, const ExcludedInterval& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    if (a.ell != b.ell) return a.ell < b.ell;
    if (a.j != b.j) return a.j < b.j;
    return a.shifted < b.shifted;
  });
  return out;
}

double union_measure(std::vector<ExcludedInterval> iv) {
  std::sort(iv.begin(), iv.end(),
            [](const ExcludedInterval& a, const ExcludedInterval& b) { return a.lo < b.lo; });
  double total = 0.0, cur_lo = 0.0, cur_hi = -1.0;
  for (const ExcludedInterval& e : iv) {
    if (e.lo > cur_hi) {
      if (cur_hi > cur_lo) total += cur_hi - cur_lo;
      cur_lo = e.lo;
      cur_hi = e.hi;
    } else {
      cur_hi = std::max(cur_hi, e.hi);
    }
  }
  if (cur_hi > cur_lo) total += cur_hi - cur_lo;
  return total;
}

namespace {

/// Measure from l > l_max, assuming each excluded set has width at most
/// 2 threshold / (l/4) and at most (sqrt(1+eta)-1) l + 3 frequencies bind per l.
double tail_bound(double eta, const ResonanceParams& p, int l_max) {
  if (p.tau <= 1.0) return std::numeric_limits<double>::infinity();
  const double a = std::sqrt(1.0 + eta) - 1.0;
  const double L = std::max(1, l_max);
  const double c = 16.0 * p.gamma / std::pow(2.0, p.tau);
  const double per_family =
      c * (a * std::pow(L, 1.0 - p.tau) / (p.tau - 1.0) + 3.0 * std::pow(L, -p.tau) / p.tau);
  return 2.0 * per_family;
}

/// Excluded from B_inf restricted to l <= l_max.
bool excluded_at(double eps, double M, const ResonanceParams& p, int l_max,
                 const std::vector<double>& th_hi) {
  const double om = std::sqrt(1.0 + eps);
  const int l_lo = std::max(1, static_cast<int>(std::ceil(1.0 / (3.0 * eps) - 1e-12)));
  const double sm = std::abs(eps * M) / 2.0;
  for (int l = l_lo; l <= l_max; ++l) {
    const double x = om * l;
    const double d = std::abs(x - std::nearbyint(x));
    if (d > th_hi[l] + sm / std::max(1.0, x - 1.0) + 1e-12) continue;
    const double reach = sm + 2.0 * p.gamma + 1.0;
    const int k_lo = std::max(1, static_cast<int>(std::floor(x - reach)));
    const int k_hi = static_cast<int>(std::ceil(x + reach));
    for (int k = k_lo; k <= k_hi; ++k) {
      if (k == l) continue;
      const double th = 2.0 * p.gamma / std::pow(static_cast<double>(l + k), p.tau);
      if (std::abs(x - k) < th || std::abs(x - k - eps * M / (2.0 * k)) < th) return true;
    }
  }
  return false;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

MeasureReport measure_scan(double eta, int samples, const ResonanceParams& p,
                           const std::function<double(double)>& m_of_eps,
                           const MeasureOptions& opt) {
  if (!(eta > 0.0)) throw std::invalid_argument("measure_scan: eta must be positive");
  MeasureReport rep;
  rep.eta = eta;
  rep.samples = samples;
  rep.l_max = opt.l_max;
  rep.params = p;
  rep.excluded = excluded_intervals(eta, p, m_of_eps, opt.l_max);

  const double mass = union_measure(rep.excluded);
  rep.fraction_union = 1.0 - mass / eta;
  rep.tail_fraction_bound = tail_bound(eta, p, opt.l_max) / eta;
  rep.bound_constant = mass / (p.gamma * std::pow(eta, (p.tau + 1.0) / 2.0));

  // Per-pair diagnostics: slope of f at the interval midpoint and width against 16 gamma /
  // (l (l + omega_j)^tau), the latter only for intervals not clipped by the eps window.
  rep.min_slope_ratio = std::numeric_limits<double>::infinity();
  for (const ExcludedInterval& e : rep.excluded) {
    const int k = e.j + 1;
    const double mid = 0.5 * (e.lo + e.hi);
    const double h = std::max(1e-9, e.hi - e.lo);
    auto f = [&](double t) {
      const double base = std::sqrt(1.0 + t) * e.ell - k;
      return e.shifted ? base - t * m_of_eps(t) / (2.0 * k) : base;
    };
    const double slope = (f(mid + h) - f(mid - h)) / (2.0 * h);
    rep.min_slope_ratio = std::min(rep.min_slope_ratio, slope / (e.ell / 4.0));
    const double e_min = 1.0 / (3.0 * e.ell);
    if (e.lo > e_min && e.hi < eta) {
      const double cap = 16.0 * p.gamma / (e.ell * std::pow(static_cast<double>(e.ell + k), p.tau));
      rep.max_width_ratio = std::max(rep.max_width_ratio, (e.hi - e.lo) / cap);
    }
  }
  if (rep.excluded.empty()) rep.min_slope_ratio = 0.0;

  std::vector<double> lx, ly, lyt;
  double level_eta = eta;
  for (int i = 0; i < std::max(1, opt.levels); ++i, level_eta *= 0.5) {
    std::vector<ExcludedInterval> clipped;
    for (const ExcludedInterval& e : rep.excluded) {
      if (e.lo >= level_eta) continue;
      ExcludedInterval c = e;
      c.hi = std::min(c.hi, level_eta);
      clipped.push_back(c);
    }
    MeasureLevel lv;
    lv.eta = level_eta;
    lv.intervals = clipped.size();
    lv.excluded_union = union_measure(std::move(clipped));
    lv.tail_bound = tail_bound(level_eta, p, opt.l_max);
    rep.levels.push_back(lv);
    if (lv.excluded_union > 0.0) {
      lx.push_back(std::log(level_eta));
      ly.push_back(std::log(lv.excluded_union / level_eta));
      lyt.push_back(std::log((lv.excluded_union + lv.tail_bound) / level_eta));
    }
  }
  rep.fitted_exponent = fit_slope(lx, ly);
  rep.fitted_exponent_with_tail = fit_slope(lx, lyt);

  if (samples > 0) {
    std::vector<double> th_hi(static_cast<size_t>(opt.l_max + 1), 0.0);
    for (int l = 1; l <= opt.l_max; ++l) {
      th_hi[l] = 2.0 * p.gamma / std::pow(std::max(2.0, 2.0 * l - 1.0), p.tau);
    }
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    long inside = 0;
    for (int i = 0; i < samples; ++i) {
      const double e = eta * (1.0 - U(rng));  // (0, eta]
      if (!excluded_at(e, m_of_eps(e), p, opt.l_max, th_hi)) ++inside;
    }
    rep.fraction_mc = static_cast<double>(inside) / samples;
    rep.mc_stderr = std::sqrt(rep.fraction_mc * (1.0 - rep.fraction_mc) / samples);
  } else {
    rep.fraction_mc = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

DiophantineResult strong_diophantine_check(double omega_t, double gamma, int cutoff) {
  DiophantineResult r;
  r.cutoff = cutoff;
  r.min_margin = std::numeric_limits<double>::infinity();
  if (!(gamma > 0.0)) return r;
  const double reach = gamma + 1.0;
  for (int l = 0; l <= cutoff; ++l) {
    const double x = omega_t * l;
    const double bracket = std::max(1, l);
    const int k_lo = std::max(1, static_cast<int>(std::floor(x - reach)));
    const int k_hi = static_cast<int>(std::ceil(x + reach));
    for (int k = k_lo; k <= k_hi; ++k) {
      if (k == l) continue;
      const double margin = std::abs(x - k) * bracket / gamma;
      if (margin < r.min_margin) {
        r.min_margin = margin;
        r.worst_ell = l;
        r.worst_j = k - 1;
      }
    }
  }
  r.pass = r.min_margin >= 1.0;
  return r;
}

void write_conditions_csv(std::ostream& os, const std::vector<ConditionRecord>& recs) {
  os << "l,j,lhs_plain,lhs_shift,threshold,pass_plain,pass_shift\n";
  os.precision(17);
  for (const ConditionRecord& r : recs) {
    os << r.ell << ',' << r.j << ',' << r.lhs_plain << ',' << r.lhs_shift << ',' << r.threshold
       << ',' << (r.pass_plain ? 1 : 0) << ',' << (r.pass_shift ? 1 : 0) << '\n';
  }
}

}  // namespace rkg
