#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "rkg/bifurcation.hpp"
#include "rkg/field_algebra.hpp"

namespace rkg {

struct ResonanceParams {
  double gamma = 0.05;
  double tau = 1.5;
};

/// Which integral defines the mean coefficient M of b_0.
enum class MeanNormalization {
  HalfLine,  // (1/pi) int_0^pi b_0 dx, the sum of even coefficients
  Measure,   // int_0^pi b_0 (2/pi) dx, twice the above
};

/// Time mean b_0 of b = 3 (w + v)^2.
Profile time_mean_b(const CoeffField& w, const KernelField& v);
/// M(w) for u = w + v.
double mean_functional(const CoeffField& w, const KernelField& v,
                       MeanNormalization norm = MeanNormalization::HalfLine);

/// One (l, j) pair: both condition families and their pass flags.
struct ConditionRecord {
  int ell = 0;
  int j = 0;
  double lhs_plain = 0.0;  // |omega l - omega_j|
  double lhs_shift = 0.0;  // |omega l - omega_j - eps M / (2 omega_j)|
  double threshold = 0.0;
  bool pass_plain = true;
  bool pass_shift = true;
};

struct ConditionCheck {
  bool pass = true;
  int checked = 0;
  std::vector<ConditionRecord> failures;  // sorted by (l, j)
};

/// Both families over 1/(3 eps) <= l <= l_max, omega_j <= wj_max, l != omega_j, with
/// threshold factor * gamma / (l + omega_j)^tau. `strict` requires lhs > threshold,
/// otherwise lhs >= threshold. Only the integers nearest omega l can fail, since every
/// threshold is below 1/2; those are the ones enumerated.
ConditionCheck check_conditions(double eps, double M, const ResonanceParams& p, int l_max,
                                int wj_max, double factor, bool strict);
/// G_n(w): threshold gamma, strict, l <= Ln, omega_j <= 2 Ln.
ConditionCheck check_Gn(double eps, double M, const ResonanceParams& p, int Ln);
/// B_n: threshold 2 gamma, l <= Ln, omega_j <= 2 Ln.
ConditionCheck check_Bn(double eps, double M, const ResonanceParams& p, int Ln);
/// B_infinity up to the cutoff l <= l_max (no restriction on omega_j).
ConditionCheck check_Binf(double eps, double M, const ResonanceParams& p, int l_max);

/// Piecewise-linear m(eps) through solved samples.
class Interpolant {
 public:
  Interpolant(std::vector<double> x, std::vector<double> y);
  double operator()(double e) const;
  double slope(double e) const;
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }

 private:
  std::vector<double> x_, y_;
};

struct InsufficientGrid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ExcludedInterval {
  double lo = 0.0, hi = 0.0;
  int ell = 0, j = 0;
  bool shifted = false;
};

struct MeasureLevel {
  double eta = 0.0;
  double excluded_union = 0.0;  // measure of the union over l <= l_max
  double tail_bound = 0.0;      // bound on the extra measure from l > l_max
  size_t intervals = 0;
};

struct MeasureReport {
  double eta = 0.0;
  int samples = 0;
  int l_max = 0;
  ResonanceParams params;
  double fraction_union = 1.0;  // |B_inf cap (0, eta]| / eta from the interval union
  double fraction_mc = 1.0;     // Monte Carlo estimate with the same cutoff
  double mc_stderr = 0.0;
  double tail_fraction_bound = 0.0;
  std::vector<ExcludedInterval> excluded;  // at eta, sorted by (lo, l, j)
  std::vector<MeasureLevel> levels;        // eta, eta/2, ...
  double fitted_exponent = 0.0;            // slope of log(excluded fraction) vs log eta
  double fitted_exponent_with_tail = 0.0;
  double bound_constant = 0.0;             // excluded mass / (gamma eta^{(tau+1)/2})
  double min_slope_ratio = 0.0;            // min of f' / (l/4) over excluded pairs
  double max_width_ratio = 0.0;            // max of |S| / (16 gamma / (l (l+omega_j)^tau))
};

struct MeasureOptions {
  int l_max = 8000;
  int levels = 4;  // eta, eta/2, ..., for the exponent fit
  uint64_t seed = 20240229;
};

/// Excluded intervals {eps in (1/(3l), eta] : |f_{l,j}(eps)| < 2 gamma/(l + omega_j)^tau}
/// for both families, with f_{l,j}(eps) = omega(eps) l - omega_j - eps m(eps)/(2 omega_j)
/// (the plain family drops the m term).
std::vector<ExcludedInterval> excluded_intervals(double eta, const ResonanceParams& p,
                                                 const std::function<double(double)>& m_of_eps,
                                                 int l_max);
double union_measure(std::vector<ExcludedInterval> iv);

MeasureReport measure_scan(double eta, int samples, const ResonanceParams& p,
                           const std::function<double(double)>& m_of_eps,
                           const MeasureOptions& opt = {});

struct DiophantineResult {
  bool pass = true;
  int cutoff = 0;
  int worst_ell = -1, worst_j = -1;
  double min_margin = 0.0;  // min of |omega l - omega_j| <l> / gamma over the checked pairs
};
/// |omega l - omega_j| >= gamma / <l> for l <= cutoff, l != omega_j.
DiophantineResult strong_diophantine_check(double omega, double gamma, int cutoff = 1000);

void write_conditions_csv(std::ostream& os, const std::vector<ConditionRecord>& recs);

}  // namespace rkg
