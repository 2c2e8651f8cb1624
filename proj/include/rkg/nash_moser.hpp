#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "rkg/bifurcation.hpp"
#include "rkg/field_algebra.hpp"
#include "rkg/linearized.hpp"
#include "rkg/resonance.hpp"

namespace rkg {

enum class InverseNormMode { Off, Estimate, Bound, Exact };

struct SolverConfig {
  double eps = 1e-3;
  int m = 0;
  int sign = 1;
  ResonanceParams res{};
  double sigma_bar = 1.0;
  double s = 1.0;
  double r = 2.0;  // space Sobolev index of the norm
  int L0 = 8;
  double theta = 0.25;
  int n_max = 6;

  double picard_tol = 1e-13;  // relative to max(1, ||h||)
  int picard_max = 50;
  double stage_tol = 1e-9;    // stage-equation certificate, relative to max(eps, ||w||)
  double final_tol = 0.0;     // stop once ||h_n|| falls below this (0: run every stage)
  KernelSolveOptions kernel{1e-15, 60, 1e-10, {}};  // runs to the rounding floor
  MeanNormalization mean_norm = MeanNormalization::HalfLine;
  InverseNormMode inverse_norm = InverseNormMode::Exact;
  bool check_melnikov = true;
  bool refresh_kernel = false;  // new kernel Jacobian at every Picard step
  int jmax_factor = 2;          // J_max = jmax_factor * L_n
  int jv_factor = 3;            // kernel modes j <= jv_factor * L_n

  int L(int n) const { return L0 << n; }
  int Jmax(int n) const { return jmax_factor * L(n); }
  int JV(int n) const { return jv_factor * L(n); }
  double omega() const;
  /// sigma_0 = sigma_bar, sigma_n = sigma_{n-1} - theta/(1+n^2).
  double sigma(int n) const;
  double sigma_inf() const;
  NormParams norm(int n) const { return {sigma(n), s, r}; }
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
  /// M is only known to be smooth for sigma > 1/2, s > 3/2.
  bool m_regularity_flag() const { return s <= 1.5; }
};

struct StageRecord {
  int n = 0;
  int Ln = 0, Jmax = 0, JV = 0;
  double sigma = 0.0;
  double h_norm = 0.0;   // ||h_n||_{sigma_n,s}
  double w_norm = 0.0;   // ||w_n||_{sigma_n,s}
  double decay_bound = 0.0;  // (eps/gamma) e^{-chi^n}, chi = 3/2
  double residual = 0.0;     // ||L_omega w_n - eps P_n Pi_W Gamma(w_n)||_{sigma_n,s}
  bool certified = true;

  double rhs_norm = 0.0;      // ||P_n Pi_W Gamma(w_{n-1}) - L_omega w_{n-1}/eps||_{sigma_n,s}
  double tail_norm = 0.0;     // ||r_{n-1}||_{sigma_n,s}, r = P_n P_{n-1}^perp Pi_W Gamma(w_{n-1})
  double tail_source = 0.0;   // ||P_n Pi_W Gamma(w_{n-1})||_{sigma_{n-1},s}
  double smoothing_factor = 0.0;  // e^{-L_{n-1}(sigma_{n-1} - sigma_n)}
  bool smoothing_ok = true;

  double M = 0.0;
  bool melnikov_pass = true;
  int melnikov_checked = 0;
  std::vector<ConditionRecord> melnikov_failures;

  double inverse_norm = 0.0;
  std::string inverse_norm_method = "off";
  double inverse_bound = 0.0;  // (648/gamma) L_n^{tau-1}
  int classes = 0;
  size_t dimension = 0;

  int picard_iterations = 0;
  double max_contraction = 0.0;
  bool contraction_ok = true;
  int kernel_iterations = 0;
  double kernel_residual = 0.0;
};

enum class SolveStatus { Converged, MelnikovExcluded, NumericFailure };
const char* status_name(SolveStatus s);

struct SolveTrace {
  SolverConfig config;
  std::vector<StageRecord> stages;
  SolveStatus status = SolveStatus::Converged;
  int failed_stage = -1;
  std::string message;
  double w_final_norm = 0.0;  // ||w~||_{sigma_bar/2, s}
  double K2 = 0.0;            // ||w~||_{sigma_bar/2,s} gamma / eps
};

/// A stage that could not be completed; `stage` is its index n.
struct StageError : std::runtime_error {
  StageError(int stage, SolveStatus status, const std::string& what)
      : std::runtime_error(what), stage(stage), status(status) {}
  int stage;
  SolveStatus status;
  StageRecord record;  // what was known when the stage stopped
};

/// P Pi_W (v(w) + w)^3 on l <= L, j <= J, with v(w) the kernel solution near `v_guess`.
struct GammaEval {
  CoeffField gamma;
  KernelField v;
  int kernel_iterations = 0;
  double kernel_residual = 0.0;
};
GammaEval evaluate_gamma(const CoeffField& w, const KernelField& v_guess,
                         const KernelJacobian* frozen, int L, int J,
                         const KernelSolveOptions& opt = {});

struct StageState {
  CoeffField w;
  KernelField v;
  StageRecord record;
};

class NashMoserSolver {
 public:
  explicit NashMoserSolver(SolverConfig cfg);
  const SolverConfig& config() const { return cfg_; }

  /// Fixed point of w -> eps L_omega^{-1} P_0 Pi_W Gamma(w) on W^(0).
  StageState stage0() const;
  /// h_{n+1} from the Picard map h -> eps Lop_{n+1}(w_n)^{-1} (r_n + R_n(h)); the returned
  /// state holds w_{n+1} = w_n + h_{n+1}.
  StageState stage(int n, const StageState& prev) const;

 private:
  SolverConfig cfg_;
};

struct SolveResult {
  CoeffField w;
  KernelField v;
  SolveTrace trace;
  /// u = v + w.
  CoeffField u() const;
};

SolveResult run(const SolverConfig& cfg);

/// L_omega u - eps u^3 computed exactly in coefficient space.
CoeffField pde_residual(const CoeffField& u, double eps);

struct ResidualNorm {
  NormParams p;
  double residual = 0.0;
  double u_norm = 0.0;
};
struct ResidualReport {
  double eps = 0.0;
  double tol = 0.0;
  std::vector<ResidualNorm> norms;  // the first entry decides `pass`
  double kernel_part = 0.0;         // ||Pi_V residual|| in the first norm
  double range_part = 0.0;
  bool pass = true;
  std::vector<double> decay;        // max_l |u(l, j)| per j
  std::vector<double> decay_slope;  // d log(decay) / d log(omega_j), over consecutive nonzero j
};
/// `pass` is residual <= tol * max(||u||^3, tiny) in norms[0].
ResidualReport verify_solution(const CoeffField& u, double eps, double tol,
                               const std::vector<NormParams>& norms);

/// Least-squares slope of log(-log(gamma ||h_n|| / eps)) against n over stages in
/// [first, last] with 0 < gamma ||h_n|| / eps < 1. NaN if fewer than two stages qualify.
double double_log_slope(const SolveTrace& trace, int first, int last);

}  // namespace rkg
