#include "rkg/nash_moser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace rkg {

double SolverConfig::omega() const { return std::sqrt(1.0 + eps); }

double SolverConfig::sigma(int n) const {
  double s_n = sigma_bar;
  for (int k = 1; k <= n; ++k) s_n -= theta / (1.0 + static_cast<double>(k) * k);
  return s_n;
}

double SolverConfig::sigma_inf() const {
  // sum_{k>=1} 1/(1+k^2) = (pi coth(pi) - 1)/2
  const double pi = std::numbers::pi;
  return sigma_bar - theta * 0.5 * (pi / std::tanh(pi) - 1.0);
}

void SolverConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (!(eps >= 0.0) || !std::isfinite(eps)) fail("eps must be a finite number >= 0");
  if (m < 0) fail("m must be >= 0");
  if (!(res.gamma > 0.0 && res.gamma < 1.0 / 6.0)) fail("gamma must lie in (0, 1/6)");
  if (!(res.tau > 1.0 && res.tau < 2.0)) fail("tau must lie in (1, 2)");
  if (!(sigma_bar > 0.0)) fail("sigma_bar must be > 0");
  if (!(theta > 0.0)) fail("theta must be > 0");
  if (!(std::numbers::pi * std::numbers::pi * theta / 6.0 < sigma_bar / 2.0)) {
    fail("theta must satisfy pi^2 theta / 6 < sigma_bar / 2");
  }
  if (!(s > 0.5)) fail("s must be > 1/2");
  if (L0 < 1) fail("L0 must be >= 1");
  if (n_max < 0) fail("stages must be >= 0");
  if (n_max > 20 || (static_cast<long long>(L0) << n_max) > (1 << 20)) fail("L0 * 2^stages too large");
  if (picard_max < 1) fail("picard_max must be >= 1");
  if (jmax_factor < 1 || jv_factor < jmax_factor) fail("need 1 <= jmax_factor <= jv_factor");
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MelnikovExcluded: return "melnikov_excluded";
    case SolveStatus::NumericFailure: return "numeric_failure";
  }
  return "unknown";
}

namespace {

CoeffField full_field(const CoeffField& w, const KernelField& v) {
  CoeffField u = w.empty() ? CoeffField(0, 0) : w;
  u = resized(u, std::max(u.L(), v.JV() + 1), std::max(u.J(), v.JV()));
  for (int j = 0; j <= v.JV(); ++j) u(j + 1, j) += 0.5 * v.v[j];
  return u;
}

KernelField widened(const KernelField& v, int JV) {
  KernelField out(JV);
  for (int j = 0; j <= std::min(JV, v.JV()); ++j) out.v[j] = v.v[j];
  return out;
}

void zero_kernel(CoeffField& f) {
  for (int j = 0; j <= f.J() && j + 1 <= f.L(); ++j) f(j + 1, j) = 0.0;
}

/// Rows l > Ln of f, as a field of the same truncation.
CoeffField rows_above(const CoeffField& f, int Ln) {
  CoeffField out(f.L(), f.J());
  for (int l = Ln + 1; l <= f.L(); ++l) std::copy(f.row(l), f.row(l) + f.J() + 1, out.row(l));
  return out;
}

StageError stage_error(int n, SolveStatus st, const std::string& what, const StageRecord& rec) {
  StageError e(n, st, what);
  e.record = rec;
  return e;
}

void fill_melnikov(StageRecord& rec, const ConditionCheck& c) {
  rec.melnikov_pass = c.pass;
  rec.melnikov_checked = c.checked;
  rec.melnikov_failures = c.failures;
}

const char* method_name(InverseNormMode m) {
  switch (m) {
    case InverseNormMode::Off: return "off";
    case InverseNormMode::Estimate: return "estimate";
    case InverseNormMode::Bound: return "bound";
    case InverseNormMode::Exact: return "exact";
  }
  return "off";
}

/// Picard step bookkeeping: the contraction ratio is only meaningful while the
/// differences are well above the stopping floor.
struct Contraction {
  double prev = -1.0;
  double max_ratio = 0.0;
  bool failed = false;

  void step(double d, double floor) {
    if (prev > 1e3 * floor) {
      const double ratio = d / prev;
      max_ratio = std::max(max_ratio, ratio);
      if (ratio >= 1.0) failed = true;
    }
    prev = d;
  }
};

}  // namespace

GammaEval evaluate_gamma(const CoeffField& w, const KernelField& v_guess,
                         const KernelJacobian* frozen, int L, int J,
                         const KernelSolveOptions& opt) {
  KernelSolveResult ks =
      frozen ? solve_kernel_chord(w, v_guess, *frozen, opt) : solve_kernel_from(w, v_guess, opt);
  if (!ks.converged && frozen) ks = solve_kernel_from(w, ks.v, opt);
  if (!ks.converged) throw std::runtime_error("kernel equation did not converge");

  const CoeffField u = full_field(w, ks.v);
  CoeffField g = field_multiply(field_multiply(u, u), u, L, J);
  zero_kernel(g);
  GammaEval out;
  out.gamma = std::move(g);
  out.v = std::move(ks.v);
  out.kernel_iterations = ks.iterations;
  out.kernel_residual = ks.residuals.back();
  return out;
}

NashMoserSolver::NashMoserSolver(SolverConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

StageState NashMoserSolver::stage0() const {
  const SolverConfig& c = cfg_;
  const int L = c.L(0), J = c.Jmax(0), JV = c.JV(0);
  const NormParams p = c.norm(0);
  const double w2 = 1.0 + c.eps;

  StageRecord rec;
  rec.n = 0;
  rec.Ln = L;
  rec.Jmax = J;
  rec.JV = JV;
  rec.sigma = p.sigma;
  rec.decay_bound = c.eps / c.res.gamma * std::exp(-1.0);
  rec.inverse_bound = 648.0 / c.res.gamma * std::pow(L, c.res.tau - 1.0);

  KernelSolveResult k0 = solve_kernel(CoeffField{}, c.m, c.sign, JV, c.kernel);
  if (!k0.converged) throw stage_error(0, SolveStatus::NumericFailure, "kernel solve failed", rec);
  KernelField v = k0.v;

  const CoeffField zero(L, J);
  rec.M = mean_functional(zero, v, c.mean_norm);
  fill_melnikov(rec, check_Gn(c.eps, rec.M, c.res, L));
  if (!rec.melnikov_pass && c.check_melnikov) {
    throw stage_error(0, SolveStatus::MelnikovExcluded, "eps fails the stage-0 nonresonance conditions", rec);
  }

  // L_omega is diagonal on W^(0); its inverse norm is the largest reciprocal symbol.
  for (int l = 0; l <= L; ++l) {
    for (int j = 0; j <= J; ++j) {
      if (l == j + 1) continue;
      const double d = std::abs(w2 * l * l - omega(j) * omega(j));
      rec.inverse_norm = std::max(rec.inverse_norm, 1.0 / d);
    }
  }
  rec.inverse_norm_method = "diagonal";
  rec.dimension = static_cast<size_t>(L + 1) * (J + 1) - std::min(L, J + 1);

  const KernelJacobian jac(v, zero);
  const KernelJacobian* frozen = c.refresh_kernel ? nullptr : &jac;
  auto T = [&](const CoeffField& w, GammaEval& g) {
    g = evaluate_gamma(w, v, frozen, L, J, c.kernel);
    CoeffField out(L, J);
    for (int l = 0; l <= L; ++l) {
      for (int j = 0; j <= J; ++j) {
        if (l == j + 1) continue;
        out(l, j) = c.eps * g.gamma(l, j) / (w2 * l * l - omega(j) * omega(j));
      }
    }
    return out;
  };

  CoeffField w = zero;
  GammaEval g;
  Contraction ctr;
  bool converged = false;
  for (int it = 0; it < c.picard_max; ++it) {
    CoeffField next = T(w, g);
    v = g.v;
    if (it == 0) rec.rhs_norm = field_norm(g.gamma, p);
    rec.kernel_iterations += g.kernel_iterations;
    const double d = field_norm(next - w, p);
    const double floor = c.picard_tol * std::max(1.0, field_norm(next, p));
    ctr.step(d, floor);
    w = std::move(next);
    rec.picard_iterations = it + 1;
    if (ctr.failed) break;
    if (d <= floor) {
      converged = true;
      break;
    }
  }
  rec.max_contraction = ctr.max_ratio;
  rec.contraction_ok = !ctr.failed && ctr.max_ratio <= 0.5;
  if (ctr.failed) throw stage_error(0, SolveStatus::NumericFailure, "stage-0 map is not a contraction", rec);
  if (!converged) throw stage_error(0, SolveStatus::NumericFailure, "stage-0 iteration did not converge", rec);

  g = evaluate_gamma(w, v, frozen, L, J, c.kernel);
  v = g.v;
  rec.kernel_residual = g.kernel_residual;
  rec.residual = field_norm(apply_L_omega(w, c.omega()) - c.eps * g.gamma, p);
  rec.certified = rec.residual <= c.stage_tol * std::max(c.eps, field_norm(w, p));
  rec.h_norm = rec.w_norm = field_norm(w, p);
  if (!rec.certified) throw stage_error(0, SolveStatus::NumericFailure, "stage-0 certificate failed", rec);
  return {std::move(w), std::move(v), rec};
}

namespace {

/// Remainder of the cubic at the stage point u = w_n + v(w_n), expanded so that no O(1)
/// quantities are subtracted: with delta = h + dv, dv = v(w_n + h) - v(w_n),
///
///   Gamma(w_n + h) - Gamma(w_n) - D Gamma[h] = 3 u^2 (dv - d_w v[h]) + 3 u delta^2 + delta^3,
///
/// and dv - d_w v[h] = J^{-1} Pi_V(3 u delta^2 + delta^3) is iterated with the frozen J.
struct Remainder {
  const KernelJacobian& jac;
  const CoeffField& u;
  int L, J;

  struct Out {
    CoeffField R;
    KernelField dv;
    int iterations = 0;
  };

  KernelField add(const KernelField& a, const KernelField& b) const {
    KernelField out = a;
    for (int j = 0; j <= out.JV(); ++j) out.v[j] += b.get(j);
    return out;
  }

  Out operator()(const CoeffField& h) const {
    const int JV = jac.JV();
    const int Lq = std::max(L, JV + 1), Jq = std::max(J, JV);
    const KernelField dh = kernel_derivative(jac, h);
    KernelField e(JV);
    CoeffField q;
    Out out;
    for (int it = 0; it < 30; ++it) {
      CoeffField delta = h + embed(add(dh, e));
      const CoeffField d2 = field_multiply(delta, delta);
      q = 3.0 * field_multiply(u, d2, Lq, Jq);
      q += field_multiply(delta, d2, Lq, Jq);
      const KernelField next = jac.solve(extract_kernel(q, JV));
      double change = 0.0, size = 0.0;
      for (int j = 0; j <= JV; ++j) {
        change = std::max(change, std::abs(next.v[j] - e.v[j]));
        size = std::max(size, std::abs(next.v[j] + dh.v[j]));
      }
      e = next;
      out.iterations = it + 1;
      if (change <= 1e-16 * size) break;
    }
    out.R = field_multiply(jac.u_squared(), embed(e), L, J);
    out.R *= 3.0;
    out.R += resized(q, L, J);
    out.R = resized(out.R, L, J);
    zero_kernel(out.R);
    out.dv = add(dh, e);
    return out;
  }
};

}  // namespace

StageState NashMoserSolver::stage(int n, const StageState& prev) const {
  const SolverConfig& c = cfg_;
  const int np = n + 1;
  const int Lo = c.L(n), L = c.L(np), J = c.Jmax(np), JV = c.JV(np);
  const NormParams po = c.norm(n), p = c.norm(np);

  StageRecord rec;
  rec.n = np;
  rec.Ln = L;
  rec.Jmax = J;
  rec.JV = JV;
  rec.sigma = p.sigma;
  rec.decay_bound = c.eps / c.res.gamma * std::exp(-std::pow(1.5, np));
  rec.inverse_bound = 648.0 / c.res.gamma * std::pow(L, c.res.tau - 1.0);
  rec.inverse_norm_method = method_name(c.inverse_norm);

  const CoeffField wn = resized(prev.w, L, J);
  rec.M = mean_functional(wn, prev.v, c.mean_norm);
  fill_melnikov(rec, check_Gn(c.eps, rec.M, c.res, L));
  if (!rec.melnikov_pass && c.check_melnikov) {
    throw stage_error(np, SolveStatus::MelnikovExcluded,
                      "eps fails the nonresonance conditions at stage " + std::to_string(np), rec);
  }

  KernelSolveResult ks = solve_kernel_from(wn, widened(prev.v, JV), c.kernel);
  if (!ks.converged) throw stage_error(np, SolveStatus::NumericFailure, "kernel solve failed", rec);
  rec.kernel_iterations = ks.iterations;
  const KernelField vn = ks.v;
  auto jac = std::make_shared<const KernelJacobian>(vn, wn);
  const CoeffField un = full_field(wn, vn);

  // P_{n+1} Pi_W Gamma(w_n) and its part above L_n, the only new forcing of this stage.
  CoeffField G = field_multiply(jac->u_squared(), un, L, J);
  zero_kernel(G);
  const CoeffField r = rows_above(G, Lo);
  rec.tail_norm = rec.rhs_norm = field_norm(r, p);
  rec.tail_source = field_norm(G, po);
  rec.smoothing_factor = std::exp(-Lo * (po.sigma - p.sigma));
  rec.smoothing_ok = rec.tail_norm <= rec.smoothing_factor * rec.tail_source * (1.0 + 1e-12);

  const LinearizedOperator op(c.eps, jac, L, J, p);
  rec.classes = op.classes();
  rec.dimension = op.dimension();
  if (c.inverse_norm != InverseNormMode::Off) {
    const InverseNormMethod method = c.inverse_norm == InverseNormMode::Exact ? InverseNormMethod::Exact
                                     : c.inverse_norm == InverseNormMode::Bound ? InverseNormMethod::Bound
                                                                               : InverseNormMethod::Estimate;
    rec.inverse_norm = op.inverse_norm(method).value;
  }

  const Remainder remainder{*jac, un, L, J};
  CoeffField h(L, J);
  KernelField dv(JV);
  if (c.eps > 0.0) {
    // Direct differencing of Gamma, with a fresh kernel solve per step (validation path).
    auto direct = [&](const CoeffField& hh, KernelField& v_io) {
      const GammaEval g = evaluate_gamma(wn + hh, v_io, nullptr, L, J, c.kernel);
      v_io = g.v;
      rec.kernel_iterations += g.kernel_iterations;
      const CoeffField G0 = resized(G, L, J);
      return g.gamma - G0 - op.dgamma(hh);
    };
    KernelField v_direct = vn;

    h = c.eps * op.solve(r);
    Contraction ctr;
    bool converged = false;
    for (int it = 1; it < c.picard_max; ++it) {
      CoeffField R;
      if (c.refresh_kernel) {
        R = direct(h, v_direct);
      } else {
        Remainder::Out ro = remainder(h);
        rec.kernel_iterations += ro.iterations;
        R = std::move(ro.R);
      }
      CoeffField next = c.eps * op.solve(r + R);
      const double d = field_norm(next - h, p);
      const double floor = c.picard_tol * std::max(1.0, field_norm(next, p));
      ctr.step(d, floor);
      h = std::move(next);
      rec.picard_iterations = it;
      if (ctr.failed) break;
      if (d <= floor) {
        converged = true;
        break;
      }
    }
    rec.max_contraction = ctr.max_ratio;
    rec.contraction_ok = !ctr.failed && ctr.max_ratio <= 0.5;
    if (ctr.failed) {
      throw stage_error(np, SolveStatus::NumericFailure, "stage map is not a contraction", rec);
    }
    if (!converged) {
      throw stage_error(np, SolveStatus::NumericFailure, "stage iteration did not converge", rec);
    }
    dv = remainder(h).dv;
  }

  CoeffField w = wn + h;
  KernelField v = vn;
  for (int j = 0; j <= JV; ++j) v.v[j] += dv.v[j];

  const CoeffField u = full_field(w, v);
  CoeffField g = field_multiply(field_multiply(u, u), u, L, J);
  zero_kernel(g);
  rec.kernel_residual = kernel_norm(kernel_residual(v, w), c.kernel.norm);
  rec.residual = field_norm(apply_L_omega(w, c.omega()) - c.eps * g, p);
  rec.h_norm = field_norm(h, p);
  rec.w_norm = field_norm(w, p);
  rec.certified = rec.residual <= c.stage_tol * std::max(c.eps, rec.w_norm) &&
                  rec.kernel_residual <= c.kernel.stall_tol;
  if (!rec.certified) {
    throw stage_error(np, SolveStatus::NumericFailure, "stage certificate failed", rec);
  }
  return {std::move(w), std::move(v), rec};
}

CoeffField SolveResult::u() const { return full_field(w, v); }

SolveResult run(const SolverConfig& cfg) {
  const NashMoserSolver solver(cfg);
  SolveResult res;
  res.trace.config = cfg;
  StageState st;
  int current = 0;
  try {
    st = solver.stage0();
    res.trace.stages.push_back(st.record);
    for (int n = 0; n < cfg.n_max; ++n) {
      if (cfg.final_tol > 0.0 && n > 0 && st.record.h_norm < cfg.final_tol) break;
      current = n + 1;
      StageState next = solver.stage(n, st);
      st = std::move(next);
      res.trace.stages.push_back(st.record);
    }
  } catch (const StageError& e) {
    res.trace.status = e.status;
    res.trace.failed_stage = e.stage;
    res.trace.message = e.what();
    res.trace.stages.push_back(e.record);
  } catch (const std::exception& e) {
    res.trace.status = SolveStatus::NumericFailure;
    res.trace.failed_stage = current;
    res.trace.message = e.what();
  }
  res.w = st.w;
  res.v = st.v;
  if (!res.w.empty()) {
    res.trace.w_final_norm = field_norm(res.w, {cfg.sigma_bar / 2.0, cfg.s, cfg.r});
    res.trace.K2 = cfg.eps > 0.0 ? res.trace.w_final_norm * cfg.res.gamma / cfg.eps : 0.0;
  }
  return res;
}

CoeffField pde_residual(const CoeffField& u, double eps) {
  if (u.empty()) return CoeffField(0, 0);
  const CoeffField u3 = field_multiply(field_multiply(u, u), u);
  return apply_L_omega(u, std::sqrt(1.0 + eps)) - eps * u3;
}

ResidualReport verify_solution(const CoeffField& u, double eps, double tol,
                               const std::vector<NormParams>& norms) {
  ResidualReport rep;
  rep.eps = eps;
  rep.tol = tol;
  const CoeffField R = pde_residual(u, eps);
  for (const NormParams& p : norms) {
    rep.norms.push_back({p, field_norm(R, p), u.empty() ? 0.0 : field_norm(u, p)});
  }
  if (!norms.empty()) {
    rep.kernel_part = field_norm(project_V(R), norms.front());
    rep.range_part = field_norm(project_W(R), norms.front());
    const double un = rep.norms.front().u_norm;
    rep.pass = rep.norms.front().residual <= tol * std::max(un * un * un, 1e-300);
  }

  if (!u.empty()) {
    rep.decay.assign(static_cast<size_t>(u.J() + 1), 0.0);
    for (int l = 0; l <= u.L(); ++l) {
      for (int j = 0; j <= u.J(); ++j) rep.decay[j] = std::max(rep.decay[j], std::abs(u(l, j)));
    }
    int last = -1;
    for (int j = 0; j <= u.J(); ++j) {
      if (rep.decay[j] == 0.0) continue;
      if (last >= 0) {
        rep.decay_slope.push_back((std::log(rep.decay[j]) - std::log(rep.decay[last])) /
                                  (std::log(omega(j)) - std::log(omega(last))));
      }
      last = j;
    }
  }
  return rep;
}

double double_log_slope(const SolveTrace& trace, int first, int last) {
  const double eps = trace.config.eps, gamma = trace.config.res.gamma;
  std::vector<double> x, y;
  for (const StageRecord& r : trace.stages) {
    if (r.n < first || r.n > last) continue;
    const double q = gamma * r.h_norm / eps;
    if (!(q > 0.0 && q < 1.0)) continue;
    x.push_back(r.n);
    y.push_back(std::log(-std::log(q)));
  }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= x.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace rkg
