#include "rkg/reports.hpp"

#include <cmath>
#include <ostream>

namespace rkg {

namespace {

/// NaN and infinities become null in JSON; keep infinities readable instead.
Json num(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

const char* mean_name(MeanNormalization m) {
  return m == MeanNormalization::Measure ? "measure" : "half_line";
}

const char* inverse_name(InverseNormMode m) {
  switch (m) {
    case InverseNormMode::Off: return "off";
    case InverseNormMode::Estimate: return "estimate";
    case InverseNormMode::Bound: return "bound";
    case InverseNormMode::Exact: return "exact";
  }
  return "off";
}

InverseNormMode inverse_from(const std::string& s) {
  if (s == "off") return InverseNormMode::Off;
  if (s == "estimate") return InverseNormMode::Estimate;
  if (s == "bound") return InverseNormMode::Bound;
  if (s == "exact") return InverseNormMode::Exact;
  throw std::invalid_argument("unknown inverse-norm mode: " + s);
}

}  // namespace

Json to_json(const NormParams& p) { return {{"sigma", p.sigma}, {"s", p.s}, {"r", p.r}}; }

Json to_json(const SolverConfig& c) {
  return {
      {"eps", c.eps},
      {"m", c.m},
      {"sign", c.sign},
      {"gamma", c.res.gamma},
      {"tau", c.res.tau},
      {"sigma_bar", c.sigma_bar},
      {"s", c.s},
      {"r", c.r},
      {"L0", c.L0},
      {"theta", c.theta},
      {"stages", c.n_max},
      {"picard_tol", c.picard_tol},
      {"picard_max", c.picard_max},
      {"stage_tol", c.stage_tol},
      {"final_tol", c.final_tol},
      {"kernel_tol", c.kernel.tol},
      {"kernel_max_iter", c.kernel.max_iter},
      {"kernel_stall_tol", c.kernel.stall_tol},
      {"mean_normalization", mean_name(c.mean_norm)},
      {"inverse_norm", inverse_name(c.inverse_norm)},
      {"check_melnikov", c.check_melnikov},
      {"refresh_kernel", c.refresh_kernel},
      {"jmax_factor", c.jmax_factor},
      {"jv_factor", c.jv_factor},
      {"sigma_inf", c.sigma_inf()},
      {"m_regularity_flag", c.m_regularity_flag()},
  };
}

SolverConfig config_from_json(const Json& j) {
  SolverConfig c;
  c.eps = j.value("eps", c.eps);
  c.m = j.value("m", c.m);
  c.sign = j.value("sign", c.sign);
  c.res.gamma = j.value("gamma", c.res.gamma);
  c.res.tau = j.value("tau", c.res.tau);
  c.sigma_bar = j.value("sigma_bar", c.sigma_bar);
  c.s = j.value("s", c.s);
  c.r = j.value("r", c.r);
  c.L0 = j.value("L0", c.L0);
  c.theta = j.value("theta", c.theta);
  c.n_max = j.value("stages", c.n_max);
  c.picard_tol = j.value("picard_tol", c.picard_tol);
  c.picard_max = j.value("picard_max", c.picard_max);
  c.stage_tol = j.value("stage_tol", c.stage_tol);
  c.final_tol = j.value("final_tol", c.final_tol);
  c.kernel.tol = j.value("kernel_tol", c.kernel.tol);
  c.kernel.max_iter = j.value("kernel_max_iter", c.kernel.max_iter);
  c.kernel.stall_tol = j.value("kernel_stall_tol", c.kernel.stall_tol);
  if (j.value("mean_normalization", std::string("half_line")) == "measure") {
    c.mean_norm = MeanNormalization::Measure;
  }
  c.inverse_norm = inverse_from(j.value("inverse_norm", std::string("exact")));
  c.check_melnikov = j.value("check_melnikov", c.check_melnikov);
  c.refresh_kernel = j.value("refresh_kernel", c.refresh_kernel);
  c.jmax_factor = j.value("jmax_factor", c.jmax_factor);
  c.jv_factor = j.value("jv_factor", c.jv_factor);
  return c;
}

Json to_json(const KernelField& v) { return {{"JV", v.JV()}, {"v", v.v}}; }

KernelField kernel_from_json(const Json& j) {
  KernelField v;
  v.v = j.at("v").get<std::vector<double>>();
  return v;
}

Json to_json(const ConditionRecord& r) {
  return {{"l", r.ell},
          {"j", r.j},
          {"omega_j", r.j + 1},
          {"lhs_plain", r.lhs_plain},
          {"lhs_shift", r.lhs_shift},
          {"threshold", r.threshold},
          {"pass_plain", r.pass_plain},
          {"pass_shift", r.pass_shift}};
}

Json to_json(const ConditionCheck& c) {
  Json f = Json::array();
  for (const ConditionRecord& r : c.failures) f.push_back(to_json(r));
  return {{"pass", c.pass}, {"checked", c.checked}, {"failures", f}};
}

Json to_json(const StageRecord& r) {
  Json f = Json::array();
  for (const ConditionRecord& c : r.melnikov_failures) f.push_back(to_json(c));
  return {
      {"n", r.n},
      {"L", r.Ln},
      {"Jmax", r.Jmax},
      {"JV", r.JV},
      {"sigma", r.sigma},
      {"h_norm", num(r.h_norm)},
      {"w_norm", num(r.w_norm)},
      {"decay_bound", num(r.decay_bound)},
      {"residual", num(r.residual)},
      {"certified", r.certified},
      {"rhs_norm", num(r.rhs_norm)},
      {"tail_norm", num(r.tail_norm)},
      {"tail_source", num(r.tail_source)},
      {"smoothing_factor", num(r.smoothing_factor)},
      {"smoothing_ok", r.smoothing_ok},
      {"M", num(r.M)},
      {"melnikov", {{"pass", r.melnikov_pass}, {"checked", r.melnikov_checked}, {"failures", f}}},
      {"inverse_norm", num(r.inverse_norm)},
      {"inverse_norm_method", r.inverse_norm_method},
      {"inverse_bound", num(r.inverse_bound)},
      {"classes", r.classes},
      {"dimension", r.dimension},
      {"picard_iterations", r.picard_iterations},
      {"max_contraction", num(r.max_contraction)},
      {"contraction_ok", r.contraction_ok},
      {"kernel_iterations", r.kernel_iterations},
      {"kernel_residual", num(r.kernel_residual)},
  };
}

Json trace_summary(const SolveTrace& t) {
  return {{"config", to_json(t.config)},
          {"status", status_name(t.status)},
          {"failed_stage", t.failed_stage},
          {"message", t.message},
          {"stages", t.stages.size()},
          {"w_final_norm", num(t.w_final_norm)},
          {"K2", num(t.K2)}};
}

void write_trace_jsonl(std::ostream& os, const SolveTrace& t) {
  for (const StageRecord& r : t.stages) os << to_json(r).dump() << '\n';
}

Json to_json(const ResidualReport& r) {
  Json norms = Json::array();
  for (const ResidualNorm& n : r.norms) {
    norms.push_back({{"norm", to_json(n.p)}, {"residual", num(n.residual)}, {"u_norm", num(n.u_norm)}});
  }
  Json decay = Json::array(), slope = Json::array();
  for (double d : r.decay) decay.push_back(num(d));
  for (double d : r.decay_slope) slope.push_back(num(d));
  return {{"eps", r.eps},
          {"tol", r.tol},
          {"pass", r.pass},
          {"norms", norms},
          {"kernel_part", num(r.kernel_part)},
          {"range_part", num(r.range_part)},
          {"decay", decay},
          {"decay_slope", slope}};
}

Json to_json(const MeasureReport& r, long max_intervals) {
  Json iv = Json::array();
  const size_t cap = max_intervals < 0 ? r.excluded.size()
                                       : std::min(r.excluded.size(), static_cast<size_t>(max_intervals));
  for (size_t i = 0; i < cap; ++i) {
    const ExcludedInterval& e = r.excluded[i];
    iv.push_back({e.lo, e.hi, e.ell, e.j, e.shifted ? "shifted" : "plain"});
  }
  Json levels = Json::array();
  for (const MeasureLevel& l : r.levels) {
    levels.push_back({{"eta", l.eta},
                      {"excluded", l.excluded_union},
                      {"excluded_fraction", l.excluded_union / l.eta},
                      {"tail_bound", num(l.tail_bound)},
                      {"intervals", l.intervals}});
  }
  const double tg = r.params.tau;
  return {{"eta", r.eta},
          {"samples", r.samples},
          {"gamma", r.params.gamma},
          {"tau", tg},
          {"l_max", r.l_max},
          {"fraction", r.fraction_union},
          {"fraction_mc", num(r.fraction_mc)},
          {"mc_stderr", num(r.mc_stderr)},
          {"tail_fraction_bound", num(r.tail_fraction_bound)},
          {"excluded_interval_count", r.excluded.size()},
          {"excluded_intervals", iv},
          {"levels", levels},
          {"fitted_exponent", num(r.fitted_exponent)},
          {"fitted_exponent_with_tail", num(r.fitted_exponent_with_tail)},
          {"target_exponent", (tg - 1.0) / 2.0},
          {"bound_constant", num(r.bound_constant)},
          {"min_slope_ratio", num(r.min_slope_ratio)},
          {"max_width_ratio", num(r.max_width_ratio)}};
}

Json to_json(const DiophantineResult& r) {
  return {{"pass", r.pass},
          {"cutoff", r.cutoff},
          {"worst_l", r.worst_ell},
          {"worst_j", r.worst_j},
          {"min_margin", num(r.min_margin)}};
}

Json to_json(const DivisorReport& r, const ProductBound* pb) {
  Json j = {{"eps", r.eps},
            {"gamma", r.gamma},
            {"tau", r.tau},
            {"L", static_cast<int>(r.rows.size()) - 1},
            {"all_pass", r.all_pass()},
            {"failures", r.failures()}};
  double worst = HUGE_VAL;
  int worst_l = -1;
  for (const DivisorRow& row : r.rows) {
    const double ratio = row.alpha / row.floor;
    if (ratio < worst) {
      worst = ratio;
      worst_l = row.ell;
    }
  }
  j["min_alpha_over_floor"] = num(worst);
  j["min_alpha_over_floor_l"] = worst_l;
  if (pb) j["product_bound"] = {{"constant", num(pb->constant)}, {"l", pb->ell}, {"k", pb->k}};
  return j;
}

Json to_json(const SplitReport& r) {
  return {{"U_norm", num(r.U_norm)},
          {"Dhalf_ratio", num(r.Dhalf_ratio)},
          {"R1_norm", num(r.R1_norm)},
          {"R2_norm", num(r.R2_norm)},
          {"R1_constant", num(r.R1_constant)},
          {"R2_constant", num(r.R2_constant)},
          {"neumann_norm", num(r.neumann_norm)},
          {"neumann_converges", r.neumann_converges},
          {"neumann_terms", r.neumann_terms},
          {"neumann_vs_dense", num(r.neumann_vs_dense)},
          {"classes", r.classes}};
}

}  // namespace rkg
