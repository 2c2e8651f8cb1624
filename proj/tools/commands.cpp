#include "commands.hpp"

#include <Eigen/Core>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "rkg/field_io.hpp"
#include "rkg/linearized.hpp"
#include "rkg/parallel.hpp"
#include "rkg/reports.hpp"

#ifndef RKG_VERSION
#define RKG_VERSION "0.0.0"
#endif

namespace rkg::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json versions() {
  std::ostringstream eigen, json;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  json << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.'
       << NLOHMANN_JSON_VERSION_PATCH;
  return {{"rkg", RKG_VERSION}, {"eigen", eigen.str()}, {"cli11", CLI11_VERSION},
          {"nlohmann_json", json.str()}, {"field_format", 1}};
}

void write_json(const fs::path& p, const Json& j) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << j.dump(2) << '\n';
}

/// "-" writes to `out`.
void emit_json(const std::string& path, const Json& j, std::ostream& out) {
  if (path == "-") {
    out << j.dump(2) << '\n';
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  write_json(path, j);
}

Json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw MissingArtifact("missing artifact " + p.string());
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw MissingArtifact("unreadable artifact " + p.string() + ": " + e.what());
  }
}

CoeffField read_field_artifact(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact("missing artifact " + p.string());
  try {
    return load_field(p.string());
  } catch (const std::exception& e) {
    throw MissingArtifact("unreadable artifact " + p.string() + ": " + e.what());
  }
}

std::vector<NormParams> verify_norms(const SolverConfig& c) {
  return {{c.sigma_inf(), c.s, c.r}, {c.sigma_bar / 2.0, c.s, c.r}, {0.0, 0.0, 0.0}};
}

const StageRecord* failing_record(const SolveTrace& t) {
  if (t.failed_stage < 0 || t.stages.empty()) return nullptr;
  return &t.stages.back();
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Artifacts

SolveArtifacts load_solve_dir(const std::string& dir) {
  const fs::path d(dir);
  if (!fs::is_directory(d)) throw MissingArtifact("no solve directory " + dir);
  SolveArtifacts a;
  const Json man = read_json(d / "manifest.json");
  try {
    a.cfg = config_from_json(man.at("config"));
  } catch (const Json::exception& e) {
    throw MissingArtifact("manifest without a usable config: " + std::string(e.what()));
  }
  a.u = read_field_artifact(d / "solution.rkgf");
  a.w = read_field_artifact(d / "w.rkgf");
  try {
    a.v = kernel_from_json(read_json(d / "kernel.json"));
  } catch (const Json::exception& e) {
    throw MissingArtifact("kernel.json: " + std::string(e.what()));
  }
  std::ifstream tr(d / "trace.jsonl");
  std::string line, last;
  while (std::getline(tr, line)) {
    if (!line.empty()) last = line;
  }
  a.last_L = last.empty() ? a.u.L() : Json::parse(last).value("L", a.u.L());
  return a;
}

Background load_background(const SourceArgs& a) {
  Background bg;
  if (!a.from.empty()) {
    const SolveArtifacts s = load_solve_dir(a.from);
    bg.eps = s.cfg.eps;
    bg.b0 = time_mean_b(s.w, s.v);
    bg.M = mean_functional(s.w, s.v, s.cfg.mean_norm);
    bg.last_L = s.last_L;
    bg.from_solve = true;
    return bg;
  }
  if (a.eps < 0.0) throw std::invalid_argument("--eps must be >= 0");
  const KernelField v = explicit_kernel_solution(a.m, a.sign);
  bg.eps = a.eps;
  bg.b0 = time_mean_b(CoeffField{}, v);
  bg.M = mean_functional(CoeffField{}, v, a.mean_norm);
  return bg;
}

// ---------------------------------------------------------------------------------------
// solve

int cmd_solve(const SolveArgs& a, std::ostream& log) {
  a.cfg.validate();
  const auto t0 = Clock::now();
  const fs::path dir(a.out);
  fs::create_directories(dir);

  const SolveResult res = run(a.cfg);
  const double t_solve = seconds_since(t0);
  const SolveTrace& tr = res.trace;

  Json artifacts = Json::object();
  {
    std::ofstream os(dir / "trace.jsonl");
    write_trace_jsonl(os, tr);
    artifacts["trace"] = "trace.jsonl";
  }
  write_json(dir / "summary.json", trace_summary(tr));
  artifacts["summary"] = "summary.json";

  if (!res.w.empty()) {
    save_field((dir / "w.rkgf").string(), res.w);
    save_field((dir / "solution.rkgf").string(), res.u());
    write_json(dir / "kernel.json", to_json(res.v));
    artifacts["w"] = "w.rkgf";
    artifacts["solution"] = "solution.rkgf";
    artifacts["kernel"] = "kernel.json";
  }

  int code = kOk;
  double t_verify = 0.0;
  if (tr.status == SolveStatus::Converged) {
    const auto t1 = Clock::now();
    const ResidualReport rep = verify_solution(res.u(), a.cfg.eps, a.verify_tol, verify_norms(a.cfg));
    t_verify = seconds_since(t1);
    write_json(dir / "residual.json", to_json(rep));
    artifacts["residual"] = "residual.json";
    log << "converged: " << tr.stages.size() << " stages, residual "
        << rep.norms.front().residual << " (" << (rep.pass ? "pass" : "FAIL") << ")\n";
    if (!rep.pass) code = kNumericFailure;
  } else if (tr.status == SolveStatus::MelnikovExcluded) {
    std::ofstream os(dir / "melnikov_failures.csv");
    if (const StageRecord* r = failing_record(tr)) write_conditions_csv(os, r->melnikov_failures);
    artifacts["melnikov_failures"] = "melnikov_failures.csv";
    log << "excluded at stage " << tr.failed_stage << ": " << tr.message << '\n';
    code = kExcluded;
  } else {
    log << "numeric failure at stage " << tr.failed_stage << ": " << tr.message << '\n';
    code = kNumericFailure;
  }

  Json man = {{"command", "solve"},
              {"status", status_name(tr.status)},
              {"exit_code", code},
              {"config", to_json(a.cfg)},
              {"verify_tol", a.verify_tol},
              {"artifacts", artifacts},
              {"versions", versions()},
              {"created_utc", utc_now()},
              {"timings", {{"solve_seconds", t_solve},
                           {"verify_seconds", t_verify},
                           {"total_seconds", seconds_since(t0)}}}};
  write_json(dir / "manifest.json", man);
  return code;
}

// ---------------------------------------------------------------------------------------
// measure

MGrid solve_m_grid(const MeasureArgs& a) {
  if (a.solve_grid < 2) {
    throw InsufficientGrid("--solve-grid needs at least 2 points to interpolate m(eps)");
  }
  MGrid g;
  g.eps.push_back(0.0);
  g.M.push_back(mean_functional(CoeffField{}, explicit_kernel_solution(a.m, a.sign), a.mean_norm));
  g.status.push_back("explicit");
  for (int i = 1; i <= a.solve_grid; ++i) {
    SolverConfig c;
    c.eps = a.eta * i / a.solve_grid;
    c.m = a.m;
    c.sign = a.sign;
    c.res = a.res;
    c.L0 = a.L0;
    c.n_max = a.solve_stages;
    c.mean_norm = a.mean_norm;
    c.check_melnikov = false;  // only m(eps) is needed here
    c.inverse_norm = InverseNormMode::Off;
    const SolveResult r = run(c);
    if (r.trace.status != SolveStatus::Converged) {
      throw std::runtime_error("m(eps) solve failed at eps = " + std::to_string(c.eps) + ": " +
                               r.trace.message);
    }
    g.eps.push_back(c.eps);
    g.M.push_back(mean_functional(r.w, r.v, a.mean_norm));
    g.status.push_back(status_name(r.trace.status));
  }
  return g;
}

int cmd_measure(const MeasureArgs& a, std::ostream& log) {
  if (!(a.eta > 0.0)) throw std::invalid_argument("--eta must be > 0");
  if (a.samples < 1) throw std::invalid_argument("--samples must be >= 1");
  const MGrid g = solve_m_grid(a);
  const Interpolant m_of(g.eps, g.M);
  const MeasureReport rep =
      measure_scan(a.eta, a.samples, a.res, [&](double e) { return m_of(e); }, a.opt);

  Json j = to_json(rep, a.max_intervals);
  Json grid = Json::array();
  for (size_t i = 0; i < g.eps.size(); ++i) {
    grid.push_back({{"eps", g.eps[i]}, {"M", g.M[i]}, {"status", g.status[i]}});
  }
  j["m"] = a.m;
  j["sign"] = a.sign;
  j["solve_grid"] = grid;
  j["mean_normalization"] = a.mean_norm == MeanNormalization::Measure ? "measure" : "half_line";
  j["seed"] = a.opt.seed;
  j["levels_requested"] = a.opt.levels;
  emit_json(a.out, j, log);
  if (a.out != "-") {
    log << "excluded fraction " << 1.0 - rep.fraction_union << ", exponent " << rep.fitted_exponent
        << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------------------
// divisors, spectrum, verify

int cmd_divisors(const DivisorArgs& a, std::ostream& log) {
  const Background bg = load_background(a.src);
  ResonanceParams res = a.src.res;
  if (bg.from_solve) res = load_solve_dir(a.src.from).cfg.res;
  const int L = a.L >= 0 ? a.L : (bg.last_L > 0 ? std::min(bg.last_L, 128) : 64);
  const int Jmax = a.Jmax > 0 ? a.Jmax : 2 * std::max(L, 1);
  const DivisorReport rep = small_divisors(bg.eps, bg.b0, L, Jmax, res.gamma, res.tau);
  const ProductBound pb = product_bound_constant(rep);

  const fs::path base(a.out);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  {
    std::ofstream os(base.string() + ".csv");
    write_divisors_csv(os, rep);
  }
  Json j = to_json(rep, &pb);
  j["M"] = bg.M;
  j["Jmax"] = Jmax;
  write_json(base.string() + ".json", j);
  log << "divisors l <= " << L << ": " << (rep.all_pass() ? "all above floor" : "floor violated")
      << ", product constant " << pb.constant << '\n';
  return kOk;
}

int cmd_spectrum(const SpectrumArgs& a, std::ostream& log) {
  const Background bg = load_background(a.src);
  std::vector<int> ells = a.ells;
  if (ells.empty()) {
    for (int l = 0; l <= a.L; ++l) ells.push_back(l);
  }
  std::vector<SpectralBlock> blocks;
  for (int l : ells) {
    if (l < 0) throw std::invalid_argument("--ell entries must be >= 0");
    blocks.push_back(diagonalize_block(l, bg.eps, bg.b0, a.Jmax, false));
  }
  const fs::path p(a.out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  write_spectrum_csv(os, blocks);
  log << "spectrum: " << blocks.size() << " blocks, Jmax " << a.Jmax << '\n';
  return kOk;
}

int cmd_verify(const VerifyArgs& a, std::ostream& log) {
  CoeffField u;
  double eps = a.eps;
  std::vector<NormParams> norms;
  std::string out = a.out;
  if (!a.from.empty()) {
    const SolveArtifacts s = load_solve_dir(a.from);
    u = s.u;
    if (eps < 0.0) eps = s.cfg.eps;
    norms = verify_norms(s.cfg);
    if (out.empty()) out = (fs::path(a.from) / "verify.json").string();
  } else if (!a.field.empty()) {
    if (eps < 0.0) throw std::invalid_argument("--field needs --eps");
    u = read_field_artifact(a.field);
    const SolverConfig c;
    norms = verify_norms(c);
    if (out.empty()) out = "-";
  } else {
    throw std::invalid_argument("verify needs --from DIR or --field FILE");
  }
  const ResidualReport rep = verify_solution(u, eps, a.tol, norms);
  emit_json(out, to_json(rep), log);
  if (out != "-") {
    log << "residual " << rep.norms.front().residual << " (" << (rep.pass ? "pass" : "FAIL") << ")\n";
  }
  return rep.pass ? kOk : kNumericFailure;
}

// ---------------------------------------------------------------------------------------
// argv

namespace {

const std::map<std::string, InverseNormMode> kInverseModes = {
    {"off", InverseNormMode::Off},
    {"estimate", InverseNormMode::Estimate},
    {"bound", InverseNormMode::Bound},
    {"exact", InverseNormMode::Exact}};

const std::map<std::string, MeanNormalization> kMeanModes = {
    {"half_line", MeanNormalization::HalfLine}, {"measure", MeanNormalization::Measure}};

void add_resonance(CLI::App* c, ResonanceParams& r) {
  c->add_option("--gamma", r.gamma, "Diophantine constant")->capture_default_str();
  c->add_option("--tau", r.tau, "Diophantine exponent")->capture_default_str();
}

void add_source(CLI::App* c, SourceArgs& s) {
  c->add_option("--from", s.from, "prior solve directory");
  c->add_option("--eps", s.eps, "amplitude, used without --from")->capture_default_str();
  c->add_option("--m", s.m, "branch mode, used without --from")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  c->add_option("--sign", s.sign, "branch sign")->capture_default_str()->check(CLI::IsMember({-1, 1}));
  c->add_option("--mean-normalization", s.mean_norm, "M convention")
      ->transform(CLI::CheckedTransformer(kMeanModes, CLI::ignore_case));
  add_resonance(c, s.res);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Periodic solutions of the cubic Klein-Gordon equation on S^3", "rkg"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap on worker threads (default: RESONANT_KG_THREADS)");
  app.set_version_flag("--version", RKG_VERSION);

  SolveArgs sa;
  SolverConfig& c = sa.cfg;
  CLI::App* solve = app.add_subcommand("solve", "run the iteration and write solution artifacts");
  solve->add_option("--eps", c.eps, "amplitude")->capture_default_str();
  solve->add_option("--m", c.m, "branch mode")->capture_default_str();
  solve->add_option("--sign", c.sign, "branch sign")->capture_default_str()->check(CLI::IsMember({-1, 1}));
  add_resonance(solve, c.res);
  solve->add_option("--sigma-bar", c.sigma_bar, "initial analyticity strip")->capture_default_str();
  solve->add_option("--s", c.s, "time Sobolev index")->capture_default_str();
  solve->add_option("--r", c.r, "space Sobolev index")->capture_default_str();
  solve->add_option("--L0", c.L0, "base truncation")->capture_default_str();
  solve->add_option("--theta", c.theta, "strip decrement scale")->capture_default_str();
  solve->add_option("--stages", c.n_max, "number of stages after stage 0")->capture_default_str();
  solve->add_option("--picard-tol", c.picard_tol)->capture_default_str();
  solve->add_option("--picard-max", c.picard_max)->capture_default_str();
  solve->add_option("--stage-tol", c.stage_tol)->capture_default_str();
  solve->add_option("--final-tol", c.final_tol, "stop once ||h_n|| is below this")->capture_default_str();
  solve->add_option("--verify-tol", sa.verify_tol, "relative PDE residual tolerance")->capture_default_str();
  solve->add_option("--inverse-norm", c.inverse_norm, "off, estimate, bound or exact")
      ->transform(CLI::CheckedTransformer(kInverseModes, CLI::ignore_case));
  solve->add_option("--mean-normalization", c.mean_norm, "half_line or measure")
      ->transform(CLI::CheckedTransformer(kMeanModes, CLI::ignore_case));
  bool no_melnikov = false;
  solve->add_flag("--no-melnikov", no_melnikov, "do not stop on failed nonresonance conditions");
  solve->add_flag("--refresh-kernel", c.refresh_kernel, "recompute v(w) at every Picard step");
  solve->add_option("--out", sa.out, "output directory")->capture_default_str();

  MeasureArgs ma;
  CLI::App* measure = app.add_subcommand("measure", "excluded-set measure near eps = 0");
  measure->add_option("--eta", ma.eta)->capture_default_str();
  measure->add_option("--samples", ma.samples, "Monte Carlo samples")->capture_default_str();
  add_resonance(measure, ma.res);
  measure->add_option("--m", ma.m)->capture_default_str()->check(CLI::NonNegativeNumber);
  measure->add_option("--sign", ma.sign)->capture_default_str()->check(CLI::IsMember({-1, 1}));
  measure->add_option("--solve-grid", ma.solve_grid, "eps points solved for m(eps)")->capture_default_str();
  measure->add_option("--solve-stages", ma.solve_stages)->capture_default_str();
  measure->add_option("--L0", ma.L0)->capture_default_str();
  measure->add_option("--l-max", ma.opt.l_max, "cutoff of the enumerated pairs")->capture_default_str();
  measure->add_option("--levels", ma.opt.levels, "eta, eta/2, ... used in the fit")->capture_default_str();
  measure->add_option("--seed", ma.opt.seed)->capture_default_str();
  measure->add_option("--max-intervals", ma.max_intervals, "intervals listed in the report (-1: all)")
      ->capture_default_str();
  measure->add_option("--mean-normalization", ma.mean_norm)
      ->transform(CLI::CheckedTransformer(kMeanModes, CLI::ignore_case));
  measure->add_option("--out", ma.out, "JSON report path, - for stdout")->capture_default_str();

  DivisorArgs da;
  CLI::App* divisors = app.add_subcommand("divisors", "small-divisor table alpha_l with its floor");
  add_source(divisors, da.src);
  divisors->add_option("--L", da.L, "largest l")->capture_default_str();
  divisors->add_option("--Jmax", da.Jmax, "space truncation of each block")->capture_default_str();
  divisors->add_option("--out", da.out, "output prefix for .csv and .json")->capture_default_str();

  SpectrumArgs pa;
  CLI::App* spectrum = app.add_subcommand("spectrum", "eigenvalues of the l-blocks");
  add_source(spectrum, pa.src);
  spectrum->add_option("--ell", pa.ells, "comma-separated l values")->delimiter(',');
  spectrum->add_option("--L", pa.L, "use l = 0..L when --ell is absent")->capture_default_str();
  spectrum->add_option("--Jmax", pa.Jmax)->capture_default_str();
  spectrum->add_option("--out", pa.out)->capture_default_str();

  VerifyArgs va;
  CLI::App* verify = app.add_subcommand("verify", "PDE residual of a stored field");
  verify->add_option("--from", va.from, "solve directory");
  verify->add_option("--field", va.field, "field file");
  verify->add_option("--eps", va.eps, "amplitude (default: from the solve directory)");
  verify->add_option("--tol", va.tol)->capture_default_str();
  verify->add_option("--out", va.out, "report path, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  c.check_melnikov = !no_melnikov;
  set_threads(threads);

  try {
    if (*solve) return cmd_solve(sa, out);
    if (*measure) return cmd_measure(ma, out);
    if (*divisors) return cmd_divisors(da, out);
    if (*spectrum) return cmd_spectrum(pa, out);
    if (*verify) return cmd_verify(va, out);
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << '\n';
    return kMissingArtifacts;
  } catch (const InsufficientGrid& e) {
    err << "error: " << e.what() << '\n';
    return kInsufficientGrid;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericFailure;
  }
  return kUsage;
}

}  // namespace rkg::cli
