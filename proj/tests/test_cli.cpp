#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "rkg/field_io.hpp"
#include "rkg/parallel.hpp"
#include "rkg/reports.hpp"

using namespace rkg;
namespace fs = std::filesystem;

namespace {

int run_args(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "rkg");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rkg_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

Json json_file(const fs::path& p) { return Json::parse(slurp(p)); }

/// A converged directory shared by several cases.
const fs::path& solved_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("solved");
    REQUIRE(run_args({"solve", "--eps", "1e-3", "--m", "0", "--stages", "3", "--inverse-norm", "estimate",
                 "--out", d.string()}) == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("solve writes a consistent artifact set") {
  const fs::path& d = solved_dir();
  const Json man = json_file(d / "manifest.json");
  CHECK(man["status"] == "converged");
  CHECK(man["exit_code"] == 0);
  for (const auto& [name, rel] : man["artifacts"].items()) CHECK(fs::exists(d / rel.get<std::string>()));
  CHECK(man.contains("timings"));
  CHECK(man["versions"].contains("rkg"));

  const Json res = json_file(d / "residual.json");
  CHECK(res["pass"] == true);
  const CoeffField u = load_field((d / "solution.rkgf").string());
  const CoeffField w = load_field((d / "w.rkgf").string());
  CHECK(in_W(w));
  CHECK_FALSE(u.is_zero());
  // the stored config round-trips
  const SolverConfig c = config_from_json(man["config"]);
  CHECK(to_json(c) == man["config"]);
}

TEST_CASE("the CLI is a thin shell over the library") {
  const fs::path& d = solved_dir();
  const SolverConfig c = config_from_json(json_file(d / "manifest.json")["config"]);
  const SolveResult r = run(c);
  std::ostringstream trace;
  write_trace_jsonl(trace, r.trace);
  CHECK(slurp(d / "trace.jsonl") == trace.str());
  std::ostringstream field;
  write_field(field, r.u());
  CHECK(slurp(d / "solution.rkgf") == field.str());
  const ResidualReport rep = verify_solution(r.u(), c.eps, 1e-8,
                                             {{c.sigma_inf(), c.s, c.r}, {c.sigma_bar / 2, c.s, c.r}, {0, 0, 0}});
  CHECK(json_file(d / "residual.json") == Json::parse(to_json(rep).dump()));
}

TEST_CASE("data artifacts are deterministic") {
  const fs::path d2 = scratch("solved_again");
  REQUIRE(run_args({"solve", "--eps", "1e-3", "--m", "0", "--stages", "3", "--inverse-norm", "estimate",
               "--out", d2.string()}) == 0);
  for (const char* f : {"trace.jsonl", "summary.json", "solution.rkgf", "w.rkgf", "kernel.json", "residual.json"}) {
    CHECK(slurp(solved_dir() / f) == slurp(d2 / f));
  }
}

TEST_CASE("solve at eps = 0 has a zero range part") {
  const fs::path d = scratch("eps0");
  REQUIRE(run_args({"solve", "--eps", "0", "--m", "0", "--stages", "1", "--out", d.string()}) == 0);
  CHECK(load_field((d / "w.rkgf").string()).is_zero());
  CHECK(json_file(d / "residual.json")["norms"][0]["residual"] == 0.0);
}

TEST_CASE("an excluded eps exits 2 with the failing conditions") {
  const fs::path d = scratch("excluded");
  const double eps = (61.0 / 60.0) * (61.0 / 60.0) - 1.0;
  std::ostringstream e;
  e.precision(17);
  e << eps;
  CHECK(run_args({"solve", "--eps", e.str(), "--stages", "3", "--inverse-norm", "off", "--out", d.string()}) == 2);
  const std::string csv = slurp(d / "melnikov_failures.csv");
  CHECK(csv.rfind("l,j,", 0) == 0);
  CHECK(csv.find("\n60,60,") != std::string::npos);
  CHECK(json_file(d / "manifest.json")["status"] == "melnikov_excluded");
}

TEST_CASE("usage errors exit 64") {
  CHECK(run_args({}) == 64);
  CHECK(run_args({"solve", "--no-such-flag"}) == 64);
  CHECK(run_args({"solve", "--sign", "3"}) == 64);
  CHECK(run_args({"solve", "--theta", "0.4", "--out", scratch("bad").string()}) == 64);
  CHECK(run_args({"solve", "--inverse-norm", "sometimes"}) == 64);
  CHECK(run_args({"verify"}) == 64);
  CHECK(run_args({"--help"}) == 0);
}

TEST_CASE("missing artifacts exit 66") {
  CHECK(run_args({"verify", "--from", "/nonexistent/dir"}) == 66);
  CHECK(run_args({"divisors", "--from", "/nonexistent/dir"}) == 66);
  const fs::path d = scratch("partial");
  fs::create_directories(d);
  std::ofstream(d / "manifest.json") << "{\"config\":{}}";
  CHECK(run_args({"verify", "--from", d.string()}) == 66);
  CHECK(run_args({"verify", "--field", (d / "missing.rkgf").string(), "--eps", "0"}) == 66);
}

TEST_CASE("verify reports tampering") {
  const fs::path& d = solved_dir();
  CHECK(run_args({"verify", "--from", d.string()}) == 0);
  const Json good = json_file(d / "verify.json");
  CHECK(good["pass"] == true);

  CoeffField u = load_field((d / "solution.rkgf").string());
  u(3, 4) += 1e-3;
  const fs::path t = scratch("tampered.rkgf");
  save_field(t.string(), u);
  const fs::path out = scratch("tampered.json");
  CHECK(run_args({"verify", "--field", t.string(), "--eps", "1e-3", "--out", out.string()}) == 1);
  const Json bad = json_file(out);
  CHECK(bad["pass"] == false);
  CHECK(bad["norms"][0]["residual"].get<double>() > 1e3 * good["norms"][0]["residual"].get<double>());
}

TEST_CASE("divisors from a converged run stay above the floor") {
  const fs::path out = scratch("div");
  CHECK(run_args({"divisors", "--from", solved_dir().string(), "--L", "32", "--out", (out / "d").string()}) == 0);
  const Json j = json_file(out / "d.json");
  CHECK(j["all_pass"] == true);
  CHECK(j["product_bound"]["constant"].is_number());
  const std::string csv = slurp(out / "d.csv");
  CHECK(csv.rfind("l,j,lambda,alpha,floor,pass\n", 0) == 0);
}

TEST_CASE("spectrum at eps = 0 is omega_j^2") {
  const fs::path out = scratch("spectrum.csv");
  CHECK(run_args({"spectrum", "--eps", "0", "--ell", "0,3,10", "--Jmax", "20", "--out", out.string()}) == 0);
  std::istringstream is(slurp(out));
  std::string line;
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line)) {
    int l, j;
    double lam;
    char c;
    std::istringstream ls(line);
    ls >> l >> c >> j >> c >> lam;
    CHECK(lam == double((j + 1) * (j + 1)));
    ++rows;
  }
  CHECK(rows == 3 * 21 - 2);
}

TEST_CASE("measure: report, grid errors and sampling stability") {
  std::string text;
  CHECK(run_args({"measure", "--solve-grid", "1"}, &text) == 65);
  CHECK(text.find("solve-grid") != std::string::npos);

  auto measure = [](int samples, const std::string& gamma, const fs::path& out) {
    return run_args({"measure", "--eta", "0.01", "--samples", std::to_string(samples), "--gamma", gamma,
                "--l-max", "1500", "--solve-grid", "3", "--max-intervals", "5", "--out", out.string()});
  };
  const fs::path a = scratch("m_a.json"), b = scratch("m_b.json"), s = scratch("m_s.json");
  REQUIRE(measure(20000, "0.05", a) == 0);
  REQUIRE(measure(10000, "0.05", b) == 0);
  const Json ja = json_file(a), jb = json_file(b);
  CHECK(ja["excluded_intervals"].size() <= 5);
  CHECK(ja["excluded_interval_count"].get<size_t>() >= ja["excluded_intervals"].size());
  CHECK(ja["solve_grid"].size() == 4);
  CHECK(ja["solve_grid"][0]["M"].get<double>() == doctest::Approx(2.0));
  CHECK(std::abs(ja["fraction_mc"].get<double>() - jb["fraction_mc"].get<double>()) < 3.0 / std::sqrt(20000.0));

  REQUIRE(measure(5000, "1e-6", s) == 0);
  CHECK(json_file(s)["fraction"].get<double>() > 0.999);
}

TEST_CASE("thread cap and the installed binary") {
  set_threads(1);
  CHECK(threads() == 1);
  set_threads(0);
  CHECK(threads() >= 1);
  const char* bin = std::getenv("RKG_CLI");
  if (!bin) return;
  const std::string base = std::string(bin) + " ";
  auto code = [&](const std::string& args) {
    const int s = std::system((base + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(code("--version") == 0);
  CHECK(code("solve --bogus") == 64);
  CHECK(code("verify --from /nonexistent") == 66);
  CHECK(code("--threads 1 spectrum --eps 0 --ell 1 --Jmax 4 --out " + scratch("bin.csv").string()) == 0);
}
