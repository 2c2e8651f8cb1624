#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rkg/bifurcation.hpp"

using namespace rkg;

namespace {

/// A small W-field with a few entries.
CoeffField small_w(std::mt19937_64& rng, int L, int J, double scale) {
  CoeffField w = project_W(oracle::random_field(rng, L, J, scale));
  return w;
}

double max_abs(const KernelField& v) {
  double m = 0.0;
  for (double x : v.v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("explicit amplitude solves the single-mode balance") {
  // omega_m^2 alpha = (3/4) alpha^3 <e_m^3, e_m>, with the inner product by quadrature
  for (int m = 0; m <= 6; ++m) {
    const double ip = oracle::sphere_avg([&](double x) { return std::pow(oracle::ej(m, x), 4); });
    const double alpha = std::sqrt(4.0 * omega(m) * omega(m) / (3.0 * ip));
    for (int sign : {1, -1}) {
      const KernelField v = explicit_kernel_solution(m, sign, 10);
      CHECK(v.v[m] == doctest::Approx(sign * alpha).epsilon(1e-12));
      for (int j = 0; j <= 10; ++j) {
        if (j != m) CHECK(v.v[j] == 0.0);
      }
    }
  }
}

TEST_CASE("kernel_residual vanishes at the explicit solutions") {
  for (int m = 0; m <= 5; ++m) {
    for (int sign : {1, -1}) {
      const KernelField r = kernel_residual(explicit_kernel_solution(m, sign, 4 * m + 6), CoeffField{});
      CHECK(max_abs(r) < 1e-13 * omega(m) * omega(m));
    }
  }
  CoeffField bad(3, 3);
  bad(1, 0) = 1.0;
  CHECK_THROWS_AS(kernel_residual(explicit_kernel_solution(0, 1), bad), std::invalid_argument);
}

TEST_CASE("kernel_residual is A v - Pi_V (v + w)^3 evaluated on a grid") {
  std::mt19937_64 rng(31);
  KernelField v(4);
  for (double& x : v.v) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  const CoeffField w = small_w(rng, 3, 3, 0.1);
  const KernelField r = kernel_residual(v, w);
  for (int j = 0; j <= 4; ++j) {
    // coefficient of cos(omega_j t) e_j in (v + w)^3, via quadrature in t and x
    const int l = j + 1;
    auto u = [&](double t, double x) {
      double acc = oracle::field_at(w, t, x);
      for (int i = 0; i <= 4; ++i) acc += v.v[i] * std::cos(omega(i) * t) * oracle::ej(i, x);
      return acc;
    };
    const double c = 2.0 * oracle::time_avg([&](double t) {
      return std::cos(l * t) *
             oracle::sphere_avg([&](double x) { return std::pow(u(t, x), 3) * oracle::ej(j, x); }, 48);
    }, 64);
    CHECK(r.v[j] == doctest::Approx(omega(j) * omega(j) * v.v[j] - c).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("linearize_kernel is the Jacobian of kernel_residual") {
  std::mt19937_64 rng(32);
  KernelField v = explicit_kernel_solution(1, 1, 6);
  v.v[3] = 0.2;
  const CoeffField w = small_w(rng, 4, 5, 0.05);
  const Eigen::MatrixXd J = linearize_kernel(v, w);
  const double h = 1e-6;
  for (int i = 0; i <= 6; ++i) {
    KernelField vp = v, vm = v;
    vp.v[i] += h;
    vm.v[i] -= h;
    const KernelField rp = kernel_residual(vp, w), rm = kernel_residual(vm, w);
    for (int k = 0; k <= 6; ++k) {
      CHECK(J(k, i) == doctest::Approx((rp.v[k] - rm.v[k]) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("invariant-subspace structure at the explicit solution") {
  for (int m = 0; m <= 10; ++m) {
    const int JV = 2 * m + 12;
    const Eigen::MatrixXd J = linearize_kernel(explicit_kernel_solution(m, 1, JV), CoeffField{});
    const double wm = omega(m);
    CHECK(J(m, m) == doctest::Approx(-2 * wm * wm).epsilon(1e-13));
    for (int j = 2 * m + 1; j <= JV; ++j) {
      const double wj = omega(j);
      const double L = J(j, j);
      CHECK(L == doctest::Approx(wj * wj - 2 * wm * wm).epsilon(1e-13));
      CHECK(std::abs(L) >= 0.5 * wj * wj - 1e-12);
      CHECK(std::abs(L) <= wj * wj);
      for (int k = 0; k <= JV; ++k) {
        if (k != j) CHECK(std::abs(J(j, k)) < 1e-12);
      }
    }
    for (int j = 0; j < m; ++j) {
      const BifBlock b = bif_block(m, j);
      const int k = 2 * m - j;
      CHECK(std::llround(J(j, j)) == b.a[0]);
      CHECK(std::llround(J(j, k)) == b.a[1]);
      CHECK(std::llround(J(k, j)) == b.a[2]);
      CHECK(std::llround(J(k, k)) == b.a[3]);
      CHECK(b.det() == BifBlock::det_formula(m, j));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    CHECK(es.eigenvalues().cwiseAbs().minCoeff() > 0.5);
  }
  CHECK(BifBlock::det_formula(1, 0) == -7);
  CHECK_THROWS_AS(bif_block(2, 2), std::invalid_argument);
}

TEST_CASE("KernelJacobian solves match the dense system") {
  std::mt19937_64 rng(33);
  const KernelField v = explicit_kernel_solution(2, -1, 12);
  const CoeffField w = small_w(rng, 5, 8, 0.02);
  const KernelJacobian jac(v, w);
  const Eigen::MatrixXd D = linearize_kernel(v, w);
  CHECK((jac.dense() - D).norm() < 1e-12 * D.norm());
  KernelField rhs(12);
  for (double& x : rhs.v) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  const KernelField x = jac.solve(rhs);
  Eigen::VectorXd xe = Eigen::Map<const Eigen::VectorXd>(x.v.data(), 13);
  Eigen::VectorXd be = Eigen::Map<const Eigen::VectorXd>(rhs.v.data(), 13);
  CHECK((D * xe - be).norm() < 1e-11 * be.norm());
}

TEST_CASE("Newton kernel solve and its derivative in w") {
  std::mt19937_64 rng(34);
  const CoeffField w = small_w(rng, 4, 6, 1e-3);
  KernelSolveOptions opt;
  opt.tol = 1e-14;
  const KernelSolveResult ks = solve_kernel(w, 1, 1, 10, opt);
  REQUIRE(ks.converged);
  CHECK(max_abs(kernel_residual(ks.v, w)) < 1e-12);
  CHECK(std::abs(ks.v.v[1] - std::sqrt(8.0 / 3.0)) < 1e-2);

  const KernelJacobian jac(ks.v, w);
  const KernelSolveResult kc = solve_kernel_chord(w, explicit_kernel_solution(1, 1, 10), jac, opt);
  CHECK(kc.converged);
  for (int j = 0; j <= 10; ++j) CHECK(kc.v.v[j] == doctest::Approx(ks.v.v[j]).epsilon(1e-10).scale(1.0));

  const CoeffField h = small_w(rng, 4, 6, 1.0);
  const double d = 1e-5;
  const KernelField vp = solve_kernel_from(w + d * h, ks.v, opt).v;
  const KernelField vm = solve_kernel_from(w - d * h, ks.v, opt).v;
  const KernelField dv = kernel_derivative(ks.v, w, h);
  const KernelField dj = kernel_derivative(jac, h);
  for (int j = 0; j <= 10; ++j) {
    const double fd = (vp.v[j] - vm.v[j]) / (2 * d);
    CHECK(dv.v[j] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    CHECK(dj.v[j] == doctest::Approx(dv.v[j]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("embed and extract are inverse") {
  KernelField v(5);
  for (int j = 0; j <= 5; ++j) v.v[j] = j - 2.5;
  const CoeffField u = embed(v, 3, 3);
  CHECK(u.L() >= 6);
  CHECK(u(3, 2) == doctest::Approx(0.5 * v.v[2]));
  const KernelField back = extract_kernel(u, 5);
  CHECK(back.v == v.v);
  CHECK(kernel_norm(v, {0, 0, 0}) == doctest::Approx(field_norm(u, {0, 0, 0})));
}
