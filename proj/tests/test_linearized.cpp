#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "rkg/linearized.hpp"
#include "rkg/nash_moser.hpp"

using namespace rkg;

namespace {

struct Point {
  double eps;
  KernelField v;
  CoeffField w;
};

/// A kernel solution near branch m with a small range part.
Point point(int m, double eps, int L, int J, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Point p;
  p.eps = eps;
  p.w = project_W(oracle::random_field(rng, L, J, 1e-3));
  KernelSolveOptions opt;
  opt.tol = 1e-14;
  p.v = solve_kernel(p.w, m, 1, 3 * L, opt).v;
  return p;
}

/// Lop h built from field products and a separate kernel derivative.
CoeffField lop_reference(const Point& p, const CoeffField& h, int L, int J) {
  const KernelField dv = kernel_derivative(p.v, p.w, h);
  CoeffField u = p.w + embed(p.v);
  const CoeffField b = 3.0 * field_multiply(u, u);
  CoeffField g = field_multiply(b, h + embed(dv), L, J);
  g = resized(project_W(g), L, J);
  return resized(apply_L_omega(h, std::sqrt(1 + p.eps)), L, J) - p.eps * g;
}

Eigen::MatrixXd build_block(int ell, double eps, const Profile& b0, int Jmax) {
  std::vector<int> idx;
  for (int j = 0; j <= Jmax; ++j) {
    if (j != ell - 1) idx.push_back(j);
  }
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXd M(n, n);
  for (int a = 0; a < n; ++a) {
    for (int c = 0; c < n; ++c) {
      M(a, c) = eps * oracle::sphere_avg([&](double x) {
        return oracle::profile_at(b0, x) * oracle::ej(idx[a], x) * oracle::ej(idx[c], x);
      }, 128);
    }
    M(a, a) += omega(idx[a]) * omega(idx[a]);
  }
  return M;
}

}  // namespace

TEST_CASE("apply matches a direct construction of the operator") {
  const int L = 6, J = 12;
  const Point p = point(0, 1e-2, L, J, 41);
  const LinearizedOperator op = LinearizedOperator::assemble(p.eps, p.w, p.v, L, J, {0.5, 1, 2});
  std::mt19937_64 rng(42);
  const CoeffField h = project_W(oracle::random_field(rng, L, J));
  const CoeffField a = op.apply(h), b = lop_reference(p, h, L, J);
  CHECK(max_abs_diff(a, b) < 1e-11);
  CHECK(max_abs_diff(op.solve(a), h) < 1e-10);
}

TEST_CASE("dense(), apply() and class structure agree") {
  const int L = 5, J = 10;
  const Point p = point(1, 1e-2, L, J, 43);
  const LinearizedOperator op = LinearizedOperator::assemble(p.eps, p.w, p.v, L, J, {0.5, 1, 2});
  const auto modes = op.modes();
  CHECK(modes.size() == op.dimension());
  const Eigen::MatrixXd D = op.dense();
  std::mt19937_64 rng(44);
  CoeffField h(L, J);
  Eigen::VectorXd x(static_cast<Eigen::Index>(modes.size()));
  for (size_t a = 0; a < modes.size(); ++a) {
    x[a] = std::uniform_real_distribution<double>(-1, 1)(rng);
    h(modes[a].first, modes[a].second) = x[a];
  }
  const CoeffField y = op.apply(h);
  const Eigen::VectorXd yd = D * x;
  for (size_t a = 0; a < modes.size(); ++a) {
    CHECK(y(modes[a].first, modes[a].second) == doctest::Approx(yd[a]).epsilon(1e-10).scale(1.0));
  }
  for (int c = 0; c < op.classes(); ++c) {
    for (const auto& [l, j] : op.class_modes(c)) CHECK(op.class_of(l, j) == c);
  }
  CHECK(op.class_of(2, 1) == -1);
}

TEST_CASE("dgamma is the derivative of the cubic") {
  const int L = 4, J = 8;
  const Point p = point(0, 1e-2, L, J, 45);
  const LinearizedOperator op = LinearizedOperator::assemble(p.eps, p.w, p.v, L, J, {0.5, 1, 2});
  std::mt19937_64 rng(46);
  const CoeffField h = project_W(oracle::random_field(rng, L, J, 1.0));
  KernelSolveOptions opt;
  opt.tol = 1e-15;
  const double d = 1e-5;
  const GammaEval gp = evaluate_gamma(p.w + d * h, p.v, nullptr, L, J, opt);
  const GammaEval gm = evaluate_gamma(p.w - d * h, p.v, nullptr, L, J, opt);
  const CoeffField fd = (1.0 / (2 * d)) * (gp.gamma - gm.gamma);
  CHECK(max_abs_diff(op.dgamma(h), fd) < 1e-6);
}

TEST_CASE("inverse norm methods bracket the weighted SVD") {
  const int L = 5, J = 10;
  const Point p = point(0, 1e-2, L, J, 47);
  const NormParams sc{0.6, 1, 2};
  const LinearizedOperator op = LinearizedOperator::assemble(p.eps, p.w, p.v, L, J, sc);
  const auto modes = op.modes();
  const Eigen::MatrixXd D = op.dense();
  Eigen::VectorXd w(static_cast<Eigen::Index>(modes.size()));
  for (size_t a = 0; a < modes.size(); ++a) w[a] = norm_weight(modes[a].first, modes[a].second, sc);
  const Eigen::MatrixXd S = w.asDiagonal() * D.inverse() * w.cwiseInverse().asDiagonal();
  const double exact = Eigen::JacobiSVD<Eigen::MatrixXd>(S).singularValues()(0);

  const double e = op.inverse_norm(InverseNormMethod::Exact).value;
  const double lo = op.inverse_norm(InverseNormMethod::Estimate).value;
  const double hi = op.inverse_norm(InverseNormMethod::Bound).value;
  CHECK(e == doctest::Approx(exact).epsilon(1e-9));
  CHECK(lo <= e * (1 + 1e-9));
  CHECK(lo >= 0.5 * e);
  CHECK(hi >= e * (1 - 1e-9));
}

TEST_CASE("spectral blocks") {
  SUBCASE("eps = 0 gives omega_j^2 exactly") {
    const SpectralBlock blk = diagonalize_block(3, 0.0, {1.0, 0.0, 0.5}, 20);
    for (int j = 0; j <= 20; ++j) {
      if (blk.has(j)) CHECK(blk.lambda[j] == omega(j) * omega(j));
      else CHECK(std::isnan(blk.lambda[j]));
    }
  }
  SUBCASE("eigenvalues match a quadrature-built matrix") {
    std::mt19937_64 rng(48);
    const Profile b0 = oracle::random_profile(rng, 5);
    for (int ell : {0, 3, 7}) {
      const SpectralBlock blk = diagonalize_block(ell, 0.05, b0, 14);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(build_block(ell, 0.05, b0, 14));
      std::vector<double> got;
      for (int j = 0; j <= 14; ++j) {
        if (blk.has(j)) got.push_back(blk.lambda[j]);
      }
      std::sort(got.begin(), got.end());
      for (size_t k = 0; k < got.size(); ++k) {
        CHECK(got[k] == doctest::Approx(es.eigenvalues()[k]).epsilon(1e-11));
      }
    }
  }
  SUBCASE("out-of-range eps is rejected") {
    CHECK_THROWS_AS(diagonalize_block(0, 1.0, {2.0}, 5), std::domain_error);
  }
}

TEST_CASE("eigenvalue drift stays inside the Sturm-Liouville bound") {
  std::mt19937_64 rng(49);
  const std::vector<Profile> b0s = {{1.0}, {0.0, 0.0, 1.0}, oracle::random_profile(rng, 9)};
  for (const Profile& b0 : b0s) {
    for (double eps : {1e-3, 1e-2}) {
      for (int ell : {0, 3, 10}) {
        const DriftReport r = drift_check(diagonalize_block(ell, eps, b0, 64, false), b0);
        CHECK(r.ok);
      }
    }
  }
}

TEST_CASE("eps-derivatives against Hellmann-Feynman") {
  std::mt19937_64 rng(50);
  const Profile b0 = oracle::random_profile(rng, 4);
  const double eps = 0.02;
  const SpectralBlock blk = diagonalize_block(2, eps, b0, 12, true);
  const EpsDerivatives d = eigen_derivatives(2, eps, b0, 12, 1e-4);
  for (int j = 0; j <= 12; ++j) {
    if (!blk.has(j)) continue;
    double hf = 0.0;
    for (int a = 0; a <= 12; ++a) {
      for (int c = 0; c <= 12; ++c) {
        if (!blk.has(a) || !blk.has(c)) continue;
        hf += blk.phi(a, j) * blk.phi(c, j) * matrix_element(b0, a, c);
      }
    }
    CHECK(d.first[j] == doctest::Approx(hf).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("small divisors and the product bound, by brute force") {
  const Profile b0 = {2.0, 0.0, 0.3};
  const double eps = 1e-3;
  const DivisorReport rep = small_divisors(eps, b0, 12, 30, 0.05, 1.5);
  for (const DivisorRow& row : rep.rows) {
    const SpectralBlock blk = diagonalize_block(row.ell, eps, b0, 30, false);
    double best = HUGE_VAL;
    for (int j = 0; j <= 30; ++j) {
      if (blk.has(j)) best = std::min(best, std::abs((1 + eps) * row.ell * row.ell - blk.lambda[j]));
    }
    CHECK(row.alpha == best);
    CHECK(row.floor == doctest::Approx(0.05 / (20 * std::pow(std::max(1, row.ell), 0.5))));
  }
  const ProductBound pb = product_bound_constant(rep);
  double worst = 0.0;
  for (int l = -12; l <= 12; ++l) {
    for (int k = -12; k <= 12; ++k) {
      if (k == l) continue;
      worst = std::max(worst, 0.05 * 0.05 * std::pow(eps, 0.5) /
                                  (rep.alpha(l) * rep.alpha(k) * std::pow(std::abs(k - l), 3.0)));
    }
  }
  CHECK(pb.constant == doctest::Approx(worst));
  CHECK(std::isinf(product_bound_constant(small_divisors(0.0, b0, 4, 8, 0.05, 1.5)).constant));

  std::ostringstream os;
  write_divisors_csv(os, rep);
  CHECK(os.str().rfind("l,", 0) == 0);
}

TEST_CASE("Neumann inverse agrees with the dense inverse") {
  const int L = 8, J = 16;
  const Point p = point(0, 1e-3, L, J, 51);
  const LinearizedOperator op = LinearizedOperator::assemble(p.eps, p.w, p.v, L, J, {0.5, 1, 2});
  std::vector<int> all;
  for (int c = 0; c < op.classes(); ++c) all.push_back(c);
  const SplitReport r = preconditioned_split_check(op, 0.05, 1.5, all);
  CHECK(r.classes == op.classes());
  CHECK(r.U_norm <= 4.0 + 1e-12);
  if (r.neumann_converges) CHECK(r.neumann_vs_dense < 1e-8);
  CHECK(r.neumann_converges);
}
