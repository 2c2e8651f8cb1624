#include <cmath>
#include <stdexcept>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rkg/field_algebra.hpp"

using namespace rkg;

TEST_CASE("field_multiply agrees with pointwise products on a grid") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    const CoeffField u = oracle::random_field(rng, 1 + trial % 3, 2 + trial % 4);
    const CoeffField v = oracle::random_field(rng, 2, 1 + trial % 5);
    const CoeffField uv = field_multiply(u, v);
    CHECK(uv.L() == u.L() + v.L());
    CHECK(uv.J() == u.J() + v.J());
    for (double t : {0.0, 0.7, 2.5}) {
      for (double x : {0.0, 0.9, 2.2, oracle::pi}) {
        const double want = oracle::field_at(u, t, x) * oracle::field_at(v, t, x);
        CHECK(oracle::field_at(uv, t, x) == doctest::Approx(want).epsilon(1e-11));
        CHECK(evaluate(uv, t, x) == doctest::Approx(want).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("windowed product and diagonal equal the full product") {
  std::mt19937_64 rng(22);
  const CoeffField u = oracle::random_field(rng, 4, 6), v = oracle::random_field(rng, 3, 5);
  const CoeffField full = field_multiply(u, v);
  const CoeffField win = field_multiply(u, v, 5, 4);
  CHECK(max_abs_diff(win, resized(full, 5, 4)) < 1e-14);
  const std::vector<double> d = product_diagonal(u, v, 6);
  for (int j = 0; j <= 6; ++j) CHECK(d[j] == doctest::Approx(full.get(j + 1, j)).epsilon(1e-14));
}

TEST_CASE("field_norm against its definition and against quadrature") {
  std::mt19937_64 rng(23);
  const CoeffField u = oracle::random_field(rng, 3, 4);
  for (NormParams p : {NormParams{0, 0, 0}, NormParams{0.5, 1, 2}, NormParams{1, 1.5, 0.5}}) {
    CHECK(field_norm(u, p) == doctest::Approx(oracle::norm(u, p.sigma, p.s, p.r)).epsilon(1e-13));
  }
  // sigma = s = r = 0 is the L^2 mean over t and the sphere
  const double q = oracle::time_avg([&](double t) {
    return oracle::sphere_avg([&](double x) { return std::pow(oracle::field_at(u, t, x), 2); }, 64);
  }, 32);
  CHECK(field_norm(u, {0, 0, 0}) == doctest::Approx(std::sqrt(q)).epsilon(1e-12));
  CHECK(field_inner(u, u, {0.3, 1, 2}) == doctest::Approx(std::pow(field_norm(u, {0.3, 1, 2}), 2)));
}

TEST_CASE("L_omega matches finite differences of the wave operator") {
  std::mt19937_64 rng(24);
  const CoeffField u = oracle::random_field(rng, 3, 4);
  const double om = std::sqrt(1.003);
  const CoeffField Lu = apply_L_omega(u, om);
  const double h = 1e-4;
  for (double t : {0.3, 1.9}) {
    for (double x : {0.6, 1.5, 2.4}) {
      auto f = [&](double tt, double xx) { return oracle::field_at(u, tt, xx); };
      const double utt = (f(t + h, x) - 2 * f(t, x) + f(t - h, x)) / (h * h);
      const double uxx = (f(t, x + h) - 2 * f(t, x) + f(t, x - h)) / (h * h);
      const double ux = (f(t, x + h) - f(t, x - h)) / (2 * h);
      // A = -d_xx - 2 cot(x) d_x + 1 on radial functions
      const double Au = -uxx - 2.0 / std::tan(x) * ux + f(t, x);
      CHECK(oracle::field_at(Lu, t, x) == doctest::Approx(-om * om * utt - Au).epsilon(1e-5).scale(10));
    }
  }
}

TEST_CASE("projections") {
  std::mt19937_64 rng(25);
  const CoeffField u = oracle::random_field(rng, 5, 6);
  const CoeffField V = project_V(u), W = project_W(u);
  CHECK(max_abs_diff(V + W, u) == 0.0);
  CHECK(in_W(W));
  CHECK_FALSE(in_W(u));
  for (int j = 0; j <= 4; ++j) CHECK(V(j + 1, j) == u(j + 1, j));
  CHECK(field_norm(apply_L_omega(V, 1.0), {0, 1, 2}) == 0.0);
  const CoeffField P = project_Pn(u, 2);
  for (int l = 0; l <= 5; ++l) {
    for (int j = 0; j <= 6; ++j) CHECK(P(l, j) == (l <= 2 ? u(l, j) : 0.0));
  }
  const Profile p = {1, 2, 3};
  CHECK(pi_ell(p, 0) == p);
  CHECK(pi_ell(p, 2) == Profile{1, 0, 3});
  CHECK(pi_ell(p, 7) == p);
}

TEST_CASE("truncation reports the discarded norm") {
  std::mt19937_64 rng(26);
  const CoeffField u = oracle::random_field(rng, 6, 6);
  const NormParams p{0.4, 1, 2};
  const Truncation t = truncate(u, 3, 2, p);
  const double a = field_norm(t.field, p), b = t.discarded_norm;
  CHECK(a * a + b * b == doctest::Approx(std::pow(field_norm(u, p), 2)).epsilon(1e-13));
  CoeffField z(8, 8);
  z(2, 3) = 1.0;
  const CoeffField tz = trimmed(z);
  CHECK(tz.L() == 2);
  CHECK(tz.J() == 3);
}

TEST_CASE("smoothing estimate on random tails") {
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int Ln = 1 + trial % 10;
    CoeffField u = oracle::random_field(rng, Ln + 1 + trial % 7, 1 + trial % 5);
    for (int l = 0; l <= Ln; ++l) {
      for (int j = 0; j <= u.J(); ++j) u(l, j) = 0.0;
    }
    const double s = 1.0 + d(rng), sig = 0.2 + d(rng), sp = sig * d(rng);
    CHECK(smoothing_bound_check(u, sig, sp, Ln, s, 2.0));
    CHECK(oracle::norm(u, sp, s, 2) <= std::exp(-Ln * (sig - sp)) * oracle::norm(u, sig, s, 2) * (1 + 1e-13));
  }
  CoeffField bad(3, 1);
  bad(0, 0) = 1.0;
  CHECK_THROWS_AS(smoothing_bound_check(bad, 1.0, 0.5, 2), std::invalid_argument);
}

TEST_CASE("trade constant is the supremum") {
  for (double alpha : {0.05, 0.3, 1.0}) {
    for (double beta : {0.25, 1.0, 3.0}) {
      double sup = 0.0;
      for (int i = 0; i <= 200000; ++i) {
        const double x = i * 1e-3;
        sup = std::max(sup, std::exp(-alpha * x) * std::pow(std::max(1.0, x), beta));
      }
      CHECK(trade_constant(alpha, beta) >= sup * (1 - 1e-12));
      CHECK(trade_constant(alpha, beta) == doctest::Approx(sup).epsilon(1e-5));
    }
  }
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 50; ++trial) {
    const CoeffField u = oracle::random_field(rng, 12, 3);
    CHECK(sobolev_trade_check(u, 1.0, 1.0, 0.1 + 0.01 * trial, 0.5 + 0.05 * trial));
  }
}

TEST_CASE("apply_dtt, apply_A and resize") {
  CoeffField u(2, 2);
  u(2, 1) = 1.0;
  CHECK(apply_dtt(u)(2, 1) == -4.0);
  CHECK(apply_A(u)(2, 1) == 4.0);
  const CoeffField r = resized(u, 1, 5);
  CHECK(r.L() == 1);
  CHECK(r.J() == 5);
  CHECK(r.is_zero());
  CHECK(u.get(9, 9) == 0.0);
}
