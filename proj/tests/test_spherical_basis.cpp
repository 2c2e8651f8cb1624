#include <cmath>
#include <stdexcept>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rkg/spherical_basis.hpp"

using namespace rkg;

TEST_CASE("eigen_product matches quadrature of the triple product") {
  for (int j = 0; j <= 16; ++j) {
    for (int k = 0; k <= 16; ++k) {
      const Profile p = eigen_product(j, k);
      REQUIRE(p.size() == static_cast<size_t>(j + k + 1));
      for (int n = 0; n <= j + k + 2; ++n) {
        const double q = oracle::sphere_avg(
            [&](double x) { return oracle::ej(j, x) * oracle::ej(k, x) * oracle::ej(n, x); });
        const double c = n < static_cast<int>(p.size()) ? p[n] : 0.0;
        CHECK(c == doctest::Approx(q).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("eigen_product follows the closed-form rule") {
  const Profile p = eigen_product(3, 5);
  // e_3 e_5 = e_2 + e_4 + e_6 + e_8
  const Profile want = {0, 0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(p == want);
  CHECK(eigen_product(0, 7) == Profile{0, 0, 0, 0, 0, 0, 0, 1});
}

TEST_CASE("profile_multiply agrees with pointwise products") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Profile a = oracle::random_profile(rng, 1 + trial % 9);
    const Profile b = oracle::random_profile(rng, 1 + (3 * trial) % 11);
    const Profile ab = profile_multiply(a, b);
    CHECK(ab.size() == a.size() + b.size() - 1);
    for (double x : {0.0, 0.31, 1.2, 2.0, 3.0, oracle::pi}) {
      const double want = oracle::profile_at(a, x) * oracle::profile_at(b, x);
      CHECK(oracle::profile_at(ab, x) == doctest::Approx(want).epsilon(1e-11));
    }
  }
}

TEST_CASE("accumulate_product honours the cap and the scale") {
  std::mt19937_64 rng(11);
  const Profile a = oracle::random_profile(rng, 7), b = oracle::random_profile(rng, 5);
  const Profile full = profile_multiply(a, b);
  for (int cap : {0, 1, 4, 9, 10, 20}) {
    std::vector<double> out(static_cast<size_t>(std::min<int>(cap, full.size() - 1) + 1), 1.0);
    accumulate_product(a.data(), 7, b.data(), 5, -2.0, out.data(), cap);
    for (size_t n = 0; n < out.size(); ++n) CHECK(out[n] == doctest::Approx(1.0 - 2.0 * full[n]));
  }
}

TEST_CASE("<e_m^3, e_m> = omega_m") {
  for (int m = 0; m <= 10; ++m) {
    const double q = oracle::sphere_avg([&](double x) { return std::pow(oracle::ej(m, x), 4); });
    CHECK(q == doctest::Approx(omega(m)).epsilon(1e-12));
    CHECK(matrix_element(eigen_product(m, m), m, m) == doctest::Approx(omega(m)).epsilon(1e-14));
  }
}

TEST_CASE("matrix_element matches quadrature") {
  std::mt19937_64 rng(3);
  const Profile b = oracle::random_profile(rng, 6);
  for (int j = 0; j <= 12; ++j) {
    for (int k = 0; k <= 12; ++k) {
      const double q = oracle::sphere_avg(
          [&](double x) { return oracle::profile_at(b, x) * oracle::ej(j, x) * oracle::ej(k, x); });
      CHECK(matrix_element(b, j, k) == doctest::Approx(q).epsilon(1e-11).scale(1.0));
    }
  }
}

TEST_CASE("circle Fourier series reproduces the profile") {
  std::mt19937_64 rng(5);
  const Profile p = oracle::random_profile(rng, 9);
  const CircleSeries f = to_circle_fourier(p);
  for (double x : {0.0, 0.4, 1.7, 2.9}) {
    double re = 0.0;
    for (int n = -f.J; n <= f.J; ++n) re += f.at(n) * std::cos(n * x);
    CHECK(re == doctest::Approx(oracle::profile_at(p, x)).epsilon(1e-12));
  }
  // Parseval at r = 0: int_0^{2 pi} |p|^2 dx
  const int N = 1024;
  double acc = 0.0;
  for (int i = 0; i < N; ++i) {
    const double x = 2.0 * oracle::pi * (i + 0.5) / N;
    acc += std::pow(oracle::profile_at(p, x), 2);
  }
  CHECK(circle_sobolev_norm_sq(f, 0.0) == doctest::Approx(acc * 2.0 * oracle::pi / N).epsilon(1e-10));
  // the H^r(S^1) norm of e_j is bounded by the H^{r+1/2} norm on the sphere
  for (int j = 0; j < 12; ++j) {
    Profile e(static_cast<size_t>(j + 1), 0.0);
    e[j] = 1.0;
    const double lhs = circle_sobolev_norm_sq(to_circle_fourier(e), 1.5);
    CHECK(lhs <= 2.0 * oracle::pi * std::pow(space_norm(e, 2.0), 2) * (1 + 1e-14));
  }
}

TEST_CASE("mean_integral is the line average") {
  std::mt19937_64 rng(9);
  const Profile p = oracle::random_profile(rng, 10);
  const double q = oracle::line_avg([&](double x) { return oracle::profile_at(p, x); }, 20000);
  CHECK(mean_integral(p) == doctest::Approx(q).epsilon(1e-8));
  CHECK(mean_integral({0.0, 5.0}) == 0.0);
  CHECK(mean_integral({0.0, 0.0, 1.0}) == 1.0);
}

TEST_CASE("space_norm against quadrature and finite differences") {
  std::mt19937_64 rng(13);
  const Profile p = oracle::random_profile(rng, 8);
  const double l2 = oracle::sphere_avg([&](double x) { return std::pow(oracle::profile_at(p, x), 2); });
  CHECK(space_norm(p, 0.0) == doctest::Approx(std::sqrt(l2)).epsilon(1e-12));
  // H^1: (2/pi) int ((p sin x)')^2 dx
  const double h = 1e-5;
  auto g = [&](double x) { return oracle::profile_at(p, x) * std::sin(x); };
  const double h1 = 2.0 * oracle::line_avg([&](double x) {
    const double d = (g(x + h) - g(x - h)) / (2 * h);
    return d * d;
  }, 8000);
  CHECK(space_norm(p, 1.0) == doctest::Approx(std::sqrt(h1)).epsilon(1e-7));
}

TEST_CASE("c_delta is an upper bound close to the series") {
  // delta = 1/2: sum omega_j^{-2} = pi^2 / 6
  const double exact = std::sqrt(2.0 * oracle::pi * oracle::pi * oracle::pi / 6.0);
  const double c = c_delta(0.5);
  CHECK(c >= exact);
  CHECK(c <= exact * (1 + 1e-5));
  CHECK(c_delta(0.25, 1000) >= c_delta(0.25, 100000));
  CHECK_THROWS_AS(c_delta(0.0), std::invalid_argument);
}

TEST_CASE("evaluate and grid_sup") {
  std::mt19937_64 rng(17);
  const Profile p = oracle::random_profile(rng, 12);
  for (double x : {0.0, 0.001, 1.0, 3.14, oracle::pi}) {
    CHECK(evaluate(p, x) == doctest::Approx(oracle::profile_at(p, x)).epsilon(1e-11));
  }
  for (int j = 0; j < 8; ++j) {
    Profile e(static_cast<size_t>(j + 1), 0.0);
    e[j] = 1.0;
    CHECK(grid_sup(e) == doctest::Approx(omega(j)));
  }
}

TEST_CASE("trim keeps one entry") {
  CHECK(trim({1, 2, 0, 0}) == Profile{1, 2});
  CHECK(trim({0, 0}) == Profile{0});
}
