#include <doctest.h>

#include <cmath>
#include <random>

#include "openkpz/model.hpp"

using namespace openkpz;

namespace {

ModelParams make(int N, std::vector<double> a, std::vector<double> g, double Am = 0.0,
                 double Ap = 0.0) {
  ModelParams p;
  p.N = N;
  p.m = int(a.size());
  p.alpha = std::move(a);
  p.gamma = std::move(g);
  p.A_minus = Am;
  p.A_plus = Ap;
  return p;
}

}  // namespace

TEST_CASE("lambda_N is the alpha-gamma inner product") {
  const auto d = derive_coefficients(make(64, {1.0, 0.5}, {-0.2, -0.4}));
  CHECK(d.lambda_N == doctest::Approx(-0.2 - 0.2).epsilon(1e-15));
  // positive gamma violates the sign invariant even when lambda_N would vanish
  CHECK_THROWS_AS(derive_coefficients(make(64, {1.0, 0.5}, {0.2, -0.4})), InputError);
}

TEST_CASE("symmetric system has lambda_N = nu_N = 0") {
  const auto d = derive_coefficients(make(32, {1.0}, {0.0}));
  CHECK(d.lambda_N == 0.0);
  CHECK(d.nu_N == 0.0);
  CHECK(d.nu_matched == 0.0);
  CHECK(d.ta(1) == 1.0);
}

TEST_CASE("tilde_alpha stays within C k / N of alpha") {
  const auto p = make(100, {1.0, 0.5, 0.25}, {-0.5, -0.5, -1.0});
  const auto d = derive_coefficients(p);
  for (int k = 1; k <= 3; ++k)
    CHECK(std::abs(d.ta(k) - p.a(k)) <= d.tilde_alpha_const * k / 100.0 * (1 + 1e-12));
}

TEST_CASE("gamma_star with m=1 is lambda_N") {
  const auto d = derive_coefficients(make(64, {0.7}, {-0.3}));
  CHECK(d.gamma_star[0] == doctest::Approx(d.lambda_N).epsilon(1e-15));
}

TEST_CASE("m=1 discrepancy is alpha_1 |gamma_1 - lambda_N|") {
  for (double a : {1.0, 0.6, 1.7}) {
    const auto p = make(64, {a}, {-0.4});
    const auto d = derive_coefficients(p);
    const auto b = solve_boundary_coefficients(p, d);
    const auto r = validate_assumptions(p, d, b);
    CHECK(r.discrepancy == doctest::Approx(a * std::abs(-0.4 - a * -0.4)).epsilon(1e-14));
    if (a == 1.0) CHECK(r.discrepancy == 0.0);
  }
}

TEST_CASE("symmetric Neumann boundary rates split tilde_alpha evenly") {
  const auto p = make(100, {1.0}, {0.0});
  const auto d = derive_coefficients(p);
  const auto b = solve_boundary_coefficients(p, d);
  for (Side s : {Side::minus, Side::plus}) {
    CHECK(b.plus(s, 1) == doctest::Approx(0.5 * d.ta(1)).epsilon(1e-15));
    CHECK(b.minus(s, 1) == doctest::Approx(0.5 * d.ta(1)).epsilon(1e-15));
  }
}

TEST_CASE("boundary solve: residual and dense oracle over random instances") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(0.2, 1.5), ug(-1.0, 0.0), uA(-1.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 40 && solved < 20; ++trial) {
    const int m = 1 + trial % 3;
    std::vector<double> a(m), g(m);
    for (int k = 0; k < m; ++k) {
      a[k] = ua(rng);
      g[k] = ug(rng);
    }
    const auto p = make(256, a, g, uA(rng), uA(rng));
    const auto d = derive_coefficients(p);
    BoundaryCoefficients b;
    try {
      b = solve_boundary_coefficients(p, d);
    } catch (const ModelError&) {
      continue;
    }
    ++solved;
    CHECK(boundary_residual(p, d, b) <= 1e-12);
    for (Side s : {Side::minus, Side::plus}) {
      const auto sys = boundary_system(p, d, s);
      std::vector<int> perm(2 * m);
      for (int i = 0; i < 2 * m; ++i) perm[i] = 2 * m - 1 - i;
      const auto dense = solve_boundary_dense(sys, perm);
      for (int j = 1; j <= m; ++j) {
        CHECK(std::abs(dense[j - 1][0] - b.plus(s, j)) <= 1e-14);
        CHECK(std::abs(dense[j - 1][1] - b.minus(s, j)) <= 1e-14);
      }
    }
  }
  CHECK(solved == 20);
  const auto p = make(64, {1.0, 0.5, 0.3}, {-0.5, -0.5, -0.5});
  const auto sys = boundary_system(p, derive_coefficients(p), Side::minus);
  CHECK_THROWS_AS(solve_boundary_dense(sys, {1, 4, 1, 4, 1, 4}), InputError);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(validate_params(make(3, {1.0}, {0.0})), InputError);
  CHECK_THROWS_AS(validate_params(make(64, {1.0, 0.5}, {0.0})), InputError);
  CHECK_THROWS_AS(validate_params(make(64, {0.0}, {0.0})), InputError);
  CHECK_THROWS_AS(derive_coefficients(make(8, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0})), InputError);
  CHECK_NOTHROW(derive_coefficients(make(8, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}), true));
  nlohmann::json j = {{"N", 16}, {"m", 1}, {"alpha", {1.0}}};
  CHECK_THROWS_AS(j.get<ModelParams>(), InputError);
  j["gamma"] = {-0.5};
  const auto p = j.get<ModelParams>();
  nlohmann::json back = p;
  CHECK(back.get<ModelParams>().gamma == p.gamma);
}
