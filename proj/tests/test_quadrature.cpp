#include <doctest.h>

#include <cmath>

#include "openkpz/model.hpp"
#include "openkpz/quadrature.hpp"

using namespace openkpz;

TEST_CASE("Simpson rules on polynomials") {
  auto cubic = [](double x) { return 3 * x * x * x - x + 2; };
  CHECK(composite_simpson(cubic, 0.0, 2.0, 2) == doctest::Approx(12.0 - 2.0 + 4.0).epsilon(1e-14));
  CHECK(adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-12) ==
        doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-11));
  CHECK(composite_trapezoid([](double x) { return x; }, 0.0, 4.0, 3) == doctest::Approx(8.0));
  CHECK_THROWS(composite_simpson(cubic, 0.0, 1.0, 3));
}

TEST_CASE("singular Beta integral") {
  const auto half = integral_inequality_check(0.5, 0.5, 0.0, 1.0);
  CHECK(half.integral == doctest::Approx(M_PI).epsilon(1e-10));
  CHECK(half.ratio == doctest::Approx(M_PI).epsilon(1e-10));
  const auto flat = integral_inequality_check(0.0, 0.0, 0.2, 0.9);
  CHECK(flat.integral == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(flat.ratio == doctest::Approx(1.0).epsilon(1e-12));
  for (double c1 : {0.1, 0.4, 0.8})
    for (double c2 : {0.2, 0.6, 0.9}) {
      const auto r = integral_inequality_check(c1, c2, 0.3, 1.1);
      CHECK(r.integral == doctest::Approx(r.exact).epsilon(1e-9));
      CHECK(r.within_constant());
    }
}

TEST_CASE("cutoff integral stays bounded as eps shrinks") {
  double worst = 0.0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const auto r = integral_inequality_check(0.25, 1.5, 0.0, 1.0, eps);
    CHECK(r.within_constant());
    worst = std::max(worst, r.ratio);
  }
  CHECK(worst <= 2.0 / 0.5 + 2.0);
  CHECK_THROWS_AS(singular_beta_integral(1.0, 0.5, 0.0, 1.0), InputError);
}
