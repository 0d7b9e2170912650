#include "openkpz/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "openkpz/model.hpp"

namespace openkpz {

namespace {

// int_a^b (x-a)^{-c} g(x) dx with u = (x-a)^{1-c}: the weight becomes 1/(1-c).
template <class G>
double left_singular(G&& g, double a, double b, double c, double tol) {
  const double p = 1.0 - c;
  const double U = std::pow(b - a, p);
  auto h = [&](double u) { return g(a + std::pow(u, 1.0 / p)) / p; };
  return adaptive_simpson(h, 0.0, U, tol);
}

template <class G>
double right_singular(G&& g, double a, double b, double c, double tol) {
  const double p = 1.0 - c;
  const double U = std::pow(b - a, p);
  auto h = [&](double u) { return g(b - std::pow(u, 1.0 / p)) / p; };
  return adaptive_simpson(h, 0.0, U, tol);
}

}  // namespace

double singular_beta_integral(double c1, double c2, double S, double T, double tol) {
  if (!(c1 < 1.0 && c2 < 1.0)) throw InputError("singular integral needs c1, c2 < 1");
  if (T <= S) return 0.0;
  const double mid = 0.5 * (S + T);
  const double left = left_singular([&](double R) { return std::pow(T - R, -c1); }, S, mid, c2, tol);
  const double right =
      right_singular([&](double R) { return std::pow(R - S, -c2); }, mid, T, c1, tol);
  return left + right;
}

double cutoff_integral(double c1, double c2, double S, double T, double eps, double tol) {
  if (!(c1 < 1.0 && c2 > 1.0)) throw InputError("cutoff integral needs c1 < 1 < c2");
  if (S + eps >= T) return 0.0;
  const double a = S + eps;
  const double mid = 0.5 * (a + T);
  // the value is of order eps^{1-c2}; an absolute tol below that scale's roundoff never converges
  tol *= std::max(1.0, std::pow(eps, 1.0 - c2));
  // Left half: substitute R = S + eps e^s, which flattens the (R-S)^{-c2} decay.
  auto g = [&](double s) {
    const double R = S + eps * std::exp(s);
    return std::pow(T - R, -c1) * std::pow(R - S, 1.0 - c2);
  };
  const double left = adaptive_simpson(g, 0.0, std::log((mid - S) / eps), tol);
  const double right =
      right_singular([&](double R) { return std::pow(R - S, -c2); }, mid, T, c1, tol);
  return left + right;
}

IntegralCheck integral_inequality_check(double c1, double c2, double S, double T, double eps) {
  IntegralCheck r;
  r.c1 = c1;
  r.c2 = c2;
  r.S = S;
  r.T = T;
  r.eps = eps;
  const double rho = T - S;
  if (eps <= 0.0) {
    r.integral = singular_beta_integral(c1, c2, S, T);
    r.claimed = std::pow(rho, 1.0 - c1 - c2);
    r.exact = std::pow(rho, 1.0 - c1 - c2) * std::beta(1.0 - c1, 1.0 - c2);
    // Each half: sup of the regular factor times the exact integral of the singular one.
    r.constant = std::max(1.0, std::pow(2.0, c1)) * std::pow(2.0, c2 - 1.0) / (1.0 - c2) +
                 std::max(1.0, std::pow(2.0, c2)) * std::pow(2.0, c1 - 1.0) / (1.0 - c1);
  } else {
    r.integral = cutoff_integral(c1, c2, S, T, eps);
    r.claimed = std::pow(rho - eps, -c1) * std::pow(eps, 1.0 - c2);
    r.constant = std::max(1.0, std::pow(2.0, c1)) / (c2 - 1.0) + std::pow(2.0, c1) / (1.0 - c1);
  }
  r.ratio = r.integral / r.claimed;
  return r;
}

}  // namespace openkpz
