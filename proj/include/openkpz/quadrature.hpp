#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace openkpz {

namespace quad_detail {
inline double sup_norm(double v) { return std::abs(v); }
template <class Derived>
double sup_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}
}  // namespace quad_detail

struct QuadStats {
  long evaluations = 0;
  int max_depth_hit = 0;
};

/// Adaptive Simpson with absolute tolerance on the sup norm of the value.
/// Works for scalar and Eigen-valued integrands.
template <class F>
auto adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 40,
                      QuadStats* stats = nullptr) {
  using V = std::decay_t<decltype(f(a))>;
  QuadStats local;
  QuadStats& st = stats ? *stats : local;
  auto eval = [&](double x) {
    ++st.evaluations;
    return V(f(x));
  };
  struct Rec {
    static V run(decltype(eval)& ev, double a, double b, const V& fa, const V& fm, const V& fb,
                 const V& whole, double tol, int depth, QuadStats& st) {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const V flm = ev(lm), frm = ev(rm);
      const double h = (b - a) / 12.0;
      const V left = V(h * (fa + 4.0 * flm + fm));
      const V right = V(h * (fm + 4.0 * frm + fb));
      const V diff = V(left + right - whole);
      if (depth <= 0) {
        ++st.max_depth_hit;
        return V(left + right + diff / 15.0);
      }
      if (quad_detail::sup_norm(diff) <= 15.0 * tol) return V(left + right + diff / 15.0);
      return V(run(ev, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, st) +
               run(ev, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, st));
    }
  };
  if (a == b) return V(0.0 * eval(a));
  const V fa = eval(a), fb = eval(b), fm = eval(0.5 * (a + b));
  const V whole = V((b - a) / 6.0 * (fa + 4.0 * fm + fb));
  return Rec::run(eval, a, b, fa, fm, fb, whole, tol, max_depth, st);
}

/// Composite Simpson on n (even) panels.
template <class F>
auto composite_simpson(F&& f, double a, double b, int n) {
  using V = std::decay_t<decltype(f(a))>;
  if (n < 2 || n % 2) throw std::invalid_argument("composite_simpson needs even n >= 2");
  const double h = (b - a) / n;
  V acc = V(f(a) + f(b));
  for (int i = 1; i < n; ++i) acc = V(acc + (i % 2 ? 4.0 : 2.0) * f(a + i * h));
  return V(acc * (h / 3.0));
}

template <class F>
auto composite_trapezoid(F&& f, double a, double b, int n) {
  using V = std::decay_t<decltype(f(a))>;
  if (n < 1) throw std::invalid_argument("composite_trapezoid needs n >= 1");
  const double h = (b - a) / n;
  V acc = V(0.5 * (f(a) + f(b)));
  for (int i = 1; i < n; ++i) acc = V(acc + f(a + i * h));
  return V(acc * h);
}

/// int_S^T (T-R)^{-c1} (R-S)^{-c2} dR, split at the midpoint with the power
/// substitution on each half so both endpoint singularities disappear.
double singular_beta_integral(double c1, double c2, double S, double T, double tol = 1e-12);

/// Same integrand on [S+eps, T] with c2 > 1. tol is relative to eps^{1-c2} when that exceeds 1.
double cutoff_integral(double c1, double c2, double S, double T, double eps, double tol = 1e-12);

struct IntegralCheck {
  double c1 = 0.0, c2 = 0.0, S = 0.0, T = 0.0, eps = 0.0;
  double integral = 0.0;
  double claimed = 0.0;  // rho^{1-c1-c2}, or rho_{S+eps,T}^{-c1} eps^{1-c2} with a cutoff
  double ratio = 0.0;
  double exact = std::nan("");  // Beta-function value when available
  double constant = 0.0;        // explicit constant from the halving argument
  bool within_constant() const { return ratio <= constant * (1.0 + 1e-9); }
};

/// eps <= 0 selects the integrable case (c1, c2 < 1); otherwise the cutoff case.
IntegralCheck integral_inequality_check(double c1, double c2, double S, double T, double eps = 0.0);

}  // namespace openkpz
