#include "openkpz/cole_hopf.hpp"

#include <Eigen/LU>

#include <cmath>
#include <ostream>

#include "openkpz/operators.hpp"

namespace openkpz {

namespace {

std::vector<double> recompute_heights(const Configuration& cfg, double h0) {
  const double s = 1.0 / std::sqrt(double(cfg.N));
  std::vector<double> h(cfg.N + 1);
  double acc = h0;
  h[0] = h0;
  for (int x = 1; x <= cfg.N; ++x) {
    acc += s * cfg[x];
    h[x] = acc;
  }
  return h;
}

void refresh_Z(HeightState& st, int lo, int hi) {
  const double tf = st.nu * st.t;
  for (int y = lo; y <= hi; ++y) st.Z[y] = std::exp(-st.lambda * st.heights[y] + tf);
}

}  // namespace

HeightState init_height(const Configuration& cfg, double lambda, double nu) {
  HeightState st;
  st.N = cfg.N;
  st.lambda = lambda;
  st.nu = nu;
  st.heights = recompute_heights(cfg, 0.0);
  st.Z.resize(cfg.N + 1);
  refresh_Z(st, 0, cfg.N);
  return st;
}

void update_on_event(HeightState& st, const Configuration& cfg, const EventDescriptor& e) {
  const double s = 1.0 / std::sqrt(double(st.N));
  if (e.kind == EventKind::exchange) {
    // Only the prefix sums that contain exactly one endpoint move.
    // Spins differ before a swap, so the new spin at a changed by 2 eta_a.
    const double d = 2.0 * s * cfg[e.x];
    for (int y = e.x; y < e.x + e.k; ++y) st.heights[y] += d;
    refresh_Z(st, e.x, e.x + e.k - 1);
    return;
  }
  const double d = 2.0 * s * e.sign;
  if (e.side == Side::minus) {
    // flux moves every height by -d, the spin at j moves heights[j..] by +d
    st.h0 -= d;
    for (int y = 0; y < e.site; ++y) st.heights[y] -= d;
    refresh_Z(st, 0, e.site - 1);
  } else {
    for (int y = e.site; y <= st.N; ++y) st.heights[y] += d;
    refresh_Z(st, e.site, st.N);
  }
}

void advance_time(HeightState& st, double t) {
  const double f = std::exp(st.nu * (t - st.t));
  st.t = t;
  for (double& z : st.Z) z *= f;
}

double check_and_repair(HeightState& st, const Configuration& cfg, double tol) {
  const auto h = recompute_heights(cfg, st.h0);
  double worst = 0.0;
  for (int x = 0; x <= st.N; ++x) worst = std::max(worst, std::abs(h[x] - st.heights[x]));
  if (worst > tol) {
    st.heights = h;
    refresh_Z(st, 0, st.N);
  }
  return worst;
}

double cole_hopf_value(const ParticleState& s, int x, double lambda) {
  const double r = 1.0 / std::sqrt(double(s.cfg.N));
  double h = s.flux;
  for (int y = 1; y <= x; ++y) h += r * s.cfg[y];
  return std::exp(-lambda * h);
}

double sde_drift_rhs(const ParticleState& s, int x, const Model& md, double nu) {
  const ModelParams& p = md.params;
  const Configuration& c = s.cfg;
  const int N = c.N;
  const double N2 = double(N) * N;
  const double rN = std::sqrt(double(N));
  const double b = md.derived.lambda_N / rN;
  const double up = std::expm1(2.0 * b);     // h_x drops by 2/sqrt N
  const double down = std::expm1(-2.0 * b);  // h_x rises by 2/sqrt N
  double acc = nu;
  for (int k = 1; k <= p.m; ++k) {
    const double left = 0.5 * N2 * p.a(k) * (1.0 + p.g(k) / rN);
    const double right = 0.5 * N2 * p.a(k) * (1.0 - p.g(k) / rN);
    // bonds with a in [1,x] and a+k > x: a hole at a receives a particle from a+k
    for (int a = std::max(1, x - k + 1); a <= x && a + k <= N; ++a) {
      if (c[a] == c[a + k]) continue;
      acc += c[a] == -1 ? left * down : right * up;
    }
  }
  for (int j = 1; j <= p.m; ++j) {
    if (j > x) {
      const bool hole = c[j] == -1;
      acc += hole ? N2 * md.boundary.plus(Side::minus, j) * up
                  : N2 * md.boundary.minus(Side::minus, j) * down;
    }
    const int site = N - j + 1;
    if (site <= x) {
      const bool hole = c[site] == -1;
      acc += hole ? N2 * md.boundary.plus(Side::plus, j) * down
                  : N2 * md.boundary.minus(Side::plus, j) * up;
    }
  }
  return acc * cole_hopf_value(s, x, md.derived.lambda_N);
}

std::vector<DriftReport> drift_check(const Model& md, const ParticleState& s, double nu) {
  const double lam = md.derived.lambda_N;
  std::vector<DriftReport> out;
  for (int x = 0; x <= s.cfg.N; ++x) {
    DriftReport r;
    r.x = x;
    r.exact_drift =
        generator_apply([&](const ParticleState& t) { return cole_hopf_value(t, x, lam); }, s, md) +
        nu * cole_hopf_value(s, x, lam);
    r.formula_drift = sde_drift_rhs(s, x, md, nu);
    r.residual = r.exact_drift - r.formula_drift;
    out.push_back(r);
  }
  return out;
}

std::vector<double> rescale_narrow_wedge(const std::vector<double>& Z, double lambda, int N) {
  if (lambda == 0.0) throw ModelError("narrow-wedge rescaling needs lambda_N != 0");
  const double f = 0.5 * std::sqrt(double(N)) / lambda;
  std::vector<double> out(Z.size());
  for (std::size_t i = 0; i < Z.size(); ++i) out[i] = f * Z[i];
  return out;
}

void write_z_csv(std::ostream& os, const HeightState& st, bool header) {
  os.precision(17);
  if (header) os << "t,x,Z\n";
  for (int x = 0; x <= st.N; ++x) os << st.t << ',' << x << ',' << st.Z[x] << '\n';
}

FieldClassReport field_class_check(const LocalFunctional& g, FieldClass cls) {
  if (g.support < 1 || g.support > 16) throw InputError("support must be in 1..16");
  const int n = g.support;
  const long total = 1L << n;
  FieldClassReport r;
  r.name = g.name;
  r.cls = cls;
  r.support = n;
  std::vector<double> sums(n + 1, 0.0);
  std::vector<long> counts(n + 1, 0);
  std::vector<int> eta(n);
  for (long mask = 0; mask < total; ++mask) {
    int particles = 0;
    for (int i = 0; i < n; ++i) {
      eta[i] = (mask >> i) & 1 ? 1 : -1;
      particles += eta[i] > 0;
    }
    const double v = g.f(eta);
    r.sup_norm = std::max(r.sup_norm, std::abs(v));
    sums[particles] += v;
    ++counts[particles];
  }
  if (cls == FieldClass::weakly_vanishing) {
    double s = 0.0;
    for (double v : sums) s += v;
    r.max_abs_mean = std::abs(s / double(total));
  } else {
    for (int k = 0; k <= n; ++k) {
      r.canonical_means.push_back(sums[k] / double(counts[k]));
      r.max_abs_mean = std::max(r.max_abs_mean, std::abs(r.canonical_means.back()));
    }
  }
  return r;
}

std::vector<FieldCatalogEntry> field_catalog() {
  using V = const std::vector<int>&;
  std::vector<FieldCatalogEntry> c;
  auto wv = [&](std::string name, int n, std::function<double(V)> f, bool member) {
    c.push_back({{std::move(name), n, std::move(f)}, FieldClass::weakly_vanishing, member});
  };
  auto pg = [&](std::string name, int n, std::function<double(V)> f, bool member) {
    c.push_back({{std::move(name), n, std::move(f)}, FieldClass::pseudo_gradient, member});
  };

  wv("eta0", 1, [](V e) { return double(e[0]); }, true);
  wv("eta0*eta1", 2, [](V e) { return double(e[0] * e[1]); }, true);
  wv("eta0*eta3", 4, [](V e) { return double(e[0] * e[3]); }, true);
  wv("eta0*eta1*eta2", 3, [](V e) { return double(e[0] * e[1] * e[2]); }, true);
  wv("degree4_spread", 12, [](V e) { return double(e[0] * e[4] * e[7] * e[11]); }, true);
  wv("mixed_poly", 6, [](V e) { return 2.0 * e[0] * e[5] - 0.5 * e[1] * e[2] * e[3] + e[4]; }, true);
  wv("all16", 16, [](V e) {
    int p = 1;
    for (int v : e) p *= v;
    return double(p);
  }, true);
  wv("occupation", 1, [](V e) { return 0.5 * (1.0 + e[0]); }, false);
  wv("eta0_squared", 1, [](V e) { return double(e[0] * e[0]); }, false);

  pg("grad_eta", 2, [](V e) { return double(e[0] - e[1]); }, true);
  pg("grad_pair", 3, [](V e) { return double(e[0] * e[1] - e[1] * e[2]); }, true);
  pg("long_grad", 8, [](V e) { return double(e[0] - e[7]); }, true);
  pg("shift_diff_cubic", 6, [](V e) {
    return double(e[1] * e[2] * e[4] - e[0] * e[1] * e[3]);
  }, true);
  pg("pair_swap", 16, [](V e) { return double(e[0] * e[9] - e[3] * e[15]); }, true);
  pg("eta0", 1, [](V e) { return double(e[0]); }, false);
  pg("eta0*eta1", 2, [](V e) { return double(e[0] * e[1]); }, false);
  return c;
}

double expected_drift_ratio(const Model& md, const BoundaryCoefficients& bc, int x, double nu) {
  const ModelParams& p = md.params;
  const int N = p.N;
  const double N2 = double(N) * N;
  const double rN = std::sqrt(double(N));
  const double b = md.derived.lambda_N / rN;
  const double up = std::expm1(2.0 * b);
  const double down = std::expm1(-2.0 * b);
  const double tilted = std::exp(-b) / (2.0 * std::cosh(b));
  auto particle = [&](int y) { return y <= x ? tilted : 0.5; };
  double acc = nu;
  for (int k = 1; k <= p.m; ++k) {
    const double left = 0.5 * N2 * p.a(k) * (1.0 + p.g(k) / rN);
    const double right = 0.5 * N2 * p.a(k) * (1.0 - p.g(k) / rN);
    for (int a = std::max(1, x - k + 1); a <= x && a + k <= N; ++a) {
      const double pa = particle(a), pb = particle(a + k);
      acc += (1.0 - pa) * pb * left * down + pa * (1.0 - pb) * right * up;
    }
  }
  for (int j = 1; j <= p.m; ++j) {
    if (j > x) {
      const double q = particle(j);
      acc += N2 * ((1.0 - q) * bc.plus(Side::minus, j) * up + q * bc.minus(Side::minus, j) * down);
    }
    const int site = N - j + 1;
    if (site <= x) {
      const double q = particle(site);
      acc += N2 * ((1.0 - q) * bc.plus(Side::plus, j) * down + q * bc.minus(Side::plus, j) * up);
    }
  }
  return acc;
}

double laplacian_drift_ratio(const Model& md, int x) {
  const LatticeOperator L = build_L_lap(md.derived, md.params.A_minus, md.params.A_plus);
  const double c = std::cosh(md.derived.lambda_N / std::sqrt(double(md.N())));
  double r = 0.0;
  for (int y = 0; y <= md.N(); ++y)
    if (L.M(x, y) != 0.0) r += L.M(x, y) * std::pow(c, y - x);
  return r;
}

BoundaryCoefficients matched_boundary_coefficients(const Model& md) {
  const int N = md.N();
  const int m = md.m();
  const double nu = md.derived.nu_matched;
  const LatticeOperator L = build_L_lap(md.derived, md.params.A_minus, md.params.A_plus);
  const double c = std::cosh(md.derived.lambda_N / std::sqrt(double(N)));
  auto target = [&](int x) {
    double r = 0.0;
    for (int y = 0; y <= N; ++y)
      if (L.M(x, y) != 0.0) r += L.M(x, y) * std::pow(c, y - x);
    return r;
  };
  BoundaryCoefficients out = md.boundary;
  for (Side s : {Side::minus, Side::plus}) {
    std::vector<double> S(m);
    for (int j = 1; j <= m; ++j) S[j - 1] = md.boundary.plus(s, j) + md.boundary.minus(s, j);
    auto with_diff = [&](const Eigen::VectorXd& D) {
      BoundaryCoefficients b = out;
      for (int j = 1; j <= m; ++j)
        b.beta[int(s)][j - 1] = {0.5 * (S[j - 1] + D[j - 1]), 0.5 * (S[j - 1] - D[j - 1])};
      return b;
    };
    std::vector<int> xs(m);
    for (int i = 0; i < m; ++i) xs[i] = s == Side::minus ? i : N - m + 1 + i;
    // the expected drift is affine in D
    const BoundaryCoefficients b0 = with_diff(Eigen::VectorXd::Zero(m));
    Eigen::VectorXd f0(m), rhs(m);
    for (int i = 0; i < m; ++i) {
      f0[i] = expected_drift_ratio(md, b0, xs[i], nu);
      rhs[i] = target(xs[i]) - f0[i];
    }
    Eigen::MatrixXd J(m, m);
    for (int j = 0; j < m; ++j) {
      const BoundaryCoefficients bj = with_diff(Eigen::VectorXd::Unit(m, j));
      for (int i = 0; i < m; ++i) J(i, j) = expected_drift_ratio(md, bj, xs[i], nu) - f0[i];
    }
    const Eigen::VectorXd D = J.fullPivLu().solve(rhs);
    for (int j = 0; j < m; ++j)
      if (std::abs(D[j]) > S[j])
        throw ModelError("matched boundary rates: negative flip rate at j = " +
                         std::to_string(j + 1));
    out = with_diff(D);
  }
  return out;
}

double matched_drift_residual(const Model& md, const BoundaryCoefficients& b) {
  double worst = 0.0;
  for (int x = 0; x <= md.N(); ++x)
    worst = std::max(worst, std::abs(expected_drift_ratio(md, b, x, md.derived.nu_matched) -
                                     laplacian_drift_ratio(md, x)));
  return worst;
}

}  // namespace openkpz
