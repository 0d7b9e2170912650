#include <doctest.h>

#include <cmath>

#include "openkpz/cole_hopf.hpp"

using namespace openkpz;

namespace {

ModelParams params(int N, std::vector<double> a, std::vector<double> g, double Am = 0.0,
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

Model small_model(int N, std::vector<double> a, std::vector<double> g) {
  Model md;
  md.params = params(N, std::move(a), std::move(g));
  md.derived = derive_coefficients(md.params, true);
  md.boundary.m = md.params.m;
  for (int s = 0; s < 2; ++s)
    for (int j = 1; j <= md.params.m; ++j) md.boundary.beta[s].push_back({0.3 + 0.1 * j, 0.2 * j});
  return md;
}

}  // namespace

TEST_CASE("heights of simple configurations") {
  const int N = 25;
  const double lam = -0.7;
  const auto w = init_height(Configuration::filled(N, -1), lam, 0.0);
  for (int x = 0; x <= N; ++x) {
    CHECK(w.heights[x] == doctest::Approx(-x / 5.0).epsilon(1e-15));
    CHECK(w.Z[x] == doctest::Approx(std::exp(lam * x / 5.0)).epsilon(1e-14));
  }
  std::vector<int> s(N + 1, 1);
  for (int x = 2; x <= N; x += 2) s[x] = -1;
  const auto z = init_height(Configuration::from_spins(s), lam, 3.0);
  CHECK(z.heights[0] == 0.0);
  for (int x = 0; x <= N; x += 2) {
    CHECK(std::abs(z.heights[x]) <= 1e-15);
    CHECK(z.Z[x] == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("incremental heights agree with a recomputation") {
  const Model md = Model::build(params(48, {1.0, 0.5, 0.25}, {-0.5, -0.5, -1.0}));
  Rng rng(21);
  Simulator sim(md, sample_initial(48, InitialKind::near_stationary, rng));
  HeightState hs = init_height(sim.config(), md.derived.lambda_N, md.derived.nu_matched);
  bool saw_left_creation = false;
  for (int i = 0; i < 20000; ++i) {
    const auto s = sim.step(rng);
    advance_time(hs, sim.time());
    update_on_event(hs, sim.config(), s.event);
    if (s.event.kind == EventKind::boundary_flip && s.event.side == Side::minus && s.event.sign > 0)
      saw_left_creation = true;
  }
  CHECK(saw_left_creation);
  CHECK(std::abs(hs.h0 - sim.state().flux) <= 1e-12);
  CHECK(check_and_repair(hs, sim.config(), 1e-12) <= 1e-12);
}

TEST_CASE("drift identity on every configuration, N = 8") {
  for (int m = 1; m <= 2; ++m) {
    const Model md = small_model(8, std::vector<double>(m, 0.8), std::vector<double>(m, -0.6));
    for (int mask = 0; mask < 256; ++mask) {
      ParticleState st;
      st.cfg = Configuration::filled(8, -1);
      st.flux = 0.1 * (mask % 7);
      for (int y = 1; y <= 8; ++y)
        if ((mask >> (y - 1)) & 1) st.cfg.flip(y);
      for (const auto& r : drift_check(md, st, 1.7))
        CHECK(std::abs(r.residual) <= 1e-10 * (1.0 + std::abs(r.exact_drift)));
    }
  }
}

TEST_CASE("narrow wedge drift at x = 0 has only creation terms") {
  const Model md = small_model(12, {1.0, 0.5}, {-0.5, -0.5});
  ParticleState st;
  st.cfg = Configuration::filled(12, -1);
  const double lam = md.derived.lambda_N;
  const double nu = 2.5;
  double expect = nu;
  for (int j = 1; j <= 2; ++j)
    expect += 144.0 * md.boundary.plus(Side::minus, j) * std::expm1(2.0 * lam / std::sqrt(12.0));
  CHECK(sde_drift_rhs(st, 0, md, nu) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("narrow wedge rescaling") {
  const auto r = rescale_narrow_wedge(std::vector<double>(5, 1.0), 1.0, 4);
  for (double v : r) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> Z{0.5, 2.0, 3.0};
  const auto a = rescale_narrow_wedge(Z, -0.3, 16);
  std::vector<double> Z3{1.5, 6.0, 9.0};
  const auto b = rescale_narrow_wedge(Z3, -0.3, 16);
  for (int i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(3.0 * a[i]).epsilon(1e-15));
  CHECK_THROWS_AS(rescale_narrow_wedge(Z, 0.0, 16), ModelError);
}

TEST_CASE("field catalog membership") {
  for (const auto& e : field_catalog()) {
    const auto r = field_class_check(e.g, e.cls);
    CHECK_MESSAGE(r.member() == e.expected_member, e.g.name);
  }
  // eta_a under the canonical ensemble with k particles on n sites: 2k/n - 1
  const LocalFunctional eta{"eta", 4, [](const std::vector<int>& v) { return double(v[0]); }};
  const auto r = field_class_check(eta, FieldClass::pseudo_gradient);
  for (int k = 0; k <= 4; ++k) CHECK(r.canonical_means[k] == doctest::Approx(2.0 * k / 4 - 1.0));
}

TEST_CASE("expected drift ratio agrees with exhaustive enumeration") {
  // E[drift Z_x] / E[Z_x] over all 2^N configurations, the independent oracle for the
  // tilted product formula
  const int N = 10;
  for (int m = 1; m <= 2; ++m) {
    const Model md = small_model(N, std::vector<double>(m, 0.9), std::vector<double>(m, -1.2));
    const double nu = 0.4;
    for (int x = 0; x <= N; ++x) {
      double num = 0.0, den = 0.0;
      for (int mask = 0; mask < (1 << N); ++mask) {
        ParticleState st;
        st.cfg = Configuration::filled(N, -1);
        for (int y = 1; y <= N; ++y)
          if ((mask >> (y - 1)) & 1) st.cfg.flip(y);
        num += sde_drift_rhs(st, x, md, nu);
        den += cole_hopf_value(st, x, md.derived.lambda_N);
      }
      CHECK(expected_drift_ratio(md, md.boundary, x, nu) ==
            doctest::Approx(num / den).epsilon(1e-11));
    }
  }
}

TEST_CASE("matched flip rates reproduce the Laplacian drift everywhere") {
  for (int m = 1; m <= 2; ++m) {
    const auto p = m == 1 ? params(64, {1.0}, {-1.0})
                          : params(64, {1.0, 0.5}, {-0.5, -0.5}, 0.5, -0.5);
    const Model md = Model::build(p);
    const auto b = matched_boundary_coefficients(md);
    CHECK(matched_drift_residual(md, b) <= 1e-10);
    for (int s = 0; s < 2; ++s)
      for (int j = 1; j <= m; ++j) {
        CHECK(b.beta[s][j - 1][0] >= 0.0);
        CHECK(b.beta[s][j - 1][1] >= 0.0);
        CHECK(b.beta[s][j - 1][0] + b.beta[s][j - 1][1] ==
              doctest::Approx(md.boundary.beta[s][j - 1][0] + md.boundary.beta[s][j - 1][1]));
      }
    // the bulk never sees the flips, so nu_matched alone fixes it
    CHECK(std::abs(expected_drift_ratio(md, md.boundary, 32, md.derived.nu_matched) -
                   laplacian_drift_ratio(md, 32)) <= 1e-10);
  }
}
