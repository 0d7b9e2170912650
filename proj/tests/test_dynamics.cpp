#include <doctest.h>

#include <cmath>

#include "openkpz/dynamics.hpp"

using namespace openkpz;

namespace {

Model bare_model(int N, std::vector<double> a, std::vector<double> g) {
  Model md;
  md.params.N = N;
  md.params.m = int(a.size());
  md.params.alpha = std::move(a);
  md.params.gamma = std::move(g);
  md.derived = derive_coefficients(md.params, true);
  md.boundary.m = md.params.m;
  for (int s = 0; s < 2; ++s) md.boundary.beta[s].assign(md.params.m, {0.0, 0.0});
  return md;
}

}  // namespace

TEST_CASE("exchange rate on a single bond") {
  // particle at 1, hole at 2: moves right at 1/2 * 16 * (1 - gamma/2) = 12
  const Model md = bare_model(4, {1.0}, {-1.0});
  const auto cfg = Configuration::from_spins({-1, +1, -1, -1, -1});
  const auto ev = enumerate_rates(cfg, md);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].kind == EventKind::exchange);
  CHECK(ev[0].x == 1);
  CHECK(ev[0].k == 1);
  CHECK(ev[0].direction == +1);
  CHECK(ev[0].rate == doctest::Approx(12.0).epsilon(1e-15));
}

TEST_CASE("site 0 is never touched") {
  const Model md = Model::build([] {
    ModelParams p;
    p.N = 16;
    p.m = 2;
    p.alpha = {1.0, 0.5};
    p.gamma = {-0.5, -0.5};
    return p;
  }());
  auto cfg = Configuration::from_spins(std::vector<int>(17, -1));
  cfg.flip(0);
  for (const auto& e : enumerate_rates(cfg, md)) {
    if (e.kind == EventKind::exchange) CHECK(e.x >= 1);
    else CHECK(e.site >= 1);
  }
  Rng rng(3);
  Simulator sim(md, cfg);
  sim.run_until(0.5, rng);
  CHECK(sim.config()[0] == +1);
}

TEST_CASE("full configuration: only annihilations") {
  Model md = bare_model(8, {1.0, 0.5}, {-0.5, -0.5});
  for (int s = 0; s < 2; ++s) md.boundary.beta[s].assign(2, {0.3, 0.4});
  const auto ev = enumerate_rates(Configuration::filled(8, +1), md);
  CHECK(ev.size() == 4);
  for (const auto& e : ev) {
    CHECK(e.kind == EventKind::boundary_flip);
    CHECK(e.sign == -1);
  }
}

TEST_CASE("generator on eta_x in the symmetric bulk") {
  const Model md = bare_model(12, {1.0, 0.5}, {0.0, 0.0});
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = sample_initial(12, InitialKind::near_stationary, rng);
    for (int x = 3; x <= 9; ++x) {
      double expect = 0.0;
      for (int k = 1; k <= 2; ++k)
        expect += 0.5 * 144.0 * md.params.a(k) * (cfg[x + k] + cfg[x - k] - 2.0 * cfg[x]);
      const double got =
          generator_apply([x](const Configuration& c) { return double(c[x]); }, cfg, md);
      CHECK(got == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("sum tree selection frequencies") {
  SumTree t(2);
  t.set(0, 2.0);
  t.set(1, 1.0);
  Rng rng(5);
  const int n = 100000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += t.find(uniform01(rng) * t.total()) == 0;
  const double p = 2.0 / 3.0;
  CHECK(std::abs(first - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));

  SumTree one(5);
  one.set(3, 0.7);
  for (int i = 0; i < 100; ++i) CHECK(one.find(uniform01(rng) * one.total()) == 3);
}

TEST_CASE("incremental rate table equals a rebuild") {
  const Model md = Model::build([] {
    ModelParams p;
    p.N = 40;
    p.m = 3;
    p.alpha = {1.0, 0.5, 0.25};
    p.gamma = {-0.5, -0.25, -0.5};
    return p;
  }());
  Rng rng(2);
  Simulator sim(md, sample_initial(40, InitialKind::near_stationary, rng));
  for (int i = 0; i < 5000; ++i) sim.step(rng);
  const SumTree fresh = sim.rebuild_rates();
  CHECK(fresh.raw() == sim.rates().raw());
  CHECK(sim.config().valid());
}

TEST_CASE("trivial trajectories") {
  const Model md = bare_model(16, {1.0}, {-0.5});
  Rng rng(1);
  const auto cfg = sample_initial(16, InitialKind::near_stationary, rng);
  CHECK(simulate(md, cfg, 0.0, rng).events.empty());
  // zero flip rates and no particles: nothing can happen
  CHECK(simulate(md, Configuration::filled(16, -1), 1.0, rng).events.empty());
}

TEST_CASE("event count matches the integrated total rate") {
  const Model md = Model::build([] {
    ModelParams p;
    p.N = 64;
    p.m = 1;
    p.alpha = {1.0};
    p.gamma = {-1.0};
    return p;
  }());
  const int runs = 200;
  const double T = 0.1;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < runs; ++r) {
    Rng rng = make_stream(9, r);
    Simulator sim(md, sample_initial(64, InitialKind::near_stationary, rng));
    double n = 0.0, t = 0.0, integral = 0.0;
    while (true) {
      const double rate = sim.total_rate();
      const auto s = sim.propose(rng);
      if (t + s.dt > T) {
        integral += rate * (T - t);
        break;
      }
      integral += rate * s.dt;
      t += s.dt;
      sim.apply(s);
      ++n;
    }
    // n - integral is a martingale at T
    sum += n - integral;
    sum2 += (n - integral) * (n - integral);
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sum2 / runs - mean * mean) / runs);
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("initial data") {
  Rng rng(4);
  const auto w = sample_initial(50, InitialKind::narrow_wedge, rng);
  for (int x = 0; x <= 50; ++x) CHECK(w[x] == -1);

  Rng a(77), b(77);
  CHECK(sample_initial(200, InitialKind::near_stationary, a).spins ==
        sample_initial(200, InitialKind::near_stationary, b).spins);

  const int N = 100000;
  const auto c = sample_initial(N, InitialKind::near_stationary, rng);
  long sum = 0;
  for (int x = 1; x <= N; ++x) sum += c[x];
  CHECK(std::abs(double(sum)) <= 3.0 * std::sqrt(double(N)));
  CHECK(c[0] == -1);
}
