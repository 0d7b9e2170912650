#include "openkpz/she_ref.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "openkpz/cole_hopf.hpp"

namespace openkpz {

namespace {

// One explicit step of (alpha/2) Delta_Robin on Z, written into out.
void heat_step(const std::vector<double>& Z, std::vector<double>& out, double c, double mu_l,
               double mu_r) {
  const int M = int(Z.size()) - 1;
  out[0] = Z[0] + c * (Z[1] + mu_l * Z[0] - 2.0 * Z[0]);
  for (int i = 1; i < M; ++i) out[i] = Z[i] + c * (Z[i + 1] + Z[i - 1] - 2.0 * Z[i]);
  out[M] = Z[M] + c * (Z[M - 1] + mu_r * Z[M] - 2.0 * Z[M]);
}

void check_checkpoints(const std::vector<double>& cp) {
  for (std::size_t i = 0; i < cp.size(); ++i)
    if (cp[i] < 0.0 || (i > 0 && cp[i] < cp[i - 1]))
      throw InputError("checkpoints must be non-negative and sorted");
}

// Runs job(r) for r in [0, n) on `threads` workers; results are indexed by r.
template <class Job>
void parallel_for(long n, unsigned threads, Job&& job) {
  if (threads <= 1 || n <= 1) {
    for (long r = 0; r < n; ++r) job(r);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      (void)w;
      while (!failed) {
        const long r = next++;
        if (r >= n) return;
        try {
          job(r);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

int she_index(double X, int M) { return std::clamp(int(std::lround(X * M)), 0, M); }

}  // namespace

SHEField solve_she(const std::vector<double>& Z0, const SHEParams& p,
                   const std::vector<double>& checkpoints, Rng& rng) {
  const int M = p.M;
  if (M < 2 || int(Z0.size()) != M + 1) throw InputError("SHE initial data must have M+1 values");
  check_checkpoints(checkpoints);
  const double dt = p.step();
  if (0.5 * p.alpha * dt * M * M > 0.25) throw InputError("SHE time step violates stability");
  const double mu_l = 1.0 - p.A_minus / M, mu_r = 1.0 - p.A_plus / M;
  const double amp = p.lambda * std::sqrt(p.alpha * M);

  SHEField f;
  f.M = M;
  f.dt = dt;
  f.times = checkpoints;
  std::vector<double> Z = Z0, W(M + 1);
  std::normal_distribution<double> nd;
  double t = 0.0;
  for (double tc : checkpoints) {
    while (t < tc) {
      const double h = std::min(dt, tc - t);
      heat_step(Z, W, 0.5 * p.alpha * h * M * M, mu_l, mu_r);
      if (p.lambda != 0.0) {
        const double s = amp * std::sqrt(h);
        for (int i = 0; i <= M; ++i) W[i] += s * Z[i] * nd(rng);
      }
      for (int i = 0; i <= M; ++i) {
        if (!(W[i] >= 0.0) || W[i] > 1e12) {
          std::ostringstream os;
          os << "SHE path left (0, 1e12] at t=" << t + h << ", cell " << i << ", value " << W[i];
          throw ModelError(os.str());
        }
      }
      Z.swap(W);
      t = h < dt ? tc : t + h;
    }
    f.Z.push_back(Z);
  }
  return f;
}

std::vector<double> she_near_stationary(int M, double lambda, Rng& rng) {
  std::vector<double> Z(M + 1);
  const double r = 1.0 / std::sqrt(double(M));
  double h = 0.0;
  Z[0] = 1.0;
  for (int i = 1; i <= M; ++i) {
    h += (rng() >> 63) ? r : -r;
    Z[i] = std::exp(-lambda * h);
  }
  return Z;
}

MomentReport moments_from_samples(const std::vector<std::vector<std::vector<double>>>& s,
                                  const std::vector<double>& checkpoints,
                                  const std::vector<double>& xs,
                                  const std::vector<std::pair<int, int>>& cov_pairs) {
  MomentReport r;
  r.checkpoints = checkpoints;
  r.xs = xs;
  r.cov_pairs = cov_pairs;
  r.replicas = long(s.size());
  const double R = double(s.size());
  if (s.size() < 2) throw InputError("moments need at least two replicas");
  const std::size_t nc = checkpoints.size(), nx = xs.size();
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> mean(nx, 0.0), var(nx), se_m(nx), se_v(nx);
    for (const auto& rep : s)
      for (std::size_t i = 0; i < nx; ++i) mean[i] += rep[c][i];
    for (auto& v : mean) v /= R;
    for (std::size_t i = 0; i < nx; ++i) {
      double m2 = 0.0, m4 = 0.0;
      for (const auto& rep : s) {
        const double d = rep[c][i] - mean[i];
        m2 += d * d;
        m4 += d * d * d * d;
      }
      var[i] = m2 / (R - 1.0);
      se_m[i] = std::sqrt(var[i] / R);
      const double mu2 = m2 / R, mu4 = m4 / R;
      se_v[i] = std::sqrt(std::max(mu4 - mu2 * mu2, 0.0) / R);
    }
    std::vector<double> cov;
    for (auto [a, b] : cov_pairs) {
      double acc = 0.0;
      for (const auto& rep : s) acc += (rep[c][a] - mean[a]) * (rep[c][b] - mean[b]);
      cov.push_back(acc / (R - 1.0));
    }
    r.mean.push_back(mean);
    r.var.push_back(var);
    r.se_mean.push_back(se_m);
    r.se_var.push_back(se_v);
    r.cov.push_back(cov);
  }
  return r;
}

std::vector<double> ExperimentConfig::xs() const {
  if (grid < 1) throw InputError("grid must be positive");
  std::vector<double> v;
  for (int k = 0; k <= grid; ++k) v.push_back(double(k) / grid);
  return v;
}

namespace {

std::vector<std::pair<int, int>> default_pairs(std::size_t nx) {
  const int q = int(nx - 1) / 4;
  return {{q, 2 * q}, {2 * q, 3 * q}, {0, int(nx) - 1}};
}

}  // namespace

MomentReport particle_ensemble_moments(const ExperimentConfig& cfg) {
  check_checkpoints(cfg.checkpoints);
  if (cfg.replicas < 2) throw InputError("need at least two replicas");
  Model md = Model::build(cfg.params);
  if (cfg.rates == FlipRates::matched) md.boundary = matched_boundary_coefficients(md);
  if (!cfg.checkpoints.empty() && cfg.checkpoints.back() > md.params.T_f)
    throw InputError("checkpoint beyond T_f");
  const int N = md.N();
  const double lam = md.derived.lambda_N;
  const double nu = md.derived.nu_matched;
  const auto xs = cfg.xs();
  std::vector<int> sites;
  for (double X : xs) sites.push_back(std::min(int(std::floor(X * N)), N));
  const bool wedge = cfg.initial == InitialKind::narrow_wedge;
  if (wedge && lam == 0.0) throw ModelError("narrow-wedge rescaling needs lambda_N != 0");

  std::vector<std::vector<std::vector<double>>> samples(cfg.replicas);
  parallel_for(cfg.replicas, cfg.threads, [&](long r) {
    Rng rng = make_stream(cfg.seed, std::uint64_t(r));
    Simulator sim(md, sample_initial(N, cfg.initial, rng));
    auto& out = samples[r];
    for (double T : cfg.checkpoints) {
      sim.run_until(T, rng);
      std::vector<double> Z(N + 1);
      const ParticleState& st = sim.state();
      const double rN = 1.0 / std::sqrt(double(N));
      double h = st.flux;
      for (int x = 0; x <= N; ++x) {
        if (x > 0) h += rN * st.cfg[x];
        Z[x] = std::exp(-lam * h + nu * T);
      }
      if (wedge) Z = rescale_narrow_wedge(Z, lam, N);
      std::vector<double> row;
      for (int x : sites) row.push_back(Z[x]);
      out.push_back(std::move(row));
    }
  });
  return moments_from_samples(samples, cfg.checkpoints, xs, default_pairs(xs.size()));
}

MomentReport she_ensemble_moments(const SHEParams& p, const std::vector<double>& checkpoints,
                                  const std::vector<double>& xs, long replicas,
                                  std::uint64_t seed, unsigned threads) {
  if (replicas < 2) throw InputError("need at least two replicas");
  std::vector<std::vector<std::vector<double>>> samples(replicas);
  parallel_for(replicas, threads, [&](long r) {
    Rng rng = make_stream(seed, std::uint64_t(r));
    const auto Z0 = she_near_stationary(p.M, p.lambda, rng);
    const SHEField f = solve_she(Z0, p, checkpoints, rng);
    for (const auto& Z : f.Z) {
      std::vector<double> row;
      for (double X : xs) row.push_back(Z[she_index(X, p.M)]);
      samples[r].push_back(std::move(row));
    }
  });
  return moments_from_samples(samples, checkpoints, xs, default_pairs(xs.size()));
}

std::vector<std::vector<double>> she_mean_flow(const SHEParams& p,
                                               const std::vector<double>& checkpoints,
                                               const std::vector<double>& xs) {
  // Fair +-1 steps: E exp(-lambda r xi) = cosh(lambda r) per step.
  std::vector<double> Z0(p.M + 1);
  const double c = std::cosh(p.lambda / std::sqrt(double(p.M)));
  Z0[0] = 1.0;
  for (int i = 1; i <= p.M; ++i) Z0[i] = Z0[i - 1] * c;
  SHEParams q = p;
  q.lambda = 0.0;
  Rng unused(0);
  const SHEField f = solve_she(Z0, q, checkpoints, unused);
  std::vector<std::vector<double>> out;
  for (const auto& Z : f.Z) {
    std::vector<double> row;
    for (double X : xs) row.push_back(Z[she_index(X, p.M)]);
    out.push_back(std::move(row));
  }
  return out;
}

Verdict compare(const MomentReport& a, const MomentReport& b) {
  if (a.checkpoints.size() != b.checkpoints.size() || a.xs.size() != b.xs.size())
    throw InputError("moment reports have different grids");
  Verdict v;
  long within = 0, total = 0;
  double acc_m = 0.0, acc_v = 0.0;
  for (std::size_t c = 0; c < a.checkpoints.size(); ++c)
    for (std::size_t i = 0; i < a.xs.size(); ++i) {
      const double sm = std::hypot(a.se_mean[c][i], b.se_mean[c][i]);
      const double sv = std::hypot(a.se_var[c][i], b.se_var[c][i]);
      const double dm = a.mean[c][i] - b.mean[c][i];
      const double dv = a.var[c][i] - b.var[c][i];
      const double zm = sm > 0.0 ? dm / sm : (dm == 0.0 ? 0.0 : INFINITY);
      const double zv = sv > 0.0 ? dv / sv : (dv == 0.0 ? 0.0 : INFINITY);
      v.z_mean.push_back(zm);
      v.z_var.push_back(zv);
      within += (std::abs(zm) <= 3.0) + (std::abs(zv) <= 3.0);
      total += 2;
      const double nm = std::abs(b.mean[c][i]), nv = std::abs(b.var[c][i]);
      if (nm > 0.0) acc_m += (dm * dm - sm * sm) / (nm * nm);
      if (nv > 0.0) acc_v += (dv * dv - sv * sv) / (nv * nv);
    }
  v.fraction_within = total ? double(within) / total : 1.0;
  v.discrepancy_mean_sq = total ? acc_m / total : 0.0;
  v.discrepancy_var_sq = total ? acc_v / total : 0.0;
  v.discrepancy_sq = v.discrepancy_mean_sq + v.discrepancy_var_sq;
  v.pass_points = v.fraction_within >= 0.95;
  return v;
}

ItoMeanCheck ito_mean_check(const SHEParams& p, const std::vector<double>& checkpoints,
                            const std::vector<double>& xs, long replicas, std::uint64_t seed,
                            unsigned threads) {
  const MomentReport r = she_ensemble_moments(p, checkpoints, xs, replicas, seed, threads);
  const auto flow = she_mean_flow(p, checkpoints, xs);
  ItoMeanCheck out;
  long within = 0;
  for (std::size_t c = 0; c < checkpoints.size(); ++c)
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double z = (r.mean[c][i] - flow[c][i]) / r.se_mean[c][i];
      out.z.push_back(z);
      out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
      within += std::abs(z) <= 3.0;
    }
  out.fraction_within = out.z.empty() ? 1.0 : double(within) / out.z.size();
  return out;
}

bool SheComparisonResult::pass() const {
  bool ok = monotone && !negative_control.pass_points;
  for (const auto& v : verdicts) ok = ok && v.pass_points;
  return ok;
}

SheComparisonResult she_comparison_experiment(const std::vector<int>& Ns, long replicas,
                                   const std::vector<double>& checkpoints, std::uint64_t seed,
                                   unsigned threads, double control_A) {
  ExperimentConfig base;
  base.params.m = 1;
  base.params.alpha = {1.0};
  base.params.gamma = {-1.0};
  base.params.T_f = 1.0;
  base.replicas = replicas;
  base.checkpoints = checkpoints;
  base.threads = threads;
  const auto xs = base.xs();

  // SHE times alpha_N T for every N, sorted; alpha = 1 in the solver itself.
  std::vector<double> she_times;
  std::vector<double> alphas;
  double lambda = 0.0;
  for (int N : Ns) {
    const DerivedCoefficients d = derive_coefficients(with_N(base.params, N));
    alphas.push_back(d.sum_k2_tilde_alpha());
    lambda = base.params.a(1) * base.params.g(1);
    for (double T : checkpoints) she_times.push_back(alphas.back() * T);
  }
  std::vector<double> sorted = she_times;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  SHEParams sp;
  sp.alpha = 1.0;
  sp.lambda = lambda;
  const MomentReport she =
      she_ensemble_moments(sp, sorted, xs, replicas, splitmix64(seed ^ 0x5be), threads);

  auto slice = [&](std::size_t n) {
    MomentReport r;
    r.checkpoints = checkpoints;
    r.xs = xs;
    r.cov_pairs = she.cov_pairs;
    r.replicas = she.replicas;
    for (double T : checkpoints) {
      const double t = alphas[n] * T;
      const auto c = std::size_t(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
      r.mean.push_back(she.mean[c]);
      r.se_mean.push_back(she.se_mean[c]);
      r.var.push_back(she.var[c]);
      r.se_var.push_back(she.se_var[c]);
      r.cov.push_back(she.cov[c]);
    }
    return r;
  };

  SheComparisonResult res;
  res.Ns = Ns;
  res.control_A = control_A;
  for (std::size_t n = 0; n < Ns.size(); ++n) {
    ExperimentConfig cfg = base;
    cfg.params.N = Ns[n];
    cfg.seed = splitmix64(seed + std::uint64_t(Ns[n]));
    res.verdicts.push_back(compare(particle_ensemble_moments(cfg), slice(n)));
  }
  res.monotone = true;
  for (std::size_t n = 1; n < res.verdicts.size(); ++n)
    res.monotone = res.monotone && res.verdicts[n].discrepancy_sq < res.verdicts[n - 1].discrepancy_sq;

  // Particle system with Robin reservoirs against the Neumann reference, smallest N.
  ExperimentConfig ctl = base;
  ctl.params.N = Ns.front();
  ctl.params.A_minus = control_A;
  ctl.params.A_plus = control_A;
  ctl.seed = splitmix64(seed ^ 0xc0);
  res.negative_control = compare(particle_ensemble_moments(ctl), slice(0));
  return res;
}

void write_moments_csv(std::ostream& os, const MomentReport& r) {
  os.precision(17);
  os << "checkpoint,x,mean,se_mean,var,se_var\n";
  for (std::size_t c = 0; c < r.checkpoints.size(); ++c)
    for (std::size_t i = 0; i < r.xs.size(); ++i)
      os << r.checkpoints[c] << ',' << r.xs[i] << ',' << r.mean[c][i] << ',' << r.se_mean[c][i]
         << ',' << r.var[c][i] << ',' << r.se_var[c][i] << '\n';
}

}  // namespace openkpz
