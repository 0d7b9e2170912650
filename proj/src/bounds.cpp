#include "openkpz/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <unsupported/Eigen/MatrixFunctions>

#include "openkpz/kernels.hpp"
#include "openkpz/operators.hpp"

namespace openkpz {

namespace {

// Points whose claimed value is below this are numerically meaningless.
constexpr double kClaimFloor = 1e-10;
constexpr double kDegenerate = 1e-13;

using Mat = Eigen::MatrixXd;

enum Kern { U0 = 0, UA, Ub0, UbA, T };

// Kernels at one N, built on first use.
class Cache {
public:
  Cache(const BoundSuiteConfig& cfg, int N)
      : cfg_(cfg), d_(derive_coefficients(with_N(cfg.base, N))) {
    const double t0 = 1.0 / (double(N) * N);
    for (int i = 0; i < cfg.n_times; ++i) {
      const double f = cfg.n_times == 1 ? 0.0 : double(i) / (cfg.n_times - 1);
      times_.push_back(t0 * std::pow(cfg.T_f / t0, f));
    }
    const double b = std::pow(double(N), cfg.beta_boundary);
    for (int y = 0; y <= N; ++y)
      if (y > b && y < N - b) interior_.push_back(y);
  }

  int N() const { return d_.N; }
  const DerivedCoefficients& d() const { return d_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<int>& interior() const { return interior_; }

  const HeatKernel& heat(Kern k) {
    auto& h = heat_[k];
    if (!h) {
      const double am = cfg_.base.A_minus, ap = cfg_.base.A_plus;
      switch (k) {
        case U0: h = std::make_unique<HeatKernel>(make_heat_kernel(d_, KernelKind::neumann)); break;
        case UA:
          h = std::make_unique<HeatKernel>(make_heat_kernel(d_, KernelKind::robin, am, ap));
          break;
        case Ub0:
          h = std::make_unique<HeatKernel>(make_heat_kernel(d_, KernelKind::nn_neumann));
          break;
        case UbA:
          h = std::make_unique<HeatKernel>(make_heat_kernel(d_, KernelKind::nn_robin, am, ap));
          break;
        default: throw InputError("no heat kernel for the image sum");
      }
    }
    return *h;
  }

  // U(t); the image kernel is returned on rows 0..N only.
  const Mat& get(Kern k, double t) {
    auto key = std::make_pair(int(k), t);
    auto it = mats_.find(key);
    if (it != mats_.end()) return it->second;
    Mat M = k == T ? ImageKernel(d_, t).matrix() : heat(k).P(t);
    return mats_.emplace(key, std::move(M)).first->second;
  }

  // U(t) with the weight exp(kappa |x-y| / s), computed exactly by conjugating the
  // generator with diag(exp(+-kappa y / s)) so that far entries are never amplified.
  Mat weighted(Kern k, double t, double kappa, double s) {
    const Mat& L = heat(k).generator();
    const int n = int(L.rows());
    Mat Lp(n, n), Lm(n, n);
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        const double w = std::exp(kappa * double(y - x) / s);
        Lp(x, y) = L(x, y) * w;
        Lm(x, y) = L(x, y) / w;
      }
    const Mat Ep = (t * Lp).exp();
    const Mat Em = (t * Lm).exp();
    return Ep.cwiseAbs().cwiseMax(Em.cwiseAbs());
  }

  // U(t - tau) with U := 0 for negative times.
  Mat earlier(Kern k, double t, double tau) {
    if (tau > t) return Mat::Zero(N() + 1, N() + 1);
    return get(k, t - tau);
  }

private:
  const BoundSuiteConfig& cfg_;
  DerivedCoefficients d_;
  std::vector<double> times_;
  std::vector<int> interior_;
  std::unique_ptr<HeatKernel> heat_[4];
  std::map<std::pair<int, double>, Mat> mats_;
};

// Per-N accumulation of max observed/claimed for every part of one id.
class Recorder {
public:
  explicit Recorder(std::size_t nN) : nN_(nN) {}
  void set_N(std::size_t i) { cur_ = i; }
  void add(const std::string& part, double observed, double claimed) {
    Acc& a = slot(part);
    a.max_obs = std::max(a.max_obs, std::abs(observed));
    if (!(claimed > kClaimFloor)) return;
    a.fitted[cur_] = std::max(a.fitted[cur_], std::abs(observed) / claimed);
  }
  BoundFitReport finish(const std::string& id, const std::vector<int>& Ns, double slack) const {
    BoundFitReport r;
    r.id = id;
    r.Ns = Ns;
    r.fitted.assign(nN_, 0.0);
    r.pass = true;
    for (const auto& [name, a] : parts_) {
      BoundPart p;
      p.name = name;
      p.fitted = a.fitted;
      p.degenerate = a.max_obs < kDegenerate;
      const double hi = *std::max_element(p.fitted.begin(), p.fitted.end());
      const double lo = *std::min_element(p.fitted.begin(), p.fitted.end());
      p.spread = p.degenerate ? 1.0 : (lo > 0.0 ? hi / lo : INFINITY);
      p.pass = p.degenerate || p.spread <= slack;
      r.pass = r.pass && p.pass;
      r.max_ratio = std::max(r.max_ratio, p.spread);
      for (std::size_t i = 0; i < nN_; ++i) r.fitted[i] = std::max(r.fitted[i], p.fitted[i]);
      r.parts.push_back(std::move(p));
    }
    return r;
  }

private:
  struct Acc {
    std::vector<double> fitted;
    double max_obs = 0.0;
  };
  Acc& slot(const std::string& part) {
    for (auto& [n, a] : parts_)
      if (n == part) return a;
    parts_.push_back({part, Acc{std::vector<double>(nN_, 0.0), 0.0}});
    return parts_.back().second;
  }
  std::size_t nN_;
  std::size_t cur_ = 0;
  std::vector<std::pair<std::string, Acc>> parts_;
};

std::string tag(const std::string& base, const std::string& k, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s[%s=%g]", base.c_str(), k.c_str(), v);
  return buf;
}

double sup_abs(const Mat& M) { return M.cwiseAbs().maxCoeff(); }
double row_l1(const Mat& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); }

// max_x N sum_{y in I} |M(x, y+k) - M(x, y)|
double grad_sum(const Mat& M, int k, const std::vector<int>& I) {
  const int n = int(M.rows());
  const double N = n - 1;
  double best = 0.0;
  for (int x = 0; x < n; ++x) {
    double s = 0.0;
    for (int y : I) s += std::abs(M(x, y + k) - M(x, y));
    best = std::max(best, N * s);
  }
  return best;
}

double interior_sum(const Mat& M, const std::vector<int>& I) {
  double best = 0.0;
  for (int x = 0; x < M.rows(); ++x) {
    double s = 0.0;
    for (int y : I) s += std::abs(M(x, y));
    best = std::max(best, s);
  }
  return best;
}

double interior_sup(const Mat& M, const std::vector<int>& I) {
  double best = 0.0;
  for (int x = 0; x < M.rows(); ++x)
    for (int y : I) best = std::max(best, std::abs(M(x, y)));
  return best;
}

double binom(int n, int k) { return std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0)); }

// Forward difference of order l applied to f at d.
template <class F>
double fdiff(F&& f, long d, int l) {
  double s = 0.0;
  for (int j = 0; j <= l; ++j) s += ((l - j) % 2 ? -1.0 : 1.0) * binom(l, j) * f(d + j);
  return s;
}

struct IdCtx {
  const BoundSuiteConfig& cfg;
  Cache& c;
  Recorder& rec;
};

using IdFn = std::function<void(IdCtx&)>;

double on_diag(double N, double rho) { return std::min(1.0 / N + 1.0 / (N * std::sqrt(rho)), 1.0); }

void id_IOnD(IdCtx& x) {
  const double N = x.c.N();
  for (double rho : x.c.times()) x.rec.add("sup", sup_abs(x.c.get(U0, rho)), on_diag(N, rho));
}

void id_IOnDRBPA(IdCtx& x) {
  const double N = x.c.N();
  for (double rho : x.c.times()) {
    const Mat& U = x.c.get(UA, rho);
    x.rec.add("sup", sup_abs(U), on_diag(N, rho));
    x.rec.add("row_l1", row_l1(U), 1.0);
  }
}

void id_IOffDTotal(IdCtx& x) {
  const double N = x.c.N();
  for (double rho : x.c.times()) {
    const double s = std::max(N * std::sqrt(rho), 1.0);
    for (double kappa : x.cfg.kappas)
      for (Kern k : {U0, UA}) {
        const std::string nm = k == U0 ? "U0" : "UA";
        const Mat W = x.c.weighted(k, rho, kappa, s);
        x.rec.add(tag("sup_" + nm, "kappa", kappa), sup_abs(W), on_diag(N, rho));
        x.rec.add(tag("row_l1_" + nm, "kappa", kappa), row_l1(W), 1.0);
      }
  }
}

// Tail mass sup_x sum_{|w-x|>=L} (U_{w,x} + U_{x,w}).
double tail_mass(const Mat& U, int L) {
  const int n = int(U.rows());
  double best = 0.0;
  for (int x = 0; x < n; ++x) {
    double s = 0.0;
    for (int w = 0; w < n; ++w)
      if (std::abs(w - x) >= L) s += std::abs(U(w, x)) + std::abs(U(x, w));
    best = std::max(best, s);
  }
  return best;
}

// Gaussian up to L ~ split * crossover, exponential beyond.
void hit_parts(IdCtx& x, bool literal) {
  const double N = x.c.N();
  const int m = x.c.d().m;
  const double kap = x.cfg.hit_kappa;
  for (double rho : x.c.times()) {
    const double var = N * N * rho;
    const double cross = x.cfg.hit_split * (literal ? std::sqrt(var) : var);
    for (Kern k : {U0, UA}) {
      const Mat& U = x.c.get(k, rho);
      for (int L = 2 * m; 2 * L <= N; L *= 2) {
        const double claimed =
            L <= cross ? std::exp(-kap * L * double(L) / var) : std::exp(-kap * L);
        x.rec.add(std::string("tail_") + (k == U0 ? "U0" : "UA"), tail_mass(U, L), claimed);
      }
    }
  }
}

void id_HitEstimate(IdCtx& x) { hit_parts(x, false); }

void id_RegXHKCpt(IdCtx& x) {
  const auto& I = x.c.interior();
  const double eps = x.cfg.eps;
  const double N = x.c.N();
  for (double rho : x.c.times()) {
    const Mat& U = x.c.get(U0, rho);
    const Mat D = U - x.c.get(T, rho);
    for (int k : x.cfg.grad_steps) {
      x.rec.add(tag("grad", "k", k), grad_sum(U, k, I), 1.0 / std::sqrt(rho));
      x.rec.add(tag("grad_minus_image", "k", k), grad_sum(D, k, I),
                std::pow(N, -eps) / std::sqrt(rho));
    }
  }
}

std::vector<double> taus(double rho) { return {0.5 * rho, 7.0 * rho}; }

void id_RegTHKCpt(IdCtx& x) {
  const double N = x.c.N(), e = x.cfg.eps;
  for (double rho : x.c.times()) {
    for (double tau : taus(rho)) {
      const Mat D = x.c.earlier(U0, rho, tau) - x.c.get(U0, rho);
      const double claimed = std::pow(rho, -1.5 + e) * std::pow(tau, 1.0 - e) / N +
                             std::pow(N, -2.0 + 2 * e) / rho +
                             std::pow(N, -1.0 - e) * tau / std::sqrt(rho);
      x.rec.add(tag("sup", "tau/rho", tau / rho), sup_abs(D), claimed);
    }
  }
}

void id_GTYGrad(IdCtx& x) {
  const double N = x.c.N(), e = x.cfg.eps;
  const auto& I = x.c.interior();
  for (double rho : x.c.times())
    for (double tau : taus(rho)) {
      const Mat D = x.c.earlier(U0, rho, tau) - x.c.get(U0, rho);
      const double claimed = std::pow(rho, -1.5 + e) * std::pow(tau, 1.0 - e) +
                             std::pow(N, -1.0 + 2 * e) / rho +
                             std::pow(N, -e) * tau / std::sqrt(rho);
      double obs = 0.0;
      for (int k : x.cfg.grad_steps) obs = std::max(obs, grad_sum(D, k, I));
      x.rec.add(tag("grad_sum", "tau/rho", tau / rho), obs, claimed);
    }
}

void id_RegRBPACptTotal(IdCtx& x) {
  const double N = x.c.N(), e = x.cfg.eps;
  const auto& I = x.c.interior();
  for (double rho : x.c.times()) {
    const Mat& U = x.c.get(UA, rho);
    double g = 0.0;
    for (int k : x.cfg.grad_steps) g = std::max(g, grad_sum(U, k, I));
    x.rec.add("a_grad", g, 1.0 / std::sqrt(rho));
    for (double tau : taus(rho)) {
      const Mat D = x.c.earlier(UA, rho, tau) - U;
      const double b = std::pow(tau, 1.0 - e) * std::pow(rho, -1.0 + e) +
                       std::pow(N, -1.0 + 2 * e) / std::sqrt(rho) + tau;
      const double c = std::pow(rho, -1.5 + e) * std::pow(tau, 1.0 - e) / N +
                       std::pow(N, -2.0 + 2 * e) / rho + tau / (N * std::sqrt(rho));
      const double dd = std::pow(rho, -1.5 + e) * std::pow(tau, 1.0 - e) +
                        std::pow(N, -1.0 + 2 * e) / rho;
      double gd = 0.0;
      for (int k : x.cfg.grad_steps) gd = std::max(gd, grad_sum(D, k, I));
      x.rec.add(tag("b_time_l1", "tau/rho", tau / rho), interior_sum(D, I), b);
      x.rec.add(tag("c_time_sup", "tau/rho", tau / rho), sup_abs(D), c);
      x.rec.add(tag("d_time_grad", "tau/rho", tau / rho), gd, dd);
    }
  }
}

void macro_parts(IdCtx& x, Kern lr, Kern nn) {
  const double N = x.c.N(), e = x.cfg.eps, b = x.cfg.beta_boundary;
  const auto& I = x.c.interior();
  for (double rho : x.c.times()) {
    const Mat D = x.c.get(lr, rho) - x.c.get(nn, rho);
    x.rec.add("a_sup", interior_sup(D, I), std::pow(N, -1.0 - e) / rho + 1.0 / (N * N * rho));
    x.rec.add("b_l1", row_l1(D),
              (std::pow(N, -e) + std::pow(N, -1.0 + b) + 1.0 / N) / std::sqrt(rho));
    double g = 0.0;
    for (int k : x.cfg.grad_steps) g = std::max(g, grad_sum(D, k, I));
    x.rec.add("c_grad", g, std::pow(N, -e) / std::sqrt(rho) + 1.0 / (N * rho));
  }
}

void id_MacroHKCpt(IdCtx& x) { macro_parts(x, U0, Ub0); }
void id_MacroHKCptRBPA(IdCtx& x) { macro_parts(x, UA, UbA); }

// sup_x sum_y |grad^!_{k,y} grad_{l,x} Ubar|, the x-difference unscaled.
void id_1B2BRegHK(IdCtx& x) {
  const int N = x.c.N();
  const double e = x.cfg.eps;
  for (double rho : x.c.times()) {
    const Mat& U = x.c.get(UbA, rho);
    double best = 0.0;
    for (int k : x.cfg.grad_steps)
      for (int l : x.cfg.grad_steps)
        for (int xx = std::max(0, -l); xx <= std::min(N, N - l); ++xx) {
          double s = 0.0;
          for (int y = std::max(0, -k); y <= std::min(N, N - k); ++y) {
            const double gx0 = U(xx + l, y) - U(xx, y);
            const double gx1 = U(xx + l, y + k) - U(xx, y + k);
            s += std::abs(gx1 - gx0);
          }
          best = std::max(best, N * s);
        }
    x.rec.add("mixed_l1", best, std::pow(double(N), -1.0 + 2 * e) * std::pow(rho, -1.0 + e));
  }
}

void id_ThirdOrder(IdCtx& x) {
  const int N = x.c.N();
  for (double rho : x.c.times()) {
    const FullLineKernel G(x.c.d(), rho, N + 8);
    const double s = std::max(N * std::sqrt(rho), 1.0);
    for (int l = 1; l <= 3; ++l) {
      const double amp = std::pow(double(N), -l - 1.0) * std::pow(rho, -0.5 * l - 0.5);
      // Only points where the claimed envelope sits well above rounding of G.
      double best = 0.0;
      for (long d = -N; d <= N; ++d) {
        const double env = std::exp(-1.0 * std::max(double(std::labs(d) - l), 0.0) / s);
        if (env < 1e-6) continue;
        const double obs = std::abs(fdiff([&](long z) { return G(z); }, d, l));
        best = std::max(best, obs / (amp * env));
      }
      x.rec.add(tag("diff", "l", l), best, 1.0);
    }
  }
}

void id_BRegT(IdCtx& x) {
  const int N = x.c.N();
  for (double rho : x.c.times()) {
    const ImageKernel T(x.c.d(), rho);
    Mat ext(N + 4, N + 1);
    for (int a = 0; a < N + 4; ++a)
      for (int y = 0; y <= N; ++y) ext(a, y) = T.value(a, y);
    for (int l = 1; l <= 3; ++l) {
      double sup_ratio = 0.0, sum_ratio = 0.0;
      for (int xx = 0; xx <= N; ++xx) {
        const double dx = std::min(xx, N - xx) + 1.0;
        const double c_sup =
            std::min(dx * std::pow(double(N), -l - 1.0) * std::pow(rho, -0.5 * l - 0.5), 1.0);
        const double c_sum = std::min(dx * std::pow(double(N), -l) * std::pow(rho, -0.5 * l), 1.0);
        double s = 0.0, mx = 0.0;
        for (int y = 0; y <= N; ++y) {
          const double v = std::abs(fdiff([&](long a) { return ext(a, y); }, xx, l));
          s += v;
          mx = std::max(mx, v);
        }
        sup_ratio = std::max(sup_ratio, mx / c_sup);
        sum_ratio = std::max(sum_ratio, s / c_sum);
      }
      x.rec.add(tag("sup", "l", l), sup_ratio, 1.0);
      x.rec.add(tag("sum", "l", l), sum_ratio, 1.0);
    }
  }
}

// (1/2 sum tilde_alpha_k N^2 Delta_k - (sum k^2 tilde_alpha_k / 2) N^2 Delta_1) G on |d| <= N.
double taylor_defect(const DerivedCoefficients& d, const FullLineKernel& G, int N) {
  const double N2 = double(N) * N;
  const double c = 0.5 * d.sum_k2_tilde_alpha();
  double best = 0.0;
  for (long z = -N; z <= N; ++z) {
    double v = -c * N2 * (G(z + 1) + G(z - 1) - 2 * G(z));
    for (int k = 1; k <= d.m; ++k) v += 0.5 * d.ta(k) * N2 * (G(z + k) + G(z - k) - 2 * G(z));
    best = std::max(best, std::abs(v));
  }
  return best;
}

void id_MacroAuxHKTaylor(IdCtx& x) {
  const int N = x.c.N();
  const auto& d = x.c.d();
  DerivedCoefficients nn = d;
  nn.m = 1;
  nn.tilde_alpha = {d.sum_k2_tilde_alpha()};
  for (double rho : x.c.times()) {
    const double claimed = d.sum_k3_tilde_alpha() / (double(N) * N * rho * rho);
    x.rec.add("long_range", taylor_defect(d, FullLineKernel(d, rho, N + 8), N), claimed);
    x.rec.add("nearest_neighbor", taylor_defect(d, FullLineKernel(nn, rho, N + 8), N), claimed);
  }
}

const std::vector<std::pair<std::string, IdFn>>& registry() {
  static const std::vector<std::pair<std::string, IdFn>> r = {
      {"IOnD", id_IOnD},
      {"IOnDRBPA", id_IOnDRBPA},
      {"IOffDTotal", id_IOffDTotal},
      {"HitEstimate", id_HitEstimate},
      {"RegXHKCpt", id_RegXHKCpt},
      {"RegTHKCpt", id_RegTHKCpt},
      {"GTYGrad", id_GTYGrad},
      {"RegRBPACptTotal", id_RegRBPACptTotal},
      {"MacroHKCpt", id_MacroHKCpt},
      {"MacroHKCptRBPA", id_MacroHKCptRBPA},
      {"1B2BRegHK", id_1B2BRegHK},
      {"ThirdOrder", id_ThirdOrder},
      {"BRegT", id_BRegT},
      {"MacroAuxHKTaylor", id_MacroAuxHKTaylor},
  };
  return r;
}

std::vector<BoundFitReport> run(const BoundSuiteConfig& cfg,
                                const std::vector<std::pair<std::string, IdFn>>& fns) {
  std::vector<Recorder> recs(fns.size(), Recorder(cfg.Ns.size()));
  for (std::size_t i = 0; i < cfg.Ns.size(); ++i) {
    Cache cache(cfg, cfg.Ns[i]);
    for (std::size_t j = 0; j < fns.size(); ++j) {
      recs[j].set_N(i);
      IdCtx ctx{cfg, cache, recs[j]};
      fns[j].second(ctx);
    }
  }
  std::vector<BoundFitReport> out;
  for (std::size_t j = 0; j < fns.size(); ++j)
    out.push_back(recs[j].finish(fns[j].first, cfg.Ns, cfg.slack));
  return out;
}

}  // namespace

BoundSuiteConfig BoundSuiteConfig::defaults() {
  BoundSuiteConfig c;
  c.base.m = 2;
  c.base.alpha = {1.0, 0.5};
  c.base.gamma = {-0.5, -0.5};
  c.base.A_minus = 0.5;
  c.base.A_plus = -0.5;
  c.base.T_f = c.T_f;
  return c;
}

const std::vector<std::string>& bound_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& [n, f] : registry()) v.push_back(n);
    return v;
  }();
  return ids;
}

std::vector<BoundFitReport> bound_suite(const BoundSuiteConfig& cfg,
                                        const std::vector<std::string>& ids) {
  if (cfg.Ns.size() < 2) throw InputError("bound sweep needs at least two values of N");
  std::vector<std::pair<std::string, IdFn>> fns;
  for (const auto& e : registry())
    if (ids.empty() || std::find(ids.begin(), ids.end(), e.first) != ids.end()) fns.push_back(e);
  for (const auto& id : ids)
    if (std::none_of(fns.begin(), fns.end(), [&](const auto& e) { return e.first == id; }))
      throw InputError("unknown bound id: " + id);
  return run(cfg, fns);
}

BoundFitReport hit_estimate_literal(const BoundSuiteConfig& cfg) {
  std::vector<std::pair<std::string, IdFn>> fns = {
      {"HitEstimateLiteral", [](IdCtx& x) { hit_parts(x, true); }}};
  return run(cfg, fns).front();
}

void write_bound_csv(std::ostream& os, const std::vector<BoundFitReport>& reports) {
  os.precision(17);
  os << "id,part,N,fitted_constant,spread,degenerate,pass\n";
  for (const auto& r : reports)
    for (const auto& p : r.parts)
      for (std::size_t i = 0; i < r.Ns.size(); ++i)
        os << r.id << ',' << p.name << ',' << r.Ns[i] << ',' << p.fitted[i] << ',' << p.spread
           << ',' << (p.degenerate ? 1 : 0) << ',' << (p.pass ? 1 : 0) << '\n';
}

}  // namespace openkpz
