#include "openkpz/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

namespace openkpz {

namespace {

double sinhc(double z) {
  if (std::abs(z) < 1e-4) {
    const double z2 = z * z;
    return 1.0 + z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sinh(z) / z;
}

int k_minus(int k, int x) { return std::min(k, x); }

}  // namespace

void validate_params(const ModelParams& p, const ModelLimits& lim) {
  if (p.N < 4) throw InputError("N must be at least 4");
  if (p.m < 1) throw InputError("m must be positive");
  if (p.m > lim.max_jump) throw InputError("m exceeds the configured jump cap");
  if (int(p.alpha.size()) != p.m) throw InputError("alpha must have exactly m entries");
  if (int(p.gamma.size()) != p.m) throw InputError("gamma must have exactly m entries");
  for (int k = 1; k <= p.m; ++k) {
    if (!(p.a(k) > 0.0)) throw InputError("alpha entries must be positive");
    if (!(p.g(k) <= 0.0)) throw InputError("gamma entries must be non-positive");
    if (p.g(k) < -std::sqrt(double(p.N)))
      throw InputError("gamma below -sqrt(N) gives a negative exchange rate");
  }
  if (p.a(1) < lim.ellipticity_floor) throw InputError("alpha[1] below the ellipticity floor");
  if (!(p.T_f > 0.0)) throw InputError("T_f must be positive");
  if (!std::isfinite(p.A_minus) || !std::isfinite(p.A_plus))
    throw InputError("A_minus/A_plus must be finite");
}

double DerivedCoefficients::sum_k2_tilde_alpha() const {
  double s = 0.0;
  for (int k = 1; k <= m; ++k) s += double(k) * k * ta(k);
  return s;
}

double DerivedCoefficients::sum_k3_tilde_alpha() const {
  double s = 0.0;
  for (int k = 1; k <= m; ++k) s += double(k) * k * k * ta(k);
  return s;
}

double kappa_over_lambda(const ModelParams& p, double lambda_N, int x) {
  // kappa = 1/2 sum_k k_x [alpha_k 2 sinh^2(a/2) - alpha_k gamma_k N^{-1/2} sinh a],
  // a = 2 lambda / sqrt N.
  const double rN = std::sqrt(double(p.N));
  const double b = lambda_N / rN;
  const double sh_half = std::sinh(b);
  const double sh_half_over_l = sinhc(b) / rN;
  const double sh_full_over_l = 2.0 * sinhc(2.0 * b) / rN;
  double s = 0.0;
  for (int k = 1; k <= p.m; ++k) {
    const double kx = k_minus(k, x);
    s += kx * (p.a(k) * 2.0 * sh_half * sh_half_over_l - p.a(k) * p.g(k) / rN * sh_full_over_l);
  }
  return 0.5 * s;
}

DerivedCoefficients derive_coefficients(const ModelParams& p, bool relaxed) {
  validate_params(p);
  if (relaxed ? 2 * p.m > p.N : 4 * p.m > p.N)
    throw InputError(relaxed ? "2m > N: boundary clusters overlap"
                             : "m > N/4: boundary clusters would overlap");

  DerivedCoefficients d;
  d.N = p.N;
  d.m = p.m;
  const double N = p.N;
  const int m = p.m;

  double lam = 0.0;
  for (int k = 1; k <= m; ++k) lam += p.a(k) * p.g(k);
  d.lambda_N = lam;
  const double l2 = lam * lam;

  d.tilde_alpha.resize(m);
  d.gamma_star.resize(m);
  for (int k = 1; k <= m; ++k) {
    double tail = 0.0, tail_g = 0.0;
    for (int l = k + 1; l <= m; ++l) {
      tail += (2.0 * l - k) * p.a(l);
      tail_g += double(l - k) / k * p.a(l);
    }
    d.tilde_alpha[k - 1] = p.a(k) + l2 * (k - 2) / (2.0 * N) * p.a(k) - l2 / (k * N) * tail;
    d.gamma_star[k - 1] = (2.0 * lam * tail_g + lam * p.a(k)) / p.a(k);
    d.tilde_alpha_const =
        std::max(d.tilde_alpha_const, N * std::abs(d.tilde_alpha[k - 1] - p.a(k)) / k);
  }

  const double x = 1.0 / N;
  const double u = std::sinh(2.0 * lam * x) / std::sqrt(x);
  const double v = (std::cosh(2.0 * lam * x) - 1.0) / x;
  double nu = 0.0, bulk = 0.0;
  for (int k = 1; k <= m; ++k) {
    nu += k * (p.g(k) * u - p.a(k) * v);
    bulk += d.ta(k) * (k + l2 * (6.0 * k * k - 5.0 * k) / (12.0 * N));
  }
  d.nu_N = 0.25 * N * nu + l2 * N * bulk;

  // Under Bernoulli(1/2) with sites left of x tilted by exp(-b eta), b = lambda/sqrt N,
  // E[drift of Z_x]/Z_x is nu - N^2/2 tanh(b) sum k alpha_k gamma_k / sqrt N while
  // E[L_lap Z]_x / Z_x is N^2/2 sum tilde_alpha_k (cosh^k b + cosh^-k b - 2).
  const double b = lam / std::sqrt(N);
  const double cb = std::cosh(b);
  double drift_sum = 0.0, lap_sum = 0.0;
  for (int k = 1; k <= m; ++k) {
    drift_sum += k * p.a(k) * p.g(k);
    const double ck = std::pow(cb, k);
    lap_sum += d.ta(k) * (ck + 1.0 / ck - 2.0);
  }
  d.nu_matched = 0.5 * N * N * std::tanh(b) * drift_sum / std::sqrt(N) + 0.5 * N * N * lap_sum;

  // kappa^+ at physical site N-x+1 uses k ^ (N-(N-x+1)+1) = k ^ x: same values as kappa^-.
  d.kappa_minus.resize(m);
  d.kappa_plus.resize(m);
  for (int xs = 0; xs < m; ++xs) {
    d.kappa_minus[xs] = lam * kappa_over_lambda(p, lam, xs);
    d.kappa_plus[xs] = d.kappa_minus[xs];
  }
  d.mu_minus = 1.0 - p.A_minus / N;
  d.mu_plus = 1.0 - p.A_plus / N;
  return d;
}

BoundarySystem boundary_system(const ModelParams& p, const DerivedCoefficients& d, Side side) {
  const int m = p.m;
  const double rN = std::sqrt(double(p.N));
  const double lam = d.lambda_N;
  const double A = side == Side::minus ? p.A_minus : p.A_plus;

  double III = 0.0;
  if (A != 0.0) {
    if (lam == 0.0)
      throw ModelError("Robin parameter A != 0 requires lambda_N != 0 in the boundary system");
    III = A / (lam * rN);
  }

  double full = 0.0;
  for (int k = 1; k <= m; ++k) full += k * d.ta(k);

  BoundarySystem sys;
  sys.sum_rhs.resize(m);
  sys.diff_rhs.resize(m);
  for (int j = 1; j <= m; ++j) {
    double S = 0.0, below = 0.0;
    for (int k = j; k <= m; ++k) S += d.ta(k);
    for (int k = 1; k < j; ++k) below += k * d.ta(k);
    const double II = 0.5 * lam / rN * (full + below + (j - 1) * S);
    const double IV = -2.0 * rN * kappa_over_lambda(p, lam, j - 1);
    sys.sum_rhs[j - 1] = S;
    sys.diff_rhs[j - 1] = II + III + IV;
  }
  return sys;
}

namespace {

std::vector<std::array<double, 2>> back_substitute(const BoundarySystem& sys) {
  const int m = int(sys.sum_rhs.size());
  std::vector<std::array<double, 2>> beta(m);
  double tail = 0.0;  // sum_{l>j} (beta_{l,+} - beta_{l,-})
  for (int j = m; j >= 1; --j) {
    const double S = sys.sum_rhs[j - 1];
    const double D = -tail + sys.diff_rhs[j - 1];
    beta[j - 1] = {0.5 * (S + D), 0.5 * (S - D)};
    tail += D;
  }
  return beta;
}

}  // namespace

BoundaryCoefficients solve_boundary_coefficients(const ModelParams& p,
                                                 const DerivedCoefficients& d) {
  BoundaryCoefficients b;
  b.m = p.m;
  for (Side s : {Side::minus, Side::plus}) {
    b.beta[int(s)] = back_substitute(boundary_system(p, d, s));
    for (int j = 1; j <= p.m; ++j) {
      for (int sg = 0; sg < 2; ++sg) {
        if (b.beta[int(s)][j - 1][sg] < 0.0) {
          std::ostringstream os;
          os << "negative boundary coefficient beta_{" << j << (sg == 0 ? ",+" : ",-")
             << "} on the " << (s == Side::minus ? "left" : "right") << " side at N=" << p.N
             << " (value " << b.beta[int(s)][j - 1][sg] << "); increase N";
          throw ModelError(os.str());
        }
      }
    }
  }
  return b;
}

std::vector<std::array<double, 2>> solve_boundary_dense(const BoundarySystem& sys,
                                                        const std::vector<int>& row_perm) {
  const int m = int(sys.sum_rhs.size());
  const int n = 2 * m;
  // Unknown 2(j-1) is beta_{j,+}, 2(j-1)+1 is beta_{j,-}.
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd r(n);
  for (int j = 1; j <= m; ++j) {
    const int row = 2 * (j - 1);
    M(row, 2 * (j - 1)) = 1.0;
    M(row, 2 * (j - 1) + 1) = 1.0;
    r(row) = sys.sum_rhs[j - 1];
    for (int l = j; l <= m; ++l) {
      M(row + 1, 2 * (l - 1)) = 1.0;
      M(row + 1, 2 * (l - 1) + 1) = -1.0;
    }
    r(row + 1) = sys.diff_rhs[j - 1];
  }
  if (!row_perm.empty()) {
    std::vector<int> seen(row_perm);
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < n; ++i)
      if (int(seen.size()) != n || seen[i] != i) throw InputError("row_perm is not a permutation");
    Eigen::MatrixXd Mp(n, n);
    Eigen::VectorXd rp(n);
    for (int i = 0; i < n; ++i) {
      Mp.row(i) = M.row(row_perm[i]);
      rp(i) = r(row_perm[i]);
    }
    M = Mp;
    r = rp;
  }
  const Eigen::VectorXd sol = M.fullPivLu().solve(r);
  std::vector<std::array<double, 2>> beta(m);
  for (int j = 1; j <= m; ++j) beta[j - 1] = {sol(2 * (j - 1)), sol(2 * (j - 1) + 1)};
  return beta;
}

double boundary_residual(const ModelParams& p, const DerivedCoefficients& d,
                         const BoundaryCoefficients& b) {
  double worst = 0.0;
  for (Side s : {Side::minus, Side::plus}) {
    const BoundarySystem sys = boundary_system(p, d, s);
    for (int j = 1; j <= p.m; ++j) {
      const double sum_res = b.plus(s, j) + b.minus(s, j) - sys.sum_rhs[j - 1];
      double I = 0.0;
      for (int l = j + 1; l <= p.m; ++l) I -= b.plus(s, l) - b.minus(s, l);
      const double diff_res = b.plus(s, j) - b.minus(s, j) - (I + sys.diff_rhs[j - 1]);
      worst = std::max({worst, std::abs(sum_res), std::abs(diff_res)});
    }
  }
  return worst;
}

ValidationReport validate_assumptions(const ModelParams& p, const DerivedCoefficients& d,
                                      const BoundaryCoefficients& b,
                                      const ValidationKnobs& knobs) {
  ValidationReport r;
  for (int k = 1; k <= p.m; ++k) {
    r.sum_k2_alpha += double(k) * k * p.a(k);
    r.sum_k_alpha_gamma += k * p.a(k) * p.g(k);
    r.discrepancy += k * p.a(k) * std::abs(p.g(k) - d.gamma_star[k - 1]);
  }
  r.discrepancy_threshold = knobs.C * std::pow(double(p.N), -0.5 + knobs.beta_c);
  r.discrepancy_ok = r.discrepancy <= r.discrepancy_threshold;
  r.boundary_residual = boundary_residual(p, d, b);
  r.beta_nonnegative = true;
  for (int s = 0; s < 2; ++s)
    for (const auto& pr : b.beta[s])
      if (pr[0] < 0.0 || pr[1] < 0.0) r.beta_nonnegative = false;
  return r;
}

ModelParams with_N(ModelParams p, int N) {
  p.N = N;
  return p;
}

void to_json(nlohmann::json& j, const ModelParams& p) {
  j = nlohmann::json{{"N", p.N},           {"m", p.m},
                     {"alpha", p.alpha},   {"gamma", p.gamma},
                     {"A_minus", p.A_minus}, {"A_plus", p.A_plus},
                     {"T_f", p.T_f}};
}

void from_json(const nlohmann::json& j, ModelParams& p) {
  if (!j.is_object()) throw InputError("model parameters must be a JSON object");
  for (const char* key : {"N", "m", "alpha", "gamma"})
    if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  try {
    p.N = j.at("N").get<int>();
    p.m = j.at("m").get<int>();
    p.alpha = j.at("alpha").get<std::vector<double>>();
    p.gamma = j.at("gamma").get<std::vector<double>>();
    p.A_minus = j.value("A_minus", 0.0);
    p.A_plus = j.value("A_plus", 0.0);
    p.T_f = j.value("T_f", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad field type in model parameters: ") + e.what());
  }
  validate_params(p);
}

void to_json(nlohmann::json& j, const DerivedCoefficients& d) {
  j = nlohmann::json{{"N", d.N},
                     {"m", d.m},
                     {"lambda_N", d.lambda_N},
                     {"tilde_alpha", d.tilde_alpha},
                     {"gamma_star", d.gamma_star},
                     {"nu_N", d.nu_N},
                     {"nu_matched", d.nu_matched},
                     {"kappa_minus", d.kappa_minus},
                     {"kappa_plus", d.kappa_plus},
                     {"mu_minus", d.mu_minus},
                     {"mu_plus", d.mu_plus},
                     {"tilde_alpha_const", d.tilde_alpha_const}};
}

void to_json(nlohmann::json& j, const BoundaryCoefficients& b) {
  auto side = [&](Side s) {
    nlohmann::json arr = nlohmann::json::array();
    for (int jj = 1; jj <= b.m; ++jj)
      arr.push_back({{"j", jj}, {"plus", b.plus(s, jj)}, {"minus", b.minus(s, jj)}});
    return arr;
  };
  j = nlohmann::json{{"m", b.m}, {"left", side(Side::minus)}, {"right", side(Side::plus)}};
}

void to_json(nlohmann::json& j, const ValidationReport& r) {
  j = nlohmann::json{{"sum_k2_alpha", r.sum_k2_alpha},
                     {"sum_k_alpha_gamma", r.sum_k_alpha_gamma},
                     {"discrepancy", r.discrepancy},
                     {"discrepancy_threshold", r.discrepancy_threshold},
                     {"discrepancy_ok", r.discrepancy_ok},
                     {"boundary_residual", r.boundary_residual},
                     {"beta_nonnegative", r.beta_nonnegative},
                     {"ok", r.ok()}};
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open parameter file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("malformed JSON in " + path + ": " + e.what());
  }
  return j.get<ModelParams>();
}

Model Model::build(const ModelParams& p, bool relaxed) {
  Model md;
  md.params = p;
  md.derived = derive_coefficients(p, relaxed);
  md.boundary = solve_boundary_coefficients(p, md.derived);
  return md;
}

}  // namespace openkpz
