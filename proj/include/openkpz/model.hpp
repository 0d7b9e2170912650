#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace openkpz {

/// Malformed or out-of-range user input.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The model is well formed but has no valid instance at this N.
class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ModelLimits {
  double ellipticity_floor = 1e-3;
  int max_jump = 32;
};

/// Coefficients are stored 0-based: alpha[k-1] is the jump-k coefficient.
struct ModelParams {
  int N = 0;
  int m = 1;
  std::vector<double> alpha;
  std::vector<double> gamma;
  double A_minus = 0.0;
  double A_plus = 0.0;
  double T_f = 1.0;

  double a(int k) const { return alpha[k - 1]; }
  double g(int k) const { return gamma[k - 1]; }
};

void validate_params(const ModelParams& p, const ModelLimits& lim = {});

struct DerivedCoefficients {
  int N = 0;
  int m = 0;
  double lambda_N = 0.0;
  std::vector<double> tilde_alpha;
  std::vector<double> gamma_star;
  double nu_N = 0.0;
  // Renormalization that makes the Bernoulli(1/2) bulk drift of Z match the
  // discrete Laplacian exactly. nu_N is its large-N asymptote only.
  double nu_matched = 0.0;
  // Indexed by distance to the respective edge, x = 0..m-1.
  std::vector<double> kappa_minus;
  std::vector<double> kappa_plus;
  double mu_minus = 1.0;
  double mu_plus = 1.0;
  // max_k N|tilde_alpha_k - alpha_k| / k
  double tilde_alpha_const = 0.0;

  double ta(int k) const { return tilde_alpha[k - 1]; }
  double sum_k2_tilde_alpha() const;
  double sum_k3_tilde_alpha() const;
};

/// `relaxed` only requires the two flip clusters to be disjoint (2m <= N) instead of
/// m <= N/4; used by exhaustive checks on very small lattices.
DerivedCoefficients derive_coefficients(const ModelParams& p, bool relaxed = false);

/// kappa_{N,x}/lambda_N evaluated without cancellation; finite at lambda_N = 0.
double kappa_over_lambda(const ModelParams& p, double lambda_N, int x);

enum class Side { minus = 0, plus = 1 };

struct BoundaryCoefficients {
  int m = 0;
  // beta[side][j-1][0] is beta_{j,+}, beta[side][j-1][1] is beta_{j,-}.
  std::array<std::vector<std::array<double, 2>>, 2> beta;

  double plus(Side s, int j) const { return beta[int(s)][j - 1][0]; }
  double minus(Side s, int j) const { return beta[int(s)][j - 1][1]; }
};

/// Right-hand sides of the boundary system for one side.
struct BoundarySystem {
  std::vector<double> sum_rhs;   // S_j = sum_{k>=j} tilde_alpha_k
  std::vector<double> diff_rhs;  // II_j + III + IV_j (I is the coupling term)
};

BoundarySystem boundary_system(const ModelParams& p, const DerivedCoefficients& d,
                               Side side);

/// Back-substitution from j = m down to 1. Throws ModelError on a negative beta.
BoundaryCoefficients solve_boundary_coefficients(const ModelParams& p,
                                                 const DerivedCoefficients& d);

/// Dense 2m x 2m solve of the same system; `row_perm` reorders the equations.
std::vector<std::array<double, 2>> solve_boundary_dense(const BoundarySystem& sys,
                                                        const std::vector<int>& row_perm = {});

/// Max absolute residual of both defining equations over both sides.
double boundary_residual(const ModelParams& p, const DerivedCoefficients& d,
                         const BoundaryCoefficients& b);

struct ValidationReport {
  double sum_k2_alpha = 0.0;
  double sum_k_alpha_gamma = 0.0;
  double discrepancy = 0.0;
  double discrepancy_threshold = 0.0;
  bool discrepancy_ok = false;
  double boundary_residual = 0.0;
  bool beta_nonnegative = false;
  bool ok() const { return discrepancy_ok && beta_nonnegative && boundary_residual <= 1e-12; }
};

struct ValidationKnobs {
  double C = 1.0;
  double beta_c = 0.0;
};

ValidationReport validate_assumptions(const ModelParams& p, const DerivedCoefficients& d,
                                      const BoundaryCoefficients& b,
                                      const ValidationKnobs& knobs = {});

/// Copy of p at a different N; coefficients are kept as given.
ModelParams with_N(ModelParams p, int N);

void to_json(nlohmann::json& j, const ModelParams& p);
void from_json(const nlohmann::json& j, ModelParams& p);
void to_json(nlohmann::json& j, const DerivedCoefficients& d);
void to_json(nlohmann::json& j, const BoundaryCoefficients& b);
void to_json(nlohmann::json& j, const ValidationReport& r);

ModelParams load_params(const std::string& path);

/// Everything the dynamics needs, derived once from the parameters.
struct Model {
  ModelParams params;
  DerivedCoefficients derived;
  BoundaryCoefficients boundary;

  static Model build(const ModelParams& p, bool relaxed = false);
  int N() const { return params.N; }
  int m() const { return params.m; }
};

}  // namespace openkpz
