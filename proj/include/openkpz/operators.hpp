#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "openkpz/model.hpp"

namespace openkpz {

enum class OpKind { L_lap, nn_laplacian, adjoint, symmetrized };

/// Dense operator on sites 0..N.
struct LatticeOperator {
  Eigen::MatrixXd M;
  OpKind kind = OpKind::L_lap;
  int m = 1;
  double A_minus = 0.0;
  double A_plus = 0.0;

  int N() const { return int(M.rows()) - 1; }
  Eigen::VectorXd apply(const Eigen::VectorXd& f) const { return M * f; }
};

/// Boundary-corrected long-range Laplacian. With Robin parameters the ghost
/// sites -1 and N+1 are folded in with unit weight, i.e. -N A at the corners.
LatticeOperator build_L_lap(const DerivedCoefficients& d, double A_minus = 0.0,
                            double A_plus = 0.0);

/// How Robin parameters enter a nearest-neighbor generator.
/// unit: -N A at the corners, the same perturbation as for L_lap.
/// ghost: U_{-1} = mu U_0 folded through the stencil, i.e. -c N A with c the diffusivity.
enum class RobinFold { unit, ghost };

/// (sum_k k^2 tilde_alpha_k / 2) N^2 Delta_1 with reflecting rows plus the Robin term.
LatticeOperator build_nn_laplacian(const DerivedCoefficients& d, double A_minus = 0.0,
                                   double A_plus = 0.0, RobinFold fold = RobinFold::unit);

/// Closed form of the flat adjoint of L_lap; needs m <= N/4.
Eigen::MatrixXd adjoint_closed_form(const DerivedCoefficients& d, double A_minus = 0.0,
                                    double A_plus = 0.0);

struct AdjointResult {
  LatticeOperator op;
  double closed_form_mismatch = 0.0;  // max entrywise |transpose - closed form|
};

/// Transpose of L_lap, checked against the closed form. Throws ModelError beyond 1e-12
/// relative to the operator scale.
AdjointResult adjoint_flat(const LatticeOperator& op, const DerivedCoefficients& d);

struct InvariantMeasure {
  Eigen::VectorXd pi;  // sum pi = N+1
  double residual = 0.0;  // ||L^T pi||_inf / ||L||_inf
};

/// Kernel of the transpose by full-pivot LU. Throws ModelError unless the kernel is
/// one-dimensional and strictly positive.
InvariantMeasure invariant_measure(const LatticeOperator& op);

struct MaxPrincipleReport {
  int argmax = 0;
  int argmin = 0;
  bool max_in_cluster = false;
  bool min_in_cluster = false;
  double ratio = 1.0;  // max pi / min pi
  bool ok() const { return max_in_cluster && min_in_cluster; }
};

/// Extrema of pi must sit in the boundary clusters; ties count for the boundary.
MaxPrincipleReport max_principle_check(const Eigen::VectorXd& pi, int m, double tie_tol = 1e-12);

/// Neumann -Delta_1 on 0..N (unscaled).
Eigen::MatrixXd neumann_D(int N);

struct NashTerms {
  double lhs = 0.0;        // ||phi||_2
  double l1_term = 0.0;    // N^{-1/2} ||phi||_1
  double grad_term = 0.0;  // <phi, D phi>^{1/6} ||phi||_1^{2/3}, direct form: eig roundoff survives the 1/6 power
  double dirichlet_eig = 0.0;     // ||D^{1/2} phi||^2 via the eigendecomposition
  double dirichlet_direct = 0.0;  // <phi, D phi>
  double fitted_C() const { return lhs / (l1_term + grad_term); }
};

/// Pieces of the Nash-type inequality; the square root of D is computed once.
class NashEvaluator {
public:
  explicit NashEvaluator(int N);
  NashTerms eval(const Eigen::VectorXd& phi) const;

private:
  int N_;
  Eigen::MatrixXd D_;
  Eigen::MatrixXd sqrtD_;
};

/// -sum_x pi_x phi_x (L phi)_x.
double dirichlet_form(const LatticeOperator& op, const Eigen::VectorXd& pi,
                      const Eigen::VectorXd& phi);

/// 1/2 (L + Pi^{-1} L^T Pi), self-adjoint in l^2(pi).
LatticeOperator symmetrized(const LatticeOperator& op, const Eigen::VectorXd& pi);

}  // namespace openkpz
