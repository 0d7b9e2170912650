#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "openkpz/model.hpp"
#include "openkpz/operators.hpp"

namespace openkpz {

enum class KernelKind { full_line, image_sum, nn_neumann, nn_robin, robin, neumann };

const char* kernel_kind_name(KernelKind k);

/// Full-line kernel G(t, d) = (1/2pi) int cos(d xi) exp(-N^2 t sum tilde_alpha_l (1 - cos l xi)),
/// tabulated by an inverse FFT on Q points. The table is exactly the Q-periodization of G,
/// so Q is chosen well beyond the range of interest plus the spread of the kernel.
class FullLineKernel {
public:
  FullLineKernel(const DerivedCoefficients& d, double t, long min_range = 0);
  double operator()(long dist) const;
  double t() const { return t_; }
  long range() const { return range_; }
  /// N sqrt(t sum k^2 tilde_alpha): the standard deviation of the jump process.
  double spread() const { return sigma_; }

private:
  double t_;
  double sigma_;
  long Q_;
  long range_;
  std::vector<double> g_;
};

/// Direct trapezoid sum for a single value; independent of the FFT route.
double full_line_kernel(const DerivedCoefficients& d, double t, long dist);

/// Method-of-images kernel on 0..N: reflections about -1/2 and N+1/2.
class ImageKernel {
public:
  ImageKernel(const DerivedCoefficients& d, double t);
  /// x may lie outside 0..N (the natural extension used by the boundary Duhamel formula).
  double value(long x, long y) const;
  Eigen::MatrixXd matrix() const;

private:
  int N_;
  int K_;
  FullLineKernel G_;
};

/// Semigroup exp(tL) for a dense generator L acting on the backward variable x.
class HeatKernel {
public:
  HeatKernel(KernelKind kind, Eigen::MatrixXd generator);
  KernelKind kind() const { return kind_; }
  int N() const { return int(L_.rows()) - 1; }
  const Eigen::MatrixXd& generator() const { return L_; }
  Eigen::MatrixXd P(double t) const;
  /// "eig_sym", "eig", or "pade" when the eigenbasis reconstruction failed.
  const std::string& method() const { return method_; }

private:
  KernelKind kind_;
  Eigen::MatrixXd L_;
  std::string method_;
  Eigen::MatrixXd V_;
  Eigen::VectorXd lam_;
  Eigen::MatrixXcd Vc_, Vinv_;
  Eigen::VectorXcd lamc_;
};

/// Builds the matrix kinds (nn_neumann, nn_robin, robin, neumann). Neumann kinds ignore A.
HeatKernel make_heat_kernel(const DerivedCoefficients& d, KernelKind kind, double A_minus = 0.0,
                            double A_plus = 0.0);

/// exp(tL) on a lattice padded by `pad` sites on each side, restricted to 0..N after
/// folding the padded mass back with images; the full-line side of the oracle triangle.
Eigen::MatrixXd padded_image_kernel(const DerivedCoefficients& d, double t, int pad);

/// exp(tL) of the full-line generator on [-R, R]; returns the row through 0.
std::vector<double> padded_full_line(const DerivedCoefficients& d, double t, int R);

/// max entry of |P(s)P(t) - P(s+t)|.
double chapman_kolmogorov_error(const HeatKernel& k, double s, double t);
double chapman_kolmogorov_error_image(const DerivedCoefficients& d, double s, double t);
double chapman_kolmogorov_error_full_line(const DerivedCoefficients& d, double s, double t);

struct DuhamelOptions {
  double tol = 1e-8;  // adaptive Simpson tolerance
  int fixed_panels = 0;  // > 0 selects composite Simpson with this many panels
};

/// U - [T + int_0^rho U(rho-r) D T(r) dr] over all (x,y), D = L_lap - 1/2 sum tilde_alpha Delta_k
/// on the image-extended T. Needs A = 0.
Eigen::MatrixXd duhamel_boundary_residual(const DerivedCoefficients& d, double S, double T,
                                          const DuhamelOptions& opt = {});

/// U^A - [U^0 - int U^0(rho-r)_{.,0} N A_- U^A(r)_{0,.} dr - (same at N)] over all (x,y).
Eigen::MatrixXd duhamel_robin_residual(const DerivedCoefficients& d, double A_minus,
                                       double A_plus, double S, double T,
                                       const DuhamelOptions& opt = {});

struct OrderReport {
  std::vector<int> panels;
  std::vector<double> residuals;
  std::vector<double> observed_order;  // log2(e_n / e_{2n})
};

/// Residual under composite Simpson refinement; `robin` picks the second identity.
OrderReport duhamel_order(const DerivedCoefficients& d, bool robin, double A_minus, double A_plus,
                          double rho, const std::vector<int>& panels);

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& M);

}  // namespace openkpz
