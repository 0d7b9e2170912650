#include "openkpz/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <ostream>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include "openkpz/quadrature.hpp"

namespace openkpz {

namespace {

constexpr double kTwoPi = 6.283185307179586;

double symbol(const DerivedCoefficients& d, double t, double xi) {
  const double N2 = double(d.N) * d.N;
  double s = 0.0;
  for (int l = 1; l <= d.m; ++l) s += d.ta(l) * (1.0 - std::cos(l * xi));
  return std::exp(-N2 * t * s);
}

double spread_of(const DerivedCoefficients& d, double t) {
  return d.N * std::sqrt(std::max(t, 0.0) * d.sum_k2_tilde_alpha());
}

// Distance beyond which G is below double precision noise.
long tail_margin(double sigma, int m) { return long(std::ceil(12.0 * sigma)) + 40L * m; }

}  // namespace

const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::full_line: return "full_line";
    case KernelKind::image_sum: return "image_sum";
    case KernelKind::nn_neumann: return "nn_neumann";
    case KernelKind::nn_robin: return "nn_robin";
    case KernelKind::robin: return "robin";
    case KernelKind::neumann: return "neumann";
  }
  return "?";
}

FullLineKernel::FullLineKernel(const DerivedCoefficients& d, double t, long min_range)
    : t_(t), sigma_(spread_of(d, t)) {
  if (t < 0.0) throw InputError("kernel time must be non-negative");
  const long margin = tail_margin(sigma_, d.m);
  Q_ = 64;
  while (Q_ < 2 * (min_range + 2 * margin)) Q_ *= 2;
  range_ = Q_ / 2 - margin;
  std::vector<std::complex<double>> phi(Q_);
  for (long j = 0; j < Q_; ++j) phi[j] = symbol(d, t, kTwoPi * double(j) / double(Q_));
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> g;
  fft.inv(g, phi);
  g_.resize(Q_);
  for (long j = 0; j < Q_; ++j) g_[j] = g[j].real();
}

double FullLineKernel::operator()(long dist) const {
  if (dist > range_ || dist < -range_) return 0.0;
  const long i = ((dist % Q_) + Q_) % Q_;
  return g_[i];
}

double full_line_kernel(const DerivedCoefficients& d, double t, long dist) {
  const double sigma = spread_of(d, t);
  long Q = 64;
  while (Q < 2 * (std::labs(dist) + 2 * tail_margin(sigma, d.m))) Q *= 2;
  // Trapezoid on a periodic integrand: the symbol is even, so use the half range.
  double acc = symbol(d, t, 0.0) + symbol(d, t, M_PI) * std::cos(M_PI * double(dist));
  for (long j = 1; j < Q / 2; ++j) {
    const double xi = kTwoPi * double(j) / double(Q);
    acc += 2.0 * std::cos(double(dist) * xi) * symbol(d, t, xi);
  }
  return acc / double(Q);
}

ImageKernel::ImageKernel(const DerivedCoefficients& d, double t)
    : N_(d.N),
      K_(int(std::ceil(double(tail_margin(spread_of(d, t), d.m) + 2 * d.N + 2) /
                       (2.0 * (d.N + 1)))) + 1),
      G_(d, t, long(2 * K_ + 2) * (d.N + 1) + d.N + d.m) {}

double ImageKernel::value(long x, long y) const {
  const long P = 2L * (N_ + 1);
  double s = 0.0;
  for (long k = -K_; k <= K_; ++k) {
    s += G_(x - (y + k * P));
    s += G_(x - (-1 - y + k * P));
  }
  return s;
}

Eigen::MatrixXd ImageKernel::matrix() const {
  Eigen::MatrixXd M(N_ + 1, N_ + 1);
  for (int x = 0; x <= N_; ++x)
    for (int y = 0; y <= N_; ++y) M(x, y) = value(x, y);
  return M;
}

HeatKernel::HeatKernel(KernelKind kind, Eigen::MatrixXd generator)
    : kind_(kind), L_(std::move(generator)) {
  const double scale = std::max(1.0, L_.cwiseAbs().maxCoeff());
  if ((L_ - L_.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * scale) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (L_ + L_.transpose()));
    if (es.info() != Eigen::Success) throw ModelError("eigendecomposition did not converge");
    V_ = es.eigenvectors();
    lam_ = es.eigenvalues();
    method_ = "eig_sym";
    return;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(L_);
  if (es.info() == Eigen::Success) {
    Vc_ = es.eigenvectors();
    lamc_ = es.eigenvalues();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Vc_);
    Vinv_ = lu.inverse();
    const Eigen::MatrixXcd rec = Vc_ * lamc_.asDiagonal() * Vinv_;
    const double err = (rec.real() - L_).cwiseAbs().maxCoeff();
    const double inv_err =
        (Vc_ * Vinv_ - Eigen::MatrixXcd::Identity(L_.rows(), L_.cols())).cwiseAbs().maxCoeff();
    if (err <= 1e-11 * scale && inv_err <= 1e-10) {
      method_ = "eig";
      return;
    }
  }
  method_ = "pade";
}

Eigen::MatrixXd HeatKernel::P(double t) const {
  if (method_ == "eig_sym") {
    const Eigen::VectorXd e = (lam_ * t).array().exp();
    return V_ * e.asDiagonal() * V_.transpose();
  }
  if (method_ == "eig") {
    const Eigen::VectorXcd e = (lamc_ * t).array().exp();
    return (Vc_ * e.asDiagonal() * Vinv_).real();
  }
  const Eigen::MatrixXd A = L_ * t;
  return A.exp();
}

HeatKernel make_heat_kernel(const DerivedCoefficients& d, KernelKind kind, double A_minus,
                            double A_plus) {
  switch (kind) {
    case KernelKind::nn_neumann: return HeatKernel(kind, build_nn_laplacian(d).M);
    case KernelKind::nn_robin: return HeatKernel(kind, build_nn_laplacian(d, A_minus, A_plus).M);
    case KernelKind::neumann: return HeatKernel(kind, build_L_lap(d).M);
    case KernelKind::robin: return HeatKernel(kind, build_L_lap(d, A_minus, A_plus).M);
    default: throw InputError("make_heat_kernel handles matrix kinds only");
  }
}

namespace {

// Full-line generator 1/2 N^2 sum tilde_alpha_k Delta_k on `n` sites, legs leaving the
// window dropped. Symmetric, so exp(tL) comes from a symmetric eigensolve.
Eigen::MatrixXd truncated_line_propagator(const DerivedCoefficients& d, double t, int n) {
  const double N2 = double(d.N) * d.N;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= d.m; ++k) {
      const double w = 0.5 * N2 * d.ta(k);
      L(i, i) -= 2.0 * w;
      if (i + k < n) L(i, i + k) += w;
      if (i - k >= 0) L(i, i - k) += w;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  const Eigen::VectorXd e = (es.eigenvalues() * t).array().exp();
  return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd padded_image_kernel(const DerivedCoefficients& d, double t, int pad) {
  const int N = d.N;
  const int n = N + 1 + 2 * pad;
  const Eigen::MatrixXd P = truncated_line_propagator(d, t, n);
  const long period = 2L * (N + 1);
  auto fold = [&](long z) {
    long r = ((z % period) + period) % period;
    return r <= N ? r : period - 1 - r;
  };
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int x = 0; x <= N; ++x)
    for (int j = 0; j < n; ++j) M(x, fold(long(j) - pad)) += P(x + pad, j);
  return M;
}

std::vector<double> padded_full_line(const DerivedCoefficients& d, double t, int R) {
  const Eigen::MatrixXd P = truncated_line_propagator(d, t, 2 * R + 1);
  std::vector<double> row(2 * R + 1);
  for (int j = 0; j <= 2 * R; ++j) row[j] = P(R, j);
  return row;
}

double chapman_kolmogorov_error(const HeatKernel& k, double s, double t) {
  return (k.P(s) * k.P(t) - k.P(s + t)).cwiseAbs().maxCoeff();
}

double chapman_kolmogorov_error_image(const DerivedCoefficients& d, double s, double t) {
  const Eigen::MatrixXd A = ImageKernel(d, s).matrix();
  const Eigen::MatrixXd B = ImageKernel(d, t).matrix();
  const Eigen::MatrixXd C = ImageKernel(d, s + t).matrix();
  return (A * B - C).cwiseAbs().maxCoeff();
}

double chapman_kolmogorov_error_full_line(const DerivedCoefficients& d, double s, double t) {
  const FullLineKernel Gs(d, s), Gt(d, t);
  const long R = d.N;
  const long Z = R + tail_margin(spread_of(d, std::max(s, t)), d.m);
  const FullLineKernel Gst(d, s + t, R);
  double worst = 0.0;
  for (long dist = -R; dist <= R; ++dist) {
    double acc = 0.0;
    for (long z = -Z; z <= Z; ++z) acc += Gs(dist - z) * Gt(z);
    worst = std::max(worst, std::abs(acc - Gst(dist)));
  }
  return worst;
}

namespace {

template <class F>
Eigen::MatrixXd integrate(F&& f, double a, double b, const DuhamelOptions& opt) {
  if (b <= a) return Eigen::MatrixXd::Zero(f(a).rows(), f(a).cols());
  if (opt.fixed_panels > 0) return composite_simpson(f, a, b, opt.fixed_panels);
  return adaptive_simpson(f, a, b, opt.tol);
}

// Rows of D T(r) for the boundary clusters; rows elsewhere vanish identically.
Eigen::MatrixXd boundary_defect(const DerivedCoefficients& d, const Eigen::MatrixXd& Llap,
                                double r, const std::vector<int>& rows) {
  const int N = d.N;
  const double N2 = double(N) * N;
  const ImageKernel T(d, r);
  Eigen::MatrixXd out(rows.size(), N + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int w = rows[i];
    for (int y = 0; y <= N; ++y) {
      double lap = 0.0;
      for (int z = std::max(0, w - d.m); z <= std::min(N, w + d.m); ++z)
        if (Llap(w, z) != 0.0) lap += Llap(w, z) * T.value(z, y);
      double free = 0.0;
      const double tw = T.value(w, y);
      for (int k = 1; k <= d.m; ++k)
        free += 0.5 * N2 * d.ta(k) * (T.value(w + k, y) + T.value(w - k, y) - 2.0 * tw);
      out(i, y) = lap - free;
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd duhamel_boundary_residual(const DerivedCoefficients& d, double S, double T,
                                          const DuhamelOptions& opt) {
  const int N = d.N;
  const double rho = T - S;
  const HeatKernel U = make_heat_kernel(d, KernelKind::neumann);
  const Eigen::MatrixXd& L = U.generator();
  std::vector<int> rows;
  for (int w = 0; w < d.m; ++w) rows.push_back(w);
  for (int w = N - d.m + 1; w <= N; ++w) rows.push_back(w);
  auto integrand = [&](double r) -> Eigen::MatrixXd {
    const Eigen::MatrixXd Ur = U.P(rho - r);
    Eigen::MatrixXd cols(N + 1, rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) cols.col(i) = Ur.col(rows[i]);
    return cols * boundary_defect(d, L, r, rows);
  };
  const Eigen::MatrixXd I = integrate(integrand, 0.0, rho, opt);
  return U.P(rho) - ImageKernel(d, rho).matrix() - I;
}

Eigen::MatrixXd duhamel_robin_residual(const DerivedCoefficients& d, double A_minus,
                                       double A_plus, double S, double T,
                                       const DuhamelOptions& opt) {
  const int N = d.N;
  const double rho = T - S;
  const HeatKernel U0 = make_heat_kernel(d, KernelKind::neumann);
  const HeatKernel UA = make_heat_kernel(d, KernelKind::robin, A_minus, A_plus);
  auto integrand = [&](double r) -> Eigen::MatrixXd {
    const Eigen::MatrixXd P0 = U0.P(rho - r);
    const Eigen::MatrixXd PA = UA.P(r);
    return N * A_minus * P0.col(0) * PA.row(0) + N * A_plus * P0.col(N) * PA.row(N);
  };
  const Eigen::MatrixXd I = integrate(integrand, 0.0, rho, opt);
  return UA.P(rho) - (U0.P(rho) - I);
}

OrderReport duhamel_order(const DerivedCoefficients& d, bool robin, double A_minus, double A_plus,
                          double rho, const std::vector<int>& panels) {
  OrderReport r;
  for (int n : panels) {
    DuhamelOptions opt;
    opt.fixed_panels = n;
    const Eigen::MatrixXd res = robin ? duhamel_robin_residual(d, A_minus, A_plus, 0.0, rho, opt)
                                      : duhamel_boundary_residual(d, 0.0, rho, opt);
    r.panels.push_back(n);
    r.residuals.push_back(res.cwiseAbs().maxCoeff());
  }
  for (std::size_t i = 0; i + 1 < r.residuals.size(); ++i)
    r.observed_order.push_back(std::log2(r.residuals[i] / r.residuals[i + 1]) /
                               std::log2(double(r.panels[i + 1]) / r.panels[i]));
  return r;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& M) {
  os.precision(17);
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = 0; j < M.cols(); ++j) os << (j ? "," : "") << M(i, j);
    os << '\n';
  }
}

}  // namespace openkpz
