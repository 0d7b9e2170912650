#include "openkpz/operators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>

namespace openkpz {

LatticeOperator build_L_lap(const DerivedCoefficients& d, double A_minus, double A_plus) {
  const int N = d.N;
  const int m = d.m;
  const double N2 = double(N) * N;
  LatticeOperator op;
  op.m = m;
  op.A_minus = A_minus;
  op.A_plus = A_plus;
  op.M = Eigen::MatrixXd::Zero(N + 1, N + 1);
  auto leg = [&](int x, int y, double w) {
    op.M(x, y) += w;
    op.M(x, x) -= w;
  };
  for (int x = 0; x <= N; ++x) {
    for (int k = 1; k <= m; ++k) {
      const double w = 0.5 * N2 * d.ta(k);
      if (x < m) {
        leg(x, x + k, w);
        leg(x, x - std::min(k, x), w);
      } else if (x > N - m) {
        leg(x, x - k, w);
        leg(x, x + std::min(k, N - x), w);
      } else {
        leg(x, x + k, w);
        leg(x, x - k, w);
      }
    }
  }
  op.M(0, 0) -= N * A_minus;
  op.M(N, N) -= N * A_plus;
  return op;
}

LatticeOperator build_nn_laplacian(const DerivedCoefficients& d, double A_minus, double A_plus,
                                   RobinFold fold) {
  const int N = d.N;
  const double c = 0.5 * d.sum_k2_tilde_alpha();
  const double w = c * double(N) * N;
  LatticeOperator op;
  op.kind = OpKind::nn_laplacian;
  op.m = 1;
  op.A_minus = A_minus;
  op.A_plus = A_plus;
  op.M = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int x = 0; x <= N; ++x) {
    op.M(x, x) = -2.0 * w;
    if (x > 0) op.M(x, x - 1) = w;
    if (x < N) op.M(x, x + 1) = w;
  }
  op.M(0, 0) += w;
  op.M(N, N) += w;
  const double weight = fold == RobinFold::ghost ? c : 1.0;
  op.M(0, 0) -= weight * N * A_minus;
  op.M(N, N) -= weight * N * A_plus;
  return op;
}

Eigen::MatrixXd adjoint_closed_form(const DerivedCoefficients& d, double A_minus, double A_plus) {
  const int N = d.N;
  const int m = d.m;
  if (4 * m > N) throw InputError("closed-form adjoint needs m <= N/4");
  const double N2 = double(N) * N;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N + 1, N + 1);
  // Left half; the right half is its reflection x -> N-x.
  Eigen::MatrixXd half = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int x = 0; 2 * x <= N; ++x) {
    for (int k = 1; k <= m; ++k) {
      const double w = 0.5 * N2 * d.ta(k);
      if (x >= k) {
        half(x, x + k) += w;
        half(x, x - k) += w;
        half(x, x) -= 2.0 * w;
      } else {
        half(x, x + k) += w;
        half(x, x) -= 2.0 * w;
      }
      if (x == 0)
        for (int j = 0; j < k; ++j) half(x, j) += w;
    }
  }
  for (int x = 0; x <= N; ++x) {
    if (2 * x <= N) {
      A.row(x) = half.row(x);
    } else {
      const int r = N - x;
      for (int y = 0; y <= N; ++y) A(x, y) = half(r, N - y);
    }
  }
  A(0, 0) -= N * A_minus;
  A(N, N) -= N * A_plus;
  return A;
}

AdjointResult adjoint_flat(const LatticeOperator& op, const DerivedCoefficients& d) {
  AdjointResult r;
  r.op = op;
  r.op.kind = OpKind::adjoint;
  r.op.M = op.M.transpose();
  const Eigen::MatrixXd cf = adjoint_closed_form(d, op.A_minus, op.A_plus);
  r.closed_form_mismatch = (r.op.M - cf).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, op.M.cwiseAbs().maxCoeff());
  if (r.closed_form_mismatch > 1e-12 * scale)
    throw ModelError("adjoint closed form disagrees with the transpose");
  return r;
}

InvariantMeasure invariant_measure(const LatticeOperator& op) {
  const Eigen::MatrixXd T = op.M.transpose();
  const double scale = op.M.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(T);
  lu.setThreshold(1e-10);
  const Eigen::MatrixXd ker = lu.kernel();
  if (ker.cols() != 1) throw ModelError("invariant measure: kernel dimension is not 1");
  Eigen::VectorXd pi = ker.col(0);
  if (pi.sum() < 0) pi = -pi;
  pi *= double(pi.size()) / pi.sum();
  if (pi.minCoeff() <= 0.0) throw ModelError("invariant measure is not strictly positive");
  InvariantMeasure im;
  im.pi = pi;
  im.residual = (T * pi).cwiseAbs().maxCoeff() / scale;
  return im;
}

MaxPrincipleReport max_principle_check(const Eigen::VectorXd& pi, int m, double tie_tol) {
  const int N = int(pi.size()) - 1;
  auto in_cluster = [&](int x) { return x <= m - 1 || x >= N - m + 1; };
  MaxPrincipleReport r;
  const double mx = pi.maxCoeff(&r.argmax);
  const double mn = pi.minCoeff(&r.argmin);
  r.ratio = mx / mn;
  const double tol = tie_tol * mx;
  for (int x = 0; x <= N; ++x) {
    if (pi[x] >= mx - tol && in_cluster(x)) {
      r.max_in_cluster = true;
      r.argmax = x;
    }
    if (pi[x] <= mn + tol && in_cluster(x)) {
      r.min_in_cluster = true;
      r.argmin = x;
    }
  }
  return r;
}

Eigen::MatrixXd neumann_D(int N) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int x = 0; x <= N; ++x) {
    if (x > 0) {
      D(x, x) += 1.0;
      D(x, x - 1) -= 1.0;
    }
    if (x < N) {
      D(x, x) += 1.0;
      D(x, x + 1) -= 1.0;
    }
  }
  return D;
}

NashEvaluator::NashEvaluator(int N) : N_(N), D_(neumann_D(N)) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D_);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  sqrtD_ = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

NashTerms NashEvaluator::eval(const Eigen::VectorXd& phi) const {
  NashTerms t;
  const double l1 = phi.cwiseAbs().sum();
  t.lhs = phi.norm();
  t.l1_term = l1 / std::sqrt(double(N_));
  t.dirichlet_eig = (sqrtD_ * phi).squaredNorm();
  t.dirichlet_direct = phi.dot(D_ * phi);
  t.grad_term = std::pow(std::max(t.dirichlet_direct, 0.0), 1.0 / 6.0) * std::pow(l1, 2.0 / 3.0);
  return t;
}

double dirichlet_form(const LatticeOperator& op, const Eigen::VectorXd& pi,
                      const Eigen::VectorXd& phi) {
  return -(pi.array() * phi.array() * (op.M * phi).array()).sum();
}

LatticeOperator symmetrized(const LatticeOperator& op, const Eigen::VectorXd& pi) {
  LatticeOperator s = op;
  s.kind = OpKind::symmetrized;
  const Eigen::VectorXd inv = pi.cwiseInverse();
  s.M = 0.5 * (op.M + inv.asDiagonal() * op.M.transpose() * pi.asDiagonal());
  return s;
}

}  // namespace openkpz
