#include <doctest.h>

#include <cmath>

#include "openkpz/kernels.hpp"

using namespace openkpz;

namespace {

DerivedCoefficients coeffs(int N, std::vector<double> a, std::vector<double> g) {
  ModelParams p;
  p.N = N;
  p.m = int(a.size());
  p.alpha = std::move(a);
  p.gamma = std::move(g);
  return derive_coefficients(p);
}

}  // namespace

TEST_CASE("full-line kernel against a padded matrix exponential") {
  const auto d = coeffs(32, {1.0}, {-0.5});
  const double t = 0.01;
  const int R = int(std::ceil(12 * 32 * std::sqrt(t))) + 64;
  const auto row = padded_full_line(d, t, R);
  const FullLineKernel G(d, t);
  double mass = 0.0;
  for (int j = 0; j <= 2 * R; ++j) {
    CHECK(std::abs(G(j - R) - row[j]) <= 1e-8);
    mass += G(j - R);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("image kernel is the reflecting nearest-neighbor semigroup") {
  const auto d = coeffs(32, {1.0}, {-0.5});
  const HeatKernel nn = make_heat_kernel(d, KernelKind::nn_neumann);
  for (double t : {1e-3, 1e-2, 1e-1}) {
    const Eigen::MatrixXd img = ImageKernel(d, t).matrix();
    CHECK((img - nn.P(t)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((img - padded_image_kernel(d, t, 96)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("mass: conserved under Neumann, lost under A_- > 0") {
  const auto d = coeffs(40, {1.0, 0.5}, {-0.5, -0.5});
  const HeatKernel U = make_heat_kernel(d, KernelKind::neumann);
  const HeatKernel UA = make_heat_kernel(d, KernelKind::robin, 1.0, 0.0);
  double prev = 1.0;
  for (double t : {1e-4, 1e-3, 1e-2, 1e-1}) {
    CHECK((U.P(t).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
    const double mass = UA.P(t).row(0).sum();
    CHECK(mass < prev);
    prev = mass;
  }
}

TEST_CASE("Chapman-Kolmogorov for every kind") {
  const auto d = coeffs(48, {1.0, 0.5}, {-0.5, -0.5});
  for (KernelKind k : {KernelKind::neumann, KernelKind::robin, KernelKind::nn_neumann,
                       KernelKind::nn_robin}) {
    const HeatKernel hk = make_heat_kernel(d, k, 0.5, -0.5);
    CHECK_MESSAGE(chapman_kolmogorov_error(hk, 0.003, 0.02) <= 1e-8, kernel_kind_name(k));
  }
  const auto d1 = coeffs(48, {1.0}, {-0.5});
  CHECK(chapman_kolmogorov_error_image(d1, 0.003, 0.02) <= 1e-8);
  CHECK(chapman_kolmogorov_error_full_line(d, 0.003, 0.02) <= 1e-8);
}

TEST_CASE("Duhamel identities") {
  const auto d = coeffs(16, {1.0, 0.5}, {-0.5, -0.5});
  CHECK(duhamel_boundary_residual(d, 0.3, 0.3).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(duhamel_robin_residual(d, 0.0, 0.0, 0.0, 0.05).cwiseAbs().maxCoeff() == 0.0);
  CHECK(duhamel_boundary_residual(d, 0.0, 0.02).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(duhamel_robin_residual(d, 0.5, -0.5, 0.0, 0.05).cwiseAbs().maxCoeff() <= 1e-6);
  const auto ord = duhamel_order(d, true, 0.5, -0.5, 0.05, {64, 128, 256});
  for (double o : ord.observed_order) CHECK(o == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("make_heat_kernel rejects non-matrix kinds") {
  const auto d = coeffs(16, {1.0}, {0.0});
  CHECK_THROWS_AS(make_heat_kernel(d, KernelKind::image_sum), InputError);
}
