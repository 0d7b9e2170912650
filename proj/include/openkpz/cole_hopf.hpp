#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "openkpz/dynamics.hpp"

namespace openkpz {

/// heights[x] = h0 + N^{-1/2} sum_{y=1}^{x} eta_y,  Z[x] = exp(-lambda heights[x] + nu t).
struct HeightState {
  int N = 0;
  double lambda = 0.0;
  double nu = 0.0;
  double h0 = 0.0;
  double t = 0.0;
  std::vector<double> heights;
  std::vector<double> Z;
};

/// State at t = 0 with h0 = 0. `nu` is the renormalization used in Z.
HeightState init_height(const Configuration& cfg, double lambda, double nu);

/// Incremental update after `e` has been applied to `cfg`. O(m) sites touched.
void update_on_event(HeightState& st, const Configuration& cfg, const EventDescriptor& e);

/// Moves the clock; rescales Z by exp(nu dt).
void advance_time(HeightState& st, double t);

/// Largest deviation of the incremental heights from a full recomputation. If it
/// exceeds `tol` the state is recomputed in place.
double check_and_repair(HeightState& st, const Configuration& cfg, double tol = 1e-9);

/// exp(-lambda h_x) for the state (cfg, flux), without the time factor.
double cole_hopf_value(const ParticleState& s, int x, double lambda);

/// Closed-form drift of Z_x: sum over events that move h_x of rate * (e^{-lambda dh} - 1),
/// plus nu, all times Z_x. Z is evaluated at t = 0.
double sde_drift_rhs(const ParticleState& s, int x, const Model& md, double nu);

struct DriftReport {
  int x = 0;
  double exact_drift = 0.0;
  double formula_drift = 0.0;
  double residual = 0.0;
};

/// Exact generator drift against the closed form at every site.
std::vector<DriftReport> drift_check(const Model& md, const ParticleState& s, double nu);

/// E[drift of Z_x] / E[Z_x] under the fair product measure on 1..N, with `b` in place of
/// md.boundary. Spins y <= x see the tilt e^{-lambda_N eta_y / sqrt N}.
double expected_drift_ratio(const Model& md, const BoundaryCoefficients& b, int x, double nu);

/// The same ratio for the lattice Laplacian with Robin corners: sum_y L_lap(x,y) cosh(b)^{y-x}.
double laplacian_drift_ratio(const Model& md, int x);

/// Flip rates for which expected_drift_ratio equals laplacian_drift_ratio at every cluster
/// site with nu = nu_matched. The sums beta_+ + beta_- are kept from md.boundary; the
/// differences solve an m x m system per side. Throws ModelError on a negative rate.
BoundaryCoefficients matched_boundary_coefficients(const Model& md);

/// Largest |expected_drift_ratio - laplacian_drift_ratio| over x = 0..N.
double matched_drift_residual(const Model& md, const BoundaryCoefficients& b);

/// Narrow-wedge rescaling Zbar = 1/2 lambda^{-1} N^{1/2} Z.
std::vector<double> rescale_narrow_wedge(const std::vector<double>& Z, double lambda, int N);

void write_z_csv(std::ostream& os, const HeightState& st, bool header);

enum class FieldClass { weakly_vanishing, pseudo_gradient };

/// A local functional of the spins on `support` consecutive sites.
struct LocalFunctional {
  std::string name;
  int support = 0;
  std::function<double(const std::vector<int>&)> f;
};

struct FieldClassReport {
  std::string name;
  FieldClass cls = FieldClass::weakly_vanishing;
  int support = 0;
  double max_abs_mean = 0.0;
  double sup_norm = 0.0;
  std::vector<double> canonical_means;  // by particle number, pseudo-gradient only
  bool member(double tol = 1e-12) const { return max_abs_mean <= tol; }
};

/// Exhaustive enumeration over the 2^support configurations.
FieldClassReport field_class_check(const LocalFunctional& g, FieldClass cls);

struct FieldCatalogEntry {
  LocalFunctional g;
  FieldClass cls;
  bool expected_member;
};

/// Shipped functionals, including non-members that serve as negative controls.
std::vector<FieldCatalogEntry> field_catalog();

}  // namespace openkpz
