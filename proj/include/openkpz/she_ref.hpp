#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "openkpz/dynamics.hpp"
#include "openkpz/model.hpp"
#include "openkpz/rng.hpp"

namespace openkpz {

/// dZ = (alpha/2) Delta_Robin Z dt + lambda sqrt(alpha) Z dW on [0,1], grid spacing 1/M.
struct SHEParams {
  int M = 256;
  double alpha = 1.0;
  double lambda = 0.0;
  double A_minus = 0.0;
  double A_plus = 0.0;
  double dt = 0.0;  // 0 selects (1/M)^2 / 8
  double step() const { return dt > 0.0 ? dt : 1.0 / (8.0 * M * M); }
};

/// Snapshots of one SHE path at the requested checkpoints.
struct SHEField {
  int M = 0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> Z;  // Z[c][i], i = 0..M
  std::uint64_t seed = 0;
};

/// Explicit Euler-Maruyama. Reflection about -1/2 and M+1/2 with the ghost value mu Z_0,
/// mu = 1 - A/M. The last step before a checkpoint is shortened to land on it.
/// Throws ModelError on blow-up (|Z| > 1e12) or a negative cell.
SHEField solve_she(const std::vector<double>& Z0, const SHEParams& p,
                   const std::vector<double>& checkpoints, Rng& rng);

/// exp(-lambda M^{-1/2} sum_{y=1}^{i} xi_y) with xi fair +-1; the SHE analogue of the
/// near-stationary particle data.
std::vector<double> she_near_stationary(int M, double lambda, Rng& rng);

struct MomentReport {
  std::vector<double> checkpoints;
  std::vector<double> xs;  // macroscopic positions in [0,1]
  // [checkpoint][point]
  std::vector<std::vector<double>> mean, se_mean, var, se_var;
  std::vector<std::pair<int, int>> cov_pairs;  // indices into xs
  std::vector<std::vector<double>> cov;        // [checkpoint][pair]
  long replicas = 0;
};

/// Reduces per-replica samples s[r][c][i] in replica order.
MomentReport moments_from_samples(const std::vector<std::vector<std::vector<double>>>& s,
                                  const std::vector<double>& checkpoints,
                                  const std::vector<double>& xs,
                                  const std::vector<std::pair<int, int>>& cov_pairs);

/// Which flip rates drive the particle side: the boundary solve from the parameters, or the
/// rates matched to the Robin Laplacian (matched_boundary_coefficients).
enum class FlipRates { solved, matched };

struct ExperimentConfig {
  ModelParams params;
  long replicas = 2000;
  std::vector<double> checkpoints{0.05, 0.1};
  int grid = 16;  // xs = k/grid, k = 0..grid
  InitialKind initial = InitialKind::near_stationary;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  FlipRates rates = FlipRates::matched;

  std::vector<double> xs() const;
};

/// Independent particle runs; Z^N at (T, floor(N X)) with the bulk-matched nu.
/// Narrow-wedge runs report the rescaled field instead.
MomentReport particle_ensemble_moments(const ExperimentConfig& cfg);

/// Independent SHE runs from she_near_stationary data, sampled at the same xs.
MomentReport she_ensemble_moments(const SHEParams& p, const std::vector<double>& checkpoints,
                                  const std::vector<double>& xs, long replicas,
                                  std::uint64_t seed, unsigned threads);

/// The deterministic scheme applied to E Z_0; the exact mean of the Euler scheme.
std::vector<std::vector<double>> she_mean_flow(const SHEParams& p,
                                               const std::vector<double>& checkpoints,
                                               const std::vector<double>& xs);

struct Verdict {
  std::vector<double> z_mean;  // flattened over (checkpoint, point)
  std::vector<double> z_var;
  double fraction_within = 0.0;  // |z| <= 3 over both arrays
  // Mean over points of the squared relative difference minus its noise contribution;
  // negative when the difference is below the noise.
  double discrepancy_sq = 0.0;
  double discrepancy_mean_sq = 0.0, discrepancy_var_sq = 0.0;  // the two halves of the sum
  bool pass_points = false;
};

Verdict compare(const MomentReport& particle, const MomentReport& she);

struct ItoMeanCheck {
  std::vector<double> z;
  double max_abs_z = 0.0;
  double fraction_within = 0.0;
};

/// Ensemble mean of solve_she against she_mean_flow.
ItoMeanCheck ito_mean_check(const SHEParams& p, const std::vector<double>& checkpoints,
                            const std::vector<double>& xs, long replicas, std::uint64_t seed,
                            unsigned threads);

struct SheComparisonResult {
  std::vector<int> Ns;
  std::vector<Verdict> verdicts;
  bool monotone = false;
  Verdict negative_control;
  double control_A = 0.0;
  bool pass() const;
};

/// Default comparison: m=1, alpha=1, gamma=-1, A=0, near-stationary data. One SHE ensemble
/// at alpha=1 serves every N through the time change Z_alpha(T) = Z_1(alpha T).
SheComparisonResult she_comparison_experiment(const std::vector<int>& Ns, long replicas,
                                   const std::vector<double>& checkpoints, std::uint64_t seed,
                                   unsigned threads, double control_A = 2.0);

void write_moments_csv(std::ostream& os, const MomentReport& r);

}  // namespace openkpz
