#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "openkpz/model.hpp"

namespace openkpz {

/// Parameters of a bound sweep. Exponents are fixed before any data is seen.
struct BoundSuiteConfig {
  ModelParams base;  // N is overwritten per sweep entry
  std::vector<int> Ns{64, 128, 256};
  double T_f = 1.0;
  int n_times = 13;      // log grid on [N^-2, T_f]
  double eps = 0.1;      // the small exponent in every bound that carries one
  double beta_boundary = 0.25;  // I_{N,beta} drops N^beta sites at each edge
  double slack = 4.0;    // pass iff max/min fitted constant <= slack
  std::vector<double> kappas{1.0, 2.0};
  std::vector<int> grad_steps{-2, -1, 1, 2};
  double hit_kappa = 0.1;    // tail-bound exponent
  double hit_split = 1.0;    // Gaussian branch for L <= hit_split * scale

  static BoundSuiteConfig defaults();
};

/// One inequality inside a bound id.
struct BoundPart {
  std::string name;
  std::vector<double> fitted;  // max over the grid of observed/claimed, one per N
  double spread = 0.0;         // max/min of `fitted`
  bool degenerate = false;     // observed quantity is identically ~0
  bool pass = false;
};

struct BoundFitReport {
  std::string id;
  std::vector<int> Ns;
  std::vector<BoundPart> parts;
  std::vector<double> fitted;  // per N, max over parts
  double max_ratio = 0.0;
  bool pass = false;
};

const std::vector<std::string>& bound_ids();

/// Runs the listed ids (all when empty); kernels are built once per N and shared.
std::vector<BoundFitReport> bound_suite(const BoundSuiteConfig& cfg,
                                        const std::vector<std::string>& ids = {});

/// The Gaussian/exponential tail split with the crossover taken literally
/// (L ~ N rho^{1/2}); reported for comparison with the default split at L ~ N^2 rho.
BoundFitReport hit_estimate_literal(const BoundSuiteConfig& cfg);

void write_bound_csv(std::ostream& os, const std::vector<BoundFitReport>& reports);

}  // namespace openkpz
