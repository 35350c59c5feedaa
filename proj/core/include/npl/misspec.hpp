#pragma once
#include <array>
#include <cstdint>
#include <vector>

#include "npl/mri.hpp"
#include "npl/recon.hpp"

namespace npl {

// hand-built 6x4 design whose KL projection of the target (1,0,0,0,0,0)
// has a whole segment of minimizers: lambda_3 = lambda_4 = 0 and
// lambda_1 + lambda_2 = 1 after column normalization
struct CounterexampleSpec {
  SparseDesign design;       // column-stochastic
  Sinogram target;           // exposure-1 intensities
  Grid grid;                 // 2x2 layout for the four unknowns
  double column_mass = 0.0;  // raw column sum, 2 + sqrt(2)

  static CounterexampleSpec make();
};

struct CounterexampleFit {
  std::array<double, 4> lambda{};
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// production solver on the counterexample, tolerance pinned at 1e-12
CounterexampleFit counterexample_solve(const std::array<double, 4>& start,
                                       const SolverConfig& solver);

struct GridOracleResult {
  double min_value = 0.0;
  double step = 0.0;
  std::vector<std::array<double, 5>> near_minimizers;  // lambda_1..4, objective
};

// brute-force evaluation of the closed-form objective over [0, 2)^4
GridOracleResult counterexample_grid_oracle(int resolution);

struct IdentifiabilityReport {
  bool unique = false;
  bool locally_convex = false;
  double max_spread = 0.0;     // max pairwise L-infinity gap between starts
  double min_curvature = 0.0;  // over the probed directions
  std::vector<std::vector<double>> minimizers;
};

// multi-start agreement plus directional curvature at the aggregated
// optimum; reports failure instead of throwing when the mixing design
// breaks the uniqueness assumptions
IdentifiabilityReport identifiability_positive_check(const MixingDesign& mixing,
                                                     const Sinogram& truth,
                                                     std::uint64_t seed = 0);

}  // namespace npl
