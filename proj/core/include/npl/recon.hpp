#pragma once
#include <optional>
#include <vector>

#include "npl/model.hpp"

namespace npl {

struct SolverConfig {
  int max_iters = 500;
  double rel_tol = 1e-9;   // on |dL| / (1 + |L|)
  double beta = 0.0;       // effective penalty coefficient (beta^t / t)
  PenaltyParams penalty{};
  void validate() const;
};

struct SolveReport {
  Image result;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // [0] = start, then one per step
  double objective_final() const { return objective_trace.back(); }
};

// one multiplicative EM step on intensity data (exposure folded to 1);
// the ratio data_i / Lambda_i is 0 whenever data_i = 0
Image mlem_step(const Image& current, const Sinogram& data, const SparseDesign& design);

// closed-form minimizer of the separable surrogate of the penalized
// objective; beta = 0 follows the exact mlem_step code path
Image gem_step(const Image& current, const Sinogram& data, const SparseDesign& design,
               const SolverConfig& config);

// iterate gem_step on L_p(lambda | data, A, 1, beta) until the relative
// objective change drops below rel_tol or max_iters is hit; default
// start is the uniform image (sum data)/(sum A_j); the grid fixes the
// pixel layout the penalty neighborhood lives on
SolveReport solve(const Grid& grid, const std::optional<Image>& start,
                  const Sinogram& data, const SparseDesign& design,
                  const SolverConfig& config);

// penalty-selected reference: argmin L_p(lambda | A lambda*, A, 1, beta_min)
Image lambda_opt(const Image& truth, const SparseDesign& design, double beta_min,
                 const PenaltyParams& penalty);

// surrogate values with their anchor constants kept, so both are exact
// at lambda = anchor; their sum majorizes L_p (the transfer principle
// behind gem_step, exposed for verification)
double likelihood_surrogate(const Image& lambda, const Image& anchor,
                            const Sinogram& data, const SparseDesign& design);
double penalty_surrogate(const Image& lambda, const Image& anchor,
                         const PenaltyParams& params);

}  // namespace npl
