#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "npl/model.hpp"

namespace npl {

struct GibbsConfig {
  double prior_alpha = 1.0;  // gamma prior shape, per pixel
  double prior_beta = 1.0;   // gamma prior rate
  int burn_in = 1000;
  int n_samples = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Chain {
  Grid grid;
  GibbsConfig config;
  double t = 1.0;
  std::vector<Image> samples;  // post burn-in states
};

// per-unit-exposure information pair at a reference point: the observed
// piece on the data side and the diagonal augmented piece on the
// complete-data side, plus the eigensystem of the observed piece
struct FisherPair {
  Eigen::MatrixXd f_obs;            // sum over positive LORs of a_i a_i^T / Lambda_i
  Eigen::VectorXd f_aug_diag;       // A_j / lambda_j
  Eigen::MatrixXd eigenvectors;     // columns h_m, matching eigenvalues below
  Eigen::VectorXd eigenvalues;      // s_m, descending
};

// one latent allocation sweep: counts split over the design support of
// each LOR, returned aligned with design.values
std::vector<double> gibbs_latent_step(const Image& lambda, const Sinogram& data,
                                      const SparseDesign& design, std::uint64_t seed,
                                      std::uint64_t iteration);

// conjugate pixel update given the latent allocation; strictly positive
Image gibbs_lambda_step(const std::vector<double>& latents, const SparseDesign& design,
                        const Grid& grid, double t, const GibbsConfig& config,
                        std::uint64_t seed, std::uint64_t iteration);

Chain run_chain(const Sinogram& data, const SparseDesign& design, const GibbsConfig& config,
                const Image& start);

FisherPair fisher_matrices(const Image& truth, const SparseDesign& design);

// missing-information fraction along h: 1 - (h' F_aug^-1 h) / (h' F_obs^+ h)
double asymptotic_fraction(const std::vector<double>& h, const FisherPair& pair,
                           double rank_tol = 1e-10);

// empirical lag-one autocorrelation of the chain projected on the top
// m_max eigenmodes; constant series yield NaN
std::vector<double> eigenmode_correlations(const Chain& chain, const FisherPair& pair,
                                           int m_max);

// samples needed for effective size 100 at autocorrelation gamma;
// +infinity once gamma >= 1
double green_sample_size(double gamma);

}  // namespace npl
