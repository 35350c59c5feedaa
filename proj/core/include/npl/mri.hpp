#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "npl/model.hpp"
#include "npl/recon.hpp"

namespace npl {

// r per-pixel label maps; label -1 marks pixels outside every segment
struct Segmentation {
  Grid grid;
  std::vector<std::vector<std::int32_t>> labels;  // one map per side image
  std::vector<int> segment_counts;                // p_k per image

  int p_m() const;
  void validate() const;
};

// single-image segmentation with one segment per distinct positive
// value class of the image; zero-valued pixels fall outside
Segmentation segmentation_from_value_classes(const Image& image, double tol = 1e-12);

struct MixingDesign {
  Eigen::MatrixXd a_m;           // dense d x p_M, blocks concatenated per image
  std::vector<double> col_sums;  // A_{M,j}
  double condition = 0.0;
  bool condition_warning = false;  // condition above the configured cap
  Segmentation source;
};

struct MixingDraw {
  std::vector<double> lambda_m;     // segment activities, length p_M
  std::vector<double> intensities;  // A_M lambda_M, length d
};

struct NonexpansivenessReport {
  bool holds = false;
  std::vector<Index> violations;       // LORs with model mass where truth is 0
  std::vector<double> lambda_m_star;   // the aggregated KL projection
};

// column (k, s) = sum of design columns over pixels labeled s in image k
MixingDesign reduce_design(const SparseDesign& design, const Segmentation& seg,
                           double condition_cap = 1e6);

// step 1 of the WLB draw: intensities ~ Gamma(Y_i, 1/t) per LOR
Sinogram wlb_intensities(const Sinogram& data, std::uint64_t seed);

// list-mode weight representation of the same law: sum of Y_i unit
// exponentials scaled by 1/t; distributional oracle for wlb_intensities
Sinogram weight_representation_intensities(const Sinogram& data, std::uint64_t seed);

// full WLB draw: gamma-perturb the counts, aggregate-model MLEM fit,
// project back through A_M
MixingDraw wlb_sample(const Sinogram& data, const MixingDesign& mixing,
                      std::uint64_t seed, const SolverConfig& solver);

MixingDraw weight_representation_sample(const Sinogram& data, const MixingDesign& mixing,
                                        std::uint64_t seed);

// fits the aggregated model to the true intensities and reports LORs
// where it puts mass above tol on zero-intensity LORs
NonexpansivenessReport nonexpansiveness_check(const Sinogram& truth_intensities,
                                              const MixingDesign& mixing, double tol);

// estimate the feasible hull from zero-count LORs and cut every segment
// down to it; empty segments are deleted and labels compacted
Segmentation mask_preprocess(const SparseDesign& design, const Segmentation& seg,
                             const Sinogram& data);

// unpenalized exposure-1 MLEM on a dense design (the aggregated-model
// fitting engine behind wlb_sample and the diagnostics)
std::vector<double> dense_mlem_solve(const Eigen::MatrixXd& a,
                                     const std::vector<double>& col_sums,
                                     const std::vector<double>& data,
                                     const std::vector<double>& start, double rel_tol,
                                     int max_iters);

}  // namespace npl
