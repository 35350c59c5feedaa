#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "npl/mri.hpp"
#include "npl/model.hpp"
#include "npl/recon.hpp"

namespace npl {

struct NplConfig {
  double rho = 1.0;       // prior weight relative to exposure, theta = rho * t
  int n_draws = 100;      // B
  double t = 1.0;         // exposure behind the counts
  double beta_t = 0.0;    // penalty weight at exposure t; solves use beta_t / t
  PenaltyParams penalty;
  SolverConfig solver;    // iteration caps and tolerance; its beta is ignored
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

struct DrawRecord {
  int index = 0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  double objective_final = 0.0;
  std::string error;
};

struct SampleArchive {
  std::string kind = "npl";
  Grid grid;
  std::vector<Image> draws;
  std::vector<DrawRecord> records;
  NplConfig config;
};

struct NplDraw {
  Image image;
  DrawRecord record;
};

// posterior-mixed data: Gamma(Y_i + theta * M_i, 1 / (theta + t)) per LOR
Sinogram perturb_intensities(const Sinogram& data, const MixingDraw& mixing_draw,
                             double rho, double t, std::uint64_t seed);

// one posterior draw: fresh WLB pass through the aggregated model, then
// a penalized solve on the perturbed intensities; deterministic in (seed, b)
NplDraw npl_draw_detailed(const Sinogram& data, const SparseDesign& design,
                          const MixingDesign& mixing, const NplConfig& config, int b);
Image npl_draw(const Sinogram& data, const SparseDesign& design,
               const MixingDesign& mixing, const NplConfig& config, int b);

// noise-free variant: every sampled quantity replaced by its mean; used
// to pin the sampler against the deterministic solver
Image npl_draw_deterministic(const Sinogram& data, const SparseDesign& design,
                             const MixingDesign& mixing, const NplConfig& config);

// B independent draws; failures are recorded per draw and never abort
// the run; bit-identical for any worker count
SampleArchive npl_sample(const Sinogram& data, const SparseDesign& design,
                         const MixingDesign& mixing, const NplConfig& config);

}  // namespace npl
