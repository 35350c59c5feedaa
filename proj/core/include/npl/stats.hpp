#pragma once
#include <cstdint>
#include <vector>

#include "npl/model.hpp"
#include "npl/npl.hpp"

namespace npl {

struct Summary {
  Grid grid;
  Image mean;
  Image stddev;  // unbiased, per pixel
  Image lower;   // (1 - level) / 2 quantile
  Image upper;   // (1 + level) / 2 quantile
  double level = 0.0;
  int n_draws = 0;  // successful draws behind the summary
};

enum class CoverageStatus : std::uint8_t { covered = 0, below = 1, above = 2 };

struct CoverageMap {
  Grid grid;
  std::vector<CoverageStatus> status;  // per pixel, all pixels
  std::vector<std::uint8_t> mask;      // pixels the fraction is taken over
  double fraction = 0.0;               // covered share of the mask
};

struct ProfileSeries {
  int row = 0;
  std::vector<double> x;  // pixel center abscissae
  std::vector<double> mean, lower, upper;
};

// type-7 quantile of a sample (linear interpolation of order statistics)
double quantile_type7(std::vector<double> values, double q);

// pixelwise mean, spread and equal-tailed band over successful draws
Summary summarize(const SampleArchive& archive, double level);

std::vector<std::uint8_t> default_support_mask(const Image& reference);

CoverageMap coverage(const Summary& summary, const Image& target,
                     const std::vector<std::uint8_t>& mask);

ProfileSeries profile(const Summary& summary, int row);
ProfileSeries profile(const Image& image, int row);

// relative L2 distance between the posterior mean and a point estimate
double npl_vs_map_distance(const Image& mean, const Image& map);

}  // namespace npl
