#include "npl/stats.hpp"

#include <algorithm>
#include <cmath>

#include "npl/errors.hpp"

namespace npl {

double quantile_type7(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgumentError("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgumentError("quantile: q must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 1) return values[0];
  const double pos = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Summary summarize(const SampleArchive& archive, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidArgumentError("summarize: level must be inside (0, 1)");
  }
  std::vector<const Image*> good;
  for (std::size_t b = 0; b < archive.draws.size(); ++b) {
    const bool failed = b < archive.records.size() && archive.records[b].failed;
    if (!failed) good.push_back(&archive.draws[b]);
  }
  if (good.size() < 2) {
    throw InsufficientDataError("summarize: need at least 2 successful draws");
  }

  const Grid& grid = archive.grid;
  const std::size_t p = static_cast<std::size_t>(grid.p());
  const std::size_t n = good.size();
  Summary out{grid, Image(grid, 0.0), Image(grid, 0.0), Image(grid, 0.0), Image(grid, 0.0),
              level, static_cast<int>(n)};

  const double q_lo = (1.0 - level) / 2.0;
  const double q_hi = (1.0 + level) / 2.0;
  std::vector<double> column(n);
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      column[k] = good[k]->values[j];
      mean += column[k];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) ss += (column[k] - mean) * (column[k] - mean);
    out.mean.values[j] = mean;
    out.stddev.values[j] = std::sqrt(ss / static_cast<double>(n - 1));
    out.lower.values[j] = quantile_type7(column, q_lo);
    out.upper.values[j] = quantile_type7(column, q_hi);
  }
  return out;
}

std::vector<std::uint8_t> default_support_mask(const Image& reference) {
  double peak = 0.0;
  for (double v : reference.values) peak = std::max(peak, v);
  const double cut = 1e-6 * peak;
  std::vector<std::uint8_t> mask(reference.values.size(), 0);
  for (std::size_t j = 0; j < reference.values.size(); ++j) {
    mask[j] = reference.values[j] > cut ? 1 : 0;
  }
  return mask;
}

CoverageMap coverage(const Summary& summary, const Image& target,
                     const std::vector<std::uint8_t>& mask) {
  if (target.grid.p() != summary.grid.p()) {
    throw DimensionError("coverage: target grid does not match the summary");
  }
  const std::size_t p = static_cast<std::size_t>(summary.grid.p());
  if (mask.size() != p) throw DimensionError("coverage: mask length does not match the grid");

  CoverageMap out;
  out.grid = summary.grid;
  out.mask = mask;
  out.status.resize(p);
  std::size_t in_mask = 0, covered = 0;
  for (std::size_t j = 0; j < p; ++j) {
    const double v = target.values[j];
    if (v < summary.lower.values[j]) {
      out.status[j] = CoverageStatus::below;
    } else if (v > summary.upper.values[j]) {
      out.status[j] = CoverageStatus::above;
    } else {
      out.status[j] = CoverageStatus::covered;
    }
    if (mask[j]) {
      ++in_mask;
      if (out.status[j] == CoverageStatus::covered) ++covered;
    }
  }
  if (in_mask == 0) throw InsufficientDataError("coverage: empty mask");
  out.fraction = static_cast<double>(covered) / static_cast<double>(in_mask);
  return out;
}

namespace {

void check_row(const Grid& grid, int row) {
  if (row < 0 || row >= grid.height) {
    throw InvalidArgumentError("profile: row " + std::to_string(row) + " outside the grid");
  }
}

}  // namespace

ProfileSeries profile(const Summary& summary, int row) {
  check_row(summary.grid, row);
  ProfileSeries out;
  out.row = row;
  for (int ix = 0; ix < summary.grid.width; ++ix) {
    const std::size_t j = static_cast<std::size_t>(row) * summary.grid.width + ix;
    out.x.push_back(summary.grid.center_x(ix));
    out.mean.push_back(summary.mean.values[j]);
    out.lower.push_back(summary.lower.values[j]);
    out.upper.push_back(summary.upper.values[j]);
  }
  return out;
}

ProfileSeries profile(const Image& image, int row) {
  check_row(image.grid, row);
  ProfileSeries out;
  out.row = row;
  for (int ix = 0; ix < image.grid.width; ++ix) {
    const std::size_t j = static_cast<std::size_t>(row) * image.grid.width + ix;
    out.x.push_back(image.grid.center_x(ix));
    out.mean.push_back(image.values[j]);
  }
  return out;
}

double npl_vs_map_distance(const Image& mean, const Image& map) {
  if (mean.grid.p() != map.grid.p()) {
    throw DimensionError("npl_vs_map_distance: images live on different grids");
  }
  double diff_sq = 0.0, map_sq = 0.0;
  for (std::size_t j = 0; j < mean.values.size(); ++j) {
    const double d = mean.values[j] - map.values[j];
    diff_sq += d * d;
    map_sq += map.values[j] * map.values[j];
  }
  if (!(map_sq > 0.0)) {
    throw InvalidArgumentError("npl_vs_map_distance: reference image has zero norm");
  }
  return std::sqrt(diff_sq / map_sq);
}

}  // namespace npl
