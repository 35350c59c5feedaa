#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace npl {

using Index = std::int64_t;

// square physical domain [-extent, extent]^2, pixels indexed row-major
// (iy * width + ix), half-open cells [lo, hi) along both axes
struct Grid {
  int width = 0;
  int height = 0;
  double extent = 1.0;

  Index p() const { return static_cast<Index>(width) * height; }
  double pixel_width() const { return 2.0 * extent / width; }
  double pixel_height() const { return 2.0 * extent / height; }
  double center_x(int ix) const { return -extent + (ix + 0.5) * pixel_width(); }
  double center_y(int iy) const { return -extent + (iy + 0.5) * pixel_height(); }
  void validate() const;
};

struct Ray {
  double ox = 0.0, oy = 0.0;  // any point on the line
  double dx = 0.0, dy = 0.0;  // unit direction
};

enum class GeometryKind { parallel, ring };

struct RaySet {
  GeometryKind kind = GeometryKind::parallel;
  int n_angles = 0, n_offsets = 0;  // parallel
  int n_detectors = 0;              // ring
  std::vector<Ray> rays;
};

// nonnegative sparse design, CSR, structural zeros omitted
struct SparseDesign {
  Index d = 0;  // LOR count (rows)
  Index p = 0;  // pixel count (cols)
  std::vector<Index> row_ptr;   // d + 1
  std::vector<Index> col_idx;   // nnz
  std::vector<double> values;   // nnz
  std::vector<double> col_sums; // p, A_j

  Index nnz() const { return static_cast<Index>(values.size()); }
  std::vector<double> forward(const std::vector<double>& x) const;  // A x
  std::vector<double> back(const std::vector<double>& v) const;     // A^T v
  Eigen::MatrixXd to_dense() const;
  void recompute_col_sums();
};

enum class Normalization { column_stochastic, raw, scaled };

// angles uniform over [0, pi), offsets uniform across the grid extent;
// ray index = angle * n_offsets + offset
RaySet build_parallel_geometry(int n_angles, int n_offsets, const Grid& grid);

// detectors equally spaced on a circle of radius extent*sqrt(2)*1.01;
// one chord per unordered detector pair, (k, l) lexicographic
RaySet build_ring_geometry(int n_detectors, const Grid& grid);

// per-pixel intersection lengths along the ray; empty when the ray
// misses the grid; segments shorter than 1e-14 are dropped
std::vector<std::pair<Index, double>> siddon_trace(const Ray& ray, const Grid& grid);

SparseDesign assemble_design(const RaySet& rays, const Grid& grid,
                             Normalization normalization);

// ratio of extreme singular values; +infinity once the smallest drops
// below 1e-12 of the largest (non-injective for our purposes)
double design_condition_number(const Eigen::MatrixXd& dense);

}  // namespace npl
