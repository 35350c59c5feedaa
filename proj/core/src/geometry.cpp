#include "npl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "npl/errors.hpp"

namespace npl {

namespace {
constexpr double kDropLength = 1e-14;
constexpr double kUnitNormTol = 1e-12;
}  // namespace

void Grid::validate() const {
  if (width < 1 || height < 1) throw InvalidArgumentError("grid: pixel counts must be >= 1");
  if (!(extent > 0.0)) throw InvalidArgumentError("grid: extent must be positive");
}

std::vector<double> SparseDesign::forward(const std::vector<double>& x) const {
  if (static_cast<Index>(x.size()) != p)
    throw DimensionError("design forward: vector length != p");
  std::vector<double> y(static_cast<std::size_t>(d), 0.0);
  for (Index i = 0; i < d; ++i) {
    double acc = 0.0;
    for (Index k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      acc += values[k] * x[col_idx[k]];
    y[i] = acc;
  }
  return y;
}

std::vector<double> SparseDesign::back(const std::vector<double>& v) const {
  if (static_cast<Index>(v.size()) != d)
    throw DimensionError("design back: vector length != d");
  std::vector<double> y(static_cast<std::size_t>(p), 0.0);
  for (Index i = 0; i < d; ++i) {
    double vi = v[i];
    if (vi == 0.0) continue;
    for (Index k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      y[col_idx[k]] += values[k] * vi;
  }
  return y;
}

Eigen::MatrixXd SparseDesign::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, p);
  for (Index i = 0; i < d; ++i)
    for (Index k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      m(i, col_idx[k]) = values[k];
  return m;
}

void SparseDesign::recompute_col_sums() {
  col_sums.assign(static_cast<std::size_t>(p), 0.0);
  for (Index i = 0; i < d; ++i)
    for (Index k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      col_sums[col_idx[k]] += values[k];
}

RaySet build_parallel_geometry(int n_angles, int n_offsets, const Grid& grid) {
  grid.validate();
  if (n_angles < 1 || n_offsets < 1)
    throw InvalidArgumentError("parallel geometry: counts must be >= 1");
  RaySet rs;
  rs.kind = GeometryKind::parallel;
  rs.n_angles = n_angles;
  rs.n_offsets = n_offsets;
  rs.rays.reserve(static_cast<std::size_t>(n_angles) * n_offsets);
  const double e = grid.extent;
  const double step = 2.0 * e / n_offsets;
  for (int a = 0; a < n_angles; ++a) {
    double theta = M_PI * a / n_angles;
    double dx = std::cos(theta), dy = std::sin(theta);
    double nx = -dy, ny = dx;
    for (int m = 0; m < n_offsets; ++m) {
      double off = -e + (m + 0.5) * step;
      rs.rays.push_back(Ray{off * nx, off * ny, dx, dy});
    }
  }
  return rs;
}

RaySet build_ring_geometry(int n_detectors, const Grid& grid) {
  grid.validate();
  if (n_detectors < 3) throw InvalidArgumentError("ring geometry: need >= 3 detectors");
  RaySet rs;
  rs.kind = GeometryKind::ring;
  rs.n_detectors = n_detectors;
  const double radius = grid.extent * std::sqrt(2.0) * 1.01;
  std::vector<double> px(n_detectors), py(n_detectors);
  for (int k = 0; k < n_detectors; ++k) {
    double phi = 2.0 * M_PI * k / n_detectors;
    px[k] = radius * std::cos(phi);
    py[k] = radius * std::sin(phi);
  }
  rs.rays.reserve(static_cast<std::size_t>(n_detectors) * (n_detectors - 1) / 2);
  for (int k = 0; k < n_detectors; ++k) {
    for (int l = k + 1; l < n_detectors; ++l) {
      double dx = px[l] - px[k], dy = py[l] - py[k];
      double norm = std::hypot(dx, dy);
      rs.rays.push_back(Ray{px[k], py[k], dx / norm, dy / norm});
    }
  }
  return rs;
}

std::vector<std::pair<Index, double>> siddon_trace(const Ray& ray, const Grid& grid) {
  grid.validate();
  if (std::fabs(std::hypot(ray.dx, ray.dy) - 1.0) > kUnitNormTol)
    throw InvalidArgumentError("siddon_trace: direction not unit-norm");

  const double e = grid.extent;
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  if (ray.dx != 0.0) {
    double t1 = (-e - ray.ox) / ray.dx, t2 = (e - ray.ox) / ray.dx;
    tmin = std::max(tmin, std::min(t1, t2));
    tmax = std::min(tmax, std::max(t1, t2));
  } else if (ray.ox < -e || ray.ox >= e) {
    return {};
  }
  if (ray.dy != 0.0) {
    double t1 = (-e - ray.oy) / ray.dy, t2 = (e - ray.oy) / ray.dy;
    tmin = std::max(tmin, std::min(t1, t2));
    tmax = std::min(tmax, std::max(t1, t2));
  } else if (ray.oy < -e || ray.oy >= e) {
    return {};
  }
  if (!(tmax - tmin > kDropLength)) return {};

  // crossing times of every interior grid line, merged and swept
  std::vector<double> ts;
  ts.reserve(static_cast<std::size_t>(grid.width + grid.height) + 2);
  ts.push_back(tmin);
  ts.push_back(tmax);
  if (ray.dx != 0.0) {
    const double hx = grid.pixel_width();
    for (int k = 1; k < grid.width; ++k) {
      double t = (-e + k * hx - ray.ox) / ray.dx;
      if (t > tmin && t < tmax) ts.push_back(t);
    }
  }
  if (ray.dy != 0.0) {
    const double hy = grid.pixel_height();
    for (int k = 1; k < grid.height; ++k) {
      double t = (-e + k * hy - ray.oy) / ray.dy;
      if (t > tmin && t < tmax) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  std::vector<std::pair<Index, double>> out;
  out.reserve(ts.size());
  const double hx = grid.pixel_width(), hy = grid.pixel_height();
  for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
    double len = ts[s + 1] - ts[s];
    if (len < kDropLength) continue;
    double tm = 0.5 * (ts[s] + ts[s + 1]);
    double mx = ray.ox + tm * ray.dx, my = ray.oy + tm * ray.dy;
    auto ix = static_cast<Index>(std::floor((mx + e) / hx));
    auto iy = static_cast<Index>(std::floor((my + e) / hy));
    if (ix < 0 || ix >= grid.width || iy < 0 || iy >= grid.height) continue;
    Index pix = iy * grid.width + ix;
    if (!out.empty() && out.back().first == pix)
      out.back().second += len;
    else
      out.emplace_back(pix, len);
  }
  return out;
}

SparseDesign assemble_design(const RaySet& rays, const Grid& grid,
                             Normalization normalization) {
  grid.validate();
  if (rays.rays.empty()) throw InvalidArgumentError("assemble_design: no rays");

  SparseDesign a;
  a.d = static_cast<Index>(rays.rays.size());
  a.p = grid.p();
  a.row_ptr.assign(static_cast<std::size_t>(a.d) + 1, 0);
  for (Index i = 0; i < a.d; ++i) {
    auto hits = siddon_trace(rays.rays[i], grid);
    if (hits.empty())
      throw ModelViolationError("assemble_design: LOR " + std::to_string(i) +
                                " misses every pixel");
    std::sort(hits.begin(), hits.end());
    for (const auto& [pix, len] : hits) {
      a.col_idx.push_back(pix);
      a.values.push_back(len);
    }
    a.row_ptr[i + 1] = static_cast<Index>(a.values.size());
  }
  a.recompute_col_sums();
  for (Index j = 0; j < a.p; ++j) {
    if (a.col_sums[j] <= 0.0)
      throw ModelViolationError("assemble_design: pixel " + std::to_string(j) +
                                " is not detectable");
  }

  if (normalization == Normalization::column_stochastic) {
    for (Index i = 0; i < a.d; ++i)
      for (Index k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
        a.values[k] /= a.col_sums[a.col_idx[k]];
    a.recompute_col_sums();
  } else if (normalization == Normalization::scaled) {
    double max_sum = *std::max_element(a.col_sums.begin(), a.col_sums.end());
    for (double& v : a.values) v /= max_sum;
    a.recompute_col_sums();
  }
  return a;
}

double design_condition_number(const Eigen::MatrixXd& dense) {
  if (dense.cols() > 2000)
    throw CapacityError("design_condition_number: more than 2000 columns");
  if (dense.rows() < dense.cols()) return std::numeric_limits<double>::infinity();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense);
  const auto& sv = svd.singularValues();
  double smax = sv(0), smin = sv(sv.size() - 1);
  if (smin < 1e-12 * smax) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

}  // namespace npl
