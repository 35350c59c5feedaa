#pragma once
// Shared builders for the test executables: tiny hand designs, random
// sparse designs with full row/column support, and conversions into the
// dense oracle layout.
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "npl/geometry.hpp"
#include "npl/mri.hpp"
#include "npl/model.hpp"
#include "npl/rng.hpp"
#include "dense_oracle.hpp"

namespace fixtures {

inline npl::Grid grid(int w, int h, double extent = 1.0) {
  npl::Grid g;
  g.width = w;
  g.height = h;
  g.extent = extent;
  return g;
}

inline npl::SparseDesign design_from_dense(const Eigen::MatrixXd& a) {
  npl::SparseDesign d;
  d.d = static_cast<npl::Index>(a.rows());
  d.p = static_cast<npl::Index>(a.cols());
  d.row_ptr.assign(1, 0);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) {
        d.col_idx.push_back(static_cast<npl::Index>(j));
        d.values.push_back(a(i, j));
      }
    }
    d.row_ptr.push_back(static_cast<npl::Index>(d.col_idx.size()));
  }
  d.recompute_col_sums();
  return d;
}

inline oracle::DenseMat to_oracle(const npl::SparseDesign& d) {
  oracle::DenseMat m;
  m.rows = static_cast<std::size_t>(d.d);
  m.cols = static_cast<std::size_t>(d.p);
  m.a.assign(m.rows * m.cols, 0.0);
  Eigen::MatrixXd dd = d.to_dense();
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      m(i, j) = dd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return m;
}

// random design with every row and every column populated: a shifted
// band plus uniform extras, values in (0.2, 1.2)
inline npl::SparseDesign random_design(npl::Index d, npl::Index p, std::uint64_t seed,
                                       int extras_per_row = 3) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, p);
  npl::StreamRng rng(seed);
  for (npl::Index i = 0; i < d; ++i) {
    a(i, i % p) = 0.2 + rng.uniform();
    for (int k = 0; k < extras_per_row; ++k) {
      auto j = static_cast<npl::Index>(rng.uniform() * static_cast<double>(p));
      if (j >= p) j = p - 1;
      a(i, j) = 0.2 + rng.uniform();
    }
  }
  for (npl::Index j = 0; j < p; ++j) {
    if (a.col(j).sum() == 0.0) a(j % d, j) = 0.2 + rng.uniform();
  }
  return design_from_dense(a);
}

inline std::vector<double> random_positive(std::size_t n, std::uint64_t seed,
                                           double lo = 0.1, double hi = 2.0) {
  npl::StreamRng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = lo + (hi - lo) * rng.uniform();
  return out;
}

// one label image covering every pixel with a single segment
inline npl::Segmentation single_segment(const npl::Grid& g) {
  npl::Segmentation seg;
  seg.grid = g;
  seg.labels.assign(1, std::vector<std::int32_t>(static_cast<std::size_t>(g.p()), 0));
  seg.segment_counts = {1};
  return seg;
}

}  // namespace fixtures
