#pragma once
#include <cstdint>
#include <vector>

#include "npl/geometry.hpp"

namespace npl {

struct Image {
  Grid grid;
  std::vector<double> values;  // length p, row-major, nonnegative

  Image() = default;
  explicit Image(const Grid& g, double fill = 0.0)
      : grid(g), values(static_cast<std::size_t>(g.p()), fill) {}
  void validate() const;
};

struct Sinogram {
  Index d = 0;
  double t = 1.0;              // exposure
  std::vector<double> values;  // counts if integer-valued, intensities otherwise

  Sinogram() = default;
  Sinogram(Index d_, double t_) : d(d_), t(t_), values(static_cast<std::size_t>(d_), 0.0) {}
  void validate() const;
};

// pairwise log-cosh + quadratic mix over the 8-neighborhood
struct PenaltyParams {
  double zeta = 0.05;
  double nu = 0.15;
  double edge_weight = 1.0;
  double diag_weight = 0.7071067811865476;  // sqrt(2)/2
  void validate() const;
};

struct IndexSets {
  std::vector<Index> i0;  // zero-intensity LORs
  std::vector<Index> i1;  // the rest
};

template <typename Fn>
inline void for_each_neighbor(const Grid& g, const PenaltyParams& pp, Index j, Fn&& fn) {
  const int w = g.width;
  const int ix = static_cast<int>(j % w);
  const int iy = static_cast<int>(j / w);
  for (int oy = -1; oy <= 1; ++oy) {
    for (int ox = -1; ox <= 1; ++ox) {
      if (ox == 0 && oy == 0) continue;
      const int nx = ix + ox, ny = iy + oy;
      if (nx < 0 || nx >= g.width || ny < 0 || ny >= g.height) continue;
      fn(static_cast<Index>(ny) * w + nx,
         (ox != 0 && oy != 0) ? pp.diag_weight : pp.edge_weight);
    }
  }
}

// overflow-safe log(cosh(x)) = |x| + log1p(exp(-2|x|)) - log 2
double log_cosh(double x);

// psi(u) = (1-nu) * zeta * logcosh(u/zeta) + nu/2 * u^2
double penalty_psi(double u, const PenaltyParams& params);

// omega(u) = psi'(u)/u = (1-nu) tanh(u/zeta)/u + nu, limit (1-nu)/zeta + nu at 0
double penalty_curvature(double u, const PenaltyParams& params);

// inner disk / annulus phantom on pixel centers; when r_out equals the
// grid extent the outer value fills the whole image outside r_in
Image make_disk_phantom(const Grid& grid, double inner_value, double outer_value,
                        double r_in, double r_out);

// Y_i ~ Po(t * (A lambda)_i), one RNG stream per LOR derived from (seed, i)
Sinogram simulate_sinogram(const Image& truth, const SparseDesign& design, double t,
                           std::uint64_t seed);

// sum_i -Y_i log(t Lambda_i) + t Lambda_i, with 0 log 0 = 0; returns the
// +infinity sentinel when some Y_i > 0 sees Lambda_i = 0
double neg_log_likelihood(const Image& lambda, const Sinogram& data,
                          const SparseDesign& design, double t);

double penalty_value(const Image& lambda, const PenaltyParams& params);

double penalized_objective(const Image& lambda, const Sinogram& data,
                           const SparseDesign& design, double t, double beta,
                           const PenaltyParams& params);

// L(lambda | Lambda*, A, 1): the KL-projection criterion
double kl_objective(const Image& lambda, const Sinogram& target_intensities,
                    const SparseDesign& design);

IndexSets index_sets(const Sinogram& intensities, double tol);

// 0 for exact (simulated/constructed) intensities, 1e-12 * max otherwise
double default_index_tol(const Sinogram& intensities, bool exact);

}  // namespace npl
