#include "npl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "npl/errors.hpp"
#include "npl/rng.hpp"

namespace npl {

void Image::validate() const {
  grid.validate();
  if (static_cast<Index>(values.size()) != grid.p())
    throw DimensionError("image: value count != grid p");
  for (double v : values)
    if (!(v >= 0.0)) throw InvalidArgumentError("image: negative or NaN value");
}

void Sinogram::validate() const {
  if (d < 1) throw DimensionError("sinogram: d must be >= 1");
  if (static_cast<Index>(values.size()) != d)
    throw DimensionError("sinogram: value count != d");
  if (!(t > 0.0)) throw InvalidArgumentError("sinogram: exposure must be positive");
  for (double v : values)
    if (!(v >= 0.0)) throw InvalidArgumentError("sinogram: negative or NaN value");
}

void PenaltyParams::validate() const {
  if (!(zeta > 0.0)) throw InvalidArgumentError("penalty: zeta must be positive");
  if (!(nu >= 0.0 && nu <= 1.0)) throw InvalidArgumentError("penalty: nu outside [0,1]");
  if (!(edge_weight >= 0.0 && diag_weight >= 0.0))
    throw InvalidArgumentError("penalty: negative weight");
}

double log_cosh(double x) {
  double ax = std::fabs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - M_LN2;
}

double penalty_psi(double u, const PenaltyParams& params) {
  return (1.0 - params.nu) * params.zeta * log_cosh(u / params.zeta) +
         0.5 * params.nu * u * u;
}

double penalty_curvature(double u, const PenaltyParams& params) {
  if (u == 0.0) return (1.0 - params.nu) / params.zeta + params.nu;
  return (1.0 - params.nu) * std::tanh(u / params.zeta) / u + params.nu;
}

Image make_disk_phantom(const Grid& grid, double inner_value, double outer_value,
                        double r_in, double r_out) {
  grid.validate();
  if (inner_value < 0.0 || outer_value < 0.0)
    throw InvalidArgumentError("phantom: negative values");
  if (!(r_in > 0.0 && r_in < r_out && r_out <= grid.extent))
    throw InvalidArgumentError("phantom: need 0 < r_in < r_out <= extent");
  const bool fill_background = (r_out == grid.extent);
  Image img(grid);
  for (int iy = 0; iy < grid.height; ++iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      double r = std::hypot(grid.center_x(ix), grid.center_y(iy));
      double v = 0.0;
      if (r <= r_in)
        v = inner_value;
      else if (r <= r_out || fill_background)
        v = outer_value;
      img.values[static_cast<std::size_t>(iy) * grid.width + ix] = v;
    }
  }
  return img;
}

Sinogram simulate_sinogram(const Image& truth, const SparseDesign& design, double t,
                           std::uint64_t seed) {
  truth.validate();
  if (!(t > 0.0)) throw InvalidArgumentError("simulate: exposure must be positive");
  if (truth.grid.p() != design.p) throw DimensionError("simulate: image/design mismatch");
  auto intens = design.forward(truth.values);
  Sinogram out(design.d, t);
  for (Index i = 0; i < design.d; ++i) {
    StreamRng rng(seed, 0, Stage::simulate, static_cast<std::uint64_t>(i));
    out.values[i] = rng.poisson(t * intens[i]);
  }
  return out;
}

double neg_log_likelihood(const Image& lambda, const Sinogram& data,
                          const SparseDesign& design, double t) {
  if (static_cast<Index>(lambda.values.size()) != design.p)
    throw DimensionError("neg_log_likelihood: image length != p");
  if (data.d != design.d) throw DimensionError("neg_log_likelihood: sinogram d mismatch");
  auto intens = design.forward(lambda.values);
  long double acc = 0.0L;
  for (Index i = 0; i < design.d; ++i) {
    double li = t * intens[i];
    if (data.values[i] > 0.0) {
      if (li <= 0.0) return std::numeric_limits<double>::infinity();
      acc -= static_cast<long double>(data.values[i]) * std::log(li);
    }
    acc += li;
  }
  return static_cast<double>(acc);
}

double penalty_value(const Image& lambda, const PenaltyParams& params) {
  params.validate();
  const Grid& g = lambda.grid;
  long double acc = 0.0L;
  for (Index j = 0; j < g.p(); ++j) {
    double lj = lambda.values[j];
    for_each_neighbor(g, params, j, [&](Index k, double w) {
      acc += w * penalty_psi(lj - lambda.values[k], params);
    });
  }
  return static_cast<double>(acc);
}

double penalized_objective(const Image& lambda, const Sinogram& data,
                           const SparseDesign& design, double t, double beta,
                           const PenaltyParams& params) {
  if (beta < 0.0) throw InvalidArgumentError("penalized_objective: beta < 0");
  double l = neg_log_likelihood(lambda, data, design, t);
  if (beta == 0.0) return l;
  return l + beta * penalty_value(lambda, params);
}

double kl_objective(const Image& lambda, const Sinogram& target_intensities,
                    const SparseDesign& design) {
  return neg_log_likelihood(lambda, target_intensities, design, 1.0);
}

IndexSets index_sets(const Sinogram& intensities, double tol) {
  if (tol < 0.0) throw InvalidArgumentError("index_sets: tol < 0");
  IndexSets s;
  for (Index i = 0; i < intensities.d; ++i) {
    if (intensities.values[i] <= tol)
      s.i0.push_back(i);
    else
      s.i1.push_back(i);
  }
  return s;
}

double default_index_tol(const Sinogram& intensities, bool exact) {
  if (exact) return 0.0;
  double mx = 0.0;
  for (double v : intensities.values) mx = std::max(mx, v);
  return 1e-12 * mx;
}

}  // namespace npl
