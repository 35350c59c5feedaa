#include "npl/recon.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "npl/errors.hpp"

namespace npl {

namespace {

constexpr double kZeroClamp = 1e-300;

void check_dims(const Image& img, const Sinogram& data, const SparseDesign& design) {
  if (static_cast<Index>(img.values.size()) != design.p)
    throw DimensionError("recon: image length != design p");
  if (data.d != design.d) throw DimensionError("recon: sinogram d != design d");
}

// multiplicative likelihood update, shared by both steps so the
// beta = 0 reduction is bitwise
std::vector<double> mlem_update(const std::vector<double>& cur, const Sinogram& data,
                                const SparseDesign& design) {
  auto intens = design.forward(cur);
  std::vector<double> ratio(static_cast<std::size_t>(design.d), 0.0);
  for (Index i = 0; i < design.d; ++i) {
    if (data.values[i] == 0.0) continue;
    if (intens[i] <= 0.0)
      throw DegenerateSupportError("mlem: zero model intensity on LOR " +
                                   std::to_string(i) + " with positive data");
    ratio[i] = data.values[i] / intens[i];
  }
  auto back = design.back(ratio);
  std::vector<double> next(cur.size(), 0.0);
  for (Index j = 0; j < design.p; ++j) {
    double v = cur[j] / design.col_sums[j] * back[j];
    next[j] = (v < kZeroClamp) ? 0.0 : v;
  }
  return next;
}

// per-pixel surrogate coefficients of the pairwise penalty at anchor:
// p_j = 4 sum_k w omega(dj - dk), lphi_j = weighted neighbor midpoint
struct PenaltyCoeffs {
  std::vector<double> p;     // p_{j,phi}
  std::vector<double> lphi;  // lambda_{j,phi}
};

PenaltyCoeffs penalty_coeffs(const std::vector<double>& anchor, const Grid& g,
                             const PenaltyParams& pp) {
  const Index p = g.p();
  std::vector<double> sum_w(static_cast<std::size_t>(p), 0.0);
  std::vector<double> sum_wp(static_cast<std::size_t>(p), 0.0);
  // sweep each unordered pair once: right, down, down-right, down-left
  const int offs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 1}};
  for (const auto& o : offs) {
    const double w = (o[0] != 0 && o[1] != 0) ? pp.diag_weight : pp.edge_weight;
    for (int iy = 0; iy < g.height; ++iy) {
      int ny = iy + o[1];
      if (ny < 0 || ny >= g.height) continue;
      for (int ix = 0; ix < g.width; ++ix) {
        int nx = ix + o[0];
        if (nx < 0 || nx >= g.width) continue;
        Index j = static_cast<Index>(iy) * g.width + ix;
        Index k = static_cast<Index>(ny) * g.width + nx;
        double om = w * penalty_curvature(anchor[j] - anchor[k], pp);
        double pair = om * (anchor[j] + anchor[k]);
        sum_w[j] += om;
        sum_w[k] += om;
        sum_wp[j] += pair;
        sum_wp[k] += pair;
      }
    }
  }
  PenaltyCoeffs out;
  out.p.resize(static_cast<std::size_t>(p));
  out.lphi.resize(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    out.p[j] = 4.0 * sum_w[j];
    out.lphi[j] = sum_w[j] > 0.0 ? sum_wp[j] / (2.0 * sum_w[j]) : 0.0;
  }
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iters < 1) throw InvalidArgumentError("solver: max_iters must be >= 1");
  if (rel_tol < 0.0) throw InvalidArgumentError("solver: rel_tol must be >= 0");
  if (beta < 0.0) throw InvalidArgumentError("solver: beta must be >= 0");
  penalty.validate();
}

Image mlem_step(const Image& current, const Sinogram& data, const SparseDesign& design) {
  check_dims(current, data, design);
  Image out;
  out.grid = current.grid;
  out.values = mlem_update(current.values, data, design);
  return out;
}

Image gem_step(const Image& current, const Sinogram& data, const SparseDesign& design,
               const SolverConfig& config) {
  check_dims(current, data, design);
  Image out;
  out.grid = current.grid;
  out.values = mlem_update(current.values, data, design);
  if (config.beta == 0.0) return out;

  auto coeffs = penalty_coeffs(current.values, current.grid, config.penalty);
  for (Index j = 0; j < design.p; ++j) {
    double lam_l = out.values[j];
    double beta_j = config.beta / design.col_sums[j] * coeffs.p[j];
    if (beta_j == 0.0) continue;
    double b_j = 1.0 - beta_j * coeffs.lphi[j];
    double v;
    if (lam_l == 0.0) {
      v = b_j < 0.0 ? -b_j / beta_j : 0.0;
    } else {
      double disc = std::sqrt(b_j * b_j + 4.0 * beta_j * lam_l);
      v = b_j >= 0.0 ? 2.0 * lam_l / (disc + b_j) : (disc - b_j) / (2.0 * beta_j);
    }
    if (!std::isfinite(v))
      throw NumericError("gem_step: non-finite surrogate update at pixel " +
                         std::to_string(j));
    out.values[j] = (v < kZeroClamp) ? 0.0 : v;
  }
  return out;
}

SolveReport solve(const Grid& grid, const std::optional<Image>& start,
                  const Sinogram& data, const SparseDesign& design,
                  const SolverConfig& config) {
  config.validate();
  if (data.d != design.d) throw DimensionError("solve: sinogram d != design d");
  if (grid.p() != design.p) throw DimensionError("solve: grid p != design p");

  Image lam;
  if (start.has_value()) {
    lam = *start;
    if (lam.grid.width != grid.width || lam.grid.height != grid.height)
      throw DimensionError("solve: start grid mismatch");
    check_dims(lam, data, design);
  } else {
    double total_data = 0.0, total_sens = 0.0;
    for (double v : data.values) total_data += v;
    for (double v : design.col_sums) total_sens += v;
    lam = Image(grid, total_data / total_sens);
  }

  SolveReport rep;
  rep.objective_trace.reserve(static_cast<std::size_t>(config.max_iters) + 1);
  double obj = penalized_objective(lam, data, design, 1.0, config.beta, config.penalty);
  rep.objective_trace.push_back(obj);
  for (int r = 1; r <= config.max_iters; ++r) {
    lam = gem_step(lam, data, design, config);
    double next = penalized_objective(lam, data, design, 1.0, config.beta, config.penalty);
    rep.objective_trace.push_back(next);
    rep.iterations = r;
    if (std::fabs(next - obj) / (1.0 + std::fabs(next)) < config.rel_tol) {
      rep.converged = true;
      obj = next;
      break;
    }
    obj = next;
  }
  rep.result = std::move(lam);
  return rep;
}

Image lambda_opt(const Image& truth, const SparseDesign& design, double beta_min,
                 const PenaltyParams& penalty) {
  if (beta_min < 0.0) throw InvalidArgumentError("lambda_opt: beta_min must be >= 0");
  truth.validate();
  Sinogram noiseless(design.d, 1.0);
  noiseless.values = design.forward(truth.values);
  // reference quantity: run far past the default solver tolerances
  SolverConfig cfg;
  cfg.beta = beta_min;
  cfg.penalty = penalty;
  cfg.rel_tol = 1e-12;
  cfg.max_iters = 5000;
  return solve(truth.grid, std::nullopt, noiseless, design, cfg).result;
}

double likelihood_surrogate(const Image& lambda, const Image& anchor,
                            const Sinogram& data, const SparseDesign& design) {
  check_dims(lambda, data, design);
  check_dims(anchor, data, design);
  auto anchor_intens = design.forward(anchor.values);
  long double acc = 0.0L;
  for (Index i = 0; i < design.d; ++i) {
    for (Index k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k) {
      Index j = design.col_idx[k];
      double a = design.values[k];
      acc += a * lambda.values[j];
      if (data.values[i] <= 0.0) continue;
      double w = a * anchor.values[j] / anchor_intens[i];
      if (w == 0.0) continue;
      double arg = lambda.values[j] * anchor_intens[i] / anchor.values[j];
      if (arg <= 0.0) return std::numeric_limits<double>::infinity();
      acc -= data.values[i] * w * std::log(arg);
    }
  }
  return static_cast<double>(acc);
}

double penalty_surrogate(const Image& lambda, const Image& anchor,
                         const PenaltyParams& params) {
  auto coeffs = penalty_coeffs(anchor.values, anchor.grid, params);
  long double quad = 0.0L;
  for (Index j = 0; j < anchor.grid.p(); ++j) {
    double dl = lambda.values[j] - coeffs.lphi[j];
    double da = anchor.values[j] - coeffs.lphi[j];
    quad += 0.5 * coeffs.p[j] * (dl * dl - da * da);
  }
  return penalty_value(anchor, params) + static_cast<double>(quad);
}

}  // namespace npl
