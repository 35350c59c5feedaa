#include "npl/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "npl/errors.hpp"
#include "npl/rng.hpp"

namespace npl {

void GibbsConfig::validate() const {
  if (!(prior_alpha > 0.0) || !std::isfinite(prior_alpha)) {
    throw InvalidArgumentError("gibbs: prior_alpha must be finite and positive");
  }
  if (!(prior_beta > 0.0) || !std::isfinite(prior_beta)) {
    throw InvalidArgumentError("gibbs: prior_beta must be finite and positive");
  }
  if (burn_in < 0) throw InvalidArgumentError("gibbs: burn_in must be nonnegative");
  if (n_samples < 1) throw InvalidArgumentError("gibbs: n_samples must be positive");
}

std::vector<double> gibbs_latent_step(const Image& lambda, const Sinogram& data,
                                      const SparseDesign& design, std::uint64_t seed,
                                      std::uint64_t iteration) {
  lambda.validate();
  data.validate();
  if (lambda.grid.p() != design.p || data.d != design.d) {
    throw DimensionError("gibbs_latent_step: dimension mismatch");
  }

  std::vector<double> latents(static_cast<std::size_t>(design.nnz()), 0.0);
  for (Index i = 0; i < design.d; ++i) {
    const double y = data.values[static_cast<std::size_t>(i)];
    if (y == 0.0) continue;

    const Index lo = design.row_ptr[static_cast<std::size_t>(i)];
    const Index hi = design.row_ptr[static_cast<std::size_t>(i) + 1];
    double row_mass = 0.0;
    for (Index e = lo; e < hi; ++e) {
      row_mass += design.values[static_cast<std::size_t>(e)] *
                  lambda.values[static_cast<std::size_t>(design.col_idx[static_cast<std::size_t>(e)])];
    }
    if (!(row_mass > 0.0)) {
      throw DegenerateStateError("gibbs_latent_step: LOR " + std::to_string(i) +
                                 " has positive counts but zero model intensity");
    }

    // counts split one support entry at a time; conditionals stay binomial
    StreamRng rng(seed, iteration, Stage::latent, static_cast<std::uint64_t>(i));
    double remaining = y;
    double remaining_mass = row_mass;
    for (Index e = lo; e < hi && remaining > 0.0; ++e) {
      const std::size_t ee = static_cast<std::size_t>(e);
      if (e == hi - 1) {
        latents[ee] = remaining;
        remaining = 0.0;
        break;
      }
      const double m = design.values[ee] *
                       lambda.values[static_cast<std::size_t>(design.col_idx[ee])];
      double q = remaining_mass > 0.0 ? m / remaining_mass : 1.0;
      q = std::clamp(q, 0.0, 1.0);
      const double n_e = rng.binomial(remaining, q);
      latents[ee] = n_e;
      remaining -= n_e;
      remaining_mass -= m;
    }
  }
  return latents;
}

Image gibbs_lambda_step(const std::vector<double>& latents, const SparseDesign& design,
                        const Grid& grid, double t, const GibbsConfig& config,
                        std::uint64_t seed, std::uint64_t iteration) {
  config.validate();
  if (grid.p() != design.p) throw DimensionError("gibbs_lambda_step: grid does not match design");
  if (latents.size() != static_cast<std::size_t>(design.nnz())) {
    throw DimensionError("gibbs_lambda_step: latent vector does not match the design support");
  }
  if (!(t > 0.0)) throw InvalidArgumentError("gibbs_lambda_step: exposure must be positive");

  std::vector<double> count_sums(static_cast<std::size_t>(design.p), 0.0);
  for (Index i = 0; i < design.d; ++i) {
    for (Index e = design.row_ptr[static_cast<std::size_t>(i)];
         e < design.row_ptr[static_cast<std::size_t>(i) + 1]; ++e) {
      count_sums[static_cast<std::size_t>(design.col_idx[static_cast<std::size_t>(e)])] +=
          latents[static_cast<std::size_t>(e)];
    }
  }

  Image out(grid, 0.0);
  for (Index j = 0; j < design.p; ++j) {
    const std::size_t jj = static_cast<std::size_t>(j);
    const double shape = count_sums[jj] + config.prior_alpha;
    const double rate = t * design.col_sums[jj] + config.prior_beta;
    StreamRng rng(seed, iteration, Stage::lambda, static_cast<std::uint64_t>(j));
    double v = rng.gamma(shape, 1.0 / rate);
    if (v <= 0.0) v = 1e-300;
    out.values[jj] = v;
  }
  return out;
}

Chain run_chain(const Sinogram& data, const SparseDesign& design, const GibbsConfig& config,
                const Image& start) {
  config.validate();
  data.validate();
  start.validate();
  if (start.grid.p() != design.p || data.d != design.d) {
    throw DimensionError("run_chain: dimension mismatch");
  }
  for (double v : start.values) {
    if (!(v > 0.0)) throw InvalidArgumentError("run_chain: start must be strictly positive");
  }

  Chain chain;
  chain.grid = start.grid;
  chain.config = config;
  chain.t = data.t;
  chain.samples.reserve(static_cast<std::size_t>(config.n_samples));

  Image state = start;
  const std::uint64_t total =
      static_cast<std::uint64_t>(config.burn_in) + static_cast<std::uint64_t>(config.n_samples);
  for (std::uint64_t iter = 0; iter < total; ++iter) {
    std::vector<double> latents = gibbs_latent_step(state, data, design, config.seed, iter);
    state = gibbs_lambda_step(latents, design, start.grid, data.t, config, config.seed, iter);
    if (iter >= static_cast<std::uint64_t>(config.burn_in)) chain.samples.push_back(state);
  }
  return chain;
}

FisherPair fisher_matrices(const Image& truth, const SparseDesign& design) {
  truth.validate();
  if (truth.grid.p() != design.p) throw DimensionError("fisher_matrices: grid does not match design");
  for (Index j = 0; j < design.p; ++j) {
    if (!(truth.values[static_cast<std::size_t>(j)] > 0.0)) {
      throw InvalidArgumentError("fisher_matrices: pixel " + std::to_string(j) +
                                 " has zero intensity; the augmented information is singular");
    }
  }

  const Eigen::Index p = static_cast<Eigen::Index>(design.p);
  FisherPair pair;
  pair.f_obs = Eigen::MatrixXd::Zero(p, p);
  pair.f_aug_diag.resize(p);
  for (Index j = 0; j < design.p; ++j) {
    pair.f_aug_diag[static_cast<Eigen::Index>(j)] =
        design.col_sums[static_cast<std::size_t>(j)] / truth.values[static_cast<std::size_t>(j)];
  }

  const std::vector<double> model = design.forward(truth.values);
  for (Index i = 0; i < design.d; ++i) {
    const double m = model[static_cast<std::size_t>(i)];
    if (!(m > 0.0)) continue;
    const Index lo = design.row_ptr[static_cast<std::size_t>(i)];
    const Index hi = design.row_ptr[static_cast<std::size_t>(i) + 1];
    for (Index e1 = lo; e1 < hi; ++e1) {
      const Eigen::Index j1 = static_cast<Eigen::Index>(design.col_idx[static_cast<std::size_t>(e1)]);
      const double a1 = design.values[static_cast<std::size_t>(e1)];
      for (Index e2 = lo; e2 < hi; ++e2) {
        const Eigen::Index j2 = static_cast<Eigen::Index>(design.col_idx[static_cast<std::size_t>(e2)]);
        pair.f_obs(j1, j2) += a1 * design.values[static_cast<std::size_t>(e2)] / m;
      }
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(pair.f_obs);
  if (solver.info() != Eigen::Success) {
    throw NumericError("fisher_matrices: eigendecomposition failed");
  }
  pair.eigenvalues = solver.eigenvalues().reverse();
  pair.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return pair;
}

double asymptotic_fraction(const std::vector<double>& h, const FisherPair& pair,
                           double rank_tol) {
  const Eigen::Index p = pair.f_aug_diag.size();
  if (static_cast<Eigen::Index>(h.size()) != p) {
    throw DimensionError("asymptotic_fraction: direction length does not match");
  }
  if (!(rank_tol > 0.0)) throw InvalidArgumentError("asymptotic_fraction: rank_tol must be positive");
  Eigen::Map<const Eigen::VectorXd> hv(h.data(), p);
  const double h_norm = hv.norm();
  if (!(h_norm > 0.0)) throw InvalidArgumentError("asymptotic_fraction: direction must be nonzero");

  const Eigen::VectorXd c = pair.eigenvectors.transpose() * hv;
  const double s1 = pair.eigenvalues.size() > 0 ? pair.eigenvalues[0] : 0.0;
  Eigen::Index rank = 0;
  while (rank < pair.eigenvalues.size() && pair.eigenvalues[rank] > rank_tol * s1) ++rank;

  double kernel_sq = 0.0;
  for (Eigen::Index m = rank; m < c.size(); ++m) kernel_sq += c[m] * c[m];
  if (std::sqrt(kernel_sq) > rank_tol * h_norm || rank == 0) {
    throw UndefinedDirectionError(
        "asymptotic_fraction: direction has a component in the null space of the observed information");
  }

  double denom = 0.0;
  for (Eigen::Index m = 0; m < rank; ++m) denom += c[m] * c[m] / pair.eigenvalues[m];
  double numer = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) numer += h[static_cast<std::size_t>(j)] *
                                                h[static_cast<std::size_t>(j)] / pair.f_aug_diag[j];
  return std::clamp(1.0 - numer / denom, 0.0, 1.0);
}

std::vector<double> eigenmode_correlations(const Chain& chain, const FisherPair& pair,
                                           int m_max) {
  const std::size_t n = chain.samples.size();
  if (n < 100) {
    throw InsufficientDataError("eigenmode_correlations: need at least 100 post-burn-in samples");
  }
  const Eigen::Index p = pair.f_aug_diag.size();
  if (chain.grid.p() != static_cast<Index>(p)) {
    throw DimensionError("eigenmode_correlations: chain grid does not match the information pair");
  }
  const Eigen::Index m = std::min<Eigen::Index>(m_max, pair.eigenvectors.cols());
  if (m < 1) throw InvalidArgumentError("eigenmode_correlations: m_max must be positive");

  Eigen::MatrixXd proj(static_cast<Eigen::Index>(n), m);
  const auto modes = pair.eigenvectors.leftCols(m);
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::Map<const Eigen::VectorXd> x(chain.samples[k].values.data(), p);
    proj.row(static_cast<Eigen::Index>(k)) = (modes.transpose() * x).transpose();
  }

  std::vector<double> out(static_cast<std::size_t>(m));
  const Eigen::Index len = static_cast<Eigen::Index>(n) - 1;
  for (Eigen::Index col = 0; col < m; ++col) {
    const auto a = proj.col(col).head(len);
    const auto b = proj.col(col).tail(len);
    const double ma = a.mean();
    const double mb = b.mean();
    const double va = (a.array() - ma).square().sum();
    const double vb = (b.array() - mb).square().sum();
    if (va <= 0.0 || vb <= 0.0) {
      out[static_cast<std::size_t>(col)] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
    out[static_cast<std::size_t>(col)] = cov / std::sqrt(va * vb);
  }
  return out;
}

double green_sample_size(double gamma) {
  if (!(gamma >= 0.0)) throw InvalidArgumentError("green_sample_size: gamma must be nonnegative");
  if (gamma >= 1.0) return std::numeric_limits<double>::infinity();
  return std::ceil(100.0 * (1.0 + gamma) / (1.0 - gamma));
}

}  // namespace npl
