#include "npl/misspec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "npl/errors.hpp"
#include "npl/rng.hpp"

namespace npl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double aggregate_objective(const Eigen::MatrixXd& a, const std::vector<double>& target,
                           const Eigen::VectorXd& lambda) {
  Eigen::VectorXd model = a * lambda;
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    const double y = target[static_cast<std::size_t>(i)];
    if (y > 0.0) {
      if (model[i] <= 0.0) return kInf;
      acc += model[i] - static_cast<long double>(y) * std::log(model[i]);
    } else {
      acc += model[i];
    }
  }
  return static_cast<double>(acc);
}

}  // namespace

CounterexampleSpec CounterexampleSpec::make() {
  const double r = std::sqrt(2.0);
  const double mass = 2.0 + r;
  const double rows[6][4] = {
      {1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}, {0, r, r, 0}, {r, 0, 0, r},
  };

  CounterexampleSpec spec;
  spec.column_mass = mass;
  spec.grid = Grid{2, 2, 1.0};
  spec.design.d = 6;
  spec.design.p = 4;
  spec.design.row_ptr.push_back(0);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (rows[i][j] != 0.0) {
        spec.design.col_idx.push_back(j);
        spec.design.values.push_back(rows[i][j] / mass);
      }
    }
    spec.design.row_ptr.push_back(static_cast<Index>(spec.design.values.size()));
  }
  spec.design.recompute_col_sums();

  spec.target = Sinogram(6, 1.0);
  spec.target.values[0] = 1.0;
  return spec;
}

CounterexampleFit counterexample_solve(const std::array<double, 4>& start,
                                       const SolverConfig& solver) {
  for (double v : start) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgumentError("counterexample_solve: start must be finite and nonnegative");
    }
  }
  if (!(start[0] + start[1] > 0.0)) {
    throw InvalidArgumentError(
        "counterexample_solve: start needs mass on the observed LOR (lambda_1 + lambda_2 > 0)");
  }

  const CounterexampleSpec spec = CounterexampleSpec::make();
  SolverConfig cfg = solver;
  cfg.beta = 0.0;
  cfg.rel_tol = 1e-12;
  cfg.max_iters = std::max(cfg.max_iters, 500);

  Image init(spec.grid, 0.0);
  std::copy(start.begin(), start.end(), init.values.begin());
  SolveReport report = solve(spec.grid, init, spec.target, spec.design, cfg);

  CounterexampleFit fit;
  std::copy(report.result.values.begin(), report.result.values.end(), fit.lambda.begin());
  fit.objective = report.objective_final();
  fit.iterations = report.iterations;
  fit.converged = report.converged;
  return fit;
}

GridOracleResult counterexample_grid_oracle(int resolution) {
  if (resolution < 10) {
    throw InvalidArgumentError("counterexample_grid_oracle: resolution must be at least 10");
  }
  const double step = 2.0 / resolution;
  const double log_mass = std::log(2.0 + std::sqrt(2.0));

  GridOracleResult out;
  out.step = step;
  out.min_value = kInf;
  const double window = 2.0 * step;

  // objective depends on the first pair only through its sum
  for (int k1 = 0; k1 < resolution; ++k1) {
    const double l1 = k1 * step;
    for (int k2 = 0; k2 < resolution; ++k2) {
      const double l2 = k2 * step;
      const double s = l1 + l2;
      if (s <= 0.0) continue;
      const double head = s - std::log(s) + log_mass;
      for (int k3 = 0; k3 < resolution; ++k3) {
        const double l3 = k3 * step;
        for (int k4 = 0; k4 < resolution; ++k4) {
          const double value = head + l3 + k4 * step;
          if (value < out.min_value) out.min_value = value;
        }
      }
    }
  }

  for (int k1 = 0; k1 < resolution; ++k1) {
    const double l1 = k1 * step;
    for (int k2 = 0; k2 < resolution; ++k2) {
      const double l2 = k2 * step;
      const double s = l1 + l2;
      if (s <= 0.0) continue;
      const double head = s - std::log(s) + log_mass;
      for (int k3 = 0; k3 < resolution; ++k3) {
        const double l3 = k3 * step;
        if (head + l3 > out.min_value + window) break;
        for (int k4 = 0; k4 < resolution; ++k4) {
          const double l4 = k4 * step;
          const double value = head + l3 + l4;
          if (value > out.min_value + window) break;
          if (out.near_minimizers.size() < 1024) {
            out.near_minimizers.push_back({l1, l2, l3, l4, value});
          }
        }
      }
    }
  }
  return out;
}

IdentifiabilityReport identifiability_positive_check(const MixingDesign& mixing,
                                                     const Sinogram& truth,
                                                     std::uint64_t seed) {
  truth.validate();
  if (static_cast<Index>(mixing.a_m.rows()) != truth.d) {
    throw DimensionError("identifiability_positive_check: mixing rows do not match the data");
  }
  const Eigen::Index p_m = mixing.a_m.cols();
  if (p_m < 1) throw InvalidArgumentError("identifiability_positive_check: empty mixing design");

  double total = 0.0, sens = 0.0;
  for (double v : truth.values) total += v;
  for (double s : mixing.col_sums) sens += s;
  const double scale = sens > 0.0 && total > 0.0 ? total / sens : 1.0;

  IdentifiabilityReport report;
  constexpr int kStarts = 20;
  for (int s = 0; s < kStarts; ++s) {
    std::vector<double> start(static_cast<std::size_t>(p_m));
    for (Eigen::Index j = 0; j < p_m; ++j) {
      StreamRng rng(seed, static_cast<std::uint64_t>(s), Stage::start,
                    static_cast<std::uint64_t>(j));
      start[static_cast<std::size_t>(j)] = scale * (0.05 + 1.95 * rng.uniform());
    }
    report.minimizers.push_back(
        dense_mlem_solve(mixing.a_m, mixing.col_sums, truth.values, start, 1e-12, 20000));
  }

  report.max_spread = 0.0;
  for (std::size_t a = 0; a < report.minimizers.size(); ++a) {
    for (std::size_t b = a + 1; b < report.minimizers.size(); ++b) {
      for (Eigen::Index j = 0; j < p_m; ++j) {
        report.max_spread = std::max(
            report.max_spread, std::abs(report.minimizers[a][static_cast<std::size_t>(j)] -
                                        report.minimizers[b][static_cast<std::size_t>(j)]));
      }
    }
  }
  report.unique = report.max_spread < 1e-6;

  // directional curvature probes around the first fitted point
  Eigen::Map<const Eigen::VectorXd> anchor(report.minimizers[0].data(), p_m);
  const double f0 = aggregate_objective(mixing.a_m, truth.values, anchor);
  const double eps = 1e-5 * std::max(scale, 1.0);
  constexpr int kDirections = 50;
  report.min_curvature = kInf;
  for (int d = 0; d < kDirections; ++d) {
    Eigen::VectorXd v(p_m);
    for (Eigen::Index j = 0; j < p_m; ++j) {
      StreamRng rng(seed, 1000 + static_cast<std::uint64_t>(d), Stage::start,
                    static_cast<std::uint64_t>(j));
      v[j] = rng.normal();
      if (anchor[j] < 10.0 * eps) v[j] = 0.0;  // keep both probes feasible
    }
    const double norm = v.norm();
    if (norm == 0.0) continue;
    v /= norm;
    const double fp = aggregate_objective(mixing.a_m, truth.values, anchor + eps * v);
    const double fm = aggregate_objective(mixing.a_m, truth.values, anchor - eps * v);
    const double curvature = (fp - 2.0 * f0 + fm) / (eps * eps);
    report.min_curvature = std::min(report.min_curvature, curvature);
  }
  report.locally_convex = std::isfinite(report.min_curvature) && report.min_curvature > 1e-9;
  return report;
}

}  // namespace npl
