#include "npl/npl.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "npl/errors.hpp"
#include "npl/rng.hpp"

namespace npl {

void NplConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw InvalidArgumentError("npl: rho must be finite and nonnegative");
  }
  if (n_draws < 1) throw InvalidArgumentError("npl: n_draws must be positive");
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw InvalidArgumentError("npl: exposure t must be finite and positive");
  }
  if (!(beta_t >= 0.0) || !std::isfinite(beta_t)) {
    throw InvalidArgumentError("npl: beta_t must be finite and nonnegative");
  }
  if (workers < 1) throw InvalidArgumentError("npl: workers must be positive");
  penalty.validate();
  solver.validate();
}

Sinogram perturb_intensities(const Sinogram& data, const MixingDraw& mixing_draw,
                             double rho, double t, std::uint64_t seed) {
  data.validate();
  if (mixing_draw.intensities.size() != static_cast<std::size_t>(data.d)) {
    throw DimensionError("perturb_intensities: mixing draw does not match the data");
  }
  if (!(rho >= 0.0) || !(t > 0.0)) {
    throw InvalidArgumentError("perturb_intensities: need rho >= 0 and t > 0");
  }
  const double theta = rho * t;
  const double scale = 1.0 / (theta + t);
  Sinogram out(data.d, 1.0);
  for (Index i = 0; i < data.d; ++i) {
    const std::size_t ii = static_cast<std::size_t>(i);
    const double shape = data.values[ii] + theta * mixing_draw.intensities[ii];
    StreamRng rng(seed, 0, Stage::perturb, static_cast<std::uint64_t>(i));
    out.values[ii] = rng.gamma(shape, scale);
  }
  return out;
}

namespace {

SolverConfig inner_solver(const NplConfig& config) {
  SolverConfig inner = config.solver;
  inner.beta = config.beta_t / config.t;
  inner.penalty = config.penalty;
  return inner;
}

}  // namespace

NplDraw npl_draw_detailed(const Sinogram& data, const SparseDesign& design,
                          const MixingDesign& mixing, const NplConfig& config, int b) {
  config.validate();
  const Grid& grid = mixing.source.grid;
  if (grid.p() != design.p) {
    throw DimensionError("npl_draw: segmentation grid does not match the design");
  }
  if (b < 0) throw InvalidArgumentError("npl_draw: draw index must be nonnegative");

  const std::uint64_t wlb_seed =
      stream_key(config.seed, static_cast<std::uint64_t>(b),
                 static_cast<std::uint64_t>(Stage::wlb), 0);
  const std::uint64_t perturb_seed =
      stream_key(config.seed, static_cast<std::uint64_t>(b),
                 static_cast<std::uint64_t>(Stage::perturb), 0);

  // at rho == 0 the aggregated fit never enters the perturbation, so skip it
  MixingDraw md;
  if (config.rho > 0.0) {
    md = wlb_sample(data, mixing, wlb_seed, config.solver);
  } else {
    md.intensities.assign(static_cast<std::size_t>(data.d), 0.0);
  }
  Sinogram perturbed = perturb_intensities(data, md, config.rho, config.t, perturb_seed);
  SolveReport report = solve(grid, std::nullopt, perturbed, design, inner_solver(config));

  NplDraw out{std::move(report.result), {}};
  out.record.index = b;
  out.record.iterations = report.iterations;
  out.record.converged = report.converged;
  out.record.objective_final = report.objective_final();
  return out;
}

Image npl_draw(const Sinogram& data, const SparseDesign& design, const MixingDesign& mixing,
               const NplConfig& config, int b) {
  return npl_draw_detailed(data, design, mixing, config, b).image;
}

Image npl_draw_deterministic(const Sinogram& data, const SparseDesign& design,
                             const MixingDesign& mixing, const NplConfig& config) {
  config.validate();
  data.validate();
  const Grid& grid = mixing.source.grid;
  if (grid.p() != design.p) {
    throw DimensionError("npl_draw_deterministic: segmentation grid does not match the design");
  }
  if (static_cast<Index>(mixing.a_m.rows()) != data.d) {
    throw DimensionError("npl_draw_deterministic: mixing design rows do not match the data");
  }

  // every gamma collapses to its mean
  std::vector<double> mean_intensities(static_cast<std::size_t>(data.d));
  for (Index i = 0; i < data.d; ++i) {
    mean_intensities[static_cast<std::size_t>(i)] =
        data.values[static_cast<std::size_t>(i)] / data.t;
  }

  const Eigen::Index p_m = mixing.a_m.cols();
  Eigen::VectorXd model = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.d));
  if (config.rho > 0.0 && p_m > 0) {
    double total = 0.0, sens = 0.0;
    for (double v : mean_intensities) total += v;
    for (double s : mixing.col_sums) sens += s;
    std::vector<double> start(static_cast<std::size_t>(p_m), sens > 0.0 ? total / sens : 0.0);
    std::vector<double> lambda_m =
        dense_mlem_solve(mixing.a_m, mixing.col_sums, mean_intensities, start,
                         config.solver.rel_tol, config.solver.max_iters);
    model = mixing.a_m * Eigen::Map<const Eigen::VectorXd>(lambda_m.data(), p_m);
  }

  const double theta = config.rho * config.t;
  Sinogram perturbed(data.d, 1.0);
  for (Index i = 0; i < data.d; ++i) {
    const std::size_t ii = static_cast<std::size_t>(i);
    perturbed.values[ii] =
        (data.values[ii] + theta * model[static_cast<Eigen::Index>(i)]) / (theta + config.t);
  }
  return solve(grid, std::nullopt, perturbed, design, inner_solver(config)).result;
}

SampleArchive npl_sample(const Sinogram& data, const SparseDesign& design,
                         const MixingDesign& mixing, const NplConfig& config) {
  config.validate();
  data.validate();
  const Grid& grid = mixing.source.grid;
  if (grid.p() != design.p) {
    throw DimensionError("npl_sample: segmentation grid does not match the design");
  }
  if (static_cast<Index>(mixing.a_m.rows()) != data.d || data.d != design.d) {
    throw DimensionError("npl_sample: design and data dimensions disagree");
  }

  SampleArchive archive;
  archive.kind = "npl";
  archive.grid = grid;
  archive.config = config;
  archive.draws.assign(static_cast<std::size_t>(config.n_draws), Image(grid, 0.0));
  archive.records.resize(static_cast<std::size_t>(config.n_draws));

  auto run_one = [&](int b) {
    const std::size_t bb = static_cast<std::size_t>(b);
    try {
      NplDraw draw = npl_draw_detailed(data, design, mixing, config, b);
      archive.draws[bb] = std::move(draw.image);
      archive.records[bb] = std::move(draw.record);
    } catch (const std::exception& e) {
      archive.records[bb].index = b;
      archive.records[bb].failed = true;
      archive.records[bb].error = e.what();
    }
  };

  const int workers = std::min(config.workers, config.n_draws);
  if (workers <= 1) {
    for (int b = 0; b < config.n_draws; ++b) run_one(b);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (int b = next.fetch_add(1); b < config.n_draws; b = next.fetch_add(1)) {
          run_one(b);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return archive;
}

}  // namespace npl
