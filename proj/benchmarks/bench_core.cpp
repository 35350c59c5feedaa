#include <benchmark/benchmark.h>

#include <cmath>

#include "npl/geometry.hpp"
#include "npl/gibbs.hpp"
#include "npl/model.hpp"
#include "npl/mri.hpp"
#include "npl/npl.hpp"
#include "npl/recon.hpp"

using namespace npl;

namespace {

struct BenchScene {
  Grid grid;
  SparseDesign design;
  Image truth;
  MixingDesign mixing;
  Sinogram counts{0, 1.0};
};

BenchScene scene(int n, int rays, double t) {
  BenchScene s;
  s.grid = Grid{n, n, 1.0};
  s.design = assemble_design(build_parallel_geometry(rays, rays, s.grid), s.grid,
                             Normalization::scaled);
  s.truth = make_disk_phantom(s.grid, 1.0, 0.3, 0.45, 1.0);
  s.mixing = reduce_design(s.design, segmentation_from_value_classes(s.truth));
  s.counts = simulate_sinogram(s.truth, s.design, t, 1);
  return s;
}

void bm_siddon_trace(benchmark::State& state) {
  const Grid grid{static_cast<int>(state.range(0)), static_cast<int>(state.range(0)), 1.0};
  Ray ray{-1.3, -0.2, std::cos(0.37), std::sin(0.37)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(siddon_trace(ray, grid));
  }
}
BENCHMARK(bm_siddon_trace)->Arg(64)->Arg(256);

void bm_assemble_design(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Grid grid{n, n, 1.0};
  const RaySet rays = build_parallel_geometry(n, n, grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_design(rays, grid, Normalization::scaled));
  }
}
BENCHMARK(bm_assemble_design)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void bm_mlem_step(benchmark::State& state) {
  const BenchScene s = scene(static_cast<int>(state.range(0)), 48, 100.0);
  Sinogram intensities(s.counts.d, 1.0);
  for (std::size_t i = 0; i < intensities.values.size(); ++i) {
    intensities.values[i] = s.counts.values[i] / 100.0;
  }
  Image x(s.grid, 1.0);
  for (auto _ : state) {
    x = mlem_step(x, intensities, s.design);
    benchmark::DoNotOptimize(x.values.data());
  }
}
BENCHMARK(bm_mlem_step)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void bm_gem_step(benchmark::State& state) {
  const BenchScene s = scene(static_cast<int>(state.range(0)), 48, 100.0);
  Sinogram intensities(s.counts.d, 1.0);
  for (std::size_t i = 0; i < intensities.values.size(); ++i) {
    intensities.values[i] = s.counts.values[i] / 100.0;
  }
  SolverConfig cfg;
  cfg.beta = 0.01;
  Image x(s.grid, 1.0);
  for (auto _ : state) {
    x = gem_step(x, intensities, s.design, cfg);
    benchmark::DoNotOptimize(x.values.data());
  }
}
BENCHMARK(bm_gem_step)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void bm_wlb_sample(benchmark::State& state) {
  const BenchScene s = scene(32, 48, 100.0);
  SolverConfig solver;
  solver.rel_tol = 1e-8;
  solver.max_iters = 200;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(wlb_sample(s.counts, s.mixing, seed++, solver));
  }
}
BENCHMARK(bm_wlb_sample)->Unit(benchmark::kMicrosecond);

void bm_npl_draw(benchmark::State& state) {
  const BenchScene s = scene(32, 48, 100.0);
  NplConfig cfg;
  cfg.rho = 0.5;
  cfg.n_draws = 1;
  cfg.t = 100.0;
  cfg.beta_t = 0.1;
  cfg.solver.rel_tol = 1e-6;
  cfg.solver.max_iters = 100;
  int b = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(npl_draw(s.counts, s.design, s.mixing, cfg, b++));
  }
}
BENCHMARK(bm_npl_draw)->Unit(benchmark::kMillisecond);

void bm_gibbs_sweep(benchmark::State& state) {
  const BenchScene s = scene(static_cast<int>(state.range(0)), 48, 100.0);
  GibbsConfig cfg;
  cfg.seed = 2;
  Image x = s.truth;
  std::uint64_t iter = 0;
  for (auto _ : state) {
    const std::vector<double> latents =
        gibbs_latent_step(x, s.counts, s.design, cfg.seed, iter);
    x = gibbs_lambda_step(latents, s.design, s.grid, s.counts.t, cfg, cfg.seed, iter);
    benchmark::DoNotOptimize(x.values.data());
    ++iter;
  }
}
BENCHMARK(bm_gibbs_sweep)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
