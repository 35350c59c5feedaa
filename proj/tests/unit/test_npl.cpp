#include <cmath>
#include <vector>

#include "doctest.h"
#include "npl/errors.hpp"
#include "npl/npl.hpp"
#include "npl/stats.hpp"
#include "support/fixtures.hpp"
#include "support/stat_oracles.hpp"

using namespace npl;

namespace {

struct Setup {
  Grid grid;
  SparseDesign design;
  Image truth;
  Segmentation seg;
  MixingDesign mixing;
  Sinogram counts;
};

Setup make_setup(int n, double t, std::uint64_t seed) {
  Setup s;
  s.grid = fixtures::grid(n, n);
  auto rays = build_parallel_geometry(20, 20, s.grid);
  s.design = assemble_design(rays, s.grid, Normalization::scaled);
  s.truth = make_disk_phantom(s.grid, 1.0, 0.4, 0.5, s.grid.extent);
  s.seg = segmentation_from_value_classes(s.truth);
  s.mixing = reduce_design(s.design, s.seg);
  s.counts = simulate_sinogram(s.truth, s.design, t, seed);
  return s;
}

NplConfig fast_config(double rho, int draws, double t, std::uint64_t seed) {
  NplConfig cfg;
  cfg.rho = rho;
  cfg.n_draws = draws;
  cfg.t = t;
  cfg.beta_t = 2e-3 * t;
  cfg.seed = seed;
  cfg.solver.rel_tol = 1e-7;
  cfg.solver.max_iters = 120;
  return cfg;
}

}  // namespace

TEST_SUITE("npl") {

TEST_CASE("perturbed intensities follow the mixed gamma law") {
  Sinogram data(2, 3.0);
  data.values = {4.0, 0.0};
  MixingDraw md;
  md.lambda_m = {1.0};
  md.intensities = {1.5, 0.0};

  const double rho = 2.0, t = 3.0;         // theta = 6
  const double shape = 4.0 + 6.0 * 1.5;    // 13
  const double scale = 1.0 / (6.0 + 3.0);  // 1/9
  std::vector<double> xs(20000);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Sinogram out = perturb_intensities(data, md, rho, t, k);
    CHECK(out.t == 1.0);
    CHECK(out.values[1] == 0.0);  // no counts, no pseudo-counts
    xs[k] = out.values[0];
  }
  auto m = oracle::moments(xs);
  CHECK(std::fabs(m.mean - shape * scale) < 5.0 * m.mean_se());
  CHECK(std::fabs(m.var - shape * scale * scale) < 0.05 * shape * scale * scale);
  CHECK(oracle::ks_test_pvalue(xs, [&](double x) {
          return oracle::gamma_cdf(x, shape, scale);
        }) > 0.01);
}

TEST_CASE("zero mixing weight reduces the perturbation to the bootstrap law") {
  Sinogram data(1, 2.0);
  data.values = {7.0};
  MixingDraw md;
  md.lambda_m = {9.0};
  md.intensities = {5.0};  // must be ignored at rho = 0
  std::vector<double> xs(20000);
  for (std::size_t k = 0; k < xs.size(); ++k)
    xs[k] = perturb_intensities(data, md, 0.0, 2.0, k).values[0];
  auto m = oracle::moments(xs);
  CHECK(std::fabs(m.mean - 3.5) < 5.0 * m.mean_se());
  CHECK(oracle::ks_test_pvalue(xs, [](double x) {
          return oracle::gamma_cdf(x, 7.0, 0.5);
        }) > 0.01);
}

TEST_CASE("draws are deterministic in seed and index") {
  Setup s = make_setup(8, 60.0, 5);
  NplConfig cfg = fast_config(0.5, 4, 60.0, 99);
  Image a = npl_draw(s.counts, s.design, s.mixing, cfg, 2);
  Image b = npl_draw(s.counts, s.design, s.mixing, cfg, 2);
  CHECK(a.values == b.values);

  Image c = npl_draw(s.counts, s.design, s.mixing, cfg, 3);
  CHECK(a.values != c.values);

  NplConfig other = cfg;
  other.seed = 100;
  Image d = npl_draw(s.counts, s.design, s.mixing, other, 2);
  CHECK(a.values != d.values);
}

TEST_CASE("collapsing the randomness reproduces the penalty-selected reference") {
  Setup s = make_setup(8, 4.0, 0);
  // exact integer counts t * Lambda keep Y/t lossless in floating point
  Sinogram exact(s.design.d, 4.0);
  auto intens = s.design.forward(s.truth.values);
  for (std::size_t i = 0; i < intens.size(); ++i) exact.values[i] = 4.0 * intens[i];

  NplConfig cfg;
  cfg.rho = 0.0;
  cfg.t = 4.0;
  cfg.beta_t = 4e-6;  // beta_t / t = 1e-6
  cfg.solver.rel_tol = 1e-12;
  cfg.solver.max_iters = 5000;
  Image det = npl_draw_deterministic(exact, s.design, s.mixing, cfg);
  Image ref = lambda_opt(s.truth, s.design, 1e-6, cfg.penalty);
  for (std::size_t j = 0; j < det.values.size(); ++j)
    CHECK(det.values[j] == doctest::Approx(ref.values[j]).epsilon(1e-6));
}

TEST_CASE("worker counts do not change the archive") {
  Setup s = make_setup(8, 60.0, 6);
  NplConfig cfg = fast_config(0.5, 12, 60.0, 17);
  cfg.workers = 1;
  SampleArchive a = npl_sample(s.counts, s.design, s.mixing, cfg);
  cfg.workers = 4;
  SampleArchive b = npl_sample(s.counts, s.design, s.mixing, cfg);
  REQUIRE(a.draws.size() == b.draws.size());
  for (std::size_t k = 0; k < a.draws.size(); ++k) {
    CHECK(a.draws[k].values == b.draws[k].values);
    CHECK(a.records[k].iterations == b.records[k].iterations);
    CHECK(a.records[k].failed == b.records[k].failed);
  }
}

TEST_CASE("per-draw failures are recorded without aborting the run") {
  Grid g = fixtures::grid(1, 1);
  SparseDesign design = fixtures::design_from_dense(Eigen::MatrixXd::Constant(2, 1, 0.5));
  Sinogram data(2, 1.0);
  data.values = {3.0, 0.0};

  MixingDesign broken;
  broken.a_m = Eigen::MatrixXd::Zero(2, 1);  // aggregated model sees nothing
  broken.col_sums = {0.0};
  broken.source = fixtures::single_segment(g);

  NplConfig cfg;
  cfg.rho = 1.0;
  cfg.n_draws = 3;
  cfg.t = 1.0;
  SampleArchive archive = npl_sample(data, design, broken, cfg);
  REQUIRE(archive.records.size() == 3);
  for (const auto& r : archive.records) {
    CHECK(r.failed);
    CHECK_FALSE(r.error.empty());
  }
  for (const auto& img : archive.draws)
    for (double v : img.values) CHECK(v == 0.0);
}

TEST_CASE("sampling at high exposure concentrates near the reference") {
  Setup s = make_setup(8, 1e5, 8);
  NplConfig cfg = fast_config(0.5, 48, 1e5, 23);
  cfg.beta_t = 1e-3 * cfg.t;  // beta_eff = 1e-3
  SampleArchive archive = npl_sample(s.counts, s.design, s.mixing, cfg);
  int failed = 0;
  for (const auto& r : archive.records) failed += r.failed ? 1 : 0;
  CHECK(failed == 0);

  Summary sum = summarize(archive, 0.95);
  Image ref = lambda_opt(s.truth, s.design, 1e-3, cfg.penalty);
  CHECK(npl_vs_map_distance(sum.mean, ref) < 0.05);
}

TEST_CASE("configuration validation rejects bad values") {
  NplConfig cfg;
  cfg.rho = -0.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
  cfg = NplConfig{};
  cfg.n_draws = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
  cfg = NplConfig{};
  cfg.t = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
  cfg = NplConfig{};
  cfg.workers = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
}

}  // TEST_SUITE
