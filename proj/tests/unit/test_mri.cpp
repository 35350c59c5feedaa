#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "npl/errors.hpp"
#include "npl/mri.hpp"
#include "support/fixtures.hpp"
#include "support/stat_oracles.hpp"

using namespace npl;

namespace {

// disk phantom setup with a two-class segmentation aligned to it
struct AlignedSetup {
  Grid grid;
  SparseDesign design;
  Image truth;
  Segmentation seg;
  Sinogram counts;
};

AlignedSetup aligned_setup(int n, double t, std::uint64_t seed) {
  AlignedSetup s;
  s.grid = fixtures::grid(n, n);
  auto rays = build_parallel_geometry(20, 20, s.grid);
  s.design = assemble_design(rays, s.grid, Normalization::scaled);
  s.truth = make_disk_phantom(s.grid, 1.0, 0.4, 0.5, s.grid.extent);
  s.seg = segmentation_from_value_classes(s.truth);
  s.counts = simulate_sinogram(s.truth, s.design, t, seed);
  return s;
}

}  // namespace

TEST_SUITE("mri") {

TEST_CASE("value classes become segments in ascending order") {
  Grid g = fixtures::grid(2, 2);
  Image img(g);
  img.values = {0.0, 1.5, 3.0, 1.5};
  Segmentation seg = segmentation_from_value_classes(img);
  REQUIRE(seg.labels.size() == 1);
  CHECK(seg.labels[0] == std::vector<std::int32_t>{-1, 0, 1, 0});
  CHECK(seg.segment_counts == std::vector<int>{2});
  CHECK(seg.p_m() == 2);
  seg.validate();

  Image close(g);
  close.values = {1.0, 1.0 + 1e-14, 0.0, 2.0};
  Segmentation merged = segmentation_from_value_classes(close);
  CHECK(merged.p_m() == 2);  // the near-equal values share a class
}

TEST_CASE("reduced design sums columns per segment") {
  Eigen::MatrixXd a(3, 4);
  a << 0.3, 0.1, 0.0, 0.5,
       0.2, 0.0, 0.4, 0.1,
       0.0, 0.6, 0.2, 0.0;
  SparseDesign d = fixtures::design_from_dense(a);
  Grid g = fixtures::grid(2, 2);
  Segmentation seg;
  seg.grid = g;
  seg.labels = {{0, 0, 1, 1}};
  seg.segment_counts = {2};

  MixingDesign mix = reduce_design(d, seg);
  REQUIRE(mix.a_m.rows() == 3);
  REQUIRE(mix.a_m.cols() == 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(mix.a_m(i, 0) == doctest::Approx(a(i, 0) + a(i, 1)).epsilon(1e-15));
    CHECK(mix.a_m(i, 1) == doctest::Approx(a(i, 2) + a(i, 3)).epsilon(1e-15));
  }
  CHECK(mix.col_sums[0] == doctest::Approx(a.col(0).sum() + a.col(1).sum()).epsilon(1e-14));
  CHECK(mix.col_sums[1] == doctest::Approx(a.col(2).sum() + a.col(3).sum()).epsilon(1e-14));
  CHECK_FALSE(mix.condition_warning);
  CHECK(mix.source.p_m() == 2);
}

TEST_CASE("empty segments are rejected by name") {
  SparseDesign d = fixtures::random_design(4, 4, 7);
  Grid g = fixtures::grid(2, 2);
  Segmentation seg;
  seg.grid = g;
  seg.labels = {{0, 0, 0, 0}};
  seg.segment_counts = {2};  // segment 1 has no pixels
  CHECK_THROWS_WITH_AS(reduce_design(d, seg), doctest::Contains("empty"),
                       InvalidSegmentationError);
}

TEST_CASE("proportional segment columns trip the condition warning") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 1.0, 2.0, 2.0;  // identical pixel columns
  SparseDesign d = fixtures::design_from_dense(a);
  Grid g = fixtures::grid(2, 1);
  Segmentation seg;
  seg.grid = g;
  seg.labels = {{0, 1}};
  seg.segment_counts = {2};
  MixingDesign mix = reduce_design(d, seg);
  CHECK(std::isinf(mix.condition));
  CHECK(mix.condition_warning);
}

TEST_CASE("bootstrap intensities follow the per-count gamma law") {
  Sinogram data(2, 2.0);
  data.values = {4.0, 0.0};

  std::vector<double> xs(20000);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Sinogram draw = wlb_intensities(data, k);
    CHECK(draw.values[1] == 0.0);  // zero counts stay exactly zero
    CHECK(draw.t == 1.0);
    xs[k] = draw.values[0];
  }
  auto m = oracle::moments(xs);
  CHECK(std::fabs(m.mean - 2.0) < 5.0 * m.mean_se());  // shape 4, scale 1/2
  CHECK(std::fabs(m.var - 1.0) < 0.05);
  CHECK(oracle::ks_test_pvalue(xs, [](double x) {
          return oracle::gamma_cdf(x, 4.0, 0.5);
        }) > 0.01);

  Sinogram frac(1, 1.0);
  frac.values = {1.5};
  CHECK_THROWS_AS(wlb_intensities(frac, 0), ModelViolationError);
}

TEST_CASE("weight representation reproduces the same law") {
  Sinogram data(1, 1.5);
  data.values = {3.0};
  std::vector<double> xs(12000);
  for (std::size_t k = 0; k < xs.size(); ++k)
    xs[k] = weight_representation_intensities(data, k).values[0];
  auto m = oracle::moments(xs);
  CHECK(std::fabs(m.mean - 2.0) < 5.0 * m.mean_se());
  CHECK(oracle::ks_test_pvalue(xs, [](double x) {
          return oracle::gamma_cdf(x, 3.0, 1.0 / 1.5);
        }) > 0.01);

  Sinogram big(1, 1.0);
  big.values = {2e7};
  CHECK_THROWS_AS(weight_representation_intensities(big, 0), CapacityError);
}

TEST_CASE("aggregated fits satisfy the mass identity draw by draw") {
  AlignedSetup s = aligned_setup(16, 40.0, 3);
  MixingDesign mix = reduce_design(s.design, s.seg);
  SolverConfig solver;
  solver.rel_tol = 1e-12;
  solver.max_iters = 5000;
  for (std::uint64_t b = 0; b < 150; ++b) {
    MixingDraw draw = wlb_sample(s.counts, mix, b, solver);
    Sinogram boot = wlb_intensities(s.counts, b);
    double fitted = 0.0, target = 0.0;
    for (double v : draw.intensities) fitted += v;
    for (double v : boot.values) target += v;
    CHECK(std::fabs(fitted - target) <= 1e-8 * std::max(1.0, target));
  }
}

TEST_CASE("aligned segmentations pass the zero-ray diagnostic") {
  Grid g = fixtures::grid(16, 16);
  auto rays = build_parallel_geometry(20, 20, g);
  SparseDesign design = assemble_design(rays, g, Normalization::scaled);
  Image truth = make_disk_phantom(g, 1.0, 0.5, 0.3, 0.6);  // zero background
  Segmentation seg = segmentation_from_value_classes(truth);
  MixingDesign mix = reduce_design(design, seg);
  Sinogram intens(design.d, 1.0);
  intens.values = design.forward(truth.values);

  NonexpansivenessReport rep = nonexpansiveness_check(intens, mix, 1e-10);
  CHECK(rep.holds);
  CHECK(rep.violations.empty());
}

TEST_CASE("a segment spilling outside the support is flagged") {
  Grid g = fixtures::grid(16, 16);
  auto rays = build_parallel_geometry(20, 20, g);
  SparseDesign design = assemble_design(rays, g, Normalization::scaled);
  Image truth = make_disk_phantom(g, 1.0, 0.5, 0.3, 0.6);
  Sinogram intens(design.d, 1.0);
  intens.values = design.forward(truth.values);
  bool has_zero = false;
  for (double v : intens.values) has_zero |= (v == 0.0);
  REQUIRE(has_zero);

  Segmentation whole = fixtures::single_segment(g);
  MixingDesign mix = reduce_design(design, whole);
  NonexpansivenessReport rep = nonexpansiveness_check(intens, mix, 1e-10);
  CHECK_FALSE(rep.holds);
  CHECK_FALSE(rep.violations.empty());
}

TEST_CASE("mask preprocessing removes exactly the dead-ray support") {
  Grid g = fixtures::grid(16, 16);
  auto rays = build_parallel_geometry(20, 20, g);
  SparseDesign design = assemble_design(rays, g, Normalization::scaled);
  Image truth = make_disk_phantom(g, 1.0, 0.5, 0.3, 0.6);
  Sinogram pseudo(design.d, 1.0);
  pseudo.values = design.forward(truth.values);  // zeros exactly where the truth is dark

  Segmentation whole = fixtures::single_segment(g);
  Segmentation cut = mask_preprocess(design, whole, pseudo);
  cut.validate();

  // every pixel on a zero ray is outside all segments afterwards
  for (Index i = 0; i < design.d; ++i) {
    if (pseudo.values[static_cast<std::size_t>(i)] != 0.0) continue;
    for (Index k = design.row_ptr[i]; k < design.row_ptr[i + 1]; ++k) {
      Index j = design.col_idx[static_cast<std::size_t>(k)];
      for (const auto& map : cut.labels)
        CHECK(map[static_cast<std::size_t>(j)] == -1);
    }
  }

  // pixels inside the true support survive
  for (Index j = 0; j < g.p(); ++j) {
    if (truth.values[static_cast<std::size_t>(j)] > 0.0)
      CHECK(cut.labels[0][static_cast<std::size_t>(j)] == 0);
  }

  // idempotent, and a no-zero-count sinogram changes nothing
  Segmentation twice = mask_preprocess(design, cut, pseudo);
  CHECK(twice.labels == cut.labels);
  CHECK(twice.segment_counts == cut.segment_counts);

  Sinogram lit(design.d, 1.0);
  lit.values.assign(static_cast<std::size_t>(design.d), 1.0);
  Segmentation same = mask_preprocess(design, whole, lit);
  CHECK(same.labels == whole.labels);

  Sinogram dark(design.d, 1.0);
  CHECK_THROWS_AS(mask_preprocess(design, whole, dark), DegenerateDataError);
}

TEST_CASE("masking repairs the spilled segmentation") {
  Grid g = fixtures::grid(16, 16);
  auto rays = build_parallel_geometry(20, 20, g);
  SparseDesign design = assemble_design(rays, g, Normalization::scaled);
  Image truth = make_disk_phantom(g, 1.0, 0.5, 0.3, 0.6);
  Sinogram intens(design.d, 1.0);
  intens.values = design.forward(truth.values);

  Segmentation whole = fixtures::single_segment(g);
  Segmentation cut = mask_preprocess(design, whole, intens);
  MixingDesign mix = reduce_design(design, cut);
  NonexpansivenessReport rep = nonexpansiveness_check(intens, mix, 1e-10);
  CHECK(rep.holds);
}

TEST_CASE("the dense fitting engine agrees with the sparse solver") {
  Grid g = fixtures::grid(3, 2);
  SparseDesign d = fixtures::random_design(9, 6, 170);
  Sinogram data(9, 1.0);
  data.values = fixtures::random_positive(9, 171, 0.2, 4.0);

  double total = 0.0, sens = 0.0;
  for (double v : data.values) total += v;
  for (double s : d.col_sums) sens += s;
  std::vector<double> start(6, total / sens);
  auto dense = dense_mlem_solve(d.to_dense(), d.col_sums, data.values, start, 1e-12, 5000);

  SolverConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.max_iters = 5000;
  SolveReport rep = solve(g, std::nullopt, data, d, cfg);
  Image fit(g);
  fit.values = dense;
  double l_dense = kl_objective(fit, data, d);
  CHECK(std::fabs(l_dense - rep.objective_final()) <= 1e-9 * std::max(1.0, std::fabs(l_dense)));

  CHECK(dense_mlem_solve(Eigen::MatrixXd(9, 0), {}, data.values, {}, 1e-9, 100).empty());
}

TEST_CASE("degenerate aggregated support is reported") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 1);
  std::vector<double> cs{0.0};
  std::vector<double> data{3.0, 0.0};
  std::vector<double> start{0.0};
  CHECK_THROWS_AS(dense_mlem_solve(a, cs, data, start, 1e-9, 50), DegenerateSupportError);
}

}  // TEST_SUITE
