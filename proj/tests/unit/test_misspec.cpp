#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "npl/errors.hpp"
#include "npl/misspec.hpp"
#include "support/fixtures.hpp"

using namespace npl;

namespace {

const double kMass = 2.0 + std::sqrt(2.0);
const double kMinimum = 1.0 + std::log(kMass);

SolverConfig tight_solver() {
  SolverConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.max_iters = 5000;
  return cfg;
}

}  // namespace

TEST_SUITE("misspec") {

TEST_CASE("the counterexample system is built as documented") {
  CounterexampleSpec spec = CounterexampleSpec::make();
  CHECK(spec.design.d == 6);
  CHECK(spec.design.p == 4);
  CHECK(spec.column_mass == doctest::Approx(kMass).epsilon(1e-15));
  for (double s : spec.design.col_sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(spec.target.values[0] == 1.0);
  for (std::size_t i = 1; i < 6; ++i) CHECK(spec.target.values[i] == 0.0);
  CHECK(spec.grid.p() == 4);

  // the raw (unnormalized) design is injective: det(A^T A) = 128
  Eigen::MatrixXd raw = spec.design.to_dense() * spec.column_mass;
  double det = (raw.transpose() * raw).determinant();
  CHECK(det == doctest::Approx(128.0).epsilon(1e-9));
  CHECK(std::isfinite(design_condition_number(raw)));
}

TEST_CASE("the solver reaches the analytic minimum from any start") {
  const std::array<std::array<double, 4>, 4> starts{{{0.4, 0.6, 0.5, 0.5},
                                                     {1.5, 0.1, 0.8, 0.2},
                                                     {0.05, 1.9, 0.05, 1.9},
                                                     {1.0, 1.0, 1.0, 1.0}}};
  for (const auto& s : starts) {
    CounterexampleFit fit = counterexample_solve(s, tight_solver());
    CHECK(fit.converged);
    CHECK(std::fabs(fit.objective - kMinimum) <= 1e-8);
    CHECK(fit.lambda[2] <= 1e-8);
    CHECK(fit.lambda[3] <= 1e-8);
    CHECK(std::fabs(fit.lambda[0] + fit.lambda[1] - 1.0) <= 1e-8);
    // only the observed LOR drives the first two coordinates, so their
    // ratio is invariant under the multiplicative updates
    CHECK(fit.lambda[0] / fit.lambda[1] == doctest::Approx(s[0] / s[1]).epsilon(1e-8));
  }
  CHECK_THROWS_AS(counterexample_solve({0.0, 0.0, 0.5, 0.5}, tight_solver()),
                  InvalidArgumentError);
}

TEST_CASE("the grid oracle brackets the analytic minimum from above") {
  GridOracleResult coarse = counterexample_grid_oracle(10);
  GridOracleResult fine = counterexample_grid_oracle(100);
  CHECK(coarse.min_value >= kMinimum - 1e-12);
  CHECK(fine.min_value >= kMinimum - 1e-12);
  CHECK(fine.min_value <= coarse.min_value + 1e-12);
  CHECK(std::fabs(fine.min_value - kMinimum) <= 1e-9);
  CHECK(coarse.step == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_FALSE(fine.near_minimizers.empty());
  for (const auto& m : fine.near_minimizers) {
    CHECK(m[4] <= fine.min_value + 2.0 * fine.step);
    CHECK(m[2] <= 2.0 * fine.step + 1e-12);  // lambda_3 hugs zero near the minimum
  }
  CHECK_THROWS_AS(counterexample_grid_oracle(5), InvalidArgumentError);
}

TEST_CASE("well-posed aggregated systems pass the identifiability check") {
  Grid g = fixtures::grid(2, 2);
  SparseDesign eye = fixtures::design_from_dense(Eigen::MatrixXd::Identity(4, 4));
  Segmentation seg;
  seg.grid = g;
  seg.labels = {{0, 0, 1, 1}};
  seg.segment_counts = {2};
  MixingDesign mix = reduce_design(eye, seg);

  Sinogram truth(4, 1.0);
  truth.values = {1.0, 1.0, 2.0, 2.0};  // exactly representable by the segments
  IdentifiabilityReport rep = identifiability_positive_check(mix, truth);
  CHECK(rep.unique);
  CHECK(rep.locally_convex);
  CHECK(rep.max_spread < 1e-6);
  CHECK(rep.min_curvature > 0.0);
  CHECK(rep.minimizers.size() == 20);
}

TEST_CASE("the counterexample fails the identifiability check") {
  CounterexampleSpec spec = CounterexampleSpec::make();
  MixingDesign mix;
  mix.a_m = spec.design.to_dense();
  mix.col_sums = spec.design.col_sums;
  mix.source = fixtures::single_segment(spec.grid);
  IdentifiabilityReport rep = identifiability_positive_check(mix, spec.target);
  CHECK_FALSE(rep.unique);
  CHECK(rep.max_spread > 0.1);
}

}  // TEST_SUITE
