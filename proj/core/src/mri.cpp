#include "npl/mri.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "npl/errors.hpp"
#include "npl/rng.hpp"

namespace npl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_integer_counts(const Sinogram& data, const char* who) {
  for (Index i = 0; i < data.d; ++i) {
    const double y = data.values[static_cast<std::size_t>(i)];
    if (!std::isfinite(y) || y < 0.0 || y != std::floor(y)) {
      throw ModelViolationError(std::string(who) + ": count " + std::to_string(i) +
                                " is not a nonnegative integer");
    }
  }
}

// exposure-1 Poisson objective, +inf when the model is zero on a
// positive-data LOR
double dense_objective(const Eigen::VectorXd& model, const std::vector<double>& data) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    const double y = data[static_cast<std::size_t>(i)];
    const double m = model[i];
    if (y > 0.0) {
      if (m <= 0.0) return kInf;
      acc += m - static_cast<long double>(y) * std::log(m);
    } else {
      acc += m;
    }
  }
  return static_cast<double>(acc);
}

MixingDraw fit_mixing(const std::vector<double>& intensities, const MixingDesign& mixing,
                      double rel_tol, int max_iters) {
  const Index p_m = static_cast<Index>(mixing.col_sums.size());
  double total = 0.0, sens = 0.0;
  for (double v : intensities) total += v;
  for (double s : mixing.col_sums) sens += s;
  const double start_value = sens > 0.0 ? total / sens : 0.0;
  std::vector<double> start(static_cast<std::size_t>(p_m), start_value);

  MixingDraw draw;
  draw.lambda_m = dense_mlem_solve(mixing.a_m, mixing.col_sums, intensities, start,
                                   rel_tol, max_iters);
  Eigen::Map<const Eigen::VectorXd> lm(draw.lambda_m.data(),
                                       static_cast<Eigen::Index>(draw.lambda_m.size()));
  Eigen::VectorXd model = mixing.a_m * lm;
  draw.intensities.assign(model.data(), model.data() + model.size());
  return draw;
}

}  // namespace

int Segmentation::p_m() const {
  int total = 0;
  for (int c : segment_counts) total += c;
  return total;
}

void Segmentation::validate() const {
  grid.validate();
  if (labels.size() != segment_counts.size()) {
    throw InvalidSegmentationError("segmentation: label map count does not match segment counts");
  }
  const std::size_t p = static_cast<std::size_t>(grid.p());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k].size() != p) {
      throw InvalidSegmentationError("segmentation: label map " + std::to_string(k) +
                                     " does not cover the grid");
    }
    if (segment_counts[k] < 0) {
      throw InvalidSegmentationError("segmentation: negative segment count for image " +
                                     std::to_string(k));
    }
    for (std::int32_t lab : labels[k]) {
      if (lab < -1 || lab >= segment_counts[k]) {
        throw InvalidSegmentationError("segmentation: label out of range in image " +
                                       std::to_string(k));
      }
    }
  }
}

Segmentation segmentation_from_value_classes(const Image& image, double tol) {
  image.validate();
  std::vector<double> levels;
  for (double v : image.values) {
    if (v <= tol) continue;
    bool found = false;
    for (double l : levels) {
      if (std::abs(v - l) <= tol) { found = true; break; }
    }
    if (!found) levels.push_back(v);
  }
  std::sort(levels.begin(), levels.end());

  Segmentation seg;
  seg.grid = image.grid;
  seg.labels.resize(1);
  seg.labels[0].assign(image.values.size(), -1);
  for (std::size_t j = 0; j < image.values.size(); ++j) {
    const double v = image.values[j];
    if (v <= tol) continue;
    for (std::size_t s = 0; s < levels.size(); ++s) {
      if (std::abs(v - levels[s]) <= tol) {
        seg.labels[0][j] = static_cast<std::int32_t>(s);
        break;
      }
    }
  }
  seg.segment_counts = {static_cast<int>(levels.size())};
  return seg;
}

MixingDesign reduce_design(const SparseDesign& design, const Segmentation& seg,
                           double condition_cap) {
  seg.validate();
  if (seg.grid.p() != design.p) {
    throw DimensionError("reduce_design: segmentation grid does not match the design");
  }

  const std::size_t r = seg.labels.size();
  std::vector<int> offsets(r, 0);
  int p_m = 0;
  for (std::size_t k = 0; k < r; ++k) {
    offsets[k] = p_m;
    p_m += seg.segment_counts[k];
  }

  // every declared segment must own at least one pixel
  for (std::size_t k = 0; k < r; ++k) {
    std::vector<Index> pixel_count(static_cast<std::size_t>(seg.segment_counts[k]), 0);
    for (std::int32_t lab : seg.labels[k]) {
      if (lab >= 0) ++pixel_count[static_cast<std::size_t>(lab)];
    }
    for (std::size_t s = 0; s < pixel_count.size(); ++s) {
      if (pixel_count[s] == 0) {
        throw InvalidSegmentationError("reduce_design: segment (" + std::to_string(k) +
                                       ", " + std::to_string(s) + ") is empty");
      }
    }
  }

  MixingDesign mix;
  mix.source = seg;
  mix.a_m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(design.d),
                                  static_cast<Eigen::Index>(p_m));
  for (Index i = 0; i < design.d; ++i) {
    for (Index e = design.row_ptr[static_cast<std::size_t>(i)];
         e < design.row_ptr[static_cast<std::size_t>(i) + 1]; ++e) {
      const Index j = design.col_idx[static_cast<std::size_t>(e)];
      const double a = design.values[static_cast<std::size_t>(e)];
      for (std::size_t k = 0; k < r; ++k) {
        const std::int32_t s = seg.labels[k][static_cast<std::size_t>(j)];
        if (s >= 0) {
          mix.a_m(static_cast<Eigen::Index>(i), offsets[k] + s) += a;
        }
      }
    }
  }

  mix.col_sums.resize(static_cast<std::size_t>(p_m));
  for (int j = 0; j < p_m; ++j) mix.col_sums[static_cast<std::size_t>(j)] = mix.a_m.col(j).sum();

  mix.condition = p_m > 0 ? design_condition_number(mix.a_m) : 0.0;
  mix.condition_warning = !(mix.condition < condition_cap);
  return mix;
}

Sinogram wlb_intensities(const Sinogram& data, std::uint64_t seed) {
  data.validate();
  require_integer_counts(data, "wlb_intensities");
  Sinogram out(data.d, 1.0);
  const double scale = 1.0 / data.t;
  for (Index i = 0; i < data.d; ++i) {
    StreamRng rng(seed, 0, Stage::wlb, static_cast<std::uint64_t>(i));
    out.values[static_cast<std::size_t>(i)] =
        rng.gamma(data.values[static_cast<std::size_t>(i)], scale);
  }
  return out;
}

Sinogram weight_representation_intensities(const Sinogram& data, std::uint64_t seed) {
  data.validate();
  require_integer_counts(data, "weight_representation_intensities");
  Sinogram out(data.d, 1.0);
  for (Index i = 0; i < data.d; ++i) {
    const double y = data.values[static_cast<std::size_t>(i)];
    if (y > 1e7) {
      throw CapacityError("weight_representation_intensities: count " + std::to_string(i) +
                          " too large for the explicit weight sum");
    }
    StreamRng rng(seed, 0, Stage::weights, static_cast<std::uint64_t>(i));
    long double acc = 0.0L;
    const long long n = static_cast<long long>(y);
    for (long long k = 0; k < n; ++k) acc += rng.exponential();
    out.values[static_cast<std::size_t>(i)] = static_cast<double>(acc) / data.t;
  }
  return out;
}

MixingDraw wlb_sample(const Sinogram& data, const MixingDesign& mixing, std::uint64_t seed,
                      const SolverConfig& solver) {
  if (static_cast<Index>(mixing.a_m.rows()) != data.d) {
    throw DimensionError("wlb_sample: mixing design rows do not match the data");
  }
  solver.validate();
  Sinogram perturbed = wlb_intensities(data, seed);
  return fit_mixing(perturbed.values, mixing, solver.rel_tol, solver.max_iters);
}

MixingDraw weight_representation_sample(const Sinogram& data, const MixingDesign& mixing,
                                        std::uint64_t seed) {
  if (static_cast<Index>(mixing.a_m.rows()) != data.d) {
    throw DimensionError("weight_representation_sample: mixing design rows do not match the data");
  }
  Sinogram perturbed = weight_representation_intensities(data, seed);
  SolverConfig solver;
  return fit_mixing(perturbed.values, mixing, solver.rel_tol, solver.max_iters);
}

NonexpansivenessReport nonexpansiveness_check(const Sinogram& truth_intensities,
                                              const MixingDesign& mixing, double tol) {
  if (static_cast<Index>(mixing.a_m.rows()) != truth_intensities.d) {
    throw DimensionError("nonexpansiveness_check: mixing design rows do not match the data");
  }
  if (tol < 0.0) throw InvalidArgumentError("nonexpansiveness_check: tol must be nonnegative");
  MixingDraw fit = fit_mixing(truth_intensities.values, mixing, 1e-12, 5000);

  NonexpansivenessReport report;
  report.lambda_m_star = fit.lambda_m;
  for (Index i = 0; i < truth_intensities.d; ++i) {
    const std::size_t ii = static_cast<std::size_t>(i);
    if (truth_intensities.values[ii] == 0.0 && fit.intensities[ii] > tol) {
      report.violations.push_back(i);
    }
  }
  report.holds = report.violations.empty();
  return report;
}

std::vector<double> dense_mlem_solve(const Eigen::MatrixXd& a,
                                     const std::vector<double>& col_sums,
                                     const std::vector<double>& data,
                                     const std::vector<double>& start, double rel_tol,
                                     int max_iters) {
  const Eigen::Index d = a.rows();
  const Eigen::Index p = a.cols();
  if (static_cast<Eigen::Index>(data.size()) != d ||
      static_cast<Eigen::Index>(start.size()) != p ||
      static_cast<Eigen::Index>(col_sums.size()) != p) {
    throw DimensionError("dense_mlem_solve: dimension mismatch");
  }
  if (p == 0) return {};

  Eigen::VectorXd lambda = Eigen::Map<const Eigen::VectorXd>(start.data(), p);
  Eigen::VectorXd ratio(d);
  double prev = kInf;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd model = a * lambda;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double y = data[static_cast<std::size_t>(i)];
      if (y == 0.0) {
        ratio[i] = 0.0;
      } else if (model[i] <= 0.0) {
        throw DegenerateSupportError("dense_mlem_solve: zero model on LOR " +
                                     std::to_string(i) + " with positive data");
      } else {
        ratio[i] = y / model[i];
      }
    }
    Eigen::VectorXd back = a.transpose() * ratio;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double s = col_sums[static_cast<std::size_t>(j)];
      lambda[j] = s > 0.0 ? lambda[j] * back[j] / s : 0.0;
      if (lambda[j] < 1e-300) lambda[j] = 0.0;
    }
    const double obj = dense_objective(a * lambda, data);
    if (std::isfinite(obj) && std::isfinite(prev) &&
        std::abs(prev - obj) <= rel_tol * (1.0 + std::abs(obj))) {
      prev = obj;
      break;
    }
    prev = obj;
  }
  return std::vector<double>(lambda.data(), lambda.data() + p);
}

Segmentation mask_preprocess(const SparseDesign& design, const Segmentation& seg,
                             const Sinogram& data) {
  seg.validate();
  data.validate();
  if (data.d != design.d) {
    throw DimensionError("mask_preprocess: data length does not match the design");
  }
  if (seg.grid.p() != design.p) {
    throw DimensionError("mask_preprocess: segmentation grid does not match the design");
  }

  const Grid& grid = seg.grid;
  const std::size_t p = static_cast<std::size_t>(design.p);

  std::vector<Index> zero_rows;
  for (Index i = 0; i < data.d; ++i) {
    if (data.values[static_cast<std::size_t>(i)] == 0.0) zero_rows.push_back(i);
  }
  if (zero_rows.size() == static_cast<std::size_t>(data.d)) {
    throw DegenerateDataError("mask_preprocess: every LOR has zero counts");
  }
  if (zero_rows.empty()) return seg;

  std::vector<double> cx(p), cy(p);
  for (int iy = 0; iy < grid.height; ++iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      const std::size_t j = static_cast<std::size_t>(iy) * grid.width + ix;
      cx[j] = grid.center_x(ix);
      cy[j] = grid.center_y(iy);
    }
  }
  const std::vector<double> mass = design.back(data.values);

  std::vector<char> inside(p, 1);
  std::vector<char> on_ray(p, 0);
  for (Index i : zero_rows) {
    const Index lo = design.row_ptr[static_cast<std::size_t>(i)];
    const Index hi = design.row_ptr[static_cast<std::size_t>(i) + 1];
    if (lo == hi) continue;  // empty row constrains nothing

    // weighted line fit through the supported pixel centers
    double w_sum = 0.0, mx = 0.0, my = 0.0;
    for (Index e = lo; e < hi; ++e) {
      const std::size_t j = static_cast<std::size_t>(design.col_idx[static_cast<std::size_t>(e)]);
      const double w = design.values[static_cast<std::size_t>(e)];
      on_ray[j] = 1;
      w_sum += w;
      mx += w * cx[j];
      my += w * cy[j];
    }
    mx /= w_sum;
    my /= w_sum;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (Index e = lo; e < hi; ++e) {
      const std::size_t j = static_cast<std::size_t>(design.col_idx[static_cast<std::size_t>(e)]);
      const double w = design.values[static_cast<std::size_t>(e)];
      sxx += w * (cx[j] - mx) * (cx[j] - mx);
      sxy += w * (cx[j] - mx) * (cy[j] - my);
      syy += w * (cy[j] - my) * (cy[j] - my);
    }

    const double spread = sxx + syy;
    bool directional = spread > 1e-12 * grid.pixel_width() * grid.pixel_width();
    double nx = 0.0, ny = 0.0;
    if (directional) {
      const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
      nx = -std::sin(theta);
      ny = std::cos(theta);
    }

    if (directional) {
      // keep the half plane holding the backprojected photon mass
      double side_mass = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        side_mass += mass[j] * (nx * (cx[j] - mx) + ny * (cy[j] - my));
      }
      const double sign = side_mass >= 0.0 ? 1.0 : -1.0;
      for (std::size_t j = 0; j < p; ++j) {
        if (on_ray[j]) {
          inside[j] = 0;
        } else if (sign * (nx * (cx[j] - mx) + ny * (cy[j] - my)) <= 0.0) {
          inside[j] = 0;
        }
      }
    } else {
      for (std::size_t j = 0; j < p; ++j) {
        if (on_ray[j]) inside[j] = 0;
      }
    }

    for (Index e = lo; e < hi; ++e) {
      on_ray[static_cast<std::size_t>(design.col_idx[static_cast<std::size_t>(e)])] = 0;
    }
  }

  Segmentation out;
  out.grid = grid;
  out.labels.resize(seg.labels.size());
  out.segment_counts.resize(seg.labels.size());
  for (std::size_t k = 0; k < seg.labels.size(); ++k) {
    std::vector<Index> survivors(static_cast<std::size_t>(seg.segment_counts[k]), 0);
    for (std::size_t j = 0; j < p; ++j) {
      const std::int32_t lab = seg.labels[k][j];
      if (lab >= 0 && inside[j]) ++survivors[static_cast<std::size_t>(lab)];
    }
    std::vector<std::int32_t> remap(static_cast<std::size_t>(seg.segment_counts[k]), -1);
    std::int32_t next = 0;
    for (std::size_t s = 0; s < survivors.size(); ++s) {
      if (survivors[s] > 0) remap[s] = next++;
    }
    out.labels[k].assign(p, -1);
    for (std::size_t j = 0; j < p; ++j) {
      const std::int32_t lab = seg.labels[k][j];
      if (lab >= 0 && inside[j]) out.labels[k][j] = remap[static_cast<std::size_t>(lab)];
    }
    out.segment_counts[k] = next;
  }
  return out;
}

}  // namespace npl
