// npl-et: command line front end for the emission tomography toolkit.
// Every subcommand reads a key=value config file, writes its outputs
// atomically under --out, and drops a manifest describing the run.
#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "npl/errors.hpp"
#include "npl/geometry.hpp"
#include "npl/gibbs.hpp"
#include "npl/io.hpp"
#include "npl/misspec.hpp"
#include "npl/model.hpp"
#include "npl/mri.hpp"
#include "npl/npl.hpp"
#include "npl/recon.hpp"
#include "npl/rng.hpp"
#include "npl/stats.hpp"

namespace fs = std::filesystem;
using namespace npl;

namespace {

constexpr const char* kToolVersion = "npl-et 0.1.0";

struct CommonOpts {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out = ".";
};

class Config {
 public:
  explicit Config(const fs::path& file) : file_(file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    raw_.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t start = 0;
    int line_no = 0;
    while (start <= raw_.size()) {
      std::size_t end = raw_.find('\n', start);
      if (end == std::string::npos) end = raw_.size();
      std::string line = raw_.substr(start, end - start);
      const bool last = end == raw_.size();
      start = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t");
        std::size_t b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) {
        if (last) break;
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + " is not key=value");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(line_no));
      if (kv_.count(key)) throw ConfigError("duplicate config key '" + key + "'");
      kv_[key] = trim(line.substr(eq + 1));
      if (last) break;
    }
  }

  void restrict(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : kv_) {
      if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }
  std::string str(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
  }

  double num(const std::string& key) const { return parse_num(key, str(key)); }
  double num(const std::string& key, double def) const {
    return has(key) ? parse_num(key, str(key)) : def;
  }

  std::int64_t integer(const std::string& key) const { return parse_int(key, str(key)); }
  std::int64_t integer(const std::string& key, std::int64_t def) const {
    return has(key) ? parse_int(key, str(key)) : def;
  }

  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string v = str(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config key '" + key + "' must be a boolean");
  }

  const std::string& raw_text() const { return raw_; }
  const fs::path& file() const { return file_; }

 private:
  static double parse_num(const std::string& key, const std::string& value) {
    try {
      return io::parse_double(value);
    } catch (const Error&) {
      throw ConfigError("config key '" + key + "' has a non-numeric value '" + value + "'");
    }
  }
  static std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t v = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
      throw ConfigError("config key '" + key + "' has a non-integer value '" + value + "'");
    }
    return v;
  }

  fs::path file_;
  std::string raw_;
  std::map<std::string, std::string> kv_;
};

// manifest: tool version, config hash, input hashes, one timestamp line
struct Manifest {
  std::string command;
  const Config* config = nullptr;
  std::vector<std::pair<std::string, fs::path>> inputs;

  void note(const std::string& key, const fs::path& path) { inputs.emplace_back(key, path); }

  void write(const fs::path& out_dir) const {
    std::string text;
    text += std::string("tool=") + kToolVersion + "\n";
    text += "command=" + command + "\n";
    text += "config_hash=" + io::hash_bytes_hex(config->raw_text()) + "\n";
    for (const auto& [key, path] : inputs) {
      text += "input_" + key + "=" + path.string() + " " + io::hash_file_hex(path) + "\n";
    }
    char stamp[64];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    text += std::string("timestamp=") + stamp + "\n";
    io::atomic_write(out_dir / "manifest.txt", text);
  }
};

const std::set<std::string> kGridKeys = {"grid_width", "grid_height", "extent"};
const std::set<std::string> kGeometryKeys = {"design", "geometry", "n_angles", "n_offsets",
                                             "n_detectors", "normalization", "design_out"};

std::set<std::string> merge(std::initializer_list<std::set<std::string>> sets,
                            std::initializer_list<const char*> extra) {
  std::set<std::string> out;
  for (const auto& s : sets) out.insert(s.begin(), s.end());
  for (const char* e : extra) out.insert(e);
  return out;
}

Grid grid_from_config(const Config& cfg) {
  Grid grid{static_cast<int>(cfg.integer("grid_width")),
            static_cast<int>(cfg.integer("grid_height")), cfg.num("extent", 1.0)};
  grid.validate();
  return grid;
}

Normalization normalization_from_config(const Config& cfg) {
  const std::string name = cfg.str("normalization", "scaled");
  if (name == "column_stochastic") return Normalization::column_stochastic;
  if (name == "raw") return Normalization::raw;
  if (name == "scaled") return Normalization::scaled;
  throw ConfigError("unknown normalization '" + name + "'");
}

SparseDesign design_from_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.close();
  if (std::string_view(magic, 4) == "NPLD") return io::read_design_binary(path);
  return io::read_design_text(path);
}

// a design comes either from a file plus grid keys, or assembled from
// geometry keys on the configured grid
SparseDesign resolve_design(const Config& cfg, const Grid& grid, Manifest& manifest,
                            const fs::path& out_dir) {
  if (cfg.has("design") && cfg.has("geometry")) {
    throw ConfigError("give either 'design' or 'geometry', not both");
  }
  if (cfg.has("design")) {
    const fs::path path = cfg.str("design");
    SparseDesign design = design_from_file(path);
    if (design.p != grid.p()) {
      throw DimensionError("design has " + std::to_string(design.p) +
                           " columns but the grid has " + std::to_string(grid.p()) + " pixels");
    }
    manifest.note("design", path);
    return design;
  }
  if (!cfg.has("geometry")) throw ConfigError("missing config key 'design' or 'geometry'");

  const std::string kind = cfg.str("geometry");
  RaySet rays;
  if (kind == "parallel") {
    rays = build_parallel_geometry(static_cast<int>(cfg.integer("n_angles")),
                                   static_cast<int>(cfg.integer("n_offsets")), grid);
  } else if (kind == "ring") {
    rays = build_ring_geometry(static_cast<int>(cfg.integer("n_detectors")), grid);
  } else {
    throw ConfigError("unknown geometry '" + kind + "'");
  }
  SparseDesign design = assemble_design(rays, grid, normalization_from_config(cfg));
  if (cfg.has("design_out")) {
    io::write_design_binary(out_dir / cfg.str("design_out"), design);
  }
  return design;
}

SolverConfig solver_from_config(const Config& cfg) {
  SolverConfig solver;
  solver.max_iters = static_cast<int>(cfg.integer("max_iters", solver.max_iters));
  solver.rel_tol = cfg.num("rel_tol", solver.rel_tol);
  return solver;
}

PenaltyParams penalty_from_config(const Config& cfg) {
  PenaltyParams penalty;
  penalty.zeta = cfg.num("zeta", penalty.zeta);
  penalty.nu = cfg.num("nu", penalty.nu);
  return penalty;
}

std::uint64_t seed_from(const Config& cfg, const CommonOpts& opts) {
  if (opts.seed) return *opts.seed;
  return static_cast<std::uint64_t>(cfg.integer("seed", 0));
}

const std::set<std::string> kSolverKeys = {"max_iters", "rel_tol"};
const std::set<std::string> kPenaltyKeys = {"zeta", "nu"};

int cmd_phantom(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys},
                     {"inner_value", "outer_value", "r_in", "r_out", "image_out", "pgm",
                      "csv", "seg_out"}));
  const Grid grid = grid_from_config(cfg);
  const Image phantom = make_disk_phantom(grid, cfg.num("inner_value"), cfg.num("outer_value"),
                                          cfg.num("r_in"), cfg.num("r_out"));
  const fs::path out_dir(opts.out);
  const fs::path image_path = out_dir / cfg.str("image_out", "phantom.npli");
  io::write_image(image_path, phantom);
  if (cfg.flag("csv", false)) io::write_image_csv(image_path.string() + ".csv", phantom);
  if (cfg.flag("pgm", false)) io::write_image_pgm16(image_path.string() + ".pgm", phantom);
  if (cfg.has("seg_out")) {
    io::write_segmentation(out_dir / cfg.str("seg_out"), segmentation_from_value_classes(phantom));
  }
  Manifest manifest{"phantom", &cfg, {}};
  manifest.write(out_dir);
  std::cout << "wrote " << image_path.string() << "\n";
  return 0;
}

int cmd_project(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys}, {"image", "sinogram_out"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"project", &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path image_path = cfg.str("image");
  Image image = io::read_image(image_path, grid.extent);
  manifest.note("image", image_path);
  if (image.grid.p() != grid.p()) throw DimensionError("image does not match the configured grid");
  image.grid = grid;
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);

  Sinogram sino(design.d, 1.0);
  sino.values = design.forward(image.values);
  const fs::path sino_path = out_dir / cfg.str("sinogram_out", "projection.npls");
  io::write_sinogram(sino_path, sino);
  io::write_sinogram_csv(sino_path.string() + ".csv", sino);
  manifest.write(out_dir);
  std::cout << "wrote " << sino_path.string() << "\n";
  return 0;
}

int cmd_simulate(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys}, {"image", "t", "seed", "sinogram_out"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"simulate", &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path image_path = cfg.str("image");
  Image image = io::read_image(image_path, grid.extent);
  manifest.note("image", image_path);
  if (image.grid.p() != grid.p()) throw DimensionError("image does not match the configured grid");
  image.grid = grid;
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);

  const Sinogram counts =
      simulate_sinogram(image, design, cfg.num("t"), seed_from(cfg, opts));
  const fs::path sino_path = out_dir / cfg.str("sinogram_out", "counts.npls");
  io::write_sinogram(sino_path, counts);
  manifest.write(out_dir);
  std::cout << "wrote " << sino_path.string() << "\n";
  return 0;
}

// shared body for the unpenalized and penalized reconstructions
int run_solver_command(const Config& cfg, const CommonOpts& opts, const std::string& name,
                       double beta_over_t) {
  const fs::path out_dir(opts.out);
  Manifest manifest{name, &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path sino_path = cfg.str("sinogram");
  const Sinogram counts = io::read_sinogram(sino_path);
  manifest.note("sinogram", sino_path);
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);

  Sinogram intensities(counts.d, 1.0);
  for (Index i = 0; i < counts.d; ++i) {
    intensities.values[static_cast<std::size_t>(i)] =
        counts.values[static_cast<std::size_t>(i)] / counts.t;
  }

  SolverConfig solver = solver_from_config(cfg);
  solver.beta = beta_over_t;
  solver.penalty = penalty_from_config(cfg);
  const SolveReport report = solve(grid, std::nullopt, intensities, design, solver);

  const fs::path image_path = out_dir / cfg.str("image_out", name + ".npli");
  io::write_image(image_path, report.result);
  io::write_solve_report(out_dir / cfg.str("report_out", name + "_report.txt"), report);
  io::write_trace_csv(out_dir / cfg.str("trace_out", name + "_trace.csv"), report);
  manifest.write(out_dir);
  std::cout << "wrote " << image_path.string() << " (iterations=" << report.iterations
            << ", converged=" << (report.converged ? 1 : 0) << ")\n";
  return 0;
}

int cmd_mlem(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys, kSolverKeys},
                     {"sinogram", "image_out", "report_out", "trace_out"}));
  return run_solver_command(cfg, opts, "mlem", 0.0);
}

int cmd_map(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys, kSolverKeys, kPenaltyKeys},
                     {"sinogram", "beta_t", "image_out", "report_out", "trace_out"}));
  const Sinogram counts = io::read_sinogram(cfg.str("sinogram"));
  return run_solver_command(cfg, opts, "map", cfg.num("beta_t") / counts.t);
}

int cmd_lambda_opt(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys, kPenaltyKeys},
                     {"image", "beta_min", "image_out"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"lambda_opt", &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path image_path = cfg.str("image");
  Image truth = io::read_image(image_path, grid.extent);
  manifest.note("image", image_path);
  if (truth.grid.p() != grid.p()) throw DimensionError("image does not match the configured grid");
  truth.grid = grid;
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);

  const Image opt = lambda_opt(truth, design, cfg.num("beta_min", 1e-6), penalty_from_config(cfg));
  const fs::path out_path = out_dir / cfg.str("image_out", "lambda_opt.npli");
  io::write_image(out_path, opt);
  manifest.write(out_dir);
  std::cout << "wrote " << out_path.string() << "\n";
  return 0;
}

int cmd_wlb(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys, kSolverKeys},
                     {"sinogram", "segmentation", "seed", "lambda_out", "intensities_out"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"wlb", &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path sino_path = cfg.str("sinogram");
  const Sinogram counts = io::read_sinogram(sino_path);
  manifest.note("sinogram", sino_path);
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);
  const fs::path seg_path = cfg.str("segmentation");
  const Segmentation seg = io::read_segmentation(seg_path, grid.extent);
  manifest.note("segmentation", io::segmentation_manifest_path(seg_path));

  const MixingDesign mixing = reduce_design(design, seg);
  if (mixing.condition_warning) {
    std::cerr << "warning: aggregated design condition number " << mixing.condition
              << " exceeds the cap\n";
  }
  const MixingDraw draw = wlb_sample(counts, mixing, seed_from(cfg, opts), solver_from_config(cfg));

  std::string csv = "segment,value\n";
  for (std::size_t j = 0; j < draw.lambda_m.size(); ++j) {
    csv += std::to_string(j) + "," + io::format_double(draw.lambda_m[j]) + "\n";
  }
  const fs::path lambda_path = out_dir / cfg.str("lambda_out", "wlb_lambda.csv");
  io::atomic_write(lambda_path, csv);
  Sinogram fitted(counts.d, 1.0);
  fitted.values = draw.intensities;
  io::write_sinogram(out_dir / cfg.str("intensities_out", "wlb_intensities.npls"), fitted);
  manifest.write(out_dir);
  std::cout << "wrote " << lambda_path.string() << "\n";
  return 0;
}

int cmd_npl(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys, kSolverKeys, kPenaltyKeys},
                     {"sinogram", "segmentation", "rho", "draws", "beta_t", "seed", "workers",
                      "mask"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"npl", &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path sino_path = cfg.str("sinogram");
  const Sinogram counts = io::read_sinogram(sino_path);
  manifest.note("sinogram", sino_path);
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);
  const fs::path seg_path = cfg.str("segmentation");
  Segmentation seg = io::read_segmentation(seg_path, grid.extent);
  manifest.note("segmentation", io::segmentation_manifest_path(seg_path));

  const double rho = cfg.num("rho", 1.0);
  const std::string mask = cfg.str("mask", "auto");
  if (mask != "on" && mask != "off" && mask != "auto") {
    throw ConfigError("npl: mask must be on, off, or auto");
  }
  // the aggregated model only matters when the prior weight is positive
  if (mask == "on" || (mask == "auto" && rho > 0.0)) {
    seg = mask_preprocess(design, seg, counts);
  }
  const MixingDesign mixing = reduce_design(design, seg);
  if (mixing.condition_warning) {
    std::cerr << "warning: aggregated design condition number " << mixing.condition
              << " exceeds the cap\n";
  }

  NplConfig npl_cfg;
  npl_cfg.rho = rho;
  npl_cfg.n_draws = static_cast<int>(cfg.integer("draws", 100));
  npl_cfg.t = counts.t;
  npl_cfg.beta_t = cfg.num("beta_t", 0.0);
  npl_cfg.penalty = penalty_from_config(cfg);
  npl_cfg.solver = solver_from_config(cfg);
  npl_cfg.seed = seed_from(cfg, opts);
  npl_cfg.workers = opts.workers ? *opts.workers : static_cast<int>(cfg.integer("workers", 1));

  const SampleArchive archive = npl_sample(counts, design, mixing, npl_cfg);
  io::write_archive(out_dir, archive);
  manifest.write(out_dir);
  int failed = 0;
  for (const auto& r : archive.records) failed += r.failed ? 1 : 0;
  std::cout << "wrote " << archive.draws.size() << " draws to " << out_dir.string()
            << " (" << failed << " failed)\n";
  return 0;
}

int cmd_gibbs(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys},
                     {"sinogram", "prior_alpha", "prior_beta", "burn_in", "samples", "seed",
                      "start_image"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"gibbs", &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path sino_path = cfg.str("sinogram");
  const Sinogram counts = io::read_sinogram(sino_path);
  manifest.note("sinogram", sino_path);
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);

  GibbsConfig gibbs_cfg;
  gibbs_cfg.prior_alpha = cfg.num("prior_alpha", 1.0);
  gibbs_cfg.prior_beta = cfg.num("prior_beta", 1.0);
  gibbs_cfg.burn_in = static_cast<int>(cfg.integer("burn_in", 1000));
  gibbs_cfg.n_samples = static_cast<int>(cfg.integer("samples", 2000));
  gibbs_cfg.seed = seed_from(cfg, opts);

  Image start(grid, 0.0);
  if (cfg.has("start_image")) {
    const fs::path start_path = cfg.str("start_image");
    start = io::read_image(start_path, grid.extent);
    manifest.note("start_image", start_path);
    if (start.grid.p() != grid.p()) throw DimensionError("start image does not match the grid");
    start.grid = grid;
  } else {
    double total = 0.0, sens = 0.0;
    for (double v : counts.values) total += v;
    for (double s : design.col_sums) sens += s;
    const double fill = total > 0.0 && sens > 0.0 ? total / (counts.t * sens) : 1.0;
    start = Image(grid, fill);
  }

  const Chain chain = run_chain(counts, design, gibbs_cfg, start);
  io::write_chain(out_dir, chain);
  manifest.write(out_dir);
  std::cout << "wrote " << chain.samples.size() << " samples to " << out_dir.string() << "\n";
  return 0;
}

int cmd_diagnose(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys, kGeometryKeys},
                     {"chain", "truth", "m_max", "rank_tol", "diagnostics_out"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"diagnose", &cfg, {}};
  const Grid grid = grid_from_config(cfg);
  const fs::path chain_dir = cfg.str("chain");
  const Chain chain = io::read_chain(chain_dir);
  manifest.note("chain", chain_dir / "meta.txt");
  const fs::path truth_path = cfg.str("truth");
  Image truth = io::read_image(truth_path, grid.extent);
  manifest.note("truth", truth_path);
  if (truth.grid.p() != grid.p()) throw DimensionError("truth image does not match the grid");
  truth.grid = grid;
  const SparseDesign design = resolve_design(cfg, grid, manifest, out_dir);

  const FisherPair pair = fisher_matrices(truth, design);
  const int m_max = static_cast<int>(cfg.integer("m_max", 64));
  const double rank_tol = cfg.num("rank_tol", 1e-10);
  const std::vector<double> empirical = eigenmode_correlations(chain, pair, m_max);

  std::vector<double> eigenvalues, analytic;
  for (std::size_t m = 0; m < empirical.size(); ++m) {
    const Eigen::Index mm = static_cast<Eigen::Index>(m);
    eigenvalues.push_back(pair.eigenvalues[mm]);
    std::vector<double> h(pair.eigenvectors.col(mm).data(),
                          pair.eigenvectors.col(mm).data() + pair.eigenvectors.rows());
    double gamma = std::numeric_limits<double>::quiet_NaN();
    try {
      gamma = asymptotic_fraction(h, pair, rank_tol);
    } catch (const UndefinedDirectionError&) {
    }
    analytic.push_back(gamma);
  }

  const fs::path csv_path = out_dir / cfg.str("diagnostics_out", "diagnostics.csv");
  io::write_diagnostics_csv(csv_path, eigenvalues, analytic, empirical);
  manifest.write(out_dir);
  std::cout << "wrote " << csv_path.string() << "\n";
  return 0;
}

int cmd_summarize(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict({"archive", "level", "profile_row"});
  const fs::path out_dir(opts.out);
  Manifest manifest{"summarize", &cfg, {}};
  const fs::path archive_dir = cfg.str("archive");
  const SampleArchive archive = io::read_archive(archive_dir);
  manifest.note("archive", archive_dir / "meta.txt");

  const Summary summary = summarize(archive, cfg.num("level", 0.95));
  io::write_summary(out_dir, summary);
  if (cfg.has("profile_row")) {
    io::write_profile_csv(out_dir / "profile.csv",
                          profile(summary, static_cast<int>(cfg.integer("profile_row"))));
  }
  manifest.write(out_dir);
  std::cout << "wrote summary of " << summary.n_draws << " draws to " << out_dir.string() << "\n";
  return 0;
}

int cmd_coverage(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict(merge({kGridKeys}, {"archive", "target", "level", "mask_image", "coverage_out"}));
  const fs::path out_dir(opts.out);
  Manifest manifest{"coverage", &cfg, {}};
  const fs::path archive_dir = cfg.str("archive");
  const SampleArchive archive = io::read_archive(archive_dir);
  manifest.note("archive", archive_dir / "meta.txt");
  const fs::path target_path = cfg.str("target");
  Image target = io::read_image(target_path, archive.grid.extent);
  manifest.note("target", target_path);
  if (target.grid.p() != archive.grid.p()) {
    throw DimensionError("target image does not match the archive grid");
  }
  target.grid = archive.grid;

  const Summary summary = summarize(archive, cfg.num("level", 0.95));
  std::vector<std::uint8_t> mask;
  if (cfg.has("mask_image")) {
    const fs::path mask_path = cfg.str("mask_image");
    const Image mask_img = io::read_image(mask_path, archive.grid.extent);
    manifest.note("mask_image", mask_path);
    if (mask_img.grid.p() != archive.grid.p()) {
      throw DimensionError("mask image does not match the archive grid");
    }
    mask.resize(mask_img.values.size());
    for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = mask_img.values[j] > 0.0 ? 1 : 0;
  } else {
    mask = default_support_mask(target);
  }

  const CoverageMap map = coverage(summary, target, mask);
  io::write_coverage_csv(out_dir / cfg.str("coverage_out", "coverage.csv"), map);
  manifest.write(out_dir);
  std::cout << "fraction=" << io::format_double(map.fraction) << "\n";
  return 0;
}

int cmd_misspec(const Config& cfg, const CommonOpts& opts) {
  cfg.restrict({"resolution", "starts", "seed"});
  const fs::path out_dir(opts.out);
  Manifest manifest{"misspec", &cfg, {}};
  const int resolution = static_cast<int>(cfg.integer("resolution", 100));
  const int n_starts = static_cast<int>(cfg.integer("starts", 20));
  const std::uint64_t seed = seed_from(cfg, opts);

  SolverConfig solver;
  std::string csv = "start,lambda1,lambda2,lambda3,lambda4,objective\n";
  std::printf("%-6s %10s %10s %10s %10s %14s\n", "start", "lambda1", "lambda2", "lambda3",
              "lambda4", "objective");
  double spread_lo = std::numeric_limits<double>::infinity();
  double spread_hi = -spread_lo;
  for (int s = 0; s < n_starts; ++s) {
    std::array<double, 4> start;
    for (int j = 0; j < 4; ++j) {
      StreamRng rng(seed, static_cast<std::uint64_t>(s), Stage::start,
                    static_cast<std::uint64_t>(j));
      start[static_cast<std::size_t>(j)] = 0.05 + 1.95 * rng.uniform();
    }
    const CounterexampleFit fit = counterexample_solve(start, solver);
    spread_lo = std::min(spread_lo, fit.lambda[0]);
    spread_hi = std::max(spread_hi, fit.lambda[0]);
    std::printf("%-6d %10.6f %10.6f %10.6f %10.6f %14.10f\n", s, fit.lambda[0], fit.lambda[1],
                fit.lambda[2], fit.lambda[3], fit.objective);
    csv += std::to_string(s);
    for (double v : fit.lambda) csv += "," + io::format_double(v);
    csv += "," + io::format_double(fit.objective) + "\n";
  }

  const GridOracleResult oracle = counterexample_grid_oracle(resolution);
  const double analytic = 1.0 + std::log(2.0 + std::sqrt(2.0));
  std::printf("grid oracle min        %.12f (resolution %d)\n", oracle.min_value, resolution);
  std::printf("closed-form min        %.12f\n", analytic);
  std::printf("first-coordinate range [%.6f, %.6f] across starts\n", spread_lo, spread_hi);

  io::atomic_write(out_dir / "counterexample.csv", csv);
  manifest.write(out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolVersion) +
               " - nonparametric posterior learning for emission tomography"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  struct SubSpec {
    const char* name;
    const char* help;
    int (*run)(const Config&, const CommonOpts&);
  };
  const std::vector<SubSpec> specs = {
      {"phantom", "build a disk phantom image", cmd_phantom},
      {"project", "forward-project an image", cmd_project},
      {"simulate", "draw Poisson counts from an image", cmd_simulate},
      {"mlem", "unpenalized EM reconstruction", cmd_mlem},
      {"map", "penalized reconstruction", cmd_map},
      {"lambda_opt", "noise-free penalized limit", cmd_lambda_opt},
      {"wlb", "single weighted-bootstrap draw on the aggregated model", cmd_wlb},
      {"npl", "posterior sample archive", cmd_npl},
      {"gibbs", "data-augmentation chain", cmd_gibbs},
      {"diagnose", "chain mixing diagnostics", cmd_diagnose},
      {"summarize", "pixelwise summary of an archive", cmd_summarize},
      {"coverage", "credible-band coverage against a target", cmd_coverage},
      {"misspec", "mismatched-design demonstration", cmd_misspec},
  };

  std::map<const CLI::App*, const SubSpec*> dispatch;
  std::map<const CLI::App*, CommonOpts> options;
  for (const SubSpec& spec : specs) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    CommonOpts& opts = options[sub];
    sub->add_option("--config", opts.config_file, "key=value config file")->required();
    sub->add_option("--seed", [sub, &options](const std::vector<std::string>& vals) {
      options[sub].seed = static_cast<std::uint64_t>(std::stoull(vals.front()));
      return true;
    }, "seed override");
    sub->add_option("--workers", [sub, &options](const std::vector<std::string>& vals) {
      options[sub].workers = std::stoi(vals.front());
      return true;
    }, "worker thread override");
    sub->add_option("--out", opts.out, "output directory");
    dispatch[sub] = &spec;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [sub, spec] : dispatch) {
      if (sub->parsed()) {
        const CommonOpts& opts = options.at(sub);
        std::filesystem::create_directories(opts.out);
        return spec->run(Config(opts.config_file), opts);
      }
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
