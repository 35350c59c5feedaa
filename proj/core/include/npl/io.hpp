#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "npl/gibbs.hpp"
#include "npl/model.hpp"
#include "npl/npl.hpp"
#include "npl/recon.hpp"
#include "npl/stats.hpp"

namespace npl::io {

// shortest text form that parses back to the same bits
std::string format_double(double value);
double parse_double(std::string_view text);

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::string hash_bytes_hex(std::string_view bytes);
std::string hash_file_hex(const std::filesystem::path& path);

// every writer lands via a temp file plus rename
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

// images: magic NPLI, u64 width, u64 height, f64 row-major
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path, double extent = 1.0);
void write_image_csv(const std::filesystem::path& path, const Image& image);
// 16-bit PGM, min-max scaled, scale recorded in a sidecar text file
void write_image_pgm16(const std::filesystem::path& path, const Image& image);

// sinograms: magic NPLS, u64 d, f64 t, f64 values
void write_sinogram(const std::filesystem::path& path, const Sinogram& sinogram);
Sinogram read_sinogram(const std::filesystem::path& path);
void write_sinogram_csv(const std::filesystem::path& path, const Sinogram& sinogram);

// designs: text COO "d p nnz" then "i j value" 0-based, or binary CSR
// (magic NPLD, u64 d, u64 p, u64 nnz, row_ptr, col_idx, f64 values)
void write_design_text(const std::filesystem::path& path, const SparseDesign& design);
SparseDesign read_design_text(const std::filesystem::path& path);
void write_design_binary(const std::filesystem::path& path, const SparseDesign& design);
SparseDesign read_design_binary(const std::filesystem::path& path);

// segmentations: one NPLL label image per side image (magic, u64 dims,
// i32 labels, -1 outside) plus a manifest listing files and counts
void write_segmentation(const std::filesystem::path& base, const Segmentation& seg);
Segmentation read_segmentation(const std::filesystem::path& base, double extent = 1.0);
// the manifest file a segmentation base name resolves to
std::filesystem::path segmentation_manifest_path(const std::filesystem::path& base);

void write_solve_report(const std::filesystem::path& path, const SolveReport& report);
void write_trace_csv(const std::filesystem::path& path, const SolveReport& report);

// sample archives: meta.txt + draw_%05d.npli + solver_reports.csv
void write_archive(const std::filesystem::path& dir, const SampleArchive& archive);
SampleArchive read_archive(const std::filesystem::path& dir);

// chains: meta.txt + sample_%05d.npli
void write_chain(const std::filesystem::path& dir, const Chain& chain);
Chain read_chain(const std::filesystem::path& dir);

void write_summary(const std::filesystem::path& dir, const Summary& summary);
void write_coverage_csv(const std::filesystem::path& path, const CoverageMap& map);
void write_profile_csv(const std::filesystem::path& path, const ProfileSeries& series);
void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<double>& eigenvalues,
                           const std::vector<double>& gamma_analytic,
                           const std::vector<double>& gamma_empirical);

}  // namespace npl::io
