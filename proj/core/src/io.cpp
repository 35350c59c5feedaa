#include "npl/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <tuple>

#include "npl/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace npl::io {

namespace {

constexpr char kImageMagic[4] = {'N', 'P', 'L', 'I'};
constexpr char kSinogramMagic[4] = {'N', 'P', 'L', 'S'};
constexpr char kDesignMagic[4] = {'N', 'P', 'L', 'D'};
constexpr char kLabelMagic[4] = {'N', 'P', 'L', 'L'};

void append_bytes(std::string& out, const void* data, std::size_t n) {
  out.append(static_cast<const char*>(data), n);
}

void append_u64(std::string& out, std::uint64_t v) { append_bytes(out, &v, sizeof v); }
void append_f64(std::string& out, double v) { append_bytes(out, &v, sizeof v); }
void append_i32(std::string& out, std::int32_t v) { append_bytes(out, &v, sizeof v); }

struct Cursor {
  const std::string& bytes;
  std::size_t pos = 0;
  const std::filesystem::path& path;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) {
      throw IoError("truncated file: " + path.string());
    }
  }
  void magic(const char expect[4]) {
    need(4);
    if (std::memcmp(bytes.data() + pos, expect, 4) != 0) {
      throw IoError("bad magic in " + path.string());
    }
    pos += 4;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::int32_t i32() {
    need(4);
    std::int32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  void done() const {
    if (pos != bytes.size()) throw IoError("trailing bytes in " + path.string());
  }
};

std::string load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

constexpr std::uint64_t kMaxCells = 100'000'000;

int checked_dim(std::uint64_t v, const std::filesystem::path& path) {
  if (v == 0 || v > kMaxCells) throw IoError("implausible dimension in " + path.string());
  return static_cast<int>(v);
}

std::string sanitize_field(std::string text) {
  for (char& c : text) {
    if (c == ',' ) c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

// simple key=value metadata blocks, # starts a comment
std::map<std::string, std::string> parse_meta(const std::string& text,
                                              const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
    std::size_t lead = 0;
    while (lead < line.size() && (line[lead] == ' ' || line[lead] == '\t')) ++lead;
    line.erase(0, lead);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw IoError("bad metadata line in " + path.string());
    out[line.substr(0, eq)] = line.substr(eq + 1);
    if (end == text.size()) break;
  }
  return out;
}

const std::string& meta_get(const std::map<std::string, std::string>& meta,
                            const std::string& key, const std::filesystem::path& path) {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("missing key '" + key + "' in " + path.string());
  return it->second;
}

std::int64_t parse_i64(std::string_view text, const std::filesystem::path& path) {
  std::int64_t v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw IoError("bad integer '" + std::string(text) + "' in " + path.string());
  }
  return v;
}

double parse_f64_checked(std::string_view text, const std::filesystem::path& path) {
  try {
    return parse_double(text);
  } catch (const Error&) {
    throw IoError("bad number '" + std::string(text) + "' in " + path.string());
  }
}

std::filesystem::path indexed_name(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d%s", stem, index, ext);
  return std::filesystem::path(buf);
}

}  // namespace

std::filesystem::path segmentation_manifest_path(const std::filesystem::path& base) {
  const std::string s = base.string();
  const std::string suffix = ".manifest.txt";
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return base;
  }
  return std::filesystem::path(s + suffix);
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw InvalidArgumentError("cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_bytes_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return std::string(buf);
}

std::string hash_file_hex(const std::filesystem::path& path) {
  return hash_bytes_hex(load_file(path));
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  const std::filesystem::path parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failure on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void write_image(const std::filesystem::path& path, const Image& image) {
  image.validate();
  std::string out;
  out.reserve(20 + image.values.size() * 8);
  append_bytes(out, kImageMagic, 4);
  append_u64(out, static_cast<std::uint64_t>(image.grid.width));
  append_u64(out, static_cast<std::uint64_t>(image.grid.height));
  for (double v : image.values) append_f64(out, v);
  atomic_write(path, out);
}

Image read_image(const std::filesystem::path& path, double extent) {
  const std::string bytes = load_file(path);
  Cursor c{bytes, 0, path};
  c.magic(kImageMagic);
  const int w = checked_dim(c.u64(), path);
  const int h = checked_dim(c.u64(), path);
  if (static_cast<std::uint64_t>(w) * h > kMaxCells) {
    throw IoError("implausible dimension in " + path.string());
  }
  Image image(Grid{w, h, extent}, 0.0);
  for (double& v : image.values) v = c.f64();
  c.done();
  return image;
}

void write_image_csv(const std::filesystem::path& path, const Image& image) {
  image.validate();
  std::string out = "x,y,value\n";
  for (int iy = 0; iy < image.grid.height; ++iy) {
    for (int ix = 0; ix < image.grid.width; ++ix) {
      out += format_double(image.grid.center_x(ix));
      out += ',';
      out += format_double(image.grid.center_y(iy));
      out += ',';
      out += format_double(image.values[static_cast<std::size_t>(iy) * image.grid.width + ix]);
      out += '\n';
    }
  }
  atomic_write(path, out);
}

void write_image_pgm16(const std::filesystem::path& path, const Image& image) {
  image.validate();
  double lo = image.values.empty() ? 0.0 : image.values[0];
  double hi = lo;
  for (double v : image.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::string out = "P5\n" + std::to_string(image.grid.width) + " " +
                    std::to_string(image.grid.height) + "\n65535\n";
  const double span = hi - lo;
  for (double v : image.values) {
    const double unit = span > 0.0 ? (v - lo) / span : 0.0;
    const std::uint16_t q = static_cast<std::uint16_t>(std::lround(unit * 65535.0));
    out += static_cast<char>(q >> 8);
    out += static_cast<char>(q & 0xFF);
  }
  atomic_write(path, out);
  atomic_write(path.string() + ".scale.txt",
               "min=" + format_double(lo) + "\nmax=" + format_double(hi) + "\n");
}

void write_sinogram(const std::filesystem::path& path, const Sinogram& sinogram) {
  sinogram.validate();
  std::string out;
  out.reserve(20 + sinogram.values.size() * 8);
  append_bytes(out, kSinogramMagic, 4);
  append_u64(out, static_cast<std::uint64_t>(sinogram.d));
  append_f64(out, sinogram.t);
  for (double v : sinogram.values) append_f64(out, v);
  atomic_write(path, out);
}

Sinogram read_sinogram(const std::filesystem::path& path) {
  const std::string bytes = load_file(path);
  Cursor c{bytes, 0, path};
  c.magic(kSinogramMagic);
  const std::uint64_t d = c.u64();
  if (d == 0 || d > kMaxCells) throw IoError("implausible dimension in " + path.string());
  Sinogram s(static_cast<Index>(d), c.f64());
  if (!(s.t > 0.0) || !std::isfinite(s.t)) {
    throw IoError("nonpositive exposure in " + path.string());
  }
  for (double& v : s.values) v = c.f64();
  c.done();
  return s;
}

void write_sinogram_csv(const std::filesystem::path& path, const Sinogram& sinogram) {
  sinogram.validate();
  std::string out = "lor,value\n";
  for (Index i = 0; i < sinogram.d; ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(sinogram.values[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  atomic_write(path, out);
}

void write_design_text(const std::filesystem::path& path, const SparseDesign& design) {
  std::string out = std::to_string(design.d) + " " + std::to_string(design.p) + " " +
                    std::to_string(design.nnz()) + "\n";
  for (Index i = 0; i < design.d; ++i) {
    for (Index e = design.row_ptr[static_cast<std::size_t>(i)];
         e < design.row_ptr[static_cast<std::size_t>(i) + 1]; ++e) {
      out += std::to_string(i);
      out += ' ';
      out += std::to_string(design.col_idx[static_cast<std::size_t>(e)]);
      out += ' ';
      out += format_double(design.values[static_cast<std::size_t>(e)]);
      out += '\n';
    }
  }
  atomic_write(path, out);
}

SparseDesign read_design_text(const std::filesystem::path& path) {
  const std::string text = load_file(path);
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\n' || text[pos] == '\t' ||
                                 text[pos] == '\r')) {
      ++pos;
    }
    std::size_t end = pos;
    while (end < text.size() && text[end] != ' ' && text[end] != '\n' && text[end] != '\t' &&
           text[end] != '\r') {
      ++end;
    }
    if (end > pos) tokens.emplace_back(text.data() + pos, end - pos);
    pos = end;
  }
  if (tokens.size() < 3) throw IoError("truncated design header in " + path.string());
  const std::int64_t d = parse_i64(tokens[0], path);
  const std::int64_t p = parse_i64(tokens[1], path);
  const std::int64_t nnz = parse_i64(tokens[2], path);
  if (d <= 0 || p <= 0 || nnz < 0 || static_cast<std::uint64_t>(nnz) > kMaxCells) {
    throw IoError("implausible design header in " + path.string());
  }
  if (tokens.size() != static_cast<std::size_t>(3 + nnz * 3)) {
    throw IoError("design entry count does not match header in " + path.string());
  }

  std::vector<std::tuple<Index, Index, double>> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  for (std::int64_t e = 0; e < nnz; ++e) {
    const std::int64_t i = parse_i64(tokens[3 + 3 * e], path);
    const std::int64_t j = parse_i64(tokens[4 + 3 * e], path);
    const double v = parse_f64_checked(tokens[5 + 3 * e], path);
    if (i < 0 || i >= d || j < 0 || j >= p) {
      throw IoError("design index out of range in " + path.string());
    }
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw IoError("negative or non-finite design entry in " + path.string());
    }
    entries.emplace_back(i, j, v);
  }
  std::sort(entries.begin(), entries.end());
  for (std::size_t e = 1; e < entries.size(); ++e) {
    if (std::get<0>(entries[e]) == std::get<0>(entries[e - 1]) &&
        std::get<1>(entries[e]) == std::get<1>(entries[e - 1])) {
      throw IoError("duplicate design entry in " + path.string());
    }
  }

  SparseDesign design;
  design.d = d;
  design.p = p;
  design.row_ptr.assign(static_cast<std::size_t>(d) + 1, 0);
  design.col_idx.reserve(entries.size());
  design.values.reserve(entries.size());
  Index row = 0;
  for (const auto& [i, j, v] : entries) {
    while (row < i) design.row_ptr[static_cast<std::size_t>(++row)] = static_cast<Index>(design.values.size());
    design.col_idx.push_back(j);
    design.values.push_back(v);
  }
  while (row < d) design.row_ptr[static_cast<std::size_t>(++row)] = static_cast<Index>(design.values.size());
  design.recompute_col_sums();
  return design;
}

void write_design_binary(const std::filesystem::path& path, const SparseDesign& design) {
  std::string out;
  out.reserve(28 + design.row_ptr.size() * 8 + design.values.size() * 16);
  append_bytes(out, kDesignMagic, 4);
  append_u64(out, static_cast<std::uint64_t>(design.d));
  append_u64(out, static_cast<std::uint64_t>(design.p));
  append_u64(out, static_cast<std::uint64_t>(design.nnz()));
  for (Index v : design.row_ptr) append_u64(out, static_cast<std::uint64_t>(v));
  for (Index v : design.col_idx) append_u64(out, static_cast<std::uint64_t>(v));
  for (double v : design.values) append_f64(out, v);
  atomic_write(path, out);
}

SparseDesign read_design_binary(const std::filesystem::path& path) {
  const std::string bytes = load_file(path);
  Cursor c{bytes, 0, path};
  c.magic(kDesignMagic);
  const std::uint64_t d = c.u64();
  const std::uint64_t p = c.u64();
  const std::uint64_t nnz = c.u64();
  if (d == 0 || p == 0 || d > kMaxCells || p > kMaxCells || nnz > kMaxCells) {
    throw IoError("implausible design header in " + path.string());
  }
  SparseDesign design;
  design.d = static_cast<Index>(d);
  design.p = static_cast<Index>(p);
  design.row_ptr.resize(d + 1);
  design.col_idx.resize(nnz);
  design.values.resize(nnz);
  for (auto& v : design.row_ptr) v = static_cast<Index>(c.u64());
  for (auto& v : design.col_idx) v = static_cast<Index>(c.u64());
  for (auto& v : design.values) v = c.f64();
  c.done();

  if (design.row_ptr.front() != 0 || design.row_ptr.back() != static_cast<Index>(nnz)) {
    throw IoError("corrupt row pointers in " + path.string());
  }
  for (std::size_t i = 1; i < design.row_ptr.size(); ++i) {
    if (design.row_ptr[i] < design.row_ptr[i - 1]) {
      throw IoError("corrupt row pointers in " + path.string());
    }
  }
  for (Index j : design.col_idx) {
    if (j < 0 || j >= design.p) throw IoError("column index out of range in " + path.string());
  }
  for (double v : design.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw IoError("negative or non-finite design entry in " + path.string());
    }
  }
  design.recompute_col_sums();
  return design;
}

void write_segmentation(const std::filesystem::path& base, const Segmentation& seg) {
  seg.validate();
  const std::filesystem::path manifest = segmentation_manifest_path(base);
  const std::string stem = base.filename().string();
  std::string meta;
  meta += "images=" + std::to_string(seg.labels.size()) + "\n";
  meta += "width=" + std::to_string(seg.grid.width) + "\n";
  meta += "height=" + std::to_string(seg.grid.height) + "\n";
  meta += "extent=" + format_double(seg.grid.extent) + "\n";
  for (std::size_t k = 0; k < seg.labels.size(); ++k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s.%02zu.npll", stem.c_str(), k);
    meta += "segments_" + std::to_string(k) + "=" + std::to_string(seg.segment_counts[k]) + "\n";
    meta += "file_" + std::to_string(k) + "=" + buf + "\n";

    std::string body;
    append_bytes(body, kLabelMagic, 4);
    append_u64(body, static_cast<std::uint64_t>(seg.grid.width));
    append_u64(body, static_cast<std::uint64_t>(seg.grid.height));
    for (std::int32_t lab : seg.labels[k]) append_i32(body, lab);
    atomic_write(manifest.parent_path() / buf, body);
  }
  atomic_write(manifest, meta);
}

Segmentation read_segmentation(const std::filesystem::path& base, double extent) {
  const std::filesystem::path manifest = segmentation_manifest_path(base);
  const auto meta = parse_meta(load_file(manifest), manifest);
  const std::int64_t r = parse_i64(meta_get(meta, "images", manifest), manifest);
  const std::int64_t w = parse_i64(meta_get(meta, "width", manifest), manifest);
  const std::int64_t h = parse_i64(meta_get(meta, "height", manifest), manifest);
  if (r < 1 || r > 64 || w < 1 || h < 1) throw IoError("implausible manifest " + manifest.string());
  if (auto it = meta.find("extent"); it != meta.end()) {
    extent = parse_f64_checked(it->second, manifest);
  }

  Segmentation seg;
  seg.grid = Grid{static_cast<int>(w), static_cast<int>(h), extent};
  for (std::int64_t k = 0; k < r; ++k) {
    seg.segment_counts.push_back(static_cast<int>(
        parse_i64(meta_get(meta, "segments_" + std::to_string(k), manifest), manifest)));
    const std::filesystem::path file =
        manifest.parent_path() / meta_get(meta, "file_" + std::to_string(k), manifest);
    const std::string bytes = load_file(file);
    Cursor c{bytes, 0, file};
    c.magic(kLabelMagic);
    if (c.u64() != static_cast<std::uint64_t>(w) || c.u64() != static_cast<std::uint64_t>(h)) {
      throw IoError("label image dimensions disagree with manifest: " + file.string());
    }
    std::vector<std::int32_t> labels(static_cast<std::size_t>(w * h));
    for (auto& lab : labels) lab = c.i32();
    c.done();
    seg.labels.push_back(std::move(labels));
  }
  seg.validate();
  return seg;
}

void write_solve_report(const std::filesystem::path& path, const SolveReport& report) {
  std::string out;
  out += "iterations=" + std::to_string(report.iterations) + "\n";
  out += "converged=" + std::string(report.converged ? "1" : "0") + "\n";
  out += "objective_final=" + format_double(report.objective_final()) + "\n";
  atomic_write(path, out);
}

void write_trace_csv(const std::filesystem::path& path, const SolveReport& report) {
  std::string out = "iter,objective\n";
  for (std::size_t k = 0; k < report.objective_trace.size(); ++k) {
    out += std::to_string(k) + "," + format_double(report.objective_trace[k]) + "\n";
  }
  atomic_write(path, out);
}

void write_archive(const std::filesystem::path& dir, const SampleArchive& archive) {
  std::filesystem::create_directories(dir);
  std::string meta;
  meta += "kind=" + archive.kind + "\n";
  meta += "width=" + std::to_string(archive.grid.width) + "\n";
  meta += "height=" + std::to_string(archive.grid.height) + "\n";
  meta += "extent=" + format_double(archive.grid.extent) + "\n";
  meta += "seed=" + std::to_string(archive.config.seed) + "\n";
  meta += "rho=" + format_double(archive.config.rho) + "\n";
  meta += "t=" + format_double(archive.config.t) + "\n";
  meta += "beta_t=" + format_double(archive.config.beta_t) + "\n";
  meta += "zeta=" + format_double(archive.config.penalty.zeta) + "\n";
  meta += "nu=" + format_double(archive.config.penalty.nu) + "\n";
  meta += "draws=" + std::to_string(archive.draws.size()) + "\n";
  meta += "workers=" + std::to_string(archive.config.workers) + "\n";
  meta += "rel_tol=" + format_double(archive.config.solver.rel_tol) + "\n";
  meta += "max_iters=" + std::to_string(archive.config.solver.max_iters) + "\n";
  atomic_write(dir / "meta.txt", meta);

  for (std::size_t b = 0; b < archive.draws.size(); ++b) {
    write_image(dir / indexed_name("draw", static_cast<int>(b), ".npli"), archive.draws[b]);
  }

  std::string csv = "draw,iterations,converged,failed,objective_final,error\n";
  for (const DrawRecord& r : archive.records) {
    csv += std::to_string(r.index) + "," + std::to_string(r.iterations) + "," +
           (r.converged ? "1" : "0") + "," + (r.failed ? "1" : "0") + "," +
           format_double(r.objective_final) + "," + sanitize_field(r.error) + "\n";
  }
  atomic_write(dir / "solver_reports.csv", csv);
}

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(sep, start);
    if (end == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  for (const std::string& chunk : split_line(load_file(path), '\n')) {
    std::string line = chunk;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

SampleArchive read_archive(const std::filesystem::path& dir) {
  const std::filesystem::path meta_file = dir / "meta.txt";
  const auto meta = parse_meta(load_file(meta_file), meta_file);
  if (meta_get(meta, "kind", meta_file) != "npl") {
    throw IoError("archive at " + dir.string() + " is not a posterior sample archive");
  }

  SampleArchive archive;
  archive.kind = "npl";
  archive.grid = Grid{static_cast<int>(parse_i64(meta_get(meta, "width", meta_file), meta_file)),
                      static_cast<int>(parse_i64(meta_get(meta, "height", meta_file), meta_file)),
                      parse_f64_checked(meta_get(meta, "extent", meta_file), meta_file)};
  archive.config.seed = static_cast<std::uint64_t>(
      parse_i64(meta_get(meta, "seed", meta_file), meta_file));
  archive.config.rho = parse_f64_checked(meta_get(meta, "rho", meta_file), meta_file);
  archive.config.t = parse_f64_checked(meta_get(meta, "t", meta_file), meta_file);
  archive.config.beta_t = parse_f64_checked(meta_get(meta, "beta_t", meta_file), meta_file);
  archive.config.penalty.zeta = parse_f64_checked(meta_get(meta, "zeta", meta_file), meta_file);
  archive.config.penalty.nu = parse_f64_checked(meta_get(meta, "nu", meta_file), meta_file);
  archive.config.workers = static_cast<int>(
      parse_i64(meta_get(meta, "workers", meta_file), meta_file));
  archive.config.solver.rel_tol =
      parse_f64_checked(meta_get(meta, "rel_tol", meta_file), meta_file);
  archive.config.solver.max_iters = static_cast<int>(
      parse_i64(meta_get(meta, "max_iters", meta_file), meta_file));
  const std::int64_t draws = parse_i64(meta_get(meta, "draws", meta_file), meta_file);
  if (draws < 0 || draws > 1'000'000) throw IoError("implausible draw count in " + meta_file.string());
  archive.config.n_draws = std::max(1, static_cast<int>(draws));

  for (int b = 0; b < draws; ++b) {
    Image img = read_image(dir / indexed_name("draw", b, ".npli"), archive.grid.extent);
    if (img.grid.p() != archive.grid.p()) {
      throw IoError("draw image dimensions disagree with the archive metadata");
    }
    img.grid = archive.grid;
    archive.draws.push_back(std::move(img));
  }

  const std::filesystem::path csv = dir / "solver_reports.csv";
  const std::vector<std::string> lines = read_lines(csv);
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = split_line(lines[n], ',');
    if (cells.size() < 5) throw IoError("corrupt row in " + csv.string());
    DrawRecord r;
    r.index = static_cast<int>(parse_i64(cells[0], csv));
    r.iterations = static_cast<int>(parse_i64(cells[1], csv));
    r.converged = cells[2] == "1";
    r.failed = cells[3] == "1";
    r.objective_final = parse_f64_checked(cells[4], csv);
    if (cells.size() > 5) r.error = cells[5];
    archive.records.push_back(std::move(r));
  }
  return archive;
}

void write_chain(const std::filesystem::path& dir, const Chain& chain) {
  std::filesystem::create_directories(dir);
  std::string meta;
  meta += "kind=gibbs\n";
  meta += "width=" + std::to_string(chain.grid.width) + "\n";
  meta += "height=" + std::to_string(chain.grid.height) + "\n";
  meta += "extent=" + format_double(chain.grid.extent) + "\n";
  meta += "t=" + format_double(chain.t) + "\n";
  meta += "prior_alpha=" + format_double(chain.config.prior_alpha) + "\n";
  meta += "prior_beta=" + format_double(chain.config.prior_beta) + "\n";
  meta += "burn_in=" + std::to_string(chain.config.burn_in) + "\n";
  meta += "samples=" + std::to_string(chain.samples.size()) + "\n";
  meta += "seed=" + std::to_string(chain.config.seed) + "\n";
  atomic_write(dir / "meta.txt", meta);
  for (std::size_t k = 0; k < chain.samples.size(); ++k) {
    write_image(dir / indexed_name("sample", static_cast<int>(k), ".npli"), chain.samples[k]);
  }
}

Chain read_chain(const std::filesystem::path& dir) {
  const std::filesystem::path meta_file = dir / "meta.txt";
  const auto meta = parse_meta(load_file(meta_file), meta_file);
  if (meta_get(meta, "kind", meta_file) != "gibbs") {
    throw IoError("archive at " + dir.string() + " is not a chain archive");
  }
  Chain chain;
  chain.grid = Grid{static_cast<int>(parse_i64(meta_get(meta, "width", meta_file), meta_file)),
                    static_cast<int>(parse_i64(meta_get(meta, "height", meta_file), meta_file)),
                    parse_f64_checked(meta_get(meta, "extent", meta_file), meta_file)};
  chain.t = parse_f64_checked(meta_get(meta, "t", meta_file), meta_file);
  chain.config.prior_alpha = parse_f64_checked(meta_get(meta, "prior_alpha", meta_file), meta_file);
  chain.config.prior_beta = parse_f64_checked(meta_get(meta, "prior_beta", meta_file), meta_file);
  chain.config.burn_in = static_cast<int>(parse_i64(meta_get(meta, "burn_in", meta_file), meta_file));
  chain.config.seed = static_cast<std::uint64_t>(
      parse_i64(meta_get(meta, "seed", meta_file), meta_file));
  const std::int64_t n = parse_i64(meta_get(meta, "samples", meta_file), meta_file);
  if (n < 1 || n > 1'000'000) throw IoError("implausible sample count in " + meta_file.string());
  chain.config.n_samples = static_cast<int>(n);
  for (int k = 0; k < n; ++k) {
    Image img = read_image(dir / indexed_name("sample", k, ".npli"), chain.grid.extent);
    if (img.grid.p() != chain.grid.p()) {
      throw IoError("sample image dimensions disagree with the chain metadata");
    }
    img.grid = chain.grid;
    chain.samples.push_back(std::move(img));
  }
  return chain;
}

void write_summary(const std::filesystem::path& dir, const Summary& summary) {
  std::filesystem::create_directories(dir);
  std::string meta;
  meta += "level=" + format_double(summary.level) + "\n";
  meta += "draws=" + std::to_string(summary.n_draws) + "\n";
  meta += "width=" + std::to_string(summary.grid.width) + "\n";
  meta += "height=" + std::to_string(summary.grid.height) + "\n";
  meta += "extent=" + format_double(summary.grid.extent) + "\n";
  atomic_write(dir / "meta.txt", meta);
  write_image(dir / "mean.npli", summary.mean);
  write_image(dir / "stddev.npli", summary.stddev);
  write_image(dir / "lower.npli", summary.lower);
  write_image(dir / "upper.npli", summary.upper);
}

void write_coverage_csv(const std::filesystem::path& path, const CoverageMap& map) {
  std::string out = "pixel,status\n";
  for (std::size_t j = 0; j < map.status.size(); ++j) {
    const char* name = map.status[j] == CoverageStatus::covered
                           ? "covered"
                           : (map.status[j] == CoverageStatus::below ? "below" : "above");
    out += std::to_string(j) + "," + name + "\n";
  }
  out += "fraction=" + format_double(map.fraction) + "\n";
  atomic_write(path, out);
}

void write_profile_csv(const std::filesystem::path& path, const ProfileSeries& series) {
  const bool banded = !series.lower.empty();
  std::string out = banded ? "x,mean,lower,upper\n" : "x,value\n";
  for (std::size_t k = 0; k < series.x.size(); ++k) {
    out += format_double(series.x[k]) + "," + format_double(series.mean[k]);
    if (banded) {
      out += "," + format_double(series.lower[k]) + "," + format_double(series.upper[k]);
    }
    out += '\n';
  }
  atomic_write(path, out);
}

void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<double>& eigenvalues,
                           const std::vector<double>& gamma_analytic,
                           const std::vector<double>& gamma_empirical) {
  const std::size_t n = std::min({eigenvalues.size(), gamma_analytic.size(),
                                  gamma_empirical.size()});
  std::string out = "mode,s_m,gamma_analytic,gamma_empirical\n";
  for (std::size_t m = 0; m < n; ++m) {
    out += std::to_string(m) + "," + format_double(eigenvalues[m]) + "," +
           format_double(gamma_analytic[m]) + "," + format_double(gamma_empirical[m]) + "\n";
  }
  atomic_write(path, out);
}

}  // namespace npl::io
