// End-to-end checks that drive the installed command line tool as a
// subprocess. The binary path arrives through the NPL_ET_BIN variable.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

std::string tool_path() {
  const char* bin = std::getenv("NPL_ET_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "NPL_ET_BIN must point at the npl-et binary");
  return bin;
}

RunResult run_tool(const std::string& args) {
  const std::string cmd = tool_path() + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.output.append(buf, got);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("npl_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// common 8x8 scene shared by the workflow tests
const char* kSceneGrid = "grid_width=8\ngrid_height=8\nextent=1.0\n";
const char* kSceneGeometry = "geometry=parallel\nn_angles=10\nn_offsets=10\n";

fs::path make_scene(const TempDir& tmp, double t, std::uint64_t seed) {
  write_file(tmp.path / "phantom.cfg",
             std::string(kSceneGrid) +
                 "inner_value=1.0\nouter_value=0.3\nr_in=0.45\nr_out=1.0\n"
                 "image_out=truth.npli\nseg_out=seg\n");
  RunResult r = run_tool("phantom --config " + (tmp.path / "phantom.cfg").string() + " --out " +
                         (tmp.path / "scene").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);

  write_file(tmp.path / "simulate.cfg",
             std::string(kSceneGrid) + kSceneGeometry + "image=" +
                 (tmp.path / "scene" / "truth.npli").string() + "\nt=" + std::to_string(t) +
                 "\nseed=" + std::to_string(seed) + "\nsinogram_out=counts.npls\n");
  r = run_tool("simulate --config " + (tmp.path / "simulate.cfg").string() + " --out " +
               (tmp.path / "scene").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  return tmp.path / "scene";
}

}  // namespace

TEST_CASE("version flag reports the tool name") {
  RunResult r = run_tool("--version");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("npl-et") != std::string::npos);
}

TEST_CASE("help lists every subcommand") {
  RunResult r = run_tool("--help");
  CHECK(r.exit_code == 0);
  for (const char* name : {"phantom", "simulate", "mlem", "map", "npl", "gibbs", "misspec"}) {
    CHECK_MESSAGE(r.output.find(name) != std::string::npos, name);
  }
}

TEST_CASE("an unknown config key fails with the configuration exit code") {
  TempDir tmp;
  write_file(tmp.path / "bad.cfg",
             std::string(kSceneGrid) +
                 "inner_value=1\nouter_value=0\nr_in=0.4\nr_out=0.8\nbogus_key=1\n");
  RunResult r = run_tool("phantom --config " + (tmp.path / "bad.cfg").string() + " --out " +
                         (tmp.path / "out").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("bogus_key") != std::string::npos);
}

TEST_CASE("a missing input file fails with the data exit code") {
  TempDir tmp;
  write_file(tmp.path / "mlem.cfg", std::string(kSceneGrid) + kSceneGeometry +
                                        "sinogram=" + (tmp.path / "nope.npls").string() + "\n");
  RunResult r = run_tool("mlem --config " + (tmp.path / "mlem.cfg").string() + " --out " +
                         (tmp.path / "out").string());
  CHECK(r.exit_code == 3);
}

TEST_CASE("a malformed config line fails cleanly") {
  TempDir tmp;
  write_file(tmp.path / "bad.cfg", "this line has no equals sign\n");
  RunResult r = run_tool("phantom --config " + (tmp.path / "bad.cfg").string() + " --out " +
                         (tmp.path / "out").string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("phantom, project, simulate, and mlem compose into a pipeline") {
  TempDir tmp;
  const fs::path scene = make_scene(tmp, 500.0, 3);
  CHECK(fs::exists(scene / "truth.npli"));
  CHECK(fs::exists(scene / "counts.npls"));
  CHECK(fs::exists(scene / "manifest.txt"));

  write_file(tmp.path / "project.cfg", std::string(kSceneGrid) + kSceneGeometry +
                                           "image=" + (scene / "truth.npli").string() +
                                           "\nsinogram_out=clean.npls\n");
  RunResult r = run_tool("project --config " + (tmp.path / "project.cfg").string() + " --out " +
                         (tmp.path / "proj").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(tmp.path / "proj" / "clean.npls"));
  CHECK(fs::exists(tmp.path / "proj" / "clean.npls.csv"));

  write_file(tmp.path / "mlem.cfg", std::string(kSceneGrid) + kSceneGeometry +
                                        "sinogram=" + (scene / "counts.npls").string() +
                                        "\nmax_iters=200\nrel_tol=1e-7\n");
  r = run_tool("mlem --config " + (tmp.path / "mlem.cfg").string() + " --out " +
               (tmp.path / "recon").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(tmp.path / "recon" / "mlem.npli"));
  CHECK(fs::exists(tmp.path / "recon" / "mlem_report.txt"));
  CHECK(fs::exists(tmp.path / "recon" / "mlem_trace.csv"));

  const std::string manifest = slurp(tmp.path / "recon" / "manifest.txt");
  CHECK(manifest.find("tool=npl-et") != std::string::npos);
  CHECK(manifest.find("command=mlem") != std::string::npos);
  CHECK(manifest.find("config_hash=") != std::string::npos);
  CHECK(manifest.find("input_sinogram=") != std::string::npos);
  CHECK(manifest.find("timestamp=") != std::string::npos);
}

TEST_CASE("simulate is reproducible in the seed and moves with it") {
  TempDir tmp;
  const fs::path a = make_scene(tmp, 200.0, 11);
  write_file(tmp.path / "sim_b.cfg",
             std::string(kSceneGrid) + kSceneGeometry + "image=" + (a / "truth.npli").string() +
                 "\nt=200\nseed=11\nsinogram_out=again.npls\n");
  RunResult r = run_tool("simulate --config " + (tmp.path / "sim_b.cfg").string() + " --out " +
                         (tmp.path / "b").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(slurp(a / "counts.npls") == slurp(tmp.path / "b" / "again.npls"));

  r = run_tool("simulate --config " + (tmp.path / "sim_b.cfg").string() + " --seed 12 --out " +
               (tmp.path / "c").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(slurp(a / "counts.npls") != slurp(tmp.path / "c" / "again.npls"));
}

TEST_CASE("posterior sampling is byte-stable across worker counts") {
  TempDir tmp;
  const fs::path scene = make_scene(tmp, 50.0, 7);
  write_file(tmp.path / "npl.cfg",
             std::string(kSceneGrid) + kSceneGeometry +
                 "sinogram=" + (scene / "counts.npls").string() +
                 "\nsegmentation=" + (scene / "seg").string() +
                 "\nrho=0.8\ndraws=6\nbeta_t=0.1\nmax_iters=80\nrel_tol=1e-7\nseed=5\n");

  RunResult r1 = run_tool("npl --config " + (tmp.path / "npl.cfg").string() + " --workers 1 --out " +
                          (tmp.path / "w1").string());
  REQUIRE_MESSAGE(r1.exit_code == 0, r1.output);
  RunResult r2 = run_tool("npl --config " + (tmp.path / "npl.cfg").string() + " --workers 2 --out " +
                          (tmp.path / "w2").string());
  REQUIRE_MESSAGE(r2.exit_code == 0, r2.output);

  for (int b = 0; b < 6; ++b) {
    char name[32];
    std::snprintf(name, sizeof name, "draw_%05d.npli", b);
    CHECK(slurp(tmp.path / "w1" / name) == slurp(tmp.path / "w2" / name));
  }
  CHECK(slurp(tmp.path / "w1" / "solver_reports.csv") == slurp(tmp.path / "w2" / "solver_reports.csv"));

  const auto meta1 = lines_of(slurp(tmp.path / "w1" / "meta.txt"));
  const auto meta2 = lines_of(slurp(tmp.path / "w2" / "meta.txt"));
  REQUIRE(meta1.size() == meta2.size());
  for (std::size_t k = 0; k < meta1.size(); ++k) {
    if (meta1[k].rfind("workers=", 0) == 0) {
      CHECK(meta1[k] == "workers=1");
      CHECK(meta2[k] == "workers=2");
    } else {
      CHECK(meta1[k] == meta2[k]);
    }
  }
}

TEST_CASE("summaries and coverage reports come out of an archive") {
  TempDir tmp;
  const fs::path scene = make_scene(tmp, 80.0, 9);
  write_file(tmp.path / "npl.cfg",
             std::string(kSceneGrid) + kSceneGeometry +
                 "sinogram=" + (scene / "counts.npls").string() +
                 "\nsegmentation=" + (scene / "seg").string() +
                 "\nrho=0\ndraws=8\nbeta_t=0.05\nmax_iters=60\nrel_tol=1e-6\nseed=2\n");
  RunResult r = run_tool("npl --config " + (tmp.path / "npl.cfg").string() + " --out " +
                         (tmp.path / "arch").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);

  write_file(tmp.path / "summ.cfg",
             "archive=" + (tmp.path / "arch").string() + "\nlevel=0.9\nprofile_row=4\n");
  r = run_tool("summarize --config " + (tmp.path / "summ.cfg").string() + " --out " +
               (tmp.path / "summary").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  for (const char* name : {"mean.npli", "stddev.npli", "lower.npli", "upper.npli"}) {
    CHECK(fs::exists(tmp.path / "summary" / name));
  }
  const std::string profile = slurp(tmp.path / "summary" / "profile.csv");
  CHECK(profile.rfind("x,mean,lower,upper\n", 0) == 0);

  write_file(tmp.path / "cov.cfg", "archive=" + (tmp.path / "arch").string() +
                                       "\ntarget=" + (scene / "truth.npli").string() +
                                       "\nlevel=0.9\n");
  r = run_tool("coverage --config " + (tmp.path / "cov.cfg").string() + " --out " +
               (tmp.path / "cov").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(r.output.find("fraction=") != std::string::npos);
  const std::string cov = slurp(tmp.path / "cov" / "coverage.csv");
  CHECK(cov.rfind("pixel,status\n", 0) == 0);
  CHECK(cov.find("fraction=") != std::string::npos);
}

TEST_CASE("the mismatched-design demonstration writes its table") {
  TempDir tmp;
  write_file(tmp.path / "mis.cfg", "resolution=20\nstarts=5\nseed=1\n");
  RunResult r = run_tool("misspec --config " + (tmp.path / "mis.cfg").string() + " --out " +
                         (tmp.path / "out").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(r.output.find("grid oracle min") != std::string::npos);
  CHECK(r.output.find("closed-form min") != std::string::npos);

  const auto rows = lines_of(slurp(tmp.path / "out" / "counterexample.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == "start,lambda1,lambda2,lambda3,lambda4,objective");
}
