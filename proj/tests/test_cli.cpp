#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace geomdiff;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const { return (sub.empty() ? path : path / sub).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "geomdiff");
  return cli::dispatch(args);
}

}  // namespace

TEST_CASE("git blob hashes match git") {
  CHECK(cli::git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(cli::git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("exit codes") {
  TempDir d("geomdiff_cli_codes");
  CHECK(run({"--help"}) == cli::ok);
  CHECK(run({"frobnicate"}) == cli::config_error);
  CHECK(run({"--out", d.str(), "sample", "--no-such-flag"}) == cli::config_error);
  CHECK(run({"--out", d.str(), "sample", "--integrator", "rk4"}) == cli::config_error);
  CHECK(run({"--config", d.str("missing.json"), "--out", d.str(), "check"}) == cli::config_error);
  CHECK(run({"--out", d.str(), "sample", "--task", "sawtooth"}) == cli::config_error);
}

TEST_CASE("config file, environment and flags resolve in order") {
  TempDir d("geomdiff_cli_config");
  fs::create_directories(d.path);
  std::ofstream(d.path / "run.json") << R"({"seed": 4, "out": ")" << d.str("from_file")
                                      << R"(", "sample": {"count": 2, "steps": 20, "n-points": 3}})";
  CHECK(run({"--config", d.str("run.json"), "sample", "--count", "3"}) == cli::ok);
  const auto m = nlohmann::json::parse(slurp(d.path / "from_file" / "manifest.json"));
  CHECK(m["config"]["seed"] == 4);
  CHECK(m["config"]["sample"]["count"] == 3);
  CHECK(m["config"]["sample"]["steps"] == 20);

  ::setenv("GEOMDIFF_SEED", "9", 1);
  ::setenv("GEOMDIFF_OUT", d.str("from_env").c_str(), 1);
  const int rc = run({"--config", d.str("run.json"), "sample"});
  ::unsetenv("GEOMDIFF_SEED");
  ::unsetenv("GEOMDIFF_OUT");
  CHECK(rc == cli::ok);
  const auto e = nlohmann::json::parse(slurp(d.path / "from_env" / "manifest.json"));
  CHECK(e["config"]["seed"] == 9);

  std::ofstream(d.path / "bad.json") << R"({"sample": {"cout": 2}})";
  CHECK(run({"--config", d.str("bad.json"), "--out", d.str("bad"), "sample"}) == cli::config_error);
}

TEST_CASE("runs are byte identical and manifests complete") {
  TempDir d("geomdiff_cli_determinism");
  for (const char* r : {"a", "b"}) {
    const std::string out = d.str(r);
    REQUIRE(run({"--seed", "2", "--out", out + "/data", "data", "gen", "--paths", "3", "--points", "5"}) == cli::ok);
    REQUIRE(run({"--seed", "2", "--out", out + "/cond", "condition", "--inner-steps", "2", "--budget", "30",
                 "--samples", "8", "--n-target", "2"}) == cli::ok);
  }
  for (const char* sub : {"data/dataset/path_00000.csv", "data/manifest.json", "cond/kl.json", "cond/manifest.json"}) {
    INFO(sub);
    REQUIRE(fs::exists(d.path / "a" / sub));
    CHECK(slurp(d.path / "a" / sub) == slurp(d.path / "b" / sub));
  }
  CHECK(cli::manifest_problems(d.str("a/cond")).empty());
  std::ofstream(d.path / "a" / "cond" / "stray.txt") << "x";
  CHECK(cli::manifest_problems(d.str("a/cond")) == std::vector<std::string>{"stray.txt"});
  CHECK(run({"--out", d.str("chk"), "check", "--manifests", d.str("a/cond")}) == cli::check_failure);
}

TEST_CASE("model files round trip through train and sample") {
  TempDir d("geomdiff_cli_model");
  REQUIRE(run({"--out", d.str("t"), "train", "--steps", "5", "--warmup", "1", "--width", "8", "--depth", "1",
               "--heads", "2", "--paths", "4", "--points", "5", "--plot"}) == cli::ok);
  CHECK(fs::exists(d.path / "t" / "loss.svg"));
  CHECK(run({"--out", d.str("s"), "sample", "--model", d.str("t/model.json"), "--count", "2", "--steps", "10",
             "--n-points", "3", "--trajectory"}) == cli::ok);
  CHECK(fs::exists(d.path / "s" / "trajectory.csv"));
  CHECK(run({"--out", d.str("p"), "plot", "--input", d.str("t/loss.csv")}) == cli::ok);
  CHECK(slurp(d.path / "p" / "loss.svg").find("<svg") == 0);
}

TEST_CASE("kernel, mean and schedule json round trip") {
  KernelSpec k = KernelSpec::se(2.0, 0.3, 2, 2);
  k.family = KernelFamily::div_free;
  const KernelSpec k2 = cli::kernel_from_json(cli::kernel_to_json(k));
  CHECK(k2.family == KernelFamily::div_free);
  CHECK(k2.variance == 2.0);
  CHECK(k2.output_dim == 2);
  Matrix a(1, 1);
  a << 3.0;
  const MeanSpec m = cli::mean_from_json(cli::mean_to_json(MeanSpec::linear_map(a, Vector::Constant(1, 1.0))));
  Vector x(1);
  x << 2.0;
  CHECK(m.evaluate(x)(0) == 7.0);
  DiffusionSchedule s;
  s.beta_max = 10.0;
  CHECK(cli::schedule_from_json(cli::schedule_to_json(s)).beta_max == 10.0);
  CHECK_THROWS_AS(cli::kernel_from_json(nlohmann::json::object()), ConfigError);
}
