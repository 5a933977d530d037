#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mfm/data.hpp"

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* env = std::getenv("MFM_BIN");
  REQUIRE_MESSAGE(env != nullptr, "MFM_BIN must point at the mfm binary");
  return env;
}

int run(const std::string& args) {
  const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

fs::path fresh_dir() {
  fs::path dir = fs::temp_directory_path() / "mfm_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_config(const fs::path& path) {
  std::ofstream out(path);
  out << "[data]\nclasses = 2\ndim = 2\nseparation = 2.0\nn_max = 120\n"
         "imbalance_factor = 20\nseed = 4\nmeta_per_class = 6\ntest_per_class = 50\n"
         "[model]\narch = mlp\nhidden = 8\n"
         "[train]\nbatch_n = 32\nalpha = 0.05\neta = 0.01\nepochs = 2\nseed = 4\n";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("pipeline: synthesize, train, eval, export") {
  fs::path dir = fresh_dir();
  write_config(dir / "cfg.ini");
  const std::string cfg = " --config " + (dir / "cfg.ini").string();

  REQUIRE(run("synthesize" + cfg + " --out " + (dir / "bundle").string()) == 0);
  CHECK(fs::exists(dir / "bundle" / "manifest.json"));
  CHECK(fs::exists(dir / "bundle" / "train.mfmd"));

  // Rerunning with the same seed gives a byte-identical binary split.
  REQUIRE(run("synthesize" + cfg + " --out " + (dir / "bundle2").string()) == 0);
  {
    std::ifstream a(dir / "bundle" / "train.mfmd", std::ios::binary);
    std::ifstream b(dir / "bundle2" / "train.mfmd", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }

  CHECK(run("train" + cfg + " --data " + (dir / "bundle").string() + " --dry-run") == 0);

  REQUIRE(run("train" + cfg + " --data " + (dir / "bundle").string() + " --out " +
              (dir / "run_base").string() + " --mode baseline") == 0);
  REQUIRE(run("train" + cfg + " --data " + (dir / "bundle").string() + " --out " +
              (dir / "run_mfm").string() + " --mode mfm") == 0);
  CHECK(fs::exists(dir / "run_base" / "classifier_final.mfmc"));
  CHECK(fs::exists(dir / "run_mfm" / "modulator_final.mfmm"));
  CHECK(fs::exists(dir / "run_mfm" / "metrics.csv"));
  CHECK(fs::exists(dir / "run_mfm" / "manifest.json"));
  CHECK(fs::exists(dir / "run_mfm" / "config.ini"));
  CHECK(!fs::exists(dir / "run_base" / "modulator_final.mfmm"));  // no modulator file

  // Evaluating the baseline checkpoint needs no modulator file.
  REQUIRE(run("eval" + cfg + " --checkpoint " +
              (dir / "run_base" / "classifier_final.mfmc").string() + " --data " +
              (dir / "bundle").string() + " --out " + (dir / "eval_base").string()) == 0);
  CHECK(fs::exists(dir / "eval_base" / "report.csv"));

  // Different test profiles give different reports from the same weights.
  REQUIRE(run("eval" + cfg + " --checkpoint " +
              (dir / "run_mfm" / "classifier_final.mfmc").string() + " --data " +
              (dir / "bundle").string() + " --out " + (dir / "eval_uniform").string() +
              " --test-profile uniform") == 0);
  REQUIRE(run("eval" + cfg + " --checkpoint " +
              (dir / "run_mfm" / "classifier_final.mfmc").string() + " --data " +
              (dir / "bundle").string() + " --out " + (dir / "eval_test1").string() +
              " --test-profile test1") == 0);
  {
    std::ifstream a(dir / "eval_uniform" / "report.csv");
    std::ifstream b(dir / "eval_test1" / "report.csv");
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa != sb);
  }

  REQUIRE(run("export-mods" + cfg + " --classifier " +
              (dir / "run_mfm" / "classifier_final.mfmc").string() + " --modulator " +
              (dir / "run_mfm" / "modulator_final.mfmm").string() + " --data " +
              (dir / "bundle").string() + " --site h1 --out " +
              (dir / "mods.csv").string()) == 0);
  CHECK(fs::exists(dir / "mods.csv"));

  REQUIRE(run("train" + cfg + " --data " + (dir / "bundle").string() + " --out " +
              (dir / "run_frozen").string() + " --mode frozen:" +
              (dir / "run_mfm" / "modulator_final.mfmm").string()) == 0);
  CHECK(fs::exists(dir / "run_frozen" / "classifier_final.mfmc"));
}

TEST_CASE("validation failures exit nonzero") {
  fs::path dir = fresh_dir();
  write_config(dir / "cfg.ini");
  const std::string cfg = " --config " + (dir / "cfg.ini").string();

  CHECK(run("synthesize" + cfg + " --set data.imbalance_factor=0.5 --out " +
            (dir / "bad").string()) != 0);
  CHECK(run("synthesize" + cfg + " --set data.unknown_key=1 --out " +
            (dir / "bad2").string()) != 0);
  CHECK(run("train" + cfg + " --data " + (dir / "missing").string() + " --out " +
            (dir / "bad3").string()) != 0);

  // Frozen mode with a mismatched class count reports a clear error.
  REQUIRE(run("synthesize" + cfg + " --out " + (dir / "bundle").string()) == 0);
  REQUIRE(run("train" + cfg + " --data " + (dir / "bundle").string() + " --out " +
              (dir / "run_mfm").string() + " --mode mfm") == 0);
  REQUIRE(run("synthesize" + cfg +
              " --set data.classes=4 --set data.imbalance_factor=4 --out " +
              (dir / "bundle4").string()) == 0);
  CHECK(run("train" + cfg + " --set data.classes=4 --data " +
            (dir / "bundle4").string() + " --out " + (dir / "bad4").string() +
            " --mode frozen:" + (dir / "run_mfm" / "modulator_final.mfmm").string()) !=
        0);
  // The partial output dir was moved aside.
  CHECK(!fs::exists(dir / "bad4"));
  CHECK(fs::exists((dir / "bad4").string() + ".failed"));
}

}  // TEST_SUITE
