#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "test_paths.hpp"
#include "tiny_config.hpp"

using namespace s4al;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "s4al");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string write_config(const std::filesystem::path& dir, const ExperimentConfig& c) {
  const auto p = dir / "config.json";
  std::ofstream(p) << c.to_json(2);
  return p.string();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("generate writes a manifest and is reproducible") {
    const auto dir = test_dir("cli_generate");
    const auto cfg = write_config(dir, tiny_config((dir / "runs").string()));
    const auto a = cli({"generate", "--config", cfg, "--out", (dir / "d1").string()});
    REQUIRE(a.code == 0);
    CHECK(std::filesystem::exists(dir / "d1" / "manifest.json"));
    CHECK(a.out.find("manifest.json") != std::string::npos);
    REQUIRE(cli({"generate", "--config", cfg, "--out", (dir / "d2").string()}).code == 0);
    CHECK(slurp(dir / "d1" / "manifest.json") == slurp(dir / "d2" / "manifest.json"));
    CHECK(slurp(dir / "d1" / "images" / "img_0003.png") == slurp(dir / "d2" / "images" / "img_0003.png"));
  }

  TEST_CASE("exit codes") {
    const auto dir = test_dir("cli_codes");
    CHECK(cli({"generate", "--config", (dir / "missing.json").string()}).code == 2);
    std::ofstream(dir / "bad.json") << R"({"learning_rate": 0.1})";
    const auto bad = cli({"run", "--config", (dir / "bad.json").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("learning_rate") != std::string::npos);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"report", (dir / "no_run").string()}).code == 3);

    auto c = tiny_config((dir / "runs").string());
    c.dataset.dir = (dir / "absent").string();
    CHECK(cli({"run", "--config", write_config(dir, c)}).code == 3);

    c = tiny_config((dir / "runs").string());
    c.optimizer.learning_rate = 1e12;
    c.schedule.epochs = 3;
    CHECK(cli({"run", "--config", write_config(dir, c)}).code == 4);
  }

  TEST_CASE("run on a generated dataset, seed sweep and report") {
    const auto dir = test_dir("cli_run");
    auto c = tiny_config((dir / "ignored").string(), "sweep");
    c.mode = Mode::supervised;
    c.dataset.dir = (dir / "data").string();
    const auto cfg = write_config(dir, c);
    REQUIRE(cli({"generate", "--config", cfg}).code == 0);
    const auto r = cli({"run", "--config", cfg, "--out", (dir / "runs").string(), "--seeds", "1,2"});
    REQUIRE(r.code == 0);
    const auto s1 = dir / "runs" / "sweep_seed1", s2 = dir / "runs" / "sweep_seed2";
    CHECK(std::filesystem::exists(s1 / "reports.csv"));
    CHECK(std::filesystem::exists(s2 / "run_manifest.json"));
    const auto rep = cli({"report", s1.string(), s2.string(), "--reference", s2.string(), "--out", (dir / "rep").string()});
    REQUIRE(rep.code == 0);
    CHECK(std::filesystem::exists(dir / "rep" / "comparison.csv"));
    CHECK(std::filesystem::exists(dir / "rep" / "miou_vs_labels.svg"));
    CHECK(std::filesystem::exists(dir / "rep" / "efficiency.csv"));
  }
}
