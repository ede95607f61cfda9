#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "mrtcount/simulate.hpp"

namespace fs = std::filesystem;
using namespace mrtcount;

namespace {

struct RunResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const fs::path& work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("mrtcount_cli." + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  const char* bin = std::getenv("MRTCOUNT_BIN");
  REQUIRE(bin != nullptr);
  fs::path out = work_dir() / "stdout.log";
  fs::path err = work_dir() / "stderr.log";
  std::string cmd = std::string(bin) + " " + args + " >" + out.string() + " 2>" + err.string();
  int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const fs::path& panel_csv() {
  static fs::path p = [] {
    GenConfig cfg;
    cfg.scenario = 1;
    cfg.n = 40;
    cfg.t = 25;
    fs::path path = work_dir() / "panel.csv";
    spit(path, write_panel_text(gen_scenario(cfg, 71)));
    return path;
  }();
  return p;
}

}  // namespace

TEST_CASE("bad invocations exit 2 and help exits 0") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("analyze").code == 2);  // --input is required
  CHECK(run_cli("analyze --input x.csv --nope").code == 2);
  CHECK(run_cli("simulate --scenario 9").code == 2);
  RunResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("analyze") != std::string::npos);
  CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("malformed input exits 2 and names the offending column") {
  fs::path bad = work_dir() / "bad.csv";
  spit(bad, "id,t,avail,arm,prob1\nu1,1,1,0,0.5\n");  // no outcome column
  RunResult r = run_cli("analyze --input " + bad.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("input error [MissingColumn]") != std::string::npos);
  CHECK(r.err.find("y") != std::string::npos);

  fs::path frac = work_dir() / "frac.csv";
  spit(frac, "id,t,avail,arm,y,prob1\nu1,1,1,0,2.5,0.5\n");
  RunResult r2 = run_cli("analyze --input " + frac.string());
  CHECK(r2.code == 2);
  CHECK(r2.err.find("NonIntegerOutcome") != std::string::npos);
}

TEST_CASE("analyze writes its artifacts and reruns byte-identically from them") {
  fs::path d1 = work_dir() / "a1";
  fs::path d2 = work_dir() / "a2";
  RunResult r = run_cli("analyze --input " + panel_csv().string() + " --out " + d1.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("emee-nonp") != std::string::npos);
  REQUIRE(fs::exists(d1 / "report.txt"));
  REQUIRE(fs::exists(d1 / "report.json"));
  REQUIRE(fs::exists(d1 / "config.resolved"));

  auto j = nlohmann::json::parse(slurp(d1 / "report.json"));
  CHECK(j["estimator"] == "emee-nonp");
  CHECK(j["estimates"].size() == j["se"].size());
  CHECK(std::fabs(j["estimates"][0].get<double>() - 0.46) < 0.5);

  RunResult r2 = run_cli("--config " + (d1 / "config.resolved").string() + " analyze --out " +
                         d2.string());
  REQUIRE(r2.code == 0);
  CHECK(slurp(d2 / "report.json") == slurp(d1 / "report.json"));
  CHECK(slurp(d2 / "config.resolved") == slurp(d1 / "config.resolved"));
}

TEST_CASE("analyze accepts estimator, ptilde, and meat selections") {
  fs::path d = work_dir() / "a3";
  RunResult r = run_cli("analyze --input " + panel_csv().string() +
                        " --estimator dr-emee-nonp --ptilde 0.5 --meat cluster --t-critical" +
                        " --out " + d.string());
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(slurp(d / "report.json"));
  CHECK(j["estimator"] == "dr-emee-nonp");
  CHECK(j["critical_value"].get<double>() > 1.9599);
  std::string cfg = slurp(d / "config.resolved");
  CHECK(cfg.rfind("[analyze]\n", 0) == 0);
  CHECK(cfg.find("ptilde=[0.5]") != std::string::npos);
  CHECK(cfg.find("meat=\"cluster\"") != std::string::npos);
}

TEST_CASE("an unestimable panel exits 1 with the estimation error class") {
  GenConfig cfg;
  cfg.scenario = 1;
  cfg.n = 6;
  cfg.t = 4;
  PanelDataset d = gen_scenario(cfg, 72);
  for (auto& rec : d.records) rec.arm = 0;  // nobody treated
  fs::path p = work_dir() / "untreated.csv";
  spit(p, write_panel_text(d));
  RunResult r = run_cli("analyze --input " + p.string());
  CHECK(r.code == 1);
  CHECK(r.err.find("estimation error [DegenerateArm]") != std::string::npos);
}

TEST_CASE("simulate writes summaries plus a failure log when replicates fail") {
  fs::path d1 = work_dir() / "s1";
  fs::path d2 = work_dir() / "s2";
  std::string base = "simulate --scenario 1 --n 4 --t 5 --replicates 10 --seed 99 "
                     "--estimator emee-nonp --out ";
  RunResult r = run_cli(base + d1.string());
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(d1 / "summary.txt"));
  REQUIRE(fs::exists(d1 / "summary.csv"));
  REQUIRE(fs::exists(d1 / "config.resolved"));
  REQUIRE(fs::exists(d1 / "failures.txt"));
  CHECK(slurp(d1 / "failures.txt").find("replicate ") != std::string::npos);
  CHECK(r.out.find("failed replicates:") != std::string::npos);

  RunResult r2 = run_cli("--config " + (d1 / "config.resolved").string() + " simulate --out " +
                         d2.string());
  REQUIRE(r2.code == 0);
  CHECK(slurp(d2 / "summary.csv") == slurp(d1 / "summary.csv"));
}

TEST_CASE("simulate output is invariant to the worker count") {
  fs::path d1 = work_dir() / "w1";
  fs::path d3 = work_dir() / "w3";
  std::string base = "simulate --scenario 3 --n 10 --t 25 --replicates 6 --seed 73 "
                     "--estimator emee --estimator gee-ind --out ";
  RunResult a = run_cli(base + d1.string() + " --workers 1");
  RunResult b = run_cli(base + d3.string() + " --workers 3");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  // the config echo names the worker count, so compare the metric rows only
  auto rows = [](const std::string& csv) {
    std::string out;
    size_t pos = 0;
    while (pos < csv.size()) {
      size_t end = csv.find('\n', pos);
      if (end == std::string::npos) end = csv.size();
      if (csv[pos] != '#') out += csv.substr(pos, end - pos) + "\n";
      pos = end + 1;
    }
    return out;
  };
  std::string csv1 = rows(slurp(d1 / "summary.csv"));
  CHECK(csv1 == rows(slurp(d3 / "summary.csv")));
  CHECK(csv1.find("gee-ind") != std::string::npos);
}

TEST_CASE("fitted nuisances can be saved and reloaded for the same answer") {
  fs::path d1 = work_dir() / "n1";
  fs::path d2 = work_dir() / "n2";
  fs::path store = work_dir() / "nuisance.txt";
  RunResult save = run_cli("analyze --input " + panel_csv().string() + " --save-nuisance " +
                           store.string() + " --out " + d1.string());
  REQUIRE(save.code == 0);
  REQUIRE(fs::exists(store));
  RunResult load = run_cli("analyze --input " + panel_csv().string() + " --load-nuisance " +
                           store.string() + " --out " + d2.string());
  REQUIRE(load.code == 0);
  auto j1 = nlohmann::json::parse(slurp(d1 / "report.json"));
  auto j2 = nlohmann::json::parse(slurp(d2 / "report.json"));
  REQUIRE(j1["estimates"].size() == j2["estimates"].size());
  for (size_t i = 0; i < j1["estimates"].size(); ++i)
    CHECK(std::fabs(j1["estimates"][i].get<double>() - j2["estimates"][i].get<double>()) <= 1e-9);
}
