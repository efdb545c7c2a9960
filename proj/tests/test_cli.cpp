#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "hardylab/experiments.hpp"

using namespace hardylab;
namespace fs = std::filesystem;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hardylab_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HARDYLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, ParsesCommentsAndLists) {
  auto c = parse("# header\nsymbol = lens:0.5   # trailing\n\ngrid=4096\nschatten.p = 1, 0.5\n");
  EXPECT_EQ(c.str("symbol"), "lens:0.5");
  EXPECT_EQ(c.integer("grid"), 4096);
  EXPECT_EQ(c.list("schatten.p"), (std::vector<double>{1, 0.5}));
  EXPECT_EQ(c.integer("dyadic.n0"), 4);
  EXPECT_EQ(c.num("threshold.gamma_min"), 0.25);
}

TEST(Config, StrictErrors) {
  for (const char* bad : {"nope = 1\n", "grid 4096\n", "grid = 1\ngrid = 2\n", "grid =\n"}) {
    try {
      parse(bad);
      FAIL() << bad;
    } catch (const LabError& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config) << bad;
    }
  }
  EXPECT_THROW(parse("grid = 12x\n").integer("grid"), LabError);
  EXPECT_THROW(parse("alpha = 1,b\n").list("alpha"), LabError);
}

TEST(Config, ThresholdDefaultsMatchAcceptance) {
  Config c;
  EXPECT_EQ(c.num("threshold.gamma_min"), 0.25);
  EXPECT_EQ(c.num("threshold.gamma_max"), 0.45);
  EXPECT_EQ(c.num("threshold.fit_residual"), 0.5);
  EXPECT_EQ(c.num("threshold.stamp_rel"), 0.01);
  EXPECT_EQ(c.num("threshold.hs_rel"), 1e-3);
  EXPECT_EQ(c.num("threshold.compact_ratio"), 0.25);
  EXPECT_EQ(c.num("threshold.control_factor"), 2);
  EXPECT_EQ(c.num("threshold.carleson_spread"), 10);
  EXPECT_EQ(c.num("threshold.vanishing_min"), 0.05);
  EXPECT_EQ(c.num("threshold.band_factor"), 5);
  EXPECT_EQ(c.num("threshold.nuclear_ratio"), 10);
  EXPECT_EQ(c.num("threshold.sum_rel"), 0.01);
}

TEST(Registry, GoldenNames) {
  const std::vector<std::pair<std::string, std::string>> golden = {
      {"compactify", "compactification"},
      {"specif", "stretched-exponential-rate"},
      {"specif-bis", "stretched-exponential-rate-half"},
      {"hs-iff", "hilbert-schmidt-criterion"},
      {"hs-not-sp", "hilbert-schmidt-not-schatten"},
      {"schatten-upgrade", "power-weight-upgrade"},
      {"moment-test", "moment-integral-log-gap"},
      {"pas-schatten", "extreme-not-exposed"},
      {"nuclear-hp", "nuclearity-on-hp"},
      {"decompact", "decompactification"},
  };
  ASSERT_EQ(registry().size(), 10u);
  for (std::size_t i = 0; i < golden.size(); ++i) {
    EXPECT_EQ(registry()[i].name, golden[i].first);
    EXPECT_EQ(registry()[i].tag, golden[i].second);
  }
  EXPECT_EQ(find_experiment("nope"), nullptr);
}

TEST(Emit, EmptyReport) {
  ExperimentReport rep;
  rep.experiment = "empty";
  auto dir = scratch("empty");
  auto files = emit(rep, dir.string());
  EXPECT_EQ(files, std::vector<std::string>{"report.json"});
  auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_TRUE(j["results"].is_array());
  EXPECT_TRUE(j["results"].empty());
  EXPECT_EQ(j["exit_code"], 0);
  EXPECT_EQ(j["manifest"], nlohmann::json::array({"report.json"}));
}

TEST(Emit, ExitCodes) {
  ExperimentReport rep;
  rep.check("a", true);
  EXPECT_EQ(rep.exit_code(), 0);
  rep.check("b", Status::inconclusive);
  EXPECT_EQ(rep.exit_code(), 2);
  rep.check("c", false);
  EXPECT_EQ(rep.exit_code(), 1);
}

TEST(Emit, SeventeenDigits) {
  EXPECT_EQ(fmt17(0.1), "0.10000000000000001");
  EXPECT_EQ(fmt17(1.0 / 3), "0.33333333333333331");
}

TEST(Run, HsIffOnHalf) {
  auto rep = run_experiment("hs-iff", parse("symbol = half\n"));
  EXPECT_EQ(rep.exit_code(), 0);
  bool seen = false;
  for (const auto& c : rep.checks)
    if (c.name == "boundary_identity") {
      seen = true;
      EXPECT_EQ(c.status, Status::pass);
    }
  EXPECT_TRUE(seen);
}

TEST(Run, HsIffOnExtremeRefusesWeight) {
  auto rep = run_experiment("hs-iff", parse("symbol = extreme\n"));
  ASSERT_EQ(rep.checks.size(), 1u);
  EXPECT_EQ(rep.checks[0].name, "hs_weight_refused");
  EXPECT_EQ(rep.checks[0].status, Status::pass);
  EXPECT_NE(rep.checks[0].data["error"].get<std::string>().find("divergent log-integral"), std::string::npos);
}

TEST(Run, DecompactLens) {
  auto rep = run_experiment("decompact", parse("symbol = lens:0.5\n"));
  EXPECT_EQ(rep.exit_code(), 0);
}

TEST(Run, ExperimentNameMismatch) {
  EXPECT_THROW(run_experiment("hs-iff", parse("experiment = decompact\n")), LabError);
  EXPECT_THROW(run_experiment("nope", Config{}), LabError);
}

TEST(Run, DeterministicFilesAndManifest) {
  auto a = scratch("det_a"), b = scratch("det_b");
  auto cfg = parse("symbol = lens:0.5\n");
  auto fa = emit(run_experiment("decompact", cfg), a.string());
  auto fb = emit(run_experiment("decompact", cfg), b.string());
  ASSERT_EQ(fa, fb);
  std::set<std::string> uniq(fa.begin(), fa.end());
  EXPECT_EQ(uniq.size(), fa.size());
  for (const auto& f : fa) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  auto j = nlohmann::json::parse(slurp(a / "report.json"));
  EXPECT_EQ(j["manifest"].get<std::vector<std::string>>(), fa);
  std::size_t on_disk = 0;
  for (const auto& e : fs::directory_iterator(a)) on_disk += e.is_regular_file();
  EXPECT_EQ(on_disk, fa.size());
  EXPECT_EQ(slurp(a / "carleson.csv").substr(0, 19), "n,h,rho,rho_over_h\n");
}

TEST(Binary, ExitStatus) {
  auto dir = scratch("bin");
  {
    std::ofstream(dir / "ok.cfg") << "symbol = half\n";
    std::ofstream(dir / "bad.cfg") << "symbol = half\nbogus = 1\n";
    std::ofstream(dir / "fail.cfg") << "threshold.hs_rel = 1e-30\n";
  }
  EXPECT_EQ(run_cli("list"), 0);
  EXPECT_EQ(run_cli("run hs-iff --config " + (dir / "ok.cfg").string() + " --out " + (dir / "o1").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o1" / "report.json"));
  EXPECT_EQ(run_cli("run hs-iff --config " + (dir / "fail.cfg").string() + " --out " + (dir / "o2").string()), 1);
  EXPECT_EQ(run_cli("run hs-iff --config " + (dir / "bad.cfg").string()), 3);
  EXPECT_EQ(run_cli("run hs-iff --config " + (dir / "missing.cfg").string()), 3);
  EXPECT_EQ(run_cli("run nope --config " + (dir / "ok.cfg").string()), 3);
  EXPECT_EQ(run_cli("run hs-iff"), 3);
  EXPECT_EQ(run_cli(""), 3);
}
