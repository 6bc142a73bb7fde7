#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "../support/oracles.hpp"
#include "ckm/app/config.hpp"
#include "ckm/app/dataset.hpp"
#include "ckm/app/format.hpp"
#include "ckm/app/run.hpp"

namespace fs = std::filesystem;
using namespace ckm;
using namespace ckm::app;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("ckm_app_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& body) const {
    std::ofstream(path / name, std::ios::binary) << body;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Rows of a CSV written by the tool, keyed by header name; '#' lines skipped.
std::vector<std::map<std::string, double>> read_table(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (header.empty()) {
      header = cells;
      continue;
    }
    std::map<std::string, double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      row[header[i]] = cells[i] == "nan" ? NAN : std::strtod(cells[i].c_str(), nullptr);
    }
    rows.push_back(row);
  }
  return rows;
}

RunResult run_cmd(const std::string& command, const fs::path& config, const fs::path& out,
                  unsigned threads = 1, bool verify_loo = false) {
  RunOptions o;
  o.command = command;
  o.config = config;
  o.out_dir = out;
  o.threads = threads;
  o.verify_loo = verify_loo;
  std::ostringstream log;
  return run(o, log);
}

nlohmann::json manifest(const fs::path& out) {
  return nlohmann::json::parse(slurp(out / "manifest.json"));
}

std::string data_csv(const std::vector<Observation>& rows) {
  std::ostringstream os;
  write_observations_csv(os, rows, {"z_1"});
  return os.str();
}

}  // namespace

TEST_CASE("ingestion accepts a small file and names the bad row") {
  std::istringstream good("w,delta,eta,z_1\n1.5,1,1,0.2\n# note\n2,0,0,0.4\n3,1,0,0.6\n");
  const auto ds = ingest_csv(good, {}, "good.csv");
  CHECK(ds.rows.size() == 3);
  CHECK(ds.has_eta);
  CHECK(ds.covariate_names == std::vector<std::string>{"z_1"});
  CHECK(ds.rows[2].eta == 0);

  std::istringstream bad("w,delta,z_1\n1,1,0\n2,2,0\n");
  try {
    ingest_csv(bad, {}, "bad.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonBinaryIndicator);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  std::istringstream skip("w,delta,z_1\n1,1,0\n2,2,0\n-1,0,0\n4,0\n");
  IngestOptions opt;
  opt.skip_bad = true;
  const auto kept = ingest_csv(skip, opt, "skip.csv");
  CHECK(kept.rows.size() == 1);
  REQUIRE(kept.rejected.size() == 3);
  CHECK(kept.rejected[1].code == ErrorCode::NegativeTime);
  CHECK(kept.rejected[2].code == ErrorCode::RaggedCovariates);
}

TEST_CASE("config grammar") {
  const auto c = Config::from_string(
      "# comment\n[fit]\nt_grid = 0:0.5:2\npoints = 1,2 | 3,4\n; other comment\n"
      "[expert]\nmode = naive\n");
  CHECK(c.numbers("fit.t_grid") == std::vector<double>{0, 0.5, 1, 1.5, 2});
  CHECK(c.points("fit.points") == std::vector<std::vector<double>>{{1, 2}, {3, 4}});
  CHECK_THROWS_AS(c.check_keys({"fit.t_grid", "fit.points"}), Error);
  CHECK_NOTHROW(c.check_keys({"fit.t_grid", "fit.points", "expert.mode"}));
  CHECK(c.sha256().size() == 64);
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("precomputed mode without eta exits with a validation error") {
  TempDir d;
  d.write("data.csv", "w,delta,z_1\n1,1,0\n2,0,0\n");
  const auto cfg = d.write("c.ini", "[data]\npath = data.csv\n[fit]\npoints = 0\n");
  const auto r = run_cmd("fit", cfg, d.path / "out");
  CHECK(r.exit_code == kExitValidation);
  const auto err = nlohmann::json::parse(slurp(d.path / "out" / "error.json"));
  CHECK(err["error"] == "MissingColumn");
  CHECK(err["exit_code"] == 2);
  CHECK_FALSE(fs::exists(d.path / "out" / "manifest.json"));
}

TEST_CASE("unknown config keys are rejected") {
  TempDir d;
  d.write("data.csv", "w,delta,z_1\n1,1,0\n");
  const auto cfg = d.write("c.ini", "[data]\npath = data.csv\n[fit]\npoints = 0\nbogus = 1\n");
  const auto r = run_cmd("fit", cfg, d.path / "out");
  CHECK(r.exit_code == kExitValidation);
  CHECK(r.message.find("fit.bogus") != std::string::npos);
}

TEST_CASE("numerical failures exit with code 3") {
  TempDir d;
  d.write("data.csv", "w,delta,z_1\n1,1,0\n2,0,0\n");
  const auto cfg = d.write("c.ini",
                           "[data]\npath = data.csv\n[expert]\nmode = naive\n"
                           "[bandwidth]\nmode = explicit\nvalues = 1\n[fit]\npoints = 100\n");
  const auto r = run_cmd("fit", cfg, d.path / "out");
  CHECK(r.exit_code == kExitNumerical);
  const auto err = nlohmann::json::parse(slurp(d.path / "out" / "error.json"));
  CHECK(err["category"] == "numerical");
}

TEST_CASE("naive fit with constant covariates equals Kaplan-Meier") {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> lattice(1, 12);
  std::bernoulli_distribution event(0.6);
  std::vector<Observation> rows;
  for (int i = 0; i < 60; ++i) rows.push_back({0.5 * lattice(gen), event(gen) ? 1 : 0, {3.0}, {}});
  TempDir d;
  d.write("data.csv", data_csv(rows));
  const auto cfg = d.write("c.ini",
                           "[data]\npath = data.csv\n[expert]\nmode = naive\n"
                           "[bandwidth]\nmode = explicit\nvalues = 0.5\n"
                           "[fit]\npoints = 3\nt_grid = 0:0.25:7\n");
  REQUIRE(run_cmd("fit", cfg, d.path / "out").exit_code == kExitOk);
  const auto table = read_table(d.path / "out" / "fit_z1.csv");
  REQUIRE(table.size() == 29);
  for (const auto& row : table) {
    CHECK(row.at("survival") == doctest::Approx(oracle::kaplan_meier_survival(rows, row.at("t"))).epsilon(1e-12));
  }
}

TEST_CASE("all-censored data gives survival identically one") {
  std::vector<Observation> rows;
  for (int i = 1; i <= 10; ++i) rows.push_back({double(i), 0, {0.1 * i}, {}});
  TempDir d;
  d.write("data.csv", data_csv(rows));
  const auto cfg = d.write("c.ini",
                           "[data]\npath = data.csv\n[expert]\nmode = naive\n"
                           "[bandwidth]\nmode = explicit\nvalues = 2\n[fit]\npoints = 0.5\n");
  REQUIRE(run_cmd("fit", cfg, d.path / "out").exit_code == kExitOk);
  for (const auto& row : read_table(d.path / "out" / "fit_z1.csv")) CHECK(row.at("survival") == 1.0);
}

TEST_CASE("cv command: single candidate, small grid and shortcut verification") {
  std::mt19937_64 gen(11);
  const auto rows = oracle::random_censored(gen, 40, 1, 2.0);
  TempDir d;
  d.write("data.csv", data_csv(rows));
  const std::string base = "[data]\npath = data.csv\n[bandwidth]\nmode = cv\n";

  auto cfg = d.write("one.ini", base + "candidates = 0.7\n");
  REQUIRE(run_cmd("cv", cfg, d.path / "one").exit_code == kExitOk);
  auto m = manifest(d.path / "one");
  CHECK(m["bandwidth"]["diagonal"][0] == 0.7);
  CHECK(read_table(d.path / "one" / "cv_report.csv").size() == 1);

  cfg = d.write("three.ini", base + "candidates = 0.4, 0.8, 1.6\n");
  REQUIRE(run_cmd("cv", cfg, d.path / "three", 1, true).exit_code == kExitOk);
  const auto report = read_table(d.path / "three" / "cv_report.csv");
  REQUIRE(report.size() == 3);
  int selected = 0;
  double best = INFINITY;
  for (const auto& r : report) {
    selected += static_cast<int>(r.at("selected"));
    best = std::min(best, r.at("score"));
  }
  CHECK(selected == 1);
  m = manifest(d.path / "three");
  CHECK(m["bandwidth"]["cv_score"].get<double>() == best);
  CHECK(m["loo_verification"]["passed"] == true);
  CHECK(m["loo_verification"]["max_abs_diff"].get<double>() <= 1e-10);
}

TEST_CASE("reruns are bit-identical across thread counts") {
  TempDir d;
  const auto cfg = d.write("sim.ini", "[run]\nseed = 5\n[scenario]\nn = 300\n[simulate]\nexpert_p0 = 0.85\n");
  REQUIRE(run_cmd("simulate", cfg, d.path / "a").exit_code == kExitOk);
  REQUIRE(run_cmd("simulate", cfg, d.path / "b").exit_code == kExitOk);
  CHECK(slurp(d.path / "a" / "portfolio.csv") == slurp(d.path / "b" / "portfolio.csv"));

  fs::copy_file(d.path / "a" / "portfolio.csv", d.path / "portfolio.csv");
  const auto cv = d.write("cv.ini",
                          "[data]\npath = portfolio.csv\ncovariates = z_1\n"
                          "[bandwidth]\nmode = cv\ncandidates = 2, 4, 8\nt_grid = 2, 5, 10\n");
  REQUIRE(run_cmd("cv", cv, d.path / "t1", 1).exit_code == kExitOk);
  REQUIRE(run_cmd("cv", cv, d.path / "t4", 4).exit_code == kExitOk);
  CHECK(slurp(d.path / "t1" / "cv_report.csv") == slurp(d.path / "t4" / "cv_report.csv"));
  CHECK(slurp(d.path / "t1" / "manifest.json") == slurp(d.path / "t4" / "manifest.json"));
}

TEST_CASE("simulated portfolio round-trips through ingestion") {
  TempDir d;
  const auto cfg = d.write("sim.ini", "[scenario]\nn = 50\n[simulate]\nexpert_p0 = 1\n");
  RunOptions o;
  o.command = "simulate";
  o.config = cfg;
  o.out_dir = d.path / "out";
  o.keep_latents = true;
  std::ostringstream log;
  REQUIRE(run(o, log).exit_code == kExitOk);
  const auto text = slurp(d.path / "out" / "portfolio.csv");
  CHECK(text.rfind("# config_sha256=", 0) == 0);
  std::istringstream in(text);
  const auto ds = ingest_csv(in, {}, "portfolio.csv");
  REQUIRE(ds.rows.size() == 50);
  for (const auto& row : read_table(d.path / "out" / "portfolio.csv")) {
    CHECK(row.at("w") == std::min({row.at("x"), row.at("y"), row.at("c")}));
  }
  std::ostringstream again;
  write_observations_csv(again, ds.rows, ds.covariate_names);
  std::istringstream in2(again.str());
  const auto ds2 = ingest_csv(in2, {}, "again");
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    CHECK(ds.rows[i].w == ds2.rows[i].w);
    CHECK(ds.rows[i].z == ds2.rows[i].z);
  }
}

TEST_CASE("bias command") {
  TempDir d;
  d.write("data.csv", "w,delta,z_1\n1,1,0\n1,1,0\n2,0,0\n2,0,0\n2,0,0\n");
  const std::string base =
      "[data]\npath = data.csv\n[bandwidth]\nmode = explicit\nvalues = 1\n"
      "[bias]\npoints = 0\nt_grid = 0, 1, 1.5, 2\n";

  SUBCASE("fully informed expert leaves the curve unchanged") {
    const auto cfg = d.write("c.ini", base + "p_hat = constant:0.5\np0 = 1\n");
    REQUIRE(run_cmd("bias", cfg, d.path / "o").exit_code == kExitOk);
    for (const auto& r : read_table(d.path / "o" / "bias_z1_p1.csv")) CHECK(r.at("factor") == 1.0);
  }
  SUBCASE("p_hat identically one gives no distortion") {
    const auto cfg = d.write("c.ini", base + "p_hat = constant:1\np0 = 0, 0.5\n");
    REQUIRE(run_cmd("bias", cfg, d.path / "o").exit_code == kExitOk);
    for (const auto& name : {"bias_z1_p1.csv", "bias_z1_p2.csv"}) {
      for (const auto& r : read_table(d.path / "o" / name)) {
        CHECK(r.at("factor") == 1.0);
        CHECK(r.at("biased_survival") == r.at("naive_survival"));
      }
    }
  }
  SUBCASE("hand-computed gamma") {
    const auto cfg = d.write("c.ini", base + "p_hat = constant:0.5\np0 = 0\n");
    REQUIRE(run_cmd("bias", cfg, d.path / "o").exit_code == kExitOk);
    const auto t = read_table(d.path / "o" / "bias_z1_p1.csv");
    CHECK(t[0].at("gamma") == 0.0);
    CHECK(t[1].at("gamma") == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(t[1].at("factor") == doctest::Approx(std::exp(-0.2)));
    CHECK(t[1].at("naive_survival") == doctest::Approx(0.6));
    CHECK(t[1].at("unbiased_survival") == doctest::Approx(0.8));
  }
}

TEST_CASE("loan conversion") {
  TempDir d;
  d.write("loans.csv",
          "issue_date,last_payment_date,default_date,cutoff_date,dti,ir\n"
          "2015-01-01,2015-07-01,2015-08-01,2020-12-31,12.5,9.1\n"
          "2016-01-01,2020-12-31,,2020-12-31,20,14\n"
          "2016-01-01,2018-01-01,2021-03-01,2020-12-31,20,14\n");
  const auto cfg = d.write("c.ini", "[convert]\ninput = loans.csv\n");
  REQUIRE(run_cmd("convert-loans", cfg, d.path / "o").exit_code == kExitOk);
  const auto t = read_table(d.path / "o" / "loans_converted.csv");
  REQUIRE(t.size() == 3);
  CHECK(t[0].at("delta") == 1);
  CHECK(t[0].at("w") == doctest::Approx(212 / 30.4375));
  CHECK(t[1].at("delta") == 0);
  CHECK(t[2].at("delta") == 0);
  CHECK(t[2].at("w") == doctest::Approx(731 / 30.4375));
  CHECK(t[0].at("z_2") == 9.1);
}

TEST_CASE("output directory precedence") {
  CHECK(resolve_out_dir(fs::path("flag"), std::string("cfg")) == fs::path("flag"));
  ::unsetenv("CKM_OUT_DIR");
  CHECK(resolve_out_dir(std::nullopt, std::string("cfg")) == fs::path("cfg"));
  CHECK(resolve_out_dir(std::nullopt, std::nullopt) == fs::path("ckm_out"));
  ::setenv("CKM_OUT_DIR", "env", 1);
  CHECK(resolve_out_dir(std::nullopt, std::string("cfg")) == fs::path("env"));
  ::unsetenv("CKM_OUT_DIR");
}
