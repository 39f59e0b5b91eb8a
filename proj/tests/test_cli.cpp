// Runs the nlheat binary end to end and inspects its files and exit codes.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "nlheat/io.hpp"

namespace fs = std::filesystem;
using nlheat::Json;

namespace {

struct CliRun {
  int code;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "nlheat_cli_test" / name;
  fs::remove_all(p);
  return p;
}

CliRun run(const fs::path& out, const std::string& args) {
  const fs::path log = out.string() + ".stdout";
  fs::create_directories(log.parent_path());
  const std::string cmd = std::string(NLHEAT_CLI) + " --out " + out.string() + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

Json read_json(const fs::path& p) {
  std::ifstream is(p);
  return Json::parse(is);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_rows(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    std::vector<double> r;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Cli, KernelInfoGaussian) {
  const auto out = scratch("ki_gauss");
  const CliRun r = run(out, "kernel-info --family gaussian --gamma 1");
  ASSERT_EQ(r.code, 0) << r.out;
  const Json j = read_json(out / "kernel_info.json");
  EXPECT_NEAR(j["moments"]["m2"].get<double>(), 0.5, 1e-15);
  EXPECT_EQ(j["decay_class"], "Fast");
  const Json m = read_json(out / "manifest.json");
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_EQ(m["config"]["kernel"], "family=gaussian gamma=1 N=1");
}

TEST(Cli, KernelInfoDivergentMomentIsAWarning) {
  const auto out = scratch("ki_power");
  const CliRun r = run(out, "kernel-info --family power --gamma0 2 --moment 4");
  ASSERT_EQ(r.code, 0) << r.out;
  const Json j = read_json(out / "kernel_info.json");
  EXPECT_TRUE(j["moments"]["m4"].is_null());
  EXPECT_FALSE(j["warnings"].empty());
  EXPECT_EQ(j["decay_class"], "Slow");
}

TEST(Cli, KernelInfoUniformIsFast) {
  const auto out = scratch("ki_uniform");
  ASSERT_EQ(run(out, "kernel-info --family uniform --rho 1").code, 0);
  EXPECT_EQ(read_json(out / "kernel_info.json")["decay_class"], "Fast");
}

TEST(Cli, EvolveQuadratic) {
  const auto out = scratch("evolve_repr");
  const CliRun r = run(out, "evolve --family uniform --rho 1 --data \"x^2\" --t 1 --method repr");
  ASSERT_EQ(r.code, 0) << r.out;
  const Json d = read_json(out / "diagnostics.json");
  EXPECT_EQ(d["method"], "repr");
  EXPECT_TRUE(d.contains("K"));
  const double radius = d["trusted_radius"].get<double>();
  const double h = 0.01;
  for (const auto& row : read_rows(out / "u.csv")) {
    if (std::abs(row[0]) > std::min(radius, 10.0)) continue;
    EXPECT_NEAR(row[2], row[0] * row[0] + 1.0 / 3.0, d["error_budget"].get<double>() + h * h);
  }
  const Json m = read_json(out / "manifest.json");
  EXPECT_EQ(m["outputs"], Json::array({"u.csv", "diagnostics.json"}));
}

TEST(Cli, EvolveAtTimeZeroCopiesData) {
  const auto out = scratch("evolve_t0");
  ASSERT_EQ(run(out, "evolve --family gaussian --data \"exp(-x^2)\" --t 0 --L 5 --h 0.05").code, 0);
  for (const auto& row : read_rows(out / "u.csv")) EXPECT_EQ(row[1], row[2]);
}

TEST(Cli, MarchAgreesWithRepresentation) {
  const auto a = scratch("evolve_a"), b = scratch("evolve_b");
  const std::string common = "evolve --family uniform --data \"x^2 + cos(x)\" --t 1 --L 15 --h 0.02";
  ASSERT_EQ(run(a, common + " --method repr").code, 0);
  ASSERT_EQ(run(b, common + " --method march --dt 1e-3").code, 0);
  const Json da = read_json(a / "diagnostics.json"), db = read_json(b / "diagnostics.json");
  EXPECT_EQ(db["steps"], 1000);
  const double radius = std::min(da["trusted_radius"].get<double>(), db["trusted_radius"].get<double>());
  const double budget = da["error_budget"].get<double>() + db["error_budget"].get<double>() + 1e-11;
  const auto ra = read_rows(a / "u.csv"), rb = read_rows(b / "u.csv");
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (std::abs(ra[i][0]) <= radius) {
      EXPECT_NEAR(ra[i][2], rb[i][2], budget);
    }
  }
}

TEST(Cli, EvolveFromCsvRecordsInputHash) {
  const auto src = scratch("csv_src");
  ASSERT_EQ(run(src, "evolve --family gaussian --data \"exp(-x^2)\" --t 0 --L 25 --h 0.1").code, 0);
  // reuse the (x, u0) columns as a two-column data file
  const fs::path data = src / "data.csv";
  {
    std::ofstream os(data);
    os << "x,value\n";
    for (const auto& row : read_rows(src / "u.csv")) {
      os << nlheat::format_double(row[0]) << "," << nlheat::format_double(row[1]) << "\n";
    }
  }
  const auto out = scratch("csv_run");
  ASSERT_EQ(run(out, "evolve --family gaussian --data " + data.string() + " --t 0.5").code, 0);
  const Json m = read_json(out / "manifest.json");
  EXPECT_EQ(m["inputs"][data.string()], nlheat::file_hash(data));
}

TEST(Cli, HeatkernelSidecar) {
  const auto out = scratch("heat");
  ASSERT_EQ(run(out, "heatkernel --family gaussian --t 1 --L 30 --h 0.05 --dump-iterates").code, 0);
  const Json j = read_json(out / "omega.json");
  for (const char* key : {"t", "K", "remainder_bound", "truncation_loss", "mass", "mass_expected"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_NEAR(j["mass"].get<double>(), j["mass_expected"].get<double>(), 1e-10);
  EXPECT_TRUE(fs::exists(out / "iterates" / "index.json"));
  EXPECT_EQ(slurp(out / "omega.csv").substr(0, 8), "x,omega\n");
}

TEST(Cli, ClassifyGaussianNonexistence) {
  const auto out = scratch("classify");
  const CliRun r = run(out, "classify --family gaussian --gamma 1 --growth xsqrtlogx --alpha 2");
  ASSERT_EQ(r.code, 0) << r.out;
  const Json v = read_json(out / "verdict.json");
  EXPECT_EQ(v["verdict"], "NotExists");
  EXPECT_TRUE(v.contains("citation"));
  EXPECT_TRUE(v.contains("kernel"));
  EXPECT_TRUE(v.contains("growth"));
}

TEST(Cli, ClassifyWithBarrier) {
  const auto out = scratch("classify_barrier");
  ASSERT_EQ(run(out, "classify --family power --gamma0 3 --growth power --growth-gamma 2 --verify-barrier").code, 0);
  const Json v = read_json(out / "verdict.json");
  EXPECT_EQ(v["verdict"], "Exists");
  EXPECT_EQ(v["barrier"], "barrier=power gamma=2");
  EXPECT_TRUE(v["barrier_verified"].get<bool>());
}

TEST(Cli, PolyUniform) {
  const auto out = scratch("poly");
  const CliRun r = run(out, "poly --family uniform --rho 1 --p 1");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "x^2 + (1/3) t\n");
  const Json j = read_json(out / "poly.json");
  EXPECT_EQ(j["polynomial"], "x^2 + (1/3) t");
  EXPECT_EQ(j["leading_term"]["coefficient"], "1/3");
  EXPECT_EQ(j["arithmetic"], "exact");
}

TEST(Cli, BarrierCheck) {
  const auto out = scratch("barrier");
  ASSERT_EQ(run(out, "barrier-check --family exptail --gamma0 1 --barrier exp --gamma 0.5").code, 0);
  const Json j = read_json(out / "barrier.json");
  EXPECT_LE(j["lambda_hat"].get<double>(), j["lambda_analytic"].get<double>());
  EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(Cli, EstimateFitFiles) {
  const auto out = scratch("fit");
  ASSERT_EQ(run(out, "estimate-fit --family uniform --rho 1 --sigma 0.5").code, 0);
  const Json j = read_json(out / "fit.json");
  for (const char* key : {"sigma", "c1", "c2", "c3", "c4", "residuals", "ranges"}) EXPECT_TRUE(j.contains(key));
  EXPECT_EQ(slurp(out / "fit.csv").substr(0, 38), "x,t,ln_omega,lower_env,upper_env\n5,1,-");
}

TEST(Cli, ProbeAndBlowup) {
  const auto p = scratch("probe");
  ASSERT_EQ(run(p, "probe --family uniform --growth xlogx --alpha 2 --L 60").code, 0);
  EXPECT_EQ(read_json(p / "probe.json")["probes"][0]["flag"], "Diverging");
  const auto b = scratch("blowup");
  ASSERT_EQ(run(b, "blowup --family gaussian --gamma 1 --L 60").code, 0);
  const Json j = read_json(b / "bracket.json");
  EXPECT_LT(j["t_lo"].get<double>(), j["t_hi"].get<double>());
}

TEST(Cli, ExitCodes) {
  const auto a = scratch("usage");
  EXPECT_EQ(run(a, "evolve --family uniform").code, 2);
  EXPECT_EQ(run(a, "kernel-info --family cauchy").code, 2);
  EXPECT_EQ(run(a, "evolve --family uniform --data \"x^^2\"").code, 2);
  const auto d = scratch("domain");
  const CliRun r = run(d, "heatkernel --family uniform --rho 5 --L 2 --h 0.01");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("minimal L"), std::string::npos);
  const Json m = read_json(d / "manifest.json");
  EXPECT_EQ(m["exit_code"], 3);
  const auto v = scratch("divergence");
  EXPECT_EQ(run(v, "barrier-check --family exptail --gamma0 1 --barrier exp --gamma 1").code, 4);
  const auto f = scratch("fit_fail");
  EXPECT_EQ(run(f, "blowup --family gaussian --gamma 1 --lo 0.1 --hi 0.3 --L 60").code, 2);
}

TEST(Cli, Deterministic) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const std::string args = "evolve --family gaussian --data \"1 + x^2\" --t 0.7 --L 25 --h 0.05";
  ASSERT_EQ(run(a, args).code, 0);
  ASSERT_EQ(run(b, args).code, 0);
  EXPECT_EQ(slurp(a / "u.csv"), slurp(b / "u.csv"));
  EXPECT_EQ(slurp(a / "diagnostics.json"), slurp(b / "diagnostics.json"));
  Json ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json");
  ma.erase("timestamp");
  mb.erase("timestamp");
  ma["config"].erase("out");
  mb["config"].erase("out");
  EXPECT_EQ(ma, mb);
}
