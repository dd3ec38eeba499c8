#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "leomon/geodesy.hpp"
#include "leomon/io.hpp"
#include "leomon/scenarios.hpp"
#include "leomon/survey_synth.hpp"

using namespace leomon;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& stderr_to = {}) {
  std::string cmd = std::string(LEOMON_CLI_PATH) + " " + args + " >/dev/null";
  cmd += stderr_to.empty() ? " 2>/dev/null" : " 2>" + stderr_to.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("leomon_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_json(const std::string& name, const json& doc) {
    const fs::path path = dir_ / name;
    std::ofstream out(path);
    out << doc.dump(2);
    return path;
  }

  fs::path dir_;
};

json simulate_config(double w_sigma, const std::string& clock_preset = "ideal") {
  json cfg;
  cfg["schema_version"] = 1;
  cfg["seed"] = 11;
  cfg["preset"] = "single_pass_study";
  cfg["clock"] = {{"preset", clock_preset}};
  cfg["w_sigma_hz"] = w_sigma;
  cfg["tx_clock_rate_ss"] = 2.5e-9;
  return cfg;
}

}  // namespace

TEST_F(CliTest, MissingConfigExitsTwoAndNamesPath) {
  const fs::path log = dir_ / "err.txt";
  EXPECT_EQ(run_cli("simulate --config " + (dir_ / "nope.json").string(), log), 2);
  EXPECT_NE(slurp(log).find("nope.json"), std::string::npos);
}

TEST_F(CliTest, UnknownSubcommandExitsTwo) {
  EXPECT_EQ(run_cli("frobnicate --config x.json"), 2);
}

TEST_F(CliTest, SimulateDeterministicForFixedSeed) {
  const fs::path cfg = write_json("sim.json", simulate_config(2.3, "ocxo"));
  const fs::path out_a = dir_ / "a";
  const fs::path out_b = dir_ / "b";
  ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + out_a.string() +
                    " --no-timestamp"),
            0);
  ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + out_b.string() +
                    " --no-timestamp"),
            0);
  for (const auto& name : {"trajectory_day144.csv", "capture_day144.csv",
                           "capture_day144.json", "manifest.json"}) {
    EXPECT_EQ(slurp(out_a / name), slurp(out_b / name)) << name;
    EXPECT_FALSE(slurp(out_a / name).empty()) << name;
  }
}

TEST_F(CliTest, SeedOverrideChangesCapture) {
  const fs::path cfg = write_json("sim.json", simulate_config(2.3));
  const fs::path out_a = dir_ / "a";
  const fs::path out_b = dir_ / "b";
  ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + out_a.string() +
                    " --no-timestamp"),
            0);
  ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + out_b.string() +
                    " --seed 99 --no-timestamp"),
            0);
  EXPECT_NE(slurp(out_a / "capture_day144.csv"), slurp(out_b / "capture_day144.csv"));
  EXPECT_EQ(slurp(out_a / "trajectory_day144.csv"), slurp(out_b / "trajectory_day144.csv"));
}

TEST_F(CliTest, SimulatedNoiseMatchesConfiguredSigma) {
  // Same seed with and without white noise isolates the injected noise.
  const fs::path noisy_cfg = write_json("noisy.json", simulate_config(2.3));
  const fs::path clean_cfg = write_json("clean.json", simulate_config(0.0));
  const fs::path out_noisy = dir_ / "noisy";
  const fs::path out_clean = dir_ / "clean";
  ASSERT_EQ(run_cli("simulate --config " + noisy_cfg.string() + " --out " +
                    out_noisy.string() + " --no-timestamp"),
            0);
  ASSERT_EQ(run_cli("simulate --config " + clean_cfg.string() + " --out " +
                    out_clean.string() + " --no-timestamp"),
            0);
  const auto noisy = load_capture_csv(out_noisy / "capture_day144.csv");
  const auto clean = load_capture_csv(out_clean / "capture_day144.csv");
  ASSERT_EQ(noisy.size(), clean.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < noisy.size(); ++k) {
    const double d = noisy[k].doppler_hz - clean[k].doppler_hz;
    acc += d * d;
  }
  const double sd = std::sqrt(acc / static_cast<double>(noisy.size()));
  EXPECT_NEAR(sd / 2.3, 1.0, 0.05);
}

TEST_F(CliTest, EstimateRecoversNoiseFreeTruth) {
  const fs::path sim_cfg = write_json("sim.json", simulate_config(0.0));
  const fs::path sim_out = dir_ / "sim";
  ASSERT_EQ(run_cli("simulate --config " + sim_cfg.string() + " --out " + sim_out.string() +
                    " --no-timestamp"),
            0);
  json est;
  est["schema_version"] = 1;
  est["captures"] = {(sim_out / "capture_day144.json").string()};
  est["altitude_prior"] = {{"mean_m", 48.0}, {"sigma_m", 5.0}};
  const fs::path est_cfg = write_json("est.json", est);
  const fs::path est_out = dir_ / "est";
  ASSERT_EQ(run_cli("estimate --config " + est_cfg.string() + " --out " + est_out.string() +
                    " --format geojson --no-timestamp"),
            0);

  const json sol = json::parse(slurp(est_out / "solution.json"));
  EXPECT_TRUE(sol.at("converged").get<bool>());
  const GeodeticPosition est_pos{sol.at("position").at("lat_deg").get<double>(),
                                 sol.at("position").at("lon_deg").get<double>(),
                                 sol.at("position").at("alt_m").get<double>()};
  const double err =
      (geodetic_to_ecef(est_pos) - geodetic_to_ecef({35.4, 35.95, 48.0})).norm();
  EXPECT_LT(err, 0.1);
  EXPECT_NEAR(sol.at("clock_rate_per_pass_ss").at("day144").get<double>(), 2.5e-9, 1e-12);

  const json ellipses = json::parse(slurp(est_out / "ellipses.geojson"));
  EXPECT_EQ(ellipses.at("features").size(), 2u);
}

TEST_F(CliTest, EstimateMalformedCaptureExitsTwo) {
  const fs::path sim_cfg = write_json("sim.json", simulate_config(0.0));
  const fs::path sim_out = dir_ / "sim";
  ASSERT_EQ(run_cli("simulate --config " + sim_cfg.string() + " --out " + sim_out.string() +
                    " --no-timestamp"),
            0);
  // Corrupt one capture row.
  {
    std::ofstream out(sim_out / "capture_day144.csv", std::ios::app);
    out << "3.05,not_a_number,2.3\n";
  }
  json est;
  est["schema_version"] = 1;
  est["captures"] = {(sim_out / "capture_day144.json").string()};
  const fs::path est_cfg = write_json("est.json", est);
  const fs::path log = dir_ / "err.txt";
  EXPECT_EQ(run_cli("estimate --config " + est_cfg.string() + " --out " +
                    (dir_ / "est").string(), log),
            2);
  EXPECT_NE(slurp(log).find("line"), std::string::npos);
}

TEST_F(CliTest, EstimateSingularGeometryExitsFour) {
  const fs::path traj = dir_ / "static.csv";
  {
    std::ofstream out(traj);
    out << trajectory_csv_header << "\n";
    for (int k = 0; k < 50; ++k)
      out << 0.05 * k << ",6778000,0,0,0,0,0,0\n";
  }
  {
    std::ofstream out(dir_ / "static_cap.csv");
    out << capture_csv_header << "\n";
    for (int k = 0; k < 50; ++k) out << 0.05 * k << ",0,1\n";
  }
  write_capture_sidecar(dir_ / "static.json", "static_cap.csv", "static.csv", "s", 1575.42e6);
  json est;
  est["schema_version"] = 1;
  est["captures"] = {(dir_ / "static.json").string()};
  est["init"] = {{"lat_deg", 10.0}, {"lon_deg", 10.0}, {"alt_m", 0.0}};
  const fs::path est_cfg = write_json("est.json", est);
  EXPECT_EQ(run_cli("estimate --config " + est_cfg.string() + " --out " +
                    (dir_ / "est").string()),
            4);
}

TEST_F(CliTest, MontecarloSummaryShapeAndDeterminism) {
  json cfg;
  cfg["schema_version"] = 1;
  cfg["seed"] = 5;
  cfg["preset"] = "single_pass_study";
  cfg["trials"] = 40;
  cfg["subgroup_size"] = 10;
  cfg["subgroup_draws"] = 200;
  cfg["clocks"] = json::array({json{{"preset", "ocxo"}}, json{{"preset", "tcxo"}}});
  const fs::path mc_cfg = write_json("mc.json", cfg);
  const fs::path out_a = dir_ / "a";
  const fs::path out_b = dir_ / "b";
  ASSERT_EQ(run_cli("montecarlo --config " + mc_cfg.string() + " --out " + out_a.string() +
                    " --no-timestamp"),
            0);
  ASSERT_EQ(run_cli("montecarlo --config " + mc_cfg.string() + " --out " + out_b.string() +
                    " --no-timestamp"),
            0);
  EXPECT_EQ(slurp(out_a / "mc_summary.csv"), slurp(out_b / "mc_summary.csv"));
  EXPECT_EQ(slurp(out_a / "mc_result.json"), slurp(out_b / "mc_result.json"));

  std::istringstream csv(slurp(out_a / "mc_summary.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "clock,h_minus2,a95_m,b95_m,formal_a95_m,formal_b95_m");
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2);

  const json result = json::parse(slurp(out_a / "mc_result.json"));
  ASSERT_EQ(result.at("studies").size(), 2u);
  // TCXO axes should dwarf OCXO axes by ~100x in this small run too.
  const double a_ocxo =
      result.at("studies")[0].at("empirical_ellipse95").at("semi_major_m").get<double>();
  const double a_tcxo =
      result.at("studies")[1].at("empirical_ellipse95").at("semi_major_m").get<double>();
  EXPECT_GT(a_tcxo / a_ocxo, 50.0);
}

TEST_F(CliTest, SurveyControlOnlyGivesGridAndEmptyHotspots) {
  SyntheticSurveyConfig synth;
  synth.duration_s = 4.0 * 3600.0;
  synth.control_regions = {{-90.0, 90.0, -180.0, 180.0}};  // everything is control
  write_observables_csv(dir_ / "obs.csv", synthesize_observables(synth));

  json cfg;
  cfg["schema_version"] = 1;
  cfg["observables"] = {(dir_ / "obs.csv").string()};
  cfg["min_bin_count"] = 5;
  const fs::path survey_cfg = write_json("survey.json", cfg);
  const fs::path out = dir_ / "out";
  ASSERT_EQ(run_cli("survey --config " + survey_cfg.string() + " --out " + out.string() +
                    " --no-timestamp"),
            0);
  EXPECT_TRUE(fs::exists(out / "control_grid.json"));
  const json hotspots = json::parse(slurp(out / "hotspots.geojson"));
  EXPECT_TRUE(hotspots.at("features").empty());
}

TEST_F(CliTest, SurveyGridReuseGivesIdenticalDetections) {
  SyntheticSurveyConfig synth;
  synth.duration_s = 8.0 * 3600.0;
  write_observables_csv(dir_ / "obs.csv", synthesize_observables(synth));

  json cfg;
  cfg["schema_version"] = 1;
  cfg["observables"] = {(dir_ / "obs.csv").string()};
  cfg["min_bin_count"] = 3;
  cfg["emit_decisions"] = true;
  const fs::path survey_cfg = write_json("survey.json", cfg);
  const fs::path out_a = dir_ / "a";
  ASSERT_EQ(run_cli("survey --config " + survey_cfg.string() + " --out " + out_a.string() +
                    " --no-timestamp"),
            0);

  cfg["grid_in"] = (out_a / "control_grid.json").string();
  const fs::path reuse_cfg = write_json("survey_reuse.json", cfg);
  const fs::path out_b = dir_ / "b";
  ASSERT_EQ(run_cli("survey --config " + reuse_cfg.string() + " --out " + out_b.string() +
                    " --no-timestamp"),
            0);
  EXPECT_EQ(slurp(out_a / "decisions.csv"), slurp(out_b / "decisions.csv"));
  EXPECT_EQ(slurp(out_a / "hotspots.csv"), slurp(out_b / "hotspots.csv"));
  EXPECT_FALSE(slurp(out_a / "decisions.csv").empty());
}

TEST_F(CliTest, LinkbudgetGoldenChain) {
  json cfg;
  cfg["schema_version"] = 1;
  const fs::path lb_cfg = write_json("lb.json", cfg);
  const fs::path out = dir_ / "out";
  ASSERT_EQ(run_cli("linkbudget --config " + lb_cfg.string() + " --out " + out.string() +
                    " --no-timestamp"),
            0);
  const json report = json::parse(slurp(out / "linkbudget.json"));
  EXPECT_NEAR(report.at("received_interference_dbw").get<double>(), -137.0, 0.5);
  EXPECT_NEAR(report.at("transmit_power_dbw").get<double>(), 19.0, 0.5);
  EXPECT_NEAR(report.at("path_loss_db").get<double>(), 159.0, 0.1);
  EXPECT_NEAR(report.at("matched_jamming_ratio_db").get<double>(), 31.8, 0.1);
  EXPECT_GT(report.at("spoofing_efficiency_factor").get<double>(), 1500.0);
  EXPECT_NEAR(report.at("matched_vs_flat_advantage_db").get<double>(), 4.3, 0.1);
  EXPECT_NEAR(report.at("excision_attenuation_db").get<double>(), 13.0, 0.5);
}

TEST_F(CliTest, EmptyParameterFileExitsTwo) {
  const fs::path empty = dir_ / "empty.json";
  std::ofstream(empty).close();
  EXPECT_EQ(run_cli("linkbudget --config " + empty.string()), 2);
}

TEST_F(CliTest, SetOverrideReachesConfig) {
  json cfg;
  cfg["schema_version"] = 1;
  const fs::path lb_cfg = write_json("lb.json", cfg);
  const fs::path out = dir_ / "out";
  ASSERT_EQ(run_cli("linkbudget --config " + lb_cfg.string() + " --out " + out.string() +
                    " --set eta_dbhz=20 --no-timestamp"),
            0);
  const json report = json::parse(slurp(out / "linkbudget.json"));
  EXPECT_NEAR(report.at("matched_jamming_ratio_db").get<double>(), 41.86, 0.01);
}
