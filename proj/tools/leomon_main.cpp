// leomon: Doppler geolocation and GNSS interference survey toolkit.
//
// Subcommands: simulate, estimate, montecarlo, survey, linkbudget.
// Exit codes: 0 success, 2 config/input validation, 3 I/O failure,
// 4 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "leomon/io.hpp"
#include "leomon/linkbudget.hpp"
#include "leomon/montecarlo.hpp"
#include "leomon/scenarios.hpp"
#include "leomon/survey.hpp"

namespace fs = std::filesystem;
using namespace leomon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string format = "json";
  bool no_timestamp = false;
};

void add_common_options(CLI::App* cmd, GlobalOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON configuration file")->required();
  cmd->add_option("--out", opts.out_dir, "output directory (created if missing)");
  cmd->add_option("--seed", opts.seed, "master seed override");
  cmd->add_option("--set", opts.overrides,
                  "config override as dotted.path=json-value (repeatable)");
  cmd->add_option("--format", opts.format, "extra artifact format: json|csv|geojson");
  cmd->add_flag("--no-timestamp", opts.no_timestamp,
                "omit the timestamp from the manifest (byte-stable reruns)");
}

void apply_override(json& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InvalidArgument("--set expects dotted.path=value, got '" + spec + "'");
  std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  json* node = &cfg;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) throw InvalidArgument("empty key in --set path '" + path + "'");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &((*node)[key]);
    begin = dot + 1;
  }
}

json load_config(const GlobalOptions& opts) {
  if (!fs::exists(opts.config_path))
    throw InvalidArgument("config file not found: " + opts.config_path);
  std::ifstream in(opts.config_path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw InvalidArgument("config parse error in " + opts.config_path + ": " + e.what());
  }
  for (const auto& spec : opts.overrides) apply_override(cfg, spec);
  if (cfg.value("schema_version", 0) != 1)
    throw InvalidArgument("config schema_version must be 1");
  return cfg;
}

std::uint64_t master_seed(const json& cfg, const GlobalOptions& opts) {
  if (opts.seed) return *opts.seed;
  return cfg.value("seed", std::uint64_t{1});
}

std::string iso_now() {
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const GlobalOptions& opts, const std::string& command, const json& cfg,
                    std::uint64_t seed, const std::vector<std::string>& outputs) {
  json doc;
  doc["schema_version"] = 1;
  doc["command"] = command;
  doc["seed"] = seed;
  doc["config_hash"] = hex64(fnv1a64(cfg.dump() + "#" + std::to_string(seed)));
  doc["outputs"] = outputs;
  if (!opts.no_timestamp) doc["timestamp_utc"] = iso_now();
  auto out = detail::open_for_write(fs::path(opts.out_dir) / "manifest.json");
  out << doc.dump(2) << "\n";
}

GeodeticPosition position_from_json(const json& node) {
  return {node.at("lat_deg").get<double>(), node.at("lon_deg").get<double>(),
          node.value("alt_m", 0.0)};
}

ClockModel clock_from_json(const json& node) {
  if (node.contains("preset")) {
    const std::string name = node.at("preset").get<std::string>();
    if (name == "tcxo") return clock_presets::tcxo();
    if (name == "low_quality_ocxo") return clock_presets::low_quality_ocxo();
    if (name == "ocxo") return clock_presets::ocxo();
    if (name == "ideal") return {0.0, "ideal"};
    throw InvalidArgument("unknown clock preset: " + name);
  }
  ClockModel model;
  model.h_minus2 = node.at("h_minus2").get<double>();
  model.label = node.value("label", "custom");
  return model;
}

OrbitSpec orbit_from_json(const json& node) {
  OrbitSpec spec;
  spec.altitude_m = node.value("altitude_m", 408000.0);
  spec.inclination_deg = node.value("inclination_deg", 51.6);
  spec.raan_deg = node.value("raan_deg", 0.0);
  spec.arg_lat_deg = node.value("arg_lat_deg", 0.0);
  spec.epoch_s = node.value("epoch_s", 0.0);
  return spec;
}

ScenarioPreset preset_from_json(const json& node, const GeodeticPosition& transmitter) {
  ScenarioPreset preset;
  preset.transmitter = transmitter;
  preset.orbit = orbit_from_json(node.value("orbit", json::object()));
  preset.duration_s = node.value("duration_s", 60.0);
  preset.rate_hz = node.value("rate_hz", 20.0);
  preset.min_elevation_deg = node.value("min_elevation_deg", 5.0);
  preset.window_offset_s = node.value("window_offset_s", 0.0);
  preset.search_horizon_s = node.value("search_horizon_s", 5800.0);
  preset.w_sigma_hz = node.value("w_sigma_hz", 0.0);
  preset.label = node.value("label", "pass");
  return preset;
}

// Pass definitions either spelled out in config or named as a preset pack.
std::vector<ScenarioPreset> scenario_from_config(const json& cfg) {
  std::vector<ScenarioPreset> presets;
  const GeodeticPosition transmitter =
      cfg.contains("transmitter") ? position_from_json(cfg.at("transmitter"))
                                  : GeodeticPosition{35.4, 35.95, 48.0};
  if (cfg.contains("preset")) {
    const std::string name = cfg.at("preset").get<std::string>();
    if (name == "single_pass_study") {
      presets.push_back(scenario_presets::single_pass_study());
    } else if (name == "three_pass_study") {
      for (const auto& p : scenario_presets::three_pass_study()) presets.push_back(p);
    } else {
      throw InvalidArgument("unknown scenario preset: " + name);
    }
    for (auto& p : presets) p.transmitter = transmitter;
  } else {
    if (!cfg.contains("passes") || !cfg.at("passes").is_array() || cfg.at("passes").empty())
      throw InvalidArgument("config needs a 'passes' array or a 'preset'");
    for (const auto& node : cfg.at("passes"))
      presets.push_back(preset_from_json(node, transmitter));
  }
  if (cfg.contains("w_sigma_hz"))
    for (auto& p : presets) p.w_sigma_hz = cfg.at("w_sigma_hz").get<double>();
  return presets;
}

int run_simulate(const GlobalOptions& opts) {
  const json cfg = load_config(opts);
  const std::uint64_t seed = master_seed(cfg, opts);
  fs::create_directories(opts.out_dir);

  const std::vector<ScenarioPreset> presets = scenario_from_config(cfg);
  const ClockModel clock = clock_from_json(cfg.value("clock", json{{"preset", "ideal"}}));
  const double frequency_hz = cfg.value("frequency_hz", constants::l1_frequency_hz);
  const double tx_clock_rate = cfg.value("tx_clock_rate_ss", 0.0);

  TransmitterState tx;
  tx.position = presets.front().transmitter;
  tx.frequency_hz = frequency_hz;

  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < presets.size(); ++i) {
    const ScenarioPreset& preset = presets[i];
    tx.clock_rate_per_pass[preset.label] = tx_clock_rate;
    const Pass pass = build_pass(preset);
    const PassCapture capture =
        synthesize_capture(tx, pass, clock, preset.w_sigma_hz, Rng::derive_seed(seed, i));

    const std::string traj_name = "trajectory_" + preset.label + ".csv";
    const std::string cap_name = "capture_" + preset.label + ".csv";
    const std::string sidecar_name = "capture_" + preset.label + ".json";
    write_trajectory_csv(fs::path(opts.out_dir) / traj_name, pass);
    write_capture_csv(fs::path(opts.out_dir) / cap_name, capture.measurements);
    write_capture_sidecar(fs::path(opts.out_dir) / sidecar_name, cap_name, traj_name,
                          preset.label, frequency_hz);
    outputs.insert(outputs.end(), {traj_name, cap_name, sidecar_name});
  }
  write_manifest(opts, "simulate", cfg, seed, outputs);
  return kExitOk;
}

int run_estimate(const GlobalOptions& opts) {
  const json cfg = load_config(opts);
  fs::create_directories(opts.out_dir);
  const fs::path config_dir = fs::path(opts.config_path).parent_path();

  if (!cfg.contains("captures") || cfg.at("captures").empty())
    throw InvalidArgument("config needs a non-empty 'captures' array of sidecar paths");

  std::vector<PassCapture> captures;
  double frequency_hz = 0.0;
  for (const auto& entry : cfg.at("captures")) {
    fs::path path = entry.get<std::string>();
    if (path.is_relative() && !fs::exists(path) && fs::exists(config_dir / path))
      path = config_dir / path;
    if (!fs::exists(path))
      throw InvalidArgument("capture sidecar not found: " + path.string());
    CaptureBundle bundle = load_capture_bundle(path);
    if (frequency_hz == 0.0) frequency_hz = bundle.frequency_hz;
    if (bundle.frequency_hz != frequency_hz)
      throw InvalidArgument("captures disagree on carrier frequency");
    captures.push_back(std::move(bundle.capture));
  }

  AltitudePrior prior;
  if (cfg.contains("altitude_prior")) {
    prior.mean_m = cfg.at("altitude_prior").value("mean_m", 0.0);
    prior.sigma_m = cfg.at("altitude_prior").value("sigma_m", 5.0);
  }
  std::optional<GeodeticPosition> init;
  if (cfg.contains("init")) init = position_from_json(cfg.at("init"));

  EstimateOptions est_opts;
  est_opts.frequency_hz = frequency_hz;
  const GeolocationSolution sol = estimate(captures, prior, init, est_opts);

  std::vector<std::string> outputs = {"solution.json"};
  {
    auto out = detail::open_for_write(fs::path(opts.out_dir) / "solution.json");
    out << solution_to_json(sol).dump(2) << "\n";
  }
  if (opts.format == "geojson" || cfg.value("emit_ellipse_geojson", false)) {
    json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = json::array(
        {ellipse_to_geojson_feature(sol.transmitter.position, sol.ellipse95),
         ellipse_to_geojson_feature(sol.transmitter.position, sol.ellipse99)});
    auto out = detail::open_for_write(fs::path(opts.out_dir) / "ellipses.geojson");
    out << doc.dump(2) << "\n";
    outputs.push_back("ellipses.geojson");
  }
  write_manifest(opts, "estimate", cfg, master_seed(cfg, opts), outputs);

  if (!sol.converged) {
    std::cerr << "estimate: did not converge in " << sol.iterations << " iterations\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int run_montecarlo(const GlobalOptions& opts) {
  const json cfg = load_config(opts);
  const std::uint64_t seed = master_seed(cfg, opts);
  fs::create_directories(opts.out_dir);

  std::vector<ScenarioPreset> presets = scenario_from_config(cfg);
  if (presets.size() != 1)
    throw InvalidArgument("montecarlo expects exactly one pass definition");
  const ScenarioPreset& preset = presets.front();

  McConfig mc;
  mc.scenario = {preset.transmitter, build_pass(preset),
                 cfg.value("frequency_hz", constants::l1_frequency_hz)};
  mc.trials = cfg.value("trials", 1000);
  mc.subgroup_size = cfg.value("subgroup_size", 250);
  mc.subgroup_draws = cfg.value("subgroup_draws", 100000);
  mc.w_sigma_hz = cfg.value("w_sigma_hz", 0.0);
  mc.seed = seed;
  if (cfg.contains("altitude_prior")) {
    mc.altitude_prior.mean_m = cfg.at("altitude_prior").value("mean_m", 48.0);
    mc.altitude_prior.sigma_m = cfg.at("altitude_prior").value("sigma_m", 5.0);
  }

  std::vector<json> clock_nodes;
  if (cfg.contains("clocks"))
    for (const auto& node : cfg.at("clocks")) clock_nodes.push_back(node);
  else
    clock_nodes = {json{{"preset", "tcxo"}}, json{{"preset", "low_quality_ocxo"}},
                   json{{"preset", "ocxo"}}};

  json result_doc;
  result_doc["schema_version"] = 1;
  json rows = json::array();
  std::string summary_csv = "clock,h_minus2,a95_m,b95_m,formal_a95_m,formal_b95_m\n";
  std::string summary_txt;
  {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-18s %-10s %10s %10s\n", "clock", "h_minus2", "a (m)",
                  "b (m)");
    summary_txt = buf;
  }

  for (const auto& node : clock_nodes) {
    mc.clock_model = clock_from_json(node);
    const McResult result = run_clock_study(mc);
    const SubgroupStats subgroups = subgroup_analysis(result, mc);

    json row;
    row["clock"] = mc.clock_model.label;
    row["h_minus2"] = mc.clock_model.h_minus2;
    row["empirical_ellipse95"] = ellipse_to_json(result.empirical_ellipse95);
    row["formal_ellipse95"] = ellipse_to_json(result.formal_ellipse95);
    row["subgroup"] = {{"q99_semi_major_dev", subgroups.q99_semi_major_dev},
                       {"q99_semi_minor_dev", subgroups.q99_semi_minor_dev},
                       {"max_deviation", subgroups.max_deviation},
                       {"median_deviation", subgroups.deviation_quantiles.at(0.5)}};
    if (cfg.value("dump_errors", false)) {
      json errors = json::array();
      for (const auto& e : result.errors_en_m) errors.push_back(json::array({e(0), e(1)}));
      row["errors_en_m"] = errors;
    }
    rows.push_back(row);

    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.3e,%s,%s,%s,%s\n", mc.clock_model.label.c_str(),
                  mc.clock_model.h_minus2,
                  detail::format_double(result.empirical_ellipse95.semi_major_m).c_str(),
                  detail::format_double(result.empirical_ellipse95.semi_minor_m).c_str(),
                  detail::format_double(result.formal_ellipse95.semi_major_m).c_str(),
                  detail::format_double(result.formal_ellipse95.semi_minor_m).c_str());
    summary_csv += buf;
    std::snprintf(buf, sizeof(buf), "%-18s %-10.1e %10.1f %10.1f\n",
                  mc.clock_model.label.c_str(), mc.clock_model.h_minus2,
                  result.empirical_ellipse95.semi_major_m,
                  result.empirical_ellipse95.semi_minor_m);
    summary_txt += buf;
  }
  result_doc["studies"] = rows;

  {
    auto out = detail::open_for_write(fs::path(opts.out_dir) / "mc_summary.csv");
    out << summary_csv;
  }
  {
    auto out = detail::open_for_write(fs::path(opts.out_dir) / "mc_summary.txt");
    out << summary_txt;
  }
  {
    auto out = detail::open_for_write(fs::path(opts.out_dir) / "mc_result.json");
    out << result_doc.dump(2) << "\n";
  }
  std::cout << summary_txt;
  write_manifest(opts, "montecarlo", cfg, seed,
                 {"mc_summary.csv", "mc_summary.txt", "mc_result.json"});
  return kExitOk;
}

int run_survey(const GlobalOptions& opts) {
  const json cfg = load_config(opts);
  fs::create_directories(opts.out_dir);
  const fs::path config_dir = fs::path(opts.config_path).parent_path();

  if (!cfg.contains("observables") || cfg.at("observables").empty())
    throw InvalidArgument("config needs a non-empty 'observables' array of CSV paths");

  std::vector<ObservableRecord> records;
  for (const auto& entry : cfg.at("observables")) {
    fs::path path = entry.get<std::string>();
    if (path.is_relative() && !fs::exists(path) && fs::exists(config_dir / path))
      path = config_dir / path;
    if (!fs::exists(path)) throw InvalidArgument("observables file not found: " + path.string());
    auto batch = load_observables_csv(path);
    records.insert(records.end(), batch.begin(), batch.end());
  }

  ControlGrid grid(cfg.value("zr_bin_width_deg", 1.0), cfg.value("zr_max_deg", 15.0),
                   cfg.value("min_bin_count", 100LL));
  bool built = false;
  if (cfg.contains("grid_in") && !cfg.at("grid_in").is_null()) {
    fs::path path = cfg.at("grid_in").get<std::string>();
    if (path.is_relative() && !fs::exists(path) && fs::exists(config_dir / path))
      path = config_dir / path;
    if (!fs::exists(path)) throw InvalidArgument("grid_in not found: " + path.string());
    grid = load_control_grid(path);
  } else {
    for (const auto& rec : records) grid.add(rec);
    built = true;
  }

  SurveyOptions survey_opts;
  survey_opts.window_s = cfg.value("window_s", 1.0);
  survey_opts.cell_deg = cfg.value("cell_deg", 1.0);
  const SurveyRunResult result = run_survey(records, grid, survey_opts);

  std::vector<std::string> outputs;
  if (built) {
    const std::string grid_name = cfg.value("grid_out", std::string("control_grid.json"));
    save_control_grid(fs::path(opts.out_dir) / grid_name, grid);
    outputs.push_back(grid_name);
  }
  write_hotspots_geojson(fs::path(opts.out_dir) / "hotspots.geojson", result.cells);
  write_hotspots_csv(fs::path(opts.out_dir) / "hotspots.csv", result.cells);
  outputs.insert(outputs.end(), {"hotspots.geojson", "hotspots.csv"});
  if (cfg.value("emit_decisions", false)) {
    auto out = detail::open_for_write(fs::path(opts.out_dir) / "decisions.csv");
    out << "t,band,lat_deg,lon_deg,records,statistic,interference\n";
    for (const auto& d : result.decisions) {
      out << detail::format_double(d.t_s) << ',' << to_string(d.band) << ','
          << detail::format_double(d.ground_lat_deg) << ','
          << detail::format_double(d.ground_lon_deg) << ',' << d.decision.record_count << ','
          << detail::format_double(d.decision.statistic) << ','
          << (d.decision.interference ? 1 : 0) << "\n";
    }
    outputs.push_back("decisions.csv");
  }
  std::cout << "survey: " << result.windows_tested << " windows tested, "
            << result.records_skipped << " records skipped (unusable bins)\n";
  write_manifest(opts, "survey", cfg, master_seed(cfg, opts), outputs);
  return kExitOk;
}

int run_linkbudget(const GlobalOptions& opts) {
  const json cfg = load_config(opts);
  fs::create_directories(opts.out_dir);

  const double drop_db = cfg.value("cinr_drop_db", 6.0);
  const double n0 = cfg.value("n0_dbw_hz", -204.0);
  const double chip = cfg.value("chip_interval_s", constants::ca_chip_interval_s);
  const double g_r = cfg.value("receiver_gain_db", 3.0);
  const double range_m = cfg.value("range_m", 1.34e6);
  const double frequency_hz = cfg.value("frequency_hz", constants::l1_frequency_hz);
  const double eta = cfg.value("eta_dbhz", 30.0);
  const double span = cfg.value("flat_span_multiple", 4.0);
  const int lobes = cfg.value("excised_halfwidth_lobes", 2);

  const double path_loss = free_space_path_loss_db(range_m, frequency_hz);
  const LinkBudget budget = solve_budget(drop_db, n0, chip, g_r, path_loss);

  json doc;
  doc["schema_version"] = 1;
  doc["inputs"] = {{"cinr_drop_db", drop_db},   {"n0_dbw_hz", n0},
                   {"chip_interval_s", chip},   {"receiver_gain_db", g_r},
                   {"range_m", range_m},        {"frequency_hz", frequency_hz},
                   {"eta_dbhz", eta},           {"flat_span_multiple", span},
                   {"excised_halfwidth_lobes", lobes}};
  doc["path_loss_db"] = budget.path_loss_db;
  doc["interference_density_dbw_hz"] = budget.interference_density_dbw_hz;
  doc["received_interference_dbw"] = budget.received_interference_dbw;
  doc["transmit_power_dbw"] = budget.transmit_power_dbw;
  doc["transmit_power_w"] = budget.transmit_power_w;
  doc["matched_jamming_ratio_db"] = matched_jamming_ratio_db(eta, chip);
  doc["spoofing_efficiency_factor"] = spoofing_efficiency_factor(eta, chip);
  doc["matched_vs_flat_advantage_db"] = matched_vs_flat_advantage_db(span);
  doc["excision_attenuation_db"] = excision_attenuation_db(lobes);

  auto out = detail::open_for_write(fs::path(opts.out_dir) / "linkbudget.json");
  out << doc.dump(2) << "\n";
  std::cout << "P_I " << budget.received_interference_dbw << " dBW, P_S "
            << budget.transmit_power_dbw << " dBW (" << budget.transmit_power_w << " W)\n";
  write_manifest(opts, "linkbudget", cfg, master_seed(cfg, opts), {"linkbudget.json"});
  return kExitOk;
}

int guarded(int (*command)(const GlobalOptions&), const GlobalOptions& opts) {
  try {
    return command(opts);
  } catch (const SingularGeometry& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return kExitIo;
  } catch (const MalformedRecord& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonUniformSampling& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NoVisibilityWindow& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doppler geolocation and GNSS interference survey toolkit"};
  app.require_subcommand(1);

  GlobalOptions opts;
  int exit_code = kExitOk;

  auto* simulate = app.add_subcommand("simulate", "synthesize trajectories and captures");
  add_common_options(simulate, opts);
  simulate->callback([&] { exit_code = guarded(run_simulate, opts); });

  auto* estimate_cmd = app.add_subcommand("estimate", "batch geolocation from captures");
  add_common_options(estimate_cmd, opts);
  estimate_cmd->callback([&] { exit_code = guarded(run_estimate, opts); });

  auto* montecarlo = app.add_subcommand("montecarlo", "clock-quality error study");
  add_common_options(montecarlo, opts);
  montecarlo->callback([&] { exit_code = guarded(run_montecarlo, opts); });

  auto* survey = app.add_subcommand("survey", "CINR interference detection pipeline");
  add_common_options(survey, opts);
  survey->callback([&] { exit_code = guarded(run_survey, opts); });

  auto* linkbudget = app.add_subcommand("linkbudget", "interference power bookkeeping");
  add_common_options(linkbudget, opts);
  linkbudget->callback([&] { exit_code = guarded(run_linkbudget, opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  return exit_code;
}
