#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "leomon/rng.hpp"
#include "leomon/survey.hpp"
#include "leomon/survey_synth.hpp"

using namespace leomon;
namespace cst = leomon::constants;

namespace {

ObservableRecord control_record(int sv, Band band, double z_r, double compensated_cinr,
                                double range_m = 23000e3) {
  ObservableRecord rec;
  rec.sv_id = sv;
  rec.band = band;
  rec.z_r_deg = z_r;
  rec.r_sr_m = range_m;
  rec.cinr_dbhz = compensated_cinr - free_space_path_loss_db(range_m, band_frequency_hz(band));
  rec.region = Region::ocean_control;
  return rec;
}

ObservableRecord survey_record(int sv, Band band, double z_r, double compensated_cinr,
                               double range_m = 23000e3) {
  ObservableRecord rec = control_record(sv, band, z_r, compensated_cinr, range_m);
  rec.region = Region::survey;
  return rec;
}

}  // namespace

TEST(NoiseFloor, DefaultReceiverGolden) {
  const QuantizationSpec q = default_survey_quantization();
  const double floor = noise_floor(q);
  // Direct evaluation of 2N(a0^2 pa0 + a1^2 pa1)(b0^2 pb0 + b1^2 pb1).
  const double a_term = 1.0 * 0.68269 + 9.0 * 0.31731;
  const double b_term = 1.0 * 0.38418 + 9.0 * 0.61582;
  EXPECT_NEAR(floor, 2.0 * 5714.286 * a_term * b_term, 1e-6);
  EXPECT_NEAR(floor, 239669.0, 5.0);
}

TEST(NoiseFloor, UnitFrontEnd) {
  QuantizationSpec q = default_survey_quantization();
  q.a0 = q.a1 = 1.0;
  const double b_term = q.b0 * q.b0 * q.p_b0 + q.b1 * q.b1 * q.p_b1;
  EXPECT_NEAR(noise_floor(q), 2.0 * q.samples_per_accumulation * b_term, 1e-9);
}

TEST(NoiseFloor, LinearInAccumulationCount) {
  QuantizationSpec q = default_survey_quantization();
  const double base = noise_floor(q);
  q.samples_per_accumulation *= 2.0;
  EXPECT_NEAR(noise_floor(q), 2.0 * base, 1e-6);
}

TEST(NoiseFloor, SwapSymmetry) {
  QuantizationSpec q = default_survey_quantization();
  QuantizationSpec swapped = q;
  std::swap(swapped.a0, swapped.a1);
  std::swap(swapped.p_a0, swapped.p_a1);
  EXPECT_DOUBLE_EQ(noise_floor(q), noise_floor(swapped));
}

TEST(NoiseFloor, RejectsInvalidProbabilities) {
  QuantizationSpec q = default_survey_quantization();
  q.p_a0 = 0.9;
  EXPECT_THROW(noise_floor(q), InvalidArgument);
}

TEST(CinrFilter, NoiseOnlyReportsSentinel) {
  const double floor = noise_floor(default_survey_quantization());
  CinrFilterState state = make_cinr_filter(0.01, 0.5, floor);
  const CinrUpdate u = cinr_update(state, std::sqrt(floor), 0.0, floor);
  EXPECT_DOUBLE_EQ(u.cinr_dbhz, cinr_floor_sentinel_dbhz);
}

TEST(CinrFilter, SteadySignalClosedForm) {
  const double floor = noise_floor(default_survey_quantization());
  const double amplitude = 800.0;
  CinrFilterState state = make_cinr_filter(0.01, 0.5, floor);
  CinrUpdate u{state, 0.0};
  const double power = amplitude * amplitude + floor;
  for (int k = 0; k < 2000; ++k) u = cinr_update(u.state, std::sqrt(power), 0.0, floor);
  const double expected = 10.0 * std::log10(amplitude * amplitude / (floor * 0.01));
  EXPECT_NEAR(u.cinr_dbhz, expected, 1e-6);
}

TEST(CinrFilter, ExactContraction) {
  const double floor = 239669.0;
  CinrFilterState state = make_cinr_filter(0.01, 0.5, floor);
  EXPECT_NEAR(state.gain, 0.02, 1e-15);
  const double input = 5.0 * floor;
  double gap = std::abs(state.smoothed_power - input);
  CinrUpdate u{state, 0.0};
  for (int k = 0; k < 200; ++k) {
    u = cinr_update(u.state, std::sqrt(input), 0.0, floor);
    const double next_gap = std::abs(u.state.smoothed_power - input);
    EXPECT_NEAR(next_gap, (1.0 - state.gain) * gap, 1e-9 * gap + 1e-12);
    gap = next_gap;
  }
  // 95% settling in about 3*tau/T_a = 150 accumulations.
  CinrUpdate v{make_cinr_filter(0.01, 0.5, floor), 0.0};
  for (int k = 0; k < 150; ++k) v = cinr_update(v.state, std::sqrt(input), 0.0, floor);
  EXPECT_GT(v.state.smoothed_power - floor, 0.94 * (input - floor));
  EXPECT_LT(v.state.smoothed_power - floor, 0.96 * (input - floor));
}

TEST(RangeCompensate, PathLossCancellation) {
  const double compensated = 223.0;
  const ObservableRecord near = survey_record(5, Band::L1, 7.0, compensated, 20000e3);
  const ObservableRecord far = survey_record(5, Band::L1, 7.0, compensated, 40000e3);
  EXPECT_NEAR(near.cinr_dbhz - far.cinr_dbhz, 20.0 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(range_compensate(near), range_compensate(far), 1e-9);
}

TEST(RangeCompensate, PureRangeTerm) {
  ObservableRecord rec = survey_record(3, Band::L1, 2.0, 0.0, 1.34e6);
  EXPECT_NEAR(range_compensate(rec) - rec.cinr_dbhz, 159.0, 0.1);
}

TEST(ControlGrid, SingleRecordBinUnusable) {
  ControlGrid grid(1.0, 15.0, 2);
  ObservableRecord rec = control_record(1, Band::L1, 3.5, 223.0);
  EXPECT_TRUE(grid.add(rec));
  EXPECT_EQ(grid.usable_bin_for(rec), nullptr);
}

TEST(ControlGrid, GaussianStatsRecovered) {
  ControlGrid grid(1.0, 15.0, 100);
  Rng rng(5);
  ObservableRecord probe = control_record(7, Band::L2, 4.2, 0.0);
  for (int i = 0; i < 10000; ++i)
    grid.add(control_record(7, Band::L2, 4.2, 40.0 + 0.5 * rng.gaussian()));
  const BinStats* stats = grid.usable_bin_for(probe);
  ASSERT_NE(stats, nullptr);
  EXPECT_EQ(stats->count, 10000);
  EXPECT_NEAR(stats->mean, 40.0, 0.02);
  EXPECT_NEAR(std::sqrt(stats->variance()), 0.5, 0.02);
}

TEST(ControlGrid, WindowAndRegionRules) {
  ControlGrid grid;
  EXPECT_FALSE(grid.add(control_record(1, Band::L1, 20.0, 223.0)));  // outside window
  EXPECT_FALSE(grid.add(survey_record(1, Band::L1, 5.0, 223.0)));    // not control
  EXPECT_TRUE(grid.add(control_record(1, Band::L1, 15.0, 223.0)));   // boundary included
  EXPECT_EQ(grid.bin_index(15.0).value(), 14);
  EXPECT_FALSE(grid.bin_index(15.01).has_value());
}

TEST(ControlGrid, ShardedMergeMatchesSinglePass) {
  Rng rng(9);
  std::vector<ObservableRecord> records;
  for (int i = 0; i < 5000; ++i)
    records.push_back(
        control_record(1 + i % 3, i % 2 ? Band::L1 : Band::L2,
                       15.0 * rng.uniform(), 223.0 + rng.gaussian()));

  const ControlGrid whole = build_control_grid(records);
  ControlGrid a, b;
  for (std::size_t i = 0; i < records.size(); ++i) (i % 2 ? a : b).add(records[i]);
  a.merge(b);
  ASSERT_EQ(a.bins().size(), whole.bins().size());
  for (const auto& [key, stats] : whole.bins()) {
    const BinStats& merged = a.bins().at(key);
    EXPECT_EQ(merged.count, stats.count);
    EXPECT_NEAR(merged.mean, stats.mean, 1e-10);
    EXPECT_NEAR(merged.variance(), stats.variance(), 1e-10);
  }
}

namespace {

ControlGrid well_populated_grid(double mean, double sigma, int per_bin = 20000) {
  ControlGrid grid;
  Rng rng(77);
  for (int i = 0; i < per_bin; ++i)
    grid.add(control_record(1, Band::L1, 5.5, mean + sigma * rng.gaussian()));
  return grid;
}

}  // namespace

TEST(Detect, RecordsAtBinMeanAreNominal) {
  const ControlGrid grid = well_populated_grid(223.0, 0.5);
  const BinStats* stats =
      grid.usable_bin_for(survey_record(1, Band::L1, 5.5, 0.0));
  ASSERT_NE(stats, nullptr);
  std::vector<ObservableRecord> window = {survey_record(1, Band::L1, 5.5, stats->mean),
                                          survey_record(1, Band::L1, 5.5, stats->mean)};
  const Decision d = detect(window, grid, Band::L1);
  EXPECT_FALSE(d.interference);
  EXPECT_NEAR(d.statistic, 0.0, 1e-9);
  EXPECT_EQ(d.record_count, 2);
}

TEST(Detect, FalseAlarmRateNearPhiMinusThree) {
  // Windows draw from many bins so that per-bin estimation error (to which
  // the 3-sigma tail probability is very sensitive) averages out.
  const int svs = 8;
  const double zr_values[4] = {2.5, 5.5, 9.5, 13.5};
  ControlGrid grid;
  Rng rng(123);
  for (int sv = 1; sv <= svs; ++sv)
    for (double zr : zr_values)
      for (int i = 0; i < 10000; ++i)
        grid.add(control_record(sv, Band::L1, zr, 223.0 + 0.5 * rng.gaussian()));

  const int windows = 200000;
  const int per_window = 4;
  long long alarms = 0;
  std::vector<ObservableRecord> window(per_window);
  for (int w = 0; w < windows; ++w) {
    for (int k = 0; k < per_window; ++k) {
      const int sv = 1 + static_cast<int>(rng.uniform() * svs);
      const double zr = zr_values[static_cast<int>(rng.uniform() * 4.0)];
      window[k] = survey_record(std::min(sv, svs), Band::L1, zr,
                                223.0 + 0.5 * rng.gaussian());
    }
    if (detect(window, grid, Band::L1).interference) ++alarms;
  }
  const double p = static_cast<double>(alarms) / windows;
  const double p0 = 1.3499e-3;
  const double se = std::sqrt(p0 * (1.0 - p0) / windows);
  EXPECT_NEAR(p, p0, 3.0 * se);
}

TEST(Detect, SixDbDepressionCaught) {
  const ControlGrid grid = well_populated_grid(223.0, 0.5);
  Rng rng(321);
  int caught = 0;
  const int windows = 2000;
  std::vector<ObservableRecord> window(2);
  for (int w = 0; w < windows; ++w) {
    for (int k = 0; k < 2; ++k)
      window[k] = survey_record(1, Band::L1, 5.5, 223.0 - 6.0 + 0.5 * rng.gaussian());
    if (detect(window, grid, Band::L1).interference) ++caught;
  }
  EXPECT_EQ(caught, windows);
}

TEST(Detect, UnusableBinThrows) {
  ControlGrid grid;  // empty
  std::vector<ObservableRecord> window = {survey_record(1, Band::L1, 5.5, 223.0)};
  EXPECT_THROW(detect(window, grid, Band::L1), UnusableBin);
}

TEST(Detect, BandsSeparated) {
  const ControlGrid grid = well_populated_grid(223.0, 0.5);
  std::vector<ObservableRecord> window = {survey_record(1, Band::L2, 5.5, 223.0)};
  EXPECT_THROW(detect(window, grid, Band::L1), InvalidArgument);
}

TEST(Hotspot, CountsConserveAndRatio) {
  HotspotAccumulator acc(1.0);
  acc.add(35.2, 36.4, Band::L1, false);
  acc.add(35.7, 36.6, Band::L1, true);
  acc.add(35.2, 36.4, Band::L1, true);
  acc.add(35.2, 36.4, Band::L2, false);
  const auto results = acc.results();
  long long tests = 0, events = 0;
  for (const auto& r : results) {
    tests += r.tests;
    events += r.events;
    EXPECT_LE(r.events, r.tests);
    EXPECT_NEAR(r.ratio, static_cast<double>(r.events) / static_cast<double>(r.tests), 1e-12);
  }
  EXPECT_EQ(tests, 4);
  EXPECT_EQ(events, 2);
  ASSERT_EQ(results.size(), 2u);  // (35,36,L1) and (35,36,L2)
}

TEST(Hotspot, NoDetectionsMeansZeroRatios) {
  std::vector<std::tuple<double, double, Band, bool>> stream = {
      {10.0, 20.0, Band::L1, false}, {11.0, 21.0, Band::L2, false}};
  for (const auto& cell : hotspot_map(stream, 1.0)) EXPECT_EQ(cell.ratio, 0.0);
}

TEST(RunSurvey, GroupsWindowsAndSkipsUnusable) {
  const ControlGrid grid = well_populated_grid(223.0, 0.5);
  std::vector<ObservableRecord> records;
  for (int k = 0; k < 10; ++k) {
    ObservableRecord rec = survey_record(1, Band::L1, 5.5, 223.0);
    rec.t_s = 0.1 * k;  // all within the first 1-second window
    rec.ground_lat_deg = 35.2;
    rec.ground_lon_deg = 36.4;
    records.push_back(rec);
  }
  ObservableRecord orphan = survey_record(9, Band::L1, 5.5, 223.0);  // SV 9 has no bin
  orphan.t_s = 0.5;
  records.push_back(orphan);

  const SurveyRunResult result = run_survey(records, grid);
  EXPECT_EQ(result.windows_tested, 1);
  EXPECT_EQ(result.records_skipped, 1);
  ASSERT_EQ(result.decisions.size(), 1u);
  EXPECT_EQ(result.decisions[0].decision.record_count, 10);
  ASSERT_EQ(result.cells.size(), 1u);
  EXPECT_EQ(result.cells[0].tests, 1);
}

TEST(SyntheticObservables, GeometryWithinWindow) {
  SyntheticSurveyConfig cfg;
  cfg.duration_s = 3600.0;
  const auto records = synthesize_observables(cfg);
  ASSERT_FALSE(records.empty());
  for (const auto& rec : records) {
    EXPECT_LE(rec.z_r_deg, 15.0);
    EXPECT_GE(rec.z_r_deg, 0.0);
    EXPECT_GT(rec.r_sr_m, 19000e3);
    EXPECT_LT(rec.r_sr_m, 33000e3);
    EXPECT_GT(rec.z_s_deg, 12.0);
    EXPECT_LT(rec.z_s_deg, 16.0);
  }
}

TEST(SyntheticObservables, DeterministicPerSeed) {
  SyntheticSurveyConfig cfg;
  cfg.duration_s = 600.0;
  const auto a = synthesize_observables(cfg);
  const auto b = synthesize_observables(cfg);
  cfg.seed = 2;
  const auto c = synthesize_observables(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_DOUBLE_EQ(a[i].cinr_dbhz, b[i].cinr_dbhz);
  ASSERT_EQ(a.size(), c.size());  // same geometry, different noise
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    any_diff = any_diff || a[i].cinr_dbhz != c[i].cinr_dbhz;
  EXPECT_TRUE(any_diff);
}
