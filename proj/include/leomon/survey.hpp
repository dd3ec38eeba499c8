#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "leomon/constants.hpp"
#include "leomon/errors.hpp"
#include "leomon/geodesy.hpp"

namespace leomon {

enum class Band { L1, L2 };

inline double band_frequency_hz(Band band) {
  return band == Band::L1 ? constants::l1_frequency_hz : constants::l2_frequency_hz;
}

inline const char* to_string(Band band) { return band == Band::L1 ? "L1" : "L2"; }

inline Band band_from_string(const std::string& s) {
  if (s == "L1") return Band::L1;
  if (s == "L2") return Band::L2;
  throw InvalidArgument("unknown band: " + s);
}

enum class Region { ocean_control, survey };

inline const char* to_string(Region region) {
  return region == Region::ocean_control ? "ocean_control" : "survey";
}

inline Region region_from_string(const std::string& s) {
  if (s == "ocean_control") return Region::ocean_control;
  if (s == "survey") return Region::survey;
  throw InvalidArgument("unknown region: " + s);
}

// Quantization model of the RF front-end (a) and the receiver's local
// carrier replica (b), plus the number of samples per accumulation.
struct QuantizationSpec {
  double a0 = 1.0, a1 = 3.0;
  double b0 = 1.0, b1 = 3.0;
  double p_a0 = 0.5, p_a1 = 0.5;
  double p_b0 = 0.5, p_b1 = 0.5;
  double samples_per_accumulation = 1.0;
};

inline QuantizationSpec default_survey_quantization() {
  QuantizationSpec q;
  q.p_a0 = 0.68269;
  q.p_a1 = 0.31731;
  q.p_b0 = 0.38418;
  q.p_b1 = 0.61582;
  q.samples_per_accumulation = 5714.286;
  return q;
}

// Analytic 2-bit-quantizer noise floor 2*sigma_IQ^2, in front-end units^2.
inline double noise_floor(const QuantizationSpec& q) {
  if (!(q.a0 > 0.0 && q.a1 > 0.0 && q.b0 > 0.0 && q.b1 > 0.0))
    throw InvalidArgument("quantization magnitudes must be positive");
  if (std::abs(q.p_a0 + q.p_a1 - 1.0) > 1e-9 || std::abs(q.p_b0 + q.p_b1 - 1.0) > 1e-9)
    throw InvalidArgument("quantization probabilities must sum to one");
  if (!(q.samples_per_accumulation > 0.0))
    throw InvalidArgument("samples per accumulation must be positive");
  return 2.0 * q.samples_per_accumulation * (q.a0 * q.a0 * q.p_a0 + q.a1 * q.a1 * q.p_a1) *
         (q.b0 * q.b0 * q.p_b0 + q.b1 * q.b1 * q.p_b1);
}

// dB-Hz value reported when the smoothed power does not clear the noise
// floor; below anything trackable but finite for logging.
inline constexpr double cinr_floor_sentinel_dbhz = -10.0;

// One-pole smoother state for the accumulation power E[I^2 + Q^2].
struct CinrFilterState {
  double smoothed_power = 0.0;
  double gain = 0.0;  // K = T_a / tau
  double accumulation_interval_s = 0.01;
  double filter_time_constant_s = 0.5;
};

inline CinrFilterState make_cinr_filter(double accumulation_interval_s,
                                        double filter_time_constant_s,
                                        double initial_power) {
  CinrFilterState state;
  state.accumulation_interval_s = accumulation_interval_s;
  state.filter_time_constant_s = filter_time_constant_s;
  if (!(accumulation_interval_s > 0.0) || !(filter_time_constant_s > 0.0))
    throw InvalidArgument("intervals must be positive");
  state.gain = accumulation_interval_s / filter_time_constant_s;
  if (!(state.gain > 0.0 && state.gain <= 1.0))
    throw InvalidArgument("filter gain K must lie in (0, 1]");
  state.smoothed_power = initial_power;
  return state;
}

struct CinrUpdate {
  CinrFilterState state;
  double cinr_dbhz = cinr_floor_sentinel_dbhz;
};

// Euler moving-average update followed by the CINR readout
// (smoothed/floor - 1)/T_a, rendered in dB-Hz.
inline CinrUpdate cinr_update(const CinrFilterState& state, double i_k, double q_k,
                              double noise_floor_units) {
  if (!(noise_floor_units > 0.0)) throw InvalidArgument("noise floor must be positive");
  CinrUpdate out;
  out.state = state;
  const double power = i_k * i_k + q_k * q_k;
  out.state.smoothed_power = state.smoothed_power + state.gain * (power - state.smoothed_power);
  const double linear =
      (out.state.smoothed_power / noise_floor_units - 1.0) / state.accumulation_interval_s;
  out.cinr_dbhz = out.state.smoothed_power > noise_floor_units ? 10.0 * std::log10(linear)
                                                               : cinr_floor_sentinel_dbhz;
  return out;
}

// One receiver-reported CINR observable with its viewing geometry and the
// sub-receiver ground point.
struct ObservableRecord {
  double t_s = 0.0;
  int sv_id = 0;
  Band band = Band::L1;
  double cinr_dbhz = 0.0;
  double r_sr_m = 0.0;
  double z_r_deg = 0.0;
  double z_s_deg = 0.0;
  double ground_lat_deg = 0.0;
  double ground_lon_deg = 0.0;
  Region region = Region::survey;
};

// Removes the predictable range dependence of carrier power by adding the
// free-space path loss back in.
inline double range_compensate(const ObservableRecord& rec) {
  return rec.cinr_dbhz + free_space_path_loss_db(rec.r_sr_m, band_frequency_hz(rec.band));
}

struct BinKey {
  int sv_id = 0;
  Band band = Band::L1;
  int z_r_bin = 0;
  auto operator<=>(const BinKey&) const = default;
};

struct BinStats {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations (Welford)

  double variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  }

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  // Associative combination of two accumulators (Chan et al. update), so
  // shards can be merged in any grouping.
  void merge(const BinStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double delta = other.mean - mean;
    const long long total = count + other.count;
    mean += delta * static_cast<double>(other.count) / static_cast<double>(total);
    m2 += other.m2 + delta * delta * static_cast<double>(count) *
                         static_cast<double>(other.count) / static_cast<double>(total);
    count = total;
  }
};

// Interference-free (ocean) statistics of range-compensated CINR, keyed by
// (SV, band, receiver off-boresight bin).
class ControlGrid {
 public:
  explicit ControlGrid(double z_r_bin_width_deg = 1.0, double z_r_max_deg = 15.0,
                       long long min_count = 100)
      : bin_width_deg_(z_r_bin_width_deg), z_r_max_deg_(z_r_max_deg), min_count_(min_count) {
    if (!(bin_width_deg_ > 0.0) || !(z_r_max_deg_ > 0.0))
      throw InvalidArgument("grid geometry must be positive");
  }

  std::optional<int> bin_index(double z_r_deg) const {
    if (z_r_deg < 0.0 || z_r_deg > z_r_max_deg_) return std::nullopt;
    const int last = static_cast<int>(std::ceil(z_r_max_deg_ / bin_width_deg_)) - 1;
    return std::min(static_cast<int>(z_r_deg / bin_width_deg_), last);
  }

  // Accumulates an ocean-control record; records outside the off-boresight
  // window or not tagged ocean_control are skipped.
  bool add(const ObservableRecord& rec) {
    if (rec.region != Region::ocean_control) return false;
    const auto bin = bin_index(rec.z_r_deg);
    if (!bin) return false;
    bins_[{rec.sv_id, rec.band, *bin}].add(range_compensate(rec));
    return true;
  }

  void insert(const BinKey& key, const BinStats& stats) { bins_[key].merge(stats); }

  void merge(const ControlGrid& other) {
    for (const auto& [key, stats] : other.bins_) bins_[key].merge(stats);
  }

  bool usable(const BinStats& stats) const {
    return stats.count >= min_count_ && stats.count >= 2 && stats.variance() > 0.0;
  }

  // Stats for the record's bin, or nullptr when the bin is missing/unusable.
  const BinStats* usable_bin_for(const ObservableRecord& rec) const {
    const auto bin = bin_index(rec.z_r_deg);
    if (!bin) return nullptr;
    const auto it = bins_.find({rec.sv_id, rec.band, *bin});
    if (it == bins_.end() || !usable(it->second)) return nullptr;
    return &it->second;
  }

  const std::map<BinKey, BinStats>& bins() const { return bins_; }
  double bin_width_deg() const { return bin_width_deg_; }
  double z_r_max_deg() const { return z_r_max_deg_; }
  long long min_count() const { return min_count_; }

 private:
  std::map<BinKey, BinStats> bins_;
  double bin_width_deg_;
  double z_r_max_deg_;
  long long min_count_;
};

inline ControlGrid build_control_grid(std::span<const ObservableRecord> records,
                                      double z_r_bin_width_deg = 1.0,
                                      double z_r_max_deg = 15.0, long long min_count = 100) {
  ControlGrid grid(z_r_bin_width_deg, z_r_max_deg, min_count);
  for (const auto& rec : records) grid.add(rec);
  return grid;
}

struct Decision {
  bool interference = false;  // H1
  double statistic = 0.0;     // mean standardized score l
  int record_count = 0;
};

// Per-window hypothesis test on the mean standardized range-compensated
// CINR. The threshold -3/sqrt(n) keeps the per-test false-alarm probability
// at Phi(-3) ~= 1.35e-3 regardless of how many records the window holds.
inline Decision detect(std::span<const ObservableRecord> window, const ControlGrid& grid,
                       Band band) {
  Decision d;
  double acc = 0.0;
  for (const auto& rec : window) {
    if (rec.band != band) continue;
    const BinStats* stats = grid.usable_bin_for(rec);
    if (!stats) throw UnusableBin("record falls in an unusable control bin");
    acc += (range_compensate(rec) - stats->mean) / std::sqrt(stats->variance());
    ++d.record_count;
  }
  if (d.record_count == 0) throw InvalidArgument("no records in requested band");
  d.statistic = acc / static_cast<double>(d.record_count);
  d.interference = d.statistic < -3.0 / std::sqrt(static_cast<double>(d.record_count));
  return d;
}

// Event/test counts on a ground cell, per band.
struct DetectionResult {
  int lat_index = 0;  // cell spans [lat_index, lat_index+1) * cell_deg
  int lon_index = 0;
  Band band = Band::L1;
  long long tests = 0;
  long long events = 0;
  double ratio = 0.0;
  double cell_deg = 1.0;
};

class HotspotAccumulator {
 public:
  explicit HotspotAccumulator(double cell_deg = 1.0) : cell_deg_(cell_deg) {
    if (!(cell_deg > 0.0)) throw InvalidArgument("cell size must be positive");
  }

  void add(double lat_deg, double lon_deg, Band band, bool event) {
    const int lat = static_cast<int>(std::floor(lat_deg / cell_deg_));
    const int lon = static_cast<int>(std::floor(lon_deg / cell_deg_));
    auto& cell = cells_[{lat, lon, band}];
    ++cell.first;
    if (event) ++cell.second;
  }

  std::vector<DetectionResult> results() const {
    std::vector<DetectionResult> out;
    out.reserve(cells_.size());
    for (const auto& [key, counts] : cells_) {
      DetectionResult r;
      r.lat_index = std::get<0>(key);
      r.lon_index = std::get<1>(key);
      r.band = std::get<2>(key);
      r.tests = counts.first;
      r.events = counts.second;
      r.ratio = counts.first > 0
                    ? static_cast<double>(counts.second) / static_cast<double>(counts.first)
                    : 0.0;
      r.cell_deg = cell_deg_;
      out.push_back(r);
    }
    return out;
  }

  double cell_deg() const { return cell_deg_; }

 private:
  std::map<std::tuple<int, int, Band>, std::pair<long long, long long>> cells_;
  double cell_deg_;
};

inline std::vector<DetectionResult> hotspot_map(
    std::span<const std::tuple<double, double, Band, bool>> decisions, double cell_deg = 1.0) {
  HotspotAccumulator acc(cell_deg);
  for (const auto& [lat, lon, band, event] : decisions) acc.add(lat, lon, band, event);
  return acc.results();
}

struct SurveyOptions {
  double window_s = 1.0;
  double cell_deg = 1.0;
};

struct WindowDecision {
  double t_s = 0.0;
  Band band = Band::L1;
  double ground_lat_deg = 0.0;
  double ground_lon_deg = 0.0;
  Decision decision;
};

struct SurveyRunResult {
  std::vector<WindowDecision> decisions;
  std::vector<DetectionResult> cells;
  long long windows_tested = 0;
  long long records_skipped = 0;  // survey records in unusable bins
};

// Full detection pipeline: group survey-region records into time windows per
// band, run the hypothesis test on the usable records of each window, and
// accumulate event ratios on the ground grid. Records without a usable
// control bin are dropped (and counted) rather than failing the run.
inline SurveyRunResult run_survey(std::span<const ObservableRecord> records,
                                  const ControlGrid& grid, const SurveyOptions& options = {}) {
  if (!(options.window_s > 0.0)) throw InvalidArgument("window must be positive");
  std::map<std::pair<long long, Band>, std::vector<ObservableRecord>> windows;
  SurveyRunResult result;
  for (const auto& rec : records) {
    if (rec.region != Region::survey) continue;
    if (!grid.usable_bin_for(rec)) {
      if (grid.bin_index(rec.z_r_deg)) ++result.records_skipped;
      continue;
    }
    const auto idx = static_cast<long long>(std::floor(rec.t_s / options.window_s));
    windows[{idx, rec.band}].push_back(rec);
  }

  HotspotAccumulator hotspots(options.cell_deg);
  for (const auto& [key, recs] : windows) {
    WindowDecision wd;
    wd.t_s = static_cast<double>(key.first) * options.window_s;
    wd.band = key.second;
    wd.ground_lat_deg = recs.front().ground_lat_deg;
    wd.ground_lon_deg = recs.front().ground_lon_deg;
    wd.decision = detect(recs, grid, key.second);
    hotspots.add(wd.ground_lat_deg, wd.ground_lon_deg, wd.band, wd.decision.interference);
    result.decisions.push_back(wd);
    ++result.windows_tested;
  }
  result.cells = hotspots.results();
  return result;
}

}  // namespace leomon
