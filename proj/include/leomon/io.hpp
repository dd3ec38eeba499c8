#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "leomon/errors.hpp"
#include "leomon/geolocate.hpp"
#include "leomon/orbits.hpp"
#include "leomon/survey.hpp"

namespace leomon {

using json = nlohmann::json;

namespace detail {

// Shortest exact decimal form; CSV artifacts must be byte-stable and
// round-trip to the same double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(begin));
      break;
    }
    fields.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
  return fields;
}

inline double parse_double(std::string_view field, long line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw MalformedRecord("bad numeric field '" + std::string(field) + "'", line_no);
  return value;
}

inline int parse_int(std::string_view field, long line_no) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw MalformedRecord("bad integer field '" + std::string(field) + "'", line_no);
  return value;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

inline void expect_header(std::ifstream& in, const std::string& expected,
                          const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw MalformedRecord("empty file " + path.string(), 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw MalformedRecord("unexpected header '" + line + "' in " + path.string(), 1);
}

}  // namespace detail

inline constexpr const char* trajectory_csv_header =
    "t,x_m,y_m,z_m,vx_ms,vy_ms,vz_ms,clk_rate_ss";

inline void write_trajectory_csv(const std::filesystem::path& path, const Pass& pass) {
  auto out = detail::open_for_write(path);
  out << trajectory_csv_header << "\n";
  for (const auto& s : pass.states) {
    out << detail::format_double(s.t_s) << ',' << detail::format_double(s.position_m.x())
        << ',' << detail::format_double(s.position_m.y()) << ','
        << detail::format_double(s.position_m.z()) << ','
        << detail::format_double(s.velocity_mps.x()) << ','
        << detail::format_double(s.velocity_mps.y()) << ','
        << detail::format_double(s.velocity_mps.z()) << ','
        << detail::format_double(s.clock_rate_ss) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline Pass load_trajectory(const std::filesystem::path& path, std::string label = {}) {
  auto in = detail::open_for_read(path);
  detail::expect_header(in, trajectory_csv_header, path);

  Pass pass;
  pass.label = std::move(label);
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 8) throw MalformedRecord("expected 8 fields", line_no);
    ReceiverState s;
    s.t_s = detail::parse_double(fields[0], line_no);
    s.position_m = {detail::parse_double(fields[1], line_no),
                    detail::parse_double(fields[2], line_no),
                    detail::parse_double(fields[3], line_no)};
    s.velocity_mps = {detail::parse_double(fields[4], line_no),
                      detail::parse_double(fields[5], line_no),
                      detail::parse_double(fields[6], line_no)};
    s.clock_rate_ss = detail::parse_double(fields[7], line_no);
    pass.states.push_back(s);
  }
  if (pass.states.empty()) throw MalformedRecord("no data rows", line_no);

  const double dt = pass.interval_s();
  for (std::size_t k = 0; k + 1 < pass.states.size(); ++k) {
    const double step = pass.states[k + 1].t_s - pass.states[k].t_s;
    if (!(step > 0.0) || std::abs(step - dt) > 1e-9)
      throw NonUniformSampling("timestamp gap at row " + std::to_string(k + 2) + " of " +
                               path.string());
  }
  validate(pass);
  return pass;
}

inline constexpr const char* capture_csv_header = "t,f_d_hz,sigma_hz";

inline void write_capture_csv(const std::filesystem::path& path,
                              const std::vector<DopplerMeasurement>& measurements) {
  auto out = detail::open_for_write(path);
  out << capture_csv_header << "\n";
  for (const auto& m : measurements) {
    out << detail::format_double(m.t_s) << ',' << detail::format_double(m.doppler_hz) << ','
        << detail::format_double(m.sigma_hz) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<DopplerMeasurement> load_capture_csv(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  detail::expect_header(in, capture_csv_header, path);
  std::vector<DopplerMeasurement> measurements;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 3) throw MalformedRecord("expected 3 fields", line_no);
    measurements.push_back({detail::parse_double(fields[0], line_no),
                            detail::parse_double(fields[1], line_no),
                            detail::parse_double(fields[2], line_no)});
  }
  return measurements;
}

// Sidecar JSON tying a capture CSV to its trajectory file and pass label.
inline void write_capture_sidecar(const std::filesystem::path& path,
                                  const std::string& capture_csv,
                                  const std::string& trajectory_csv, const std::string& label,
                                  double frequency_hz) {
  json doc;
  doc["schema_version"] = 1;
  doc["capture"] = capture_csv;
  doc["trajectory"] = trajectory_csv;
  doc["label"] = label;
  doc["frequency_hz"] = frequency_hz;
  auto out = detail::open_for_write(path);
  out << doc.dump(2) << "\n";
}

struct CaptureBundle {
  PassCapture capture;
  double frequency_hz = constants::l1_frequency_hz;
};

inline CaptureBundle load_capture_bundle(const std::filesystem::path& sidecar_path) {
  auto in = detail::open_for_read(sidecar_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MalformedRecord(std::string("bad capture sidecar: ") + e.what(), 1);
  }
  if (doc.value("schema_version", 0) != 1)
    throw InvalidArgument("unsupported sidecar schema in " + sidecar_path.string());

  const auto dir = sidecar_path.parent_path();
  CaptureBundle bundle;
  bundle.frequency_hz = doc.value("frequency_hz", constants::l1_frequency_hz);
  bundle.capture.pass =
      load_trajectory(dir / doc.at("trajectory").get<std::string>(),
                      doc.at("label").get<std::string>());
  bundle.capture.measurements = load_capture_csv(dir / doc.at("capture").get<std::string>());
  validate(bundle.capture);
  return bundle;
}

inline constexpr const char* observables_csv_header =
    "t,sv_id,band,cinr_dbhz,r_sr_m,z_r_deg,z_s_deg,lat_deg,lon_deg,region";

inline void write_observables_csv(const std::filesystem::path& path,
                                  const std::vector<ObservableRecord>& records) {
  auto out = detail::open_for_write(path);
  out << observables_csv_header << "\n";
  for (const auto& r : records) {
    out << detail::format_double(r.t_s) << ',' << r.sv_id << ',' << to_string(r.band) << ','
        << detail::format_double(r.cinr_dbhz) << ',' << detail::format_double(r.r_sr_m) << ','
        << detail::format_double(r.z_r_deg) << ',' << detail::format_double(r.z_s_deg) << ','
        << detail::format_double(r.ground_lat_deg) << ','
        << detail::format_double(r.ground_lon_deg) << ',' << to_string(r.region) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<ObservableRecord> load_observables_csv(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  detail::expect_header(in, observables_csv_header, path);
  std::vector<ObservableRecord> records;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 10) throw MalformedRecord("expected 10 fields", line_no);
    ObservableRecord r;
    r.t_s = detail::parse_double(fields[0], line_no);
    r.sv_id = detail::parse_int(fields[1], line_no);
    try {
      r.band = band_from_string(std::string(fields[2]));
      r.region = region_from_string(std::string(fields[9]));
    } catch (const InvalidArgument& e) {
      throw MalformedRecord(e.what(), line_no);
    }
    r.cinr_dbhz = detail::parse_double(fields[3], line_no);
    r.r_sr_m = detail::parse_double(fields[4], line_no);
    r.z_r_deg = detail::parse_double(fields[5], line_no);
    r.z_s_deg = detail::parse_double(fields[6], line_no);
    r.ground_lat_deg = detail::parse_double(fields[7], line_no);
    r.ground_lon_deg = detail::parse_double(fields[8], line_no);
    records.push_back(r);
  }
  return records;
}

inline json grid_to_json(const ControlGrid& grid) {
  json doc;
  doc["schema_version"] = 1;
  doc["zr_bin_width_deg"] = grid.bin_width_deg();
  doc["zr_max_deg"] = grid.z_r_max_deg();
  doc["min_count"] = grid.min_count();
  json bins = json::array();
  for (const auto& [key, stats] : grid.bins()) {
    json bin;
    bin["sv_id"] = key.sv_id;
    bin["band"] = to_string(key.band);
    bin["z_r_bin"] = key.z_r_bin;
    bin["count"] = stats.count;
    bin["mean"] = stats.mean;
    bin["variance"] = stats.variance();
    bin["m2"] = stats.m2;  // exact accumulator, preserved for lossless reload
    bins.push_back(bin);
  }
  doc["bins"] = bins;
  return doc;
}

inline ControlGrid grid_from_json(const json& doc) {
  if (doc.value("schema_version", 0) != 1)
    throw InvalidArgument("unsupported control grid schema");
  ControlGrid grid(doc.at("zr_bin_width_deg").get<double>(),
                   doc.at("zr_max_deg").get<double>(), doc.at("min_count").get<long long>());
  for (const auto& bin : doc.at("bins")) {
    BinKey key{bin.at("sv_id").get<int>(),
               band_from_string(bin.at("band").get<std::string>()),
               bin.at("z_r_bin").get<int>()};
    BinStats stats;
    stats.count = bin.at("count").get<long long>();
    stats.mean = bin.at("mean").get<double>();
    stats.m2 = bin.contains("m2")
                   ? bin.at("m2").get<double>()
                   : bin.at("variance").get<double>() * static_cast<double>(stats.count - 1);
    grid.insert(key, stats);
  }
  return grid;
}

inline void save_control_grid(const std::filesystem::path& path, const ControlGrid& grid) {
  auto out = detail::open_for_write(path);
  out << grid_to_json(grid).dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline ControlGrid load_control_grid(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MalformedRecord(std::string("bad control grid json: ") + e.what(), 1);
  }
  return grid_from_json(doc);
}

inline json hotspots_to_geojson(const std::vector<DetectionResult>& cells) {
  json features = json::array();
  for (const auto& c : cells) {
    const double lat0 = c.lat_index * c.cell_deg;
    const double lat1 = lat0 + c.cell_deg;
    const double lon0 = c.lon_index * c.cell_deg;
    const double lon1 = lon0 + c.cell_deg;
    json feature;
    feature["type"] = "Feature";
    feature["geometry"]["type"] = "Polygon";
    feature["geometry"]["coordinates"] = json::array({json::array({
        json::array({lon0, lat0}), json::array({lon1, lat0}), json::array({lon1, lat1}),
        json::array({lon0, lat1}), json::array({lon0, lat0})})});
    feature["properties"]["band"] = to_string(c.band);
    feature["properties"]["tests"] = c.tests;
    feature["properties"]["events"] = c.events;
    feature["properties"]["ratio"] = c.ratio;
    features.push_back(feature);
  }
  json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = features;
  return doc;
}

inline void write_hotspots_geojson(const std::filesystem::path& path,
                                   const std::vector<DetectionResult>& cells) {
  auto out = detail::open_for_write(path);
  out << hotspots_to_geojson(cells).dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_hotspots_csv(const std::filesystem::path& path,
                               const std::vector<DetectionResult>& cells) {
  auto out = detail::open_for_write(path);
  out << "band,lat_deg,lon_deg,cell_deg,tests,events,ratio\n";
  for (const auto& c : cells) {
    out << to_string(c.band) << ',' << detail::format_double(c.lat_index * c.cell_deg) << ','
        << detail::format_double(c.lon_index * c.cell_deg) << ','
        << detail::format_double(c.cell_deg) << ',' << c.tests << ',' << c.events << ','
        << detail::format_double(c.ratio) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline json ellipse_to_json(const ErrorEllipse& e) {
  json doc;
  doc["semi_major_m"] = e.semi_major_m;
  doc["semi_minor_m"] = e.semi_minor_m;
  doc["orientation_deg_east_of_north"] = e.orientation_deg;
  doc["confidence"] = e.confidence;
  return doc;
}

inline json solution_to_json(const GeolocationSolution& sol) {
  json doc;
  doc["schema_version"] = 1;
  doc["converged"] = sol.converged;
  doc["iterations"] = sol.iterations;
  doc["position"]["lat_deg"] = sol.transmitter.position.latitude_deg;
  doc["position"]["lon_deg"] = sol.transmitter.position.longitude_deg;
  doc["position"]["alt_m"] = sol.transmitter.position.altitude_m;
  doc["frequency_hz"] = sol.transmitter.frequency_hz;
  doc["pass_labels"] = sol.pass_labels;
  json clocks;
  for (const auto& [label, rate] : sol.transmitter.clock_rate_per_pass) clocks[label] = rate;
  doc["clock_rate_per_pass_ss"] = clocks;
  json cov = json::array();
  for (Eigen::Index i = 0; i < sol.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < sol.covariance.cols(); ++j) row.push_back(sol.covariance(i, j));
    cov.push_back(row);
  }
  doc["covariance_enu_clock"] = cov;
  doc["ellipse95"] = ellipse_to_json(sol.ellipse95);
  doc["ellipse99"] = ellipse_to_json(sol.ellipse99);
  json residuals;
  for (const auto& [label, stats] : postfit_residual_stats(sol)) {
    residuals[label]["mean_hz"] = stats.mean_hz;
    residuals[label]["std_hz"] = stats.std_hz;
    residuals[label]["count"] = sol.postfit_residuals_hz.at(label).size();
  }
  doc["postfit_residuals"] = residuals;
  return doc;
}

// Confidence ellipse as a GeoJSON polygon (64-point ring) centered at the
// estimated position.
inline json ellipse_to_geojson_feature(const GeodeticPosition& center, const ErrorEllipse& e) {
  const EcefVector center_ecef = geodetic_to_ecef(center);
  const Eigen::Matrix3d basis = enu_basis(center);
  const double theta = constants::deg2rad(e.orientation_deg);
  const Eigen::Vector2d major_dir{std::sin(theta), std::cos(theta)};
  const Eigen::Vector2d minor_dir{std::cos(theta), -std::sin(theta)};

  json ring = json::array();
  const int points = 64;
  for (int k = 0; k <= points; ++k) {
    const double t = 2.0 * constants::pi * static_cast<double>(k % points) / points;
    const Eigen::Vector2d en =
        e.semi_major_m * std::cos(t) * major_dir + e.semi_minor_m * std::sin(t) * minor_dir;
    const EcefVector p = center_ecef + en.x() * basis.col(0) + en.y() * basis.col(1);
    const GeodeticPosition geo = ecef_to_geodetic(p);
    ring.push_back(json::array({geo.longitude_deg, geo.latitude_deg}));
  }
  json feature;
  feature["type"] = "Feature";
  feature["geometry"]["type"] = "Polygon";
  feature["geometry"]["coordinates"] = json::array({ring});
  feature["properties"]["confidence"] = e.confidence;
  feature["properties"]["semi_major_m"] = e.semi_major_m;
  feature["properties"]["semi_minor_m"] = e.semi_minor_m;
  return feature;
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace leomon
