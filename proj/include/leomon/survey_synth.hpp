#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "leomon/constants.hpp"
#include "leomon/geodesy.hpp"
#include "leomon/orbits.hpp"
#include "leomon/rng.hpp"
#include "leomon/survey.hpp"

namespace leomon {

// Ground emitter that depresses reported CINR whenever it falls inside the
// receiver antenna's field of view around the anti-velocity boresight. The
// default field of view stays narrow enough that, for a mid-inclination
// prograde orbit, the emitter couples only once the receiver has passed
// eastward over it (anti-velocity azimuth minus the cone half-angle stays
// west of due south).
struct SyntheticEmitter {
  GeodeticPosition position{35.4, 35.95, 48.0};
  double cinr_depression_db = 6.0;
  double antenna_fov_deg = 35.0;
  double max_range_m = 2.5e6;
};

struct LatLonBox {
  double lat_min_deg = 0.0, lat_max_deg = 0.0;
  double lon_min_deg = 0.0, lon_max_deg = 0.0;

  bool contains(double lat_deg, double lon_deg) const {
    return lat_deg >= lat_min_deg && lat_deg <= lat_max_deg && lon_deg >= lon_min_deg &&
           lon_deg <= lon_max_deg;
  }
};

// Deep-ocean boxes used to tag interference-free control data.
inline std::vector<LatLonBox> default_ocean_boxes() {
  return {{-45.0, 40.0, -160.0, -125.0},   // eastern Pacific
          {-40.0, 25.0, -45.0, -20.0},     // central Atlantic
          {-40.0, 0.0, 55.0, 95.0}};       // Indian ocean
}

struct SyntheticSurveyConfig {
  OrbitSpec receiver_orbit{408000.0, 51.6, 0.0, 0.0, 0.0};
  int satellites = 27;
  int planes = 3;
  double gnss_radius_m = 26560e3;
  double gnss_inclination_deg = 55.0;
  double duration_s = 4.0 * 86400.0;
  double rate_hz = 1.0;
  double z_r_window_deg = 15.0;
  double control_sigma_db = 0.5;
  // Range-free compensated CINR level; per-SV offsets exercise the grid keys.
  double base_compensated_cinr_dbhz = 223.0;
  double per_sv_spread_db = 1.5;
  std::vector<LatLonBox> control_regions = default_ocean_boxes();
  std::optional<SyntheticEmitter> emitter;
  std::uint64_t seed = 1;
};

namespace detail {

// GNSS satellite position for slot `sv` of a symmetric constellation.
inline EcefVector gnss_satellite_ecef(const SyntheticSurveyConfig& cfg, int sv, double t_s) {
  using namespace constants;
  const int per_plane = (cfg.satellites + cfg.planes - 1) / cfg.planes;
  const int plane = sv % cfg.planes;
  const int slot = sv / cfg.planes;
  const double raan = deg2rad(360.0 * plane / cfg.planes + 15.0 * slot);
  const double u0 = deg2rad(360.0 * slot / per_plane + 7.0 * plane);
  const double n =
      std::sqrt(earth_mu_m3ps2 / (cfg.gnss_radius_m * cfg.gnss_radius_m * cfg.gnss_radius_m));
  const auto [pos_i, vel_i] = circular_orbit_state(
      cfg.gnss_radius_m, raan, deg2rad(cfg.gnss_inclination_deg), u0 + n * t_s);
  (void)vel_i;
  const double theta = earth_rotation_radps * t_s;
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * pos_i.x() + s * pos_i.y(), -s * pos_i.x() + c * pos_i.y(), pos_i.z()};
}

inline double per_sv_level(const SyntheticSurveyConfig& cfg, int sv) {
  return cfg.base_compensated_cinr_dbhz +
         cfg.per_sv_spread_db * (static_cast<double>(sv % 7) / 6.0 - 0.5);
}

}  // namespace detail

// Streams synthetic receiver-reported observables through `sink`. Geometry
// is a circular LEO receiver with an anti-velocity boresight against a
// symmetric GNSS constellation; only records inside the off-boresight window
// are emitted. Control scatter is Gaussian per record; the optional emitter
// depresses every record while it sits inside the antenna field of view.
template <typename Sink>
inline void synthesize_observables(const SyntheticSurveyConfig& cfg, Sink&& sink) {
  validate(cfg.receiver_orbit);
  Rng rng(cfg.seed);
  const EcefVector emitter_ecef = cfg.emitter
                                      ? geodetic_to_ecef(cfg.emitter->position)
                                      : EcefVector::Zero();
  const auto steps = static_cast<long long>(cfg.duration_s * cfg.rate_hz);
  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / cfg.rate_hz;
    const ReceiverState rx = detail::ecef_state_at(cfg.receiver_orbit, t);
    const EcefVector boresight = -rx.velocity_mps.normalized();
    const GeodeticPosition ground = ecef_to_geodetic(rx.position_m);

    bool jammed = false;
    if (cfg.emitter) {
      const EcefVector los = emitter_ecef - rx.position_m;
      const double range = los.norm();
      const double off_boresight =
          constants::rad2deg(std::acos(std::clamp(boresight.dot(los) / range, -1.0, 1.0)));
      jammed = range <= cfg.emitter->max_range_m &&
               off_boresight <= cfg.emitter->antenna_fov_deg &&
               elevation_deg(cfg.emitter->position, rx.position_m) > 0.0;
    }

    Region region = Region::survey;
    for (const auto& box : cfg.control_regions) {
      if (box.contains(ground.latitude_deg, ground.longitude_deg)) {
        region = Region::ocean_control;
        break;
      }
    }

    for (int sv = 0; sv < cfg.satellites; ++sv) {
      const EcefVector sat = detail::gnss_satellite_ecef(cfg, sv, t);
      const ViewingGeometry vg = viewing_geometry(rx.position_m, boresight, sat);
      if (vg.z_r_deg > cfg.z_r_window_deg) continue;
      for (Band band : {Band::L1, Band::L2}) {
        ObservableRecord rec;
        rec.t_s = t;
        rec.sv_id = sv + 1;
        rec.band = band;
        rec.r_sr_m = vg.range_m;
        rec.z_r_deg = vg.z_r_deg;
        rec.z_s_deg = vg.z_s_deg;
        rec.ground_lat_deg = ground.latitude_deg;
        rec.ground_lon_deg = ground.longitude_deg;
        rec.region = region;
        double compensated = detail::per_sv_level(cfg, sv + 1) +
                             cfg.control_sigma_db * rng.gaussian();
        if (jammed && region == Region::survey) compensated -= cfg.emitter->cinr_depression_db;
        rec.cinr_dbhz =
            compensated - free_space_path_loss_db(vg.range_m, band_frequency_hz(band));
        sink(rec);
      }
    }
  }
}

inline std::vector<ObservableRecord> synthesize_observables(const SyntheticSurveyConfig& cfg) {
  std::vector<ObservableRecord> records;
  synthesize_observables(cfg, [&records](const ObservableRecord& rec) {
    records.push_back(rec);
  });
  return records;
}

}  // namespace leomon
