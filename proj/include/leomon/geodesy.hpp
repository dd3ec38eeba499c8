#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "leomon/constants.hpp"
#include "leomon/errors.hpp"

namespace leomon {

using EcefVector = Eigen::Vector3d;

// Geodetic position on the WGS-84 ellipsoid. Degrees at the interface;
// everything internal works in radians.
struct GeodeticPosition {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double altitude_m = 0.0;
};

struct ViewingGeometry {
  double z_r_deg = 0.0;   // receiver antenna off-boresight angle
  double z_s_deg = 0.0;   // satellite antenna off-boresight angle
  double range_m = 0.0;   // satellite-to-receiver range
};

inline void validate(const GeodeticPosition& p) {
  if (!(p.latitude_deg >= -90.0 && p.latitude_deg <= 90.0))
    throw InvalidArgument("latitude out of [-90, 90]");
  if (!(p.longitude_deg >= -180.0 && p.longitude_deg < 180.0))
    throw InvalidArgument("longitude out of [-180, 180)");
  if (!std::isfinite(p.altitude_m)) throw InvalidArgument("altitude not finite");
}

inline EcefVector geodetic_to_ecef(const GeodeticPosition& p) {
  validate(p);
  using namespace constants;
  const double lat = deg2rad(p.latitude_deg);
  const double lon = deg2rad(p.longitude_deg);
  const double slat = std::sin(lat);
  const double clat = std::cos(lat);
  const double n = wgs84_a_m / std::sqrt(1.0 - wgs84_e2 * slat * slat);
  return {(n + p.altitude_m) * clat * std::cos(lon),
          (n + p.altitude_m) * clat * std::sin(lon),
          (n * (1.0 - wgs84_e2) + p.altitude_m) * slat};
}

// Iterative inverse of geodetic_to_ecef. Converges to well below a
// millimeter in a handful of iterations for anything near the surface or in
// orbit; inputs near the geocenter are rejected as ill-conditioned.
inline GeodeticPosition ecef_to_geodetic(const EcefVector& v) {
  using namespace constants;
  if (!v.allFinite()) throw InvalidArgument("ECEF components not finite");
  if (v.norm() <= 6.2e6) throw InvalidArgument("ECEF point too close to geocenter");

  const double p = std::hypot(v.x(), v.y());
  const double lon = (p > 0.0) ? std::atan2(v.y(), v.x()) : 0.0;
  if (p < 1e-6) {
    // On the polar axis the longitude is arbitrary and the latitude exact.
    return {v.z() >= 0.0 ? 90.0 : -90.0, 0.0, std::abs(v.z()) - wgs84_b_m};
  }

  double lat = std::atan2(v.z(), p * (1.0 - wgs84_e2));
  double alt = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double slat = std::sin(lat);
    const double n = wgs84_a_m / std::sqrt(1.0 - wgs84_e2 * slat * slat);
    alt = p / std::cos(lat) - n;
    const double next = std::atan2(v.z(), p * (1.0 - wgs84_e2 * n / (n + alt)));
    if (std::abs(next - lat) < 1e-14) {
      lat = next;
      break;
    }
    lat = next;
  }
  const double slat = std::sin(lat);
  const double n = wgs84_a_m / std::sqrt(1.0 - wgs84_e2 * slat * slat);
  alt = p / std::cos(lat) - n;
  double lon_deg = rad2deg(lon);
  if (lon_deg >= 180.0) lon_deg -= 360.0;
  return {rad2deg(lat), lon_deg, alt};
}

// Columns are the local east, north, up unit vectors in ECEF.
inline Eigen::Matrix3d enu_basis(const GeodeticPosition& p) {
  using namespace constants;
  const double lat = deg2rad(p.latitude_deg);
  const double lon = deg2rad(p.longitude_deg);
  Eigen::Matrix3d basis;
  basis.col(0) = Eigen::Vector3d{-std::sin(lon), std::cos(lon), 0.0};
  basis.col(1) = Eigen::Vector3d{-std::sin(lat) * std::cos(lon),
                                 -std::sin(lat) * std::sin(lon), std::cos(lat)};
  basis.col(2) = Eigen::Vector3d{std::cos(lat) * std::cos(lon),
                                 std::cos(lat) * std::sin(lon), std::sin(lat)};
  return basis;
}

// Elevation of `target` above the local horizon at `site`, degrees.
inline double elevation_deg(const GeodeticPosition& site, const EcefVector& target) {
  const EcefVector los = target - geodetic_to_ecef(site);
  const double range = los.norm();
  if (range <= 0.0) throw InvalidArgument("coincident site and target");
  const Eigen::Vector3d up = enu_basis(site).col(2);
  return constants::rad2deg(std::asin(up.dot(los) / range));
}

inline double free_space_path_loss_db(double range_m, double frequency_hz) {
  if (!(range_m > 0.0)) throw InvalidArgument("range must be positive");
  if (!(frequency_hz > 0.0)) throw InvalidArgument("frequency must be positive");
  using namespace constants;
  return 20.0 * std::log10(4.0 * pi * range_m * frequency_hz / speed_of_light_mps);
}

// Off-boresight angles of the receiver/satellite pair. The satellite antenna
// is nadir-pointing; the receiver boresight is supplied explicitly (a unit
// vector, e.g. anti-velocity for an occultation antenna).
inline ViewingGeometry viewing_geometry(const EcefVector& receiver_pos,
                                        const EcefVector& receiver_boresight_unit,
                                        const EcefVector& satellite_pos) {
  if (std::abs(receiver_boresight_unit.norm() - 1.0) > 1e-9)
    throw InvalidArgument("receiver boresight must be a unit vector");
  const EcefVector los = satellite_pos - receiver_pos;
  const double range = los.norm();
  if (!(range > 0.0)) throw InvalidArgument("coincident receiver and satellite");

  const auto angle_deg = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    const double c = a.dot(b) / (a.norm() * b.norm());
    return constants::rad2deg(std::acos(std::clamp(c, -1.0, 1.0)));
  };

  ViewingGeometry g;
  g.range_m = range;
  g.z_r_deg = angle_deg(receiver_boresight_unit, los);
  g.z_s_deg = angle_deg(-satellite_pos, -los);  // nadir boresight vs satellite->receiver
  return g;
}

}  // namespace leomon
