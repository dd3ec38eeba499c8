#pragma once

namespace leomon::constants {

// Physical
inline constexpr double speed_of_light_mps = 299792458.0;

// WGS-84 ellipsoid
inline constexpr double wgs84_a_m = 6378137.0;
inline constexpr double wgs84_f = 1.0 / 298.257223563;
inline constexpr double wgs84_b_m = wgs84_a_m * (1.0 - wgs84_f);
inline constexpr double wgs84_e2 = wgs84_f * (2.0 - wgs84_f);

// Earth gravity and rotation
inline constexpr double earth_mu_m3ps2 = 3.986004418e14;
inline constexpr double earth_rotation_radps = 7.2921150e-5;

// GPS signal parameters
inline constexpr double l1_frequency_hz = 1575.42e6;
inline constexpr double l2_frequency_hz = 1227.6e6;
inline constexpr double ca_chip_interval_s = 1.0 / 1.023e6;

inline constexpr double pi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / pi; }

}  // namespace leomon::constants
