#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leomon/clocks.hpp"
#include "leomon/constants.hpp"
#include "leomon/errors.hpp"
#include "leomon/geodesy.hpp"

namespace leomon {

// Circular LEO orbit description. RAAN and the argument of latitude are
// referenced to the ECEF axes at t = 0 (the synthetic "inertial" frame is
// aligned with ECEF at epoch zero and the Earth rotates beneath it).
struct OrbitSpec {
  double altitude_m = 408000.0;
  double inclination_deg = 51.6;
  double raan_deg = 0.0;
  double arg_lat_deg = 0.0;  // argument of latitude at epoch
  double epoch_s = 0.0;
};

struct ReceiverState {
  double t_s = 0.0;
  EcefVector position_m = EcefVector::Zero();
  EcefVector velocity_mps = EcefVector::Zero();
  double clock_rate_ss = 0.0;  // receiver clock frequency error
};

// Time-ordered receiver states at a uniform interval.
struct Pass {
  std::vector<ReceiverState> states;
  std::string label;

  double interval_s() const {
    return states.size() > 1 ? states[1].t_s - states[0].t_s : 0.0;
  }
};

inline void validate(const Pass& pass) {
  if (pass.states.empty()) throw InvalidArgument("pass has no states");
  const double dt = pass.interval_s();
  for (std::size_t k = 0; k + 1 < pass.states.size(); ++k) {
    const double step = pass.states[k + 1].t_s - pass.states[k].t_s;
    if (!(step > 0.0)) throw InvalidArgument("pass timestamps not strictly increasing");
    if (std::abs(step - dt) > 1e-9) throw NonUniformSampling("pass sampling not uniform");
  }
  for (const auto& s : pass.states) {
    if (!s.position_m.allFinite() || !s.velocity_mps.allFinite() ||
        !std::isfinite(s.clock_rate_ss))
      throw InvalidArgument("pass state not finite");
  }
}

inline void validate(const OrbitSpec& spec) {
  if (!(spec.altitude_m > 200e3 && spec.altitude_m < 2000e3))
    throw InvalidArgument("orbit altitude outside (200 km, 2000 km)");
  if (!(spec.inclination_deg >= 0.0 && spec.inclination_deg <= 180.0))
    throw InvalidArgument("inclination outside [0, 180] deg");
}

namespace detail {

// Inertial-frame circular orbit state for argument of latitude u.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> circular_orbit_state(
    double radius_m, double raan_rad, double inclination_rad, double u_rad) {
  const double cO = std::cos(raan_rad), sO = std::sin(raan_rad);
  const double ci = std::cos(inclination_rad), si = std::sin(inclination_rad);
  const double cu = std::cos(u_rad), su = std::sin(u_rad);
  const double n = std::sqrt(constants::earth_mu_m3ps2 / (radius_m * radius_m * radius_m));
  const Eigen::Vector3d pos{radius_m * (cO * cu - sO * su * ci),
                            radius_m * (sO * cu + cO * su * ci), radius_m * su * si};
  const Eigen::Vector3d vel{radius_m * n * (-cO * su - sO * cu * ci),
                            radius_m * n * (-sO * su + cO * cu * ci),
                            radius_m * n * cu * si};
  return {pos, vel};
}

inline ReceiverState ecef_state_at(const OrbitSpec& spec, double t_s) {
  using namespace constants;
  const double radius = wgs84_a_m + spec.altitude_m;
  const double n = std::sqrt(earth_mu_m3ps2 / (radius * radius * radius));
  const double u = deg2rad(spec.arg_lat_deg) + n * (t_s - spec.epoch_s);
  const auto [pos_i, vel_i] =
      circular_orbit_state(radius, deg2rad(spec.raan_deg), deg2rad(spec.inclination_deg), u);

  const double theta = earth_rotation_radps * t_s;
  const double c = std::cos(theta), s = std::sin(theta);
  // Rz(-theta) applied to the inertial vectors.
  const auto rotate = [c, s](const Eigen::Vector3d& v) {
    return Eigen::Vector3d{c * v.x() + s * v.y(), -s * v.x() + c * v.y(), v.z()};
  };
  ReceiverState state;
  state.t_s = t_s;
  state.position_m = rotate(pos_i);
  const Eigen::Vector3d omega{0.0, 0.0, earth_rotation_radps};
  state.velocity_mps = rotate(vel_i) - omega.cross(state.position_m);
  return state;
}

}  // namespace detail

// Two-body circular propagation with Earth rotation. Good to well under the
// geolocation error budget over the 60-second arcs this library works with.
inline Pass propagate_circular(const OrbitSpec& spec, double t0_s, double duration_s,
                               double rate_hz, std::string label = {},
                               double clock_rate_ss = 0.0) {
  validate(spec);
  if (!(duration_s >= 0.0)) throw InvalidArgument("duration must be non-negative");
  if (!(rate_hz > 0.0)) throw InvalidArgument("rate must be positive");

  const auto count = static_cast<std::size_t>(std::llround(duration_s * rate_hz)) + 1;
  Pass pass;
  pass.label = std::move(label);
  pass.states.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ReceiverState s = detail::ecef_state_at(spec, t0_s + static_cast<double>(k) / rate_hz);
    s.clock_rate_ss = clock_rate_ss;
    pass.states.push_back(s);
  }
  return pass;
}

// Overlays a random-walk realization of `model` on the pass clock rates.
inline void apply_clock_noise(Pass& pass, const ClockModel& model, std::uint64_t seed) {
  if (pass.states.size() < 2) return;
  const FrequencySeries walk =
      synthesize_random_walk(model, pass.interval_s(), pass.states.size(), seed);
  for (std::size_t k = 0; k < pass.states.size(); ++k)
    pass.states[k].clock_rate_ss += walk.values[k];
}

// Finds a capture window of `duration_s` during which the receiver stays at
// or above `min_elevation_deg` as seen from `target`. The orbit phasing in
// `spec` controls which side of the target the ground track passes and in
// which direction; of all qualifying windows within the search horizon the
// one with the highest peak elevation is selected. The window is centered
// `window_offset_s` after the peak-elevation time (clamped into the window),
// so captures need not straddle closest approach.
inline Pass pass_over_target(const OrbitSpec& spec, const GeodeticPosition& target,
                             double duration_s, double rate_hz, double min_elevation_deg,
                             std::string label = {}, double window_offset_s = 0.0,
                             double search_horizon_s = 3.0 * 86400.0) {
  validate(spec);
  if (!(duration_s > 0.0)) throw InvalidArgument("duration must be positive");
  validate(target);

  const double scan_dt = 1.0;
  double best_peak = -1e9;
  double best_start = 0.0;
  bool found = false;

  double run_start = 0.0;
  double run_peak = -1e9;
  double run_peak_t = 0.0;
  bool in_run = false;
  const auto close_run = [&](double run_end) {
    if (!in_run) return;
    in_run = false;
    if (run_end - run_start < duration_s) return;
    double start = run_peak_t + window_offset_s - 0.5 * duration_s;
    start = std::min(std::max(start, run_start), run_end - duration_s);
    if (run_peak > best_peak) {
      best_peak = run_peak;
      best_start = start;
      found = true;
    }
  };

  const long steps = static_cast<long>(search_horizon_s / scan_dt);
  for (long i = 0; i <= steps; ++i) {
    const double t = spec.epoch_s + static_cast<double>(i) * scan_dt;
    const double elev = elevation_deg(target, detail::ecef_state_at(spec, t).position_m);
    if (elev >= min_elevation_deg) {
      if (!in_run) {
        in_run = true;
        run_start = t;
        run_peak = elev;
        run_peak_t = t;
      } else if (elev > run_peak) {
        run_peak = elev;
        run_peak_t = t;
      }
    } else {
      close_run(t - scan_dt);
    }
  }
  close_run(spec.epoch_s + static_cast<double>(steps) * scan_dt);

  if (!found)
    throw NoVisibilityWindow("no window of requested duration above minimum elevation");

  Pass pass = propagate_circular(spec, best_start, duration_s, rate_hz, std::move(label));
  for (const auto& s : pass.states) {
    if (elevation_deg(target, s.position_m) < min_elevation_deg - 1e-6)
      throw NoVisibilityWindow("sampled window dips below minimum elevation");
  }
  return pass;
}

// Azimuth (degrees east of north) of the receiver's horizontal motion at
// mid-pass, in the local frame of `ref`. Characterizes the ground-track
// direction relative to a candidate transmitter.
inline double pass_ground_azimuth_deg(const Pass& pass, const GeodeticPosition& ref) {
  if (pass.states.empty()) throw InvalidArgument("pass has no states");
  const ReceiverState& mid = pass.states[pass.states.size() / 2];
  const Eigen::Matrix3d basis = enu_basis(ref);
  const double ve = basis.col(0).dot(mid.velocity_mps);
  const double vn = basis.col(1).dot(mid.velocity_mps);
  double az = constants::rad2deg(std::atan2(ve, vn));
  if (az < 0.0) az += 360.0;
  return az;
}

// Sum of inter-sample displacements, meters.
inline double path_length_m(const Pass& pass) {
  double len = 0.0;
  for (std::size_t k = 0; k + 1 < pass.states.size(); ++k)
    len += (pass.states[k + 1].position_m - pass.states[k].position_m).norm();
  return len;
}

}  // namespace leomon
