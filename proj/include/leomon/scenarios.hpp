#pragma once

#include <array>
#include <string>

#include "leomon/geodesy.hpp"
#include "leomon/orbits.hpp"

namespace leomon {

// Reconstructed capture geometry for one pass over a ground transmitter.
// The search horizon of one orbital period pins the window to a specific
// revolution, so a preset always produces the same pass.
struct ScenarioPreset {
  GeodeticPosition transmitter{35.4, 35.95, 48.0};
  OrbitSpec orbit;
  double duration_s = 60.0;
  double rate_hz = 20.0;
  double min_elevation_deg = 5.0;
  double window_offset_s = 0.0;
  double search_horizon_s = 5800.0;
  double w_sigma_hz = 0.0;
  std::string label;
};

inline Pass build_pass(const ScenarioPreset& preset) {
  return pass_over_target(preset.orbit, preset.transmitter, preset.duration_s,
                          preset.rate_hz, preset.min_elevation_deg, preset.label,
                          preset.window_offset_s, preset.search_horizon_s);
}

namespace scenario_presets {

// Single low-elevation side pass used for the clock-quality error study:
// 60 s at 20 Hz, receiver displacement 441.7 km, capture window trailing
// closest approach so the arc is one-sided (elevation falls 16.0 -> 10.5
// degrees over the minute).
inline ScenarioPreset single_pass_study() {
  ScenarioPreset p;
  p.orbit = {408000.0, 51.6, 18.0, 0.0, 0.0};
  p.min_elevation_deg = 8.0;
  p.window_offset_s = 120.0;
  p.label = "day144";
  return p;
}

// Three stand-off passes on distinct ground tracks for the combined-batch
// solution; per-pass measurement noise between 2.3 and 2.5 Hz.
inline std::array<ScenarioPreset, 3> three_pass_study() {
  std::array<ScenarioPreset, 3> presets;
  presets[0].orbit = {408000.0, 51.6, 12.0, 0.0, 0.0};
  presets[0].window_offset_s = 130.0;
  presets[0].min_elevation_deg = 5.0;
  presets[0].w_sigma_hz = 2.3;
  presets[0].label = "day074";

  presets[1] = single_pass_study();
  presets[1].w_sigma_hz = 2.4;

  presets[2].orbit = {408000.0, 51.6, 20.0, 0.0, 0.0};
  presets[2].window_offset_s = -150.0;
  presets[2].min_elevation_deg = 5.0;
  presets[2].w_sigma_hz = 2.5;
  presets[2].label = "day151";
  return presets;
}

}  // namespace scenario_presets

}  // namespace leomon
