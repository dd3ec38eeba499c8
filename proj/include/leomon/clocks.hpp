#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "leomon/constants.hpp"
#include "leomon/errors.hpp"
#include "leomon/rng.hpp"

namespace leomon {

// Power-law oscillator noise description. Only the h_-2 (random-walk FM)
// term is modeled: over a short capture interval it dominates the frequency
// stability of the oscillator classes of interest.
struct ClockModel {
  double h_minus2 = 0.0;  // 1/s
  std::string label;
};

namespace clock_presets {
inline ClockModel tcxo() { return {3e-21, "TCXO"}; }
inline ClockModel low_quality_ocxo() { return {3e-23, "Low-quality OCXO"}; }
inline ClockModel ocxo() { return {3e-25, "OCXO"}; }
}  // namespace clock_presets

// Uniformly sampled fractional frequency error sequence (s/s).
struct FrequencySeries {
  double dt_s = 0.0;
  std::vector<double> values;
};

enum class StabilityKind { two_sample_dead_time, allan };

struct StabilityMeasure {
  double sigma_y = 0.0;          // dimensionless deviation
  double tau_s = 0.0;            // averaging interval
  double sample_interval_s = 0.0;  // interval T between measurement starts, T >= tau
  StabilityKind kind = StabilityKind::allan;
};

// Random-walk frequency synthesis: values[0] = 0 and each increment is an
// independent zero-mean Gaussian with variance 2*pi^2*h_-2*dt.
inline FrequencySeries synthesize_random_walk(const ClockModel& model, double dt_s,
                                              std::size_t n, std::uint64_t seed) {
  if (model.h_minus2 < 0.0) throw InvalidArgument("h_minus2 must be non-negative");
  if (!(dt_s > 0.0)) throw InvalidArgument("dt must be positive");
  if (n < 1) throw InvalidArgument("need at least one sample");

  FrequencySeries series;
  series.dt_s = dt_s;
  series.values.resize(n, 0.0);
  if (model.h_minus2 == 0.0 || n == 1) return series;

  Rng rng(seed);
  const double step_sigma =
      std::sqrt(2.0 * constants::pi * constants::pi * model.h_minus2 * dt_s);
  for (std::size_t k = 1; k < n; ++k)
    series.values[k] = series.values[k - 1] + step_sigma * rng.gaussian();
  return series;
}

// Non-overlapping zero-dead-time Allan deviation from frequency data.
inline StabilityMeasure allan_deviation(const FrequencySeries& series, double tau_s) {
  if (!(series.dt_s > 0.0)) throw InvalidArgument("series dt must be positive");
  const double blocks = tau_s / series.dt_s;
  const auto m = static_cast<std::size_t>(std::llround(blocks));
  if (m < 1 || std::abs(blocks - static_cast<double>(m)) > 1e-9)
    throw InvalidArgument("tau must be an integer multiple of dt");
  const std::size_t n_blocks = series.values.size() / m;
  if (n_blocks < 3) throw InsufficientData("need at least three tau-averages");

  std::vector<double> means(n_blocks, 0.0);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) sum += series.values[b * m + k];
    means[b] = sum / static_cast<double>(m);
  }
  double acc = 0.0;
  for (std::size_t b = 0; b + 1 < n_blocks; ++b) {
    const double d = means[b + 1] - means[b];
    acc += d * d;
  }
  const double avar = acc / (2.0 * static_cast<double>(n_blocks - 1));
  return {std::sqrt(avar), tau_s, tau_s, StabilityKind::allan};
}

// Barnes B2 bias function: ratio of the two-sample variance with dead time
// (measurement period T = r*tau) to the zero-dead-time Allan variance, for a
// power-law noise with sigma_y^2 proportional to tau^mu. Closed forms for
// the three exponents that matter here: white FM (mu = -1), flicker FM
// (mu = 0), and random-walk FM (mu = 1).
inline double b2_bias(double r, int mu) {
  if (!(r >= 1.0)) throw InvalidArgument("B2 requires r = T/tau >= 1");
  switch (mu) {
    case -1:
      return 1.0;  // disjoint averages of white FM are independent
    case 0: {
      if (r == 1.0) return 1.0;
      const double a = (r + 1.0) * (r + 1.0) * std::log(r + 1.0);
      const double b = (r - 1.0) * (r - 1.0) * std::log(r - 1.0);
      const double c = 2.0 * r * r * std::log(r);
      return (a + b - c) / (4.0 * std::log(2.0));
    }
    case 1:
      return (3.0 * r - 1.0) / 2.0;
    default:
      throw UnsupportedExponent("B2 implemented for mu in {-1, 0, 1}");
  }
}

inline StabilityMeasure two_sample_to_allan(const StabilityMeasure& m, int mu) {
  if (m.kind != StabilityKind::two_sample_dead_time)
    throw InvalidArgument("input must be a two-sample dead-time measure");
  if (!(m.tau_s > 0.0) || m.sample_interval_s < m.tau_s)
    throw InvalidArgument("require T >= tau > 0");
  const double b2 = b2_bias(m.sample_interval_s / m.tau_s, mu);
  return {m.sigma_y / std::sqrt(b2), m.tau_s, m.tau_s, StabilityKind::allan};
}

}  // namespace leomon
