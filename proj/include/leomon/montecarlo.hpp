#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "leomon/clocks.hpp"
#include "leomon/errors.hpp"
#include "leomon/geolocate.hpp"
#include "leomon/rng.hpp"

namespace leomon {

struct McScenario {
  GeodeticPosition transmitter;
  Pass pass;
  double frequency_hz = constants::l1_frequency_hz;
};

struct McConfig {
  McScenario scenario;
  ClockModel clock_model;
  int trials = 1000;
  int subgroup_size = 250;
  int subgroup_draws = 100000;
  std::uint64_t seed = 1;
  double w_sigma_hz = 0.0;  // zero isolates the clock contribution
  AltitudePrior altitude_prior{48.0, 5.0};
  // Error statistics are local properties of the estimator, so trials start
  // from the true position; cold-start initialization is exercised elsewhere.
  bool init_at_truth = true;
};

struct McResult {
  std::vector<Eigen::Vector2d> errors_en_m;  // per-trial horizontal error
  ErrorEllipse empirical_ellipse95;
  ErrorEllipse formal_ellipse95;  // noise-model-aware formal ellipse at truth
};

// Sample-covariance ellipse of a horizontal error cloud.
inline ErrorEllipse empirical_ellipse(const std::vector<Eigen::Vector2d>& errors,
                                      double confidence) {
  if (errors.size() < 2) throw InvalidArgument("need at least two error samples");
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& e : errors) mean += e;
  mean /= static_cast<double>(errors.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& e : errors) {
    const Eigen::Vector2d d = e - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(errors.size() - 1);
  return error_ellipse(cov, confidence);
}

// Per-clock-class geolocation error study: independent noise realization and
// batch solution per trial, horizontal errors recorded in the local frame of
// the true transmitter position. Deterministic for a given seed; trial i
// draws from a sub-stream derived from (seed, i), so the result does not
// depend on evaluation order.
inline McResult run_clock_study(const McConfig& cfg) {
  if (cfg.trials < cfg.subgroup_size || cfg.subgroup_size < 2)
    throw InvalidArgument("require trials >= subgroup_size >= 2");

  TransmitterState truth;
  truth.position = cfg.scenario.transmitter;
  truth.frequency_hz = cfg.scenario.frequency_hz;

  EstimateOptions opt;
  opt.frequency_hz = cfg.scenario.frequency_hz;

  const EcefVector truth_ecef = geodetic_to_ecef(truth.position);
  const Eigen::Matrix3d basis = enu_basis(truth.position);

  McResult result;
  result.errors_en_m.reserve(static_cast<std::size_t>(cfg.trials));
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t trial_seed = Rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
    const PassCapture capture = synthesize_capture(truth, cfg.scenario.pass, cfg.clock_model,
                                                   cfg.w_sigma_hz, trial_seed);
    GeolocationSolution sol;
    try {
      sol = estimate({capture}, cfg.altitude_prior,
                     cfg.init_at_truth ? std::optional<GeodeticPosition>(truth.position)
                                       : std::nullopt,
                     opt);
    } catch (const Error& e) {
      throw Error("trial " + std::to_string(trial) + ": " + e.what());
    }
    if (!sol.converged)
      throw Error("trial " + std::to_string(trial) + ": estimator did not converge");
    const EcefVector delta = geodetic_to_ecef(sol.transmitter.position) - truth_ecef;
    result.errors_en_m.emplace_back(basis.col(0).dot(delta), basis.col(1).dot(delta));
  }

  result.empirical_ellipse95 = empirical_ellipse(result.errors_en_m, 0.95);
  const PassCapture geometry = synthesize_capture(truth, cfg.scenario.pass, cfg.clock_model,
                                                  cfg.w_sigma_hz, cfg.seed);
  const Eigen::MatrixXd formal = formal_covariance(
      {geometry}, truth, cfg.altitude_prior, cfg.clock_model, cfg.w_sigma_hz, opt);
  result.formal_ellipse95 = error_ellipse(formal.topLeftCorner<2, 2>(), 0.95);
  return result;
}

struct SubgroupStats {
  // Quantiles (keyed by confidence level) of the per-draw deviation, where a
  // draw's deviation is the worse of its two axis deviations relative to the
  // full-population ellipse.
  std::map<double, double> deviation_quantiles;
  double q99_semi_major_dev = 0.0;
  double q99_semi_minor_dev = 0.0;
  double max_deviation = 0.0;
};

namespace detail {
inline double quantile(std::vector<double> values, double level) {
  if (values.empty()) throw InvalidArgument("quantile of empty set");
  const auto rank = static_cast<std::size_t>(
      std::min<double>(std::ceil(level * static_cast<double>(values.size())),
                       static_cast<double>(values.size())) - 1.0);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(rank), values.end());
  return values[rank];
}
}  // namespace detail

// Stability of the error-ellipse estimate under subsampling: draws random
// subgroups (without replacement) of the recorded trials, rebuilds the
// ellipse from each, and reports how far the subgroup axes stray from the
// full-population axes.
inline SubgroupStats subgroup_analysis(const McResult& result, const McConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.subgroup_size);
  const std::size_t total = result.errors_en_m.size();
  if (total < n) throw InvalidArgument("result holds fewer trials than subgroup size");

  const ErrorEllipse population = empirical_ellipse(result.errors_en_m, 0.95);
  Rng rng(Rng::derive_seed(cfg.seed, 0x5b6772u));

  std::vector<std::size_t> indices(total);
  for (std::size_t i = 0; i < total; ++i) indices[i] = i;

  std::vector<double> dev_major, dev_minor, dev_worst;
  dev_major.reserve(static_cast<std::size_t>(cfg.subgroup_draws));
  dev_minor.reserve(static_cast<std::size_t>(cfg.subgroup_draws));
  dev_worst.reserve(static_cast<std::size_t>(cfg.subgroup_draws));

  std::vector<Eigen::Vector2d> subset(n);
  for (int draw = 0; draw < cfg.subgroup_draws; ++draw) {
    // Partial Fisher-Yates; the array stays a permutation across draws.
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(total - i));
      std::swap(indices[i], indices[std::min(j, total - 1)]);
      subset[i] = result.errors_en_m[indices[i]];
    }
    const ErrorEllipse e = empirical_ellipse(subset, 0.95);
    const double da = std::abs(e.semi_major_m / population.semi_major_m - 1.0);
    const double db = std::abs(e.semi_minor_m / population.semi_minor_m - 1.0);
    dev_major.push_back(da);
    dev_minor.push_back(db);
    dev_worst.push_back(std::max(da, db));
  }

  SubgroupStats stats;
  for (double level : {0.5, 0.9, 0.99})
    stats.deviation_quantiles[level] = detail::quantile(dev_worst, level);
  stats.q99_semi_major_dev = detail::quantile(dev_major, 0.99);
  stats.q99_semi_minor_dev = detail::quantile(dev_minor, 0.99);
  stats.max_deviation = *std::max_element(dev_worst.begin(), dev_worst.end());
  stats.deviation_quantiles[1.0] = stats.max_deviation;
  return stats;
}

}  // namespace leomon
