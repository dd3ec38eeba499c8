#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leomon/clocks.hpp"
#include "leomon/constants.hpp"
#include "leomon/errors.hpp"
#include "leomon/geodesy.hpp"
#include "leomon/orbits.hpp"
#include "leomon/rng.hpp"

namespace leomon {

struct TransmitterState {
  GeodeticPosition position;
  std::map<std::string, double> clock_rate_per_pass;  // s/s, keyed by pass label
  double frequency_hz = constants::l1_frequency_hz;
};

struct DopplerMeasurement {
  double t_s = 0.0;
  double doppler_hz = 0.0;
  double sigma_hz = 1.0;
};

// One capture interval: receiver states and Doppler measurements aligned 1:1.
struct PassCapture {
  Pass pass;
  std::vector<DopplerMeasurement> measurements;
};

inline void validate(const PassCapture& capture) {
  validate(capture.pass);
  if (capture.measurements.size() != capture.pass.states.size())
    throw InvalidArgument("capture measurements not aligned with pass states");
  for (std::size_t k = 0; k < capture.measurements.size(); ++k) {
    if (std::abs(capture.measurements[k].t_s - capture.pass.states[k].t_s) > 1e-9)
      throw InvalidArgument("capture timestamps not aligned with pass states");
    if (!(capture.measurements[k].sigma_hz > 0.0))
      throw InvalidArgument("measurement sigma must be positive");
  }
}

struct ErrorEllipse {
  double semi_major_m = 0.0;
  double semi_minor_m = 0.0;
  double orientation_deg = 0.0;  // east of north, major axis, in [0, 180)
  double confidence = 0.0;
};

struct ResidualStats {
  double mean_hz = 0.0;
  double std_hz = 0.0;
};

struct GeolocationSolution {
  TransmitterState transmitter;
  std::vector<std::string> pass_labels;  // clock-rate ordering in `covariance`
  // (east m, north m, up m, clock rates s/s) x same; local frame at estimate.
  Eigen::MatrixXd covariance;
  ErrorEllipse ellipse95;
  ErrorEllipse ellipse99;
  std::map<std::string, std::vector<double>> postfit_residuals_hz;
  bool converged = false;
  int iterations = 0;
};

inline double chi_square_quantile_2dof(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw InvalidArgument("confidence must be in (0, 1)");
  return -2.0 * std::log(1.0 - confidence);
}

// Observed Doppler for a transmitter at `tx_ecef` with clock frequency error
// `tx_clock_rate_ss`, as seen by receiver state `rx`:
//   f_D = -rhat.v_R/lambda - c*[dtR - dtT*(1 - dtR)]/lambda
// with rhat the transmitter->receiver unit vector. The (1 - dtR) product is
// kept exact rather than linearized.
inline double predict_doppler_ecef(const EcefVector& tx_ecef, double tx_clock_rate_ss,
                                   const ReceiverState& rx, double frequency_hz) {
  if (!(frequency_hz > 0.0)) throw InvalidArgument("frequency must be positive");
  const double lambda = constants::speed_of_light_mps / frequency_hz;
  const EcefVector los = rx.position_m - tx_ecef;
  const double range = los.norm();
  if (!(range > 0.0)) throw InvalidArgument("coincident transmitter and receiver");
  const double radial_rate = los.dot(rx.velocity_mps) / range;
  const double clock_term = rx.clock_rate_ss - tx_clock_rate_ss * (1.0 - rx.clock_rate_ss);
  return -radial_rate / lambda - constants::speed_of_light_mps * clock_term / lambda;
}

inline double predict_doppler(const GeodeticPosition& tx_pos, double tx_clock_rate_ss,
                              const ReceiverState& rx, double frequency_hz) {
  return predict_doppler_ecef(geodetic_to_ecef(tx_pos), tx_clock_rate_ss, rx, frequency_hz);
}

// Error-free Doppler plus a random-walk clock realization plus white noise.
// Deterministic for a given seed. When w_sigma_hz is zero the stored sigma
// falls back to 1 Hz so that downstream weighting stays defined.
inline PassCapture synthesize_capture(const TransmitterState& tx, const Pass& pass,
                                      const ClockModel& clock_model, double w_sigma_hz,
                                      std::uint64_t seed) {
  validate(pass);
  if (w_sigma_hz < 0.0) throw InvalidArgument("noise sigma must be non-negative");

  const EcefVector tx_ecef = geodetic_to_ecef(tx.position);
  const auto it = tx.clock_rate_per_pass.find(pass.label);
  const double base_rate = (it != tx.clock_rate_per_pass.end()) ? it->second : 0.0;

  const double dt = pass.states.size() > 1 ? pass.interval_s() : 1.0;
  const FrequencySeries walk = synthesize_random_walk(clock_model, dt, pass.states.size(),
                                                      Rng::derive_seed(seed, 0));
  Rng noise(Rng::derive_seed(seed, 1));
  const double sigma = w_sigma_hz > 0.0 ? w_sigma_hz : 1.0;

  PassCapture capture;
  capture.pass = pass;
  capture.measurements.reserve(pass.states.size());
  for (std::size_t k = 0; k < pass.states.size(); ++k) {
    const double f = predict_doppler_ecef(tx_ecef, base_rate + walk.values[k],
                                          pass.states[k], tx.frequency_hz) +
                     w_sigma_hz * noise.gaussian();
    capture.measurements.push_back({pass.states[k].t_s, f, sigma});
  }
  return capture;
}

struct AltitudePrior {
  double mean_m = 0.0;
  double sigma_m = 5.0;
};

struct EstimateOptions {
  double frequency_hz = constants::l1_frequency_hz;
  int max_iterations = 100;
  double step_tolerance_m = 1e-4;
  double relative_cost_tolerance = 1e-10;
  double condition_limit = 1e12;
  double grid_halfwidth_m = 1.5e6;  // cold-start search extent around the sub-receiver track
  double grid_spacing_m = 50e3;
};

namespace detail {

// Unknown layout: [0..2] transmitter ECEF position in meters, [3+j] clock
// frequency error of capture j scaled by the carrier frequency (Hz-equivalent,
// which keeps the normal matrix decently conditioned).
struct LinearizedSystem {
  Eigen::MatrixXd jacobian;       // weighted rows d(pred)/dx / sigma
  Eigen::VectorXd residual;       // weighted (y - pred)/sigma
  std::vector<double> row_sigma;  // per-row sigma, altitude row last
  std::vector<std::pair<std::size_t, std::size_t>> capture_rows;
  double cost = 0.0;
};

inline double capture_cost_only(const std::vector<PassCapture>& captures,
                                const Eigen::VectorXd& x, const AltitudePrior& prior,
                                double frequency_hz) {
  const double lambda = constants::speed_of_light_mps / frequency_hz;
  const double f_c = frequency_hz;
  const EcefVector tx = x.head<3>();
  double cost = 0.0;
  for (std::size_t j = 0; j < captures.size(); ++j) {
    const double clock_hz = x(3 + static_cast<Eigen::Index>(j));
    for (std::size_t k = 0; k < captures[j].measurements.size(); ++k) {
      const ReceiverState& s = captures[j].pass.states[k];
      const EcefVector los = s.position_m - tx;
      const double range = los.norm();
      if (!(range > 1.0)) return std::numeric_limits<double>::infinity();
      const double radial_rate = los.dot(s.velocity_mps) / range;
      const double pred = -radial_rate / lambda - f_c * s.clock_rate_ss +
                          clock_hz * (1.0 - s.clock_rate_ss);
      const double r =
          (captures[j].measurements[k].doppler_hz - pred) / captures[j].measurements[k].sigma_hz;
      cost += r * r;
    }
  }
  try {
    const double alt = ecef_to_geodetic(tx).altitude_m;
    const double r = (prior.mean_m - alt) / prior.sigma_m;
    cost += r * r;
  } catch (const InvalidArgument&) {
    return std::numeric_limits<double>::infinity();
  }
  return cost;
}

inline LinearizedSystem linearize(const std::vector<PassCapture>& captures,
                                  const Eigen::VectorXd& x, const AltitudePrior& prior,
                                  double frequency_hz) {
  const double lambda = constants::speed_of_light_mps / frequency_hz;
  const double f_c = frequency_hz;
  const EcefVector tx = x.head<3>();
  const auto n_params = static_cast<Eigen::Index>(3 + captures.size());

  std::size_t n_rows = 1;  // altitude pseudo-measurement
  for (const auto& c : captures) n_rows += c.measurements.size();

  LinearizedSystem sys;
  sys.jacobian.setZero(static_cast<Eigen::Index>(n_rows), n_params);
  sys.residual.resize(static_cast<Eigen::Index>(n_rows));
  sys.row_sigma.resize(n_rows);

  Eigen::Index row = 0;
  for (std::size_t j = 0; j < captures.size(); ++j) {
    const std::size_t begin = static_cast<std::size_t>(row);
    const double clock_hz = x(3 + static_cast<Eigen::Index>(j));
    for (std::size_t k = 0; k < captures[j].measurements.size(); ++k) {
      const ReceiverState& s = captures[j].pass.states[k];
      const DopplerMeasurement& meas = captures[j].measurements[k];
      const EcefVector los = s.position_m - tx;
      const double range = los.norm();
      if (!(range > 1.0)) throw InvalidArgument("transmitter coincides with receiver");
      const EcefVector rhat = los / range;
      const double radial_rate = rhat.dot(s.velocity_mps);
      const double pred = -radial_rate / lambda - f_c * s.clock_rate_ss +
                          clock_hz * (1.0 - s.clock_rate_ss);
      const double w = 1.0 / meas.sigma_hz;
      const EcefVector dpos = (s.velocity_mps - radial_rate * rhat) / (lambda * range);
      sys.jacobian.block<1, 3>(row, 0) = w * dpos.transpose();
      sys.jacobian(row, 3 + static_cast<Eigen::Index>(j)) = w * (1.0 - s.clock_rate_ss);
      sys.residual(row) = w * (meas.doppler_hz - pred);
      sys.row_sigma[static_cast<std::size_t>(row)] = meas.sigma_hz;
      ++row;
    }
    sys.capture_rows.emplace_back(begin, static_cast<std::size_t>(row));
  }

  const GeodeticPosition geo = ecef_to_geodetic(tx);
  const Eigen::Vector3d up = enu_basis(geo).col(2);
  sys.jacobian.block<1, 3>(row, 0) = up.transpose() / prior.sigma_m;
  sys.residual(row) = (prior.mean_m - geo.altitude_m) / prior.sigma_m;
  sys.row_sigma[static_cast<std::size_t>(row)] = prior.sigma_m;

  sys.cost = sys.residual.squaredNorm();
  return sys;
}

// Weighted least-squares clock fit for one capture at a fixed position.
inline double closed_form_clock_hz(const PassCapture& capture, const EcefVector& tx,
                                   double frequency_hz, double* residual_cost = nullptr) {
  const double lambda = constants::speed_of_light_mps / frequency_hz;
  const double f_c = frequency_hz;
  double s_bb = 0.0, s_br = 0.0, s_rr = 0.0;
  for (std::size_t k = 0; k < capture.measurements.size(); ++k) {
    const ReceiverState& s = capture.pass.states[k];
    const DopplerMeasurement& meas = capture.measurements[k];
    const EcefVector los = s.position_m - tx;
    const double range = los.norm();
    if (!(range > 1.0)) {
      if (residual_cost) *residual_cost = std::numeric_limits<double>::infinity();
      return 0.0;
    }
    const double radial_rate = los.dot(s.velocity_mps) / range;
    const double base = -radial_rate / lambda - f_c * s.clock_rate_ss;
    const double b = 1.0 - s.clock_rate_ss;
    const double w2 = 1.0 / (meas.sigma_hz * meas.sigma_hz);
    const double y = meas.doppler_hz - base;
    s_bb += w2 * b * b;
    s_br += w2 * b * y;
    s_rr += w2 * y * y;
  }
  const double clock_hz = s_bb > 0.0 ? s_br / s_bb : 0.0;
  if (residual_cost) *residual_cost = s_rr - clock_hz * s_br;
  return clock_hz;
}

// Coarse grid over the sub-receiver ground neighborhood. The Doppler cost
// surface of a short one-sided arc has a razor-thin global valley plus broad
// shallow false basins that can sit over a thousand kilometers away, so a
// single best node is not enough: the refinement stage starts Gauss-Newton
// from the best node of every coarse block and keeps the lowest final cost.
inline std::vector<EcefVector> grid_start_positions(const std::vector<PassCapture>& captures,
                                                    const AltitudePrior& prior,
                                                    const EstimateOptions& opt) {
  const Pass& pass = captures.front().pass;
  const ReceiverState& mid = pass.states[pass.states.size() / 2];
  GeodeticPosition ref = ecef_to_geodetic(mid.position_m);
  ref.altitude_m = prior.mean_m;
  const EcefVector ref_ecef = geodetic_to_ecef(ref);
  const Eigen::Matrix3d basis = enu_basis(ref);

  // Block size is kept well inside the measured Gauss-Newton attraction
  // radius of the global valley (several hundred km).
  const long steps = static_cast<long>(opt.grid_halfwidth_m / opt.grid_spacing_m);
  const long block = std::max<long>(1, static_cast<long>(250e3 / opt.grid_spacing_m));

  struct Node {
    double cost = std::numeric_limits<double>::infinity();
    EcefVector position = EcefVector::Zero();
  };
  std::map<std::pair<long, long>, Node> blocks;
  Node global;

  for (long ie = -steps; ie <= steps; ++ie) {
    for (long in = -steps; in <= steps; ++in) {
      const EcefVector tangent = ref_ecef +
                                 static_cast<double>(ie) * opt.grid_spacing_m * basis.col(0) +
                                 static_cast<double>(in) * opt.grid_spacing_m * basis.col(1);
      GeodeticPosition node_geo = ecef_to_geodetic(tangent);
      node_geo.altitude_m = prior.mean_m;
      const EcefVector node = geodetic_to_ecef(node_geo);
      double cost = 0.0;
      for (const auto& capture : captures) {
        double c = 0.0;
        closed_form_clock_hz(capture, node, opt.frequency_hz, &c);
        cost += c;
      }
      Node& slot = blocks[{ie >= 0 ? ie / block : (ie - block + 1) / block,
                           in >= 0 ? in / block : (in - block + 1) / block}];
      if (cost < slot.cost) slot = {cost, node};
      if (cost < global.cost) global = {cost, node};
    }
  }

  std::vector<EcefVector> starts;
  starts.push_back(global.position);
  for (const auto& [key, node] : blocks) starts.push_back(node.position);
  return starts;
}

struct SolveOutcome {
  Eigen::VectorXd x;
  double cost = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

struct NormalEquations {
  Eigen::MatrixXd scaled;   // D * (J^T J) * D
  Eigen::VectorXd scale;    // D diagonal
  Eigen::VectorXd gradient; // J^T r
};

inline NormalEquations form_normal_equations(const LinearizedSystem& sys,
                                             double condition_limit) {
  NormalEquations eq;
  const Eigen::MatrixXd a = sys.jacobian.transpose() * sys.jacobian;
  const Eigen::Index m = a.rows();
  eq.scale.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(a(i, i) > 0.0)) throw SingularGeometry("normal matrix has a null diagonal");
    eq.scale(i) = 1.0 / std::sqrt(a(i, i));
  }
  eq.scaled = eq.scale.asDiagonal() * a * eq.scale.asDiagonal();
  eq.gradient = sys.jacobian.transpose() * sys.residual;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(eq.scaled);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > condition_limit)
    throw SingularGeometry("normal matrix condition number exceeds limit");
  return eq;
}

// Damped Gauss-Newton descent from one starting point.
inline SolveOutcome solve_from(const std::vector<PassCapture>& captures,
                               const AltitudePrior& prior, const EstimateOptions& opt,
                               Eigen::VectorXd x0) {
  SolveOutcome out;
  out.x = std::move(x0);
  out.cost = capture_cost_only(captures, out.x, prior, opt.frequency_hz);
  const Eigen::Index n_params = out.x.size();
  double damping = 0.0;

  for (int iter = 0; iter < opt.max_iterations && !out.converged; ++iter) {
    out.iterations = iter + 1;
    const LinearizedSystem sys = linearize(captures, out.x, prior, opt.frequency_hz);
    const NormalEquations eq = form_normal_equations(sys, opt.condition_limit);

    Eigen::VectorXd x_next = out.x;
    double cost_next = out.cost;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n_params);
    bool accepted = false;
    for (int attempt = 0; attempt < 25; ++attempt) {
      Eigen::MatrixXd damped = eq.scaled;
      damped.diagonal().array() += damping;
      const Eigen::VectorXd scaled_step =
          damped.ldlt().solve(eq.scale.asDiagonal() * eq.gradient);
      step = eq.scale.asDiagonal() * scaled_step;
      x_next = out.x + step;
      cost_next = capture_cost_only(captures, x_next, prior, opt.frequency_hz);
      if (cost_next <= out.cost && std::isfinite(cost_next)) {
        accepted = true;
        damping = damping > 1e-12 ? damping * 0.25 : 0.0;
        break;
      }
      damping = damping > 0.0 ? damping * 10.0 : 1e-4;
    }
    if (!accepted) break;

    const double step_pos = step.head<3>().norm();
    const double cost_drop = out.cost - cost_next;
    out.x = x_next;
    const bool cost_settled =
        cost_drop <= opt.relative_cost_tolerance * std::max(out.cost, 1e-300);
    out.cost = cost_next;
    if (step_pos < opt.step_tolerance_m && cost_settled) out.converged = true;
  }
  return out;
}

}  // namespace detail

// Horizontal confidence ellipse from a 2x2 (east, north) covariance block.
inline ErrorEllipse error_ellipse(const Eigen::Matrix2d& covariance, double confidence) {
  const double q = chi_square_quantile_2dof(confidence);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(covariance);
  double lo = eig.eigenvalues()(0);
  double hi = eig.eigenvalues()(1);
  if (lo < -1e-9) throw InvalidArgument("covariance has a negative eigenvalue");
  lo = std::max(lo, 0.0);
  hi = std::max(hi, 0.0);

  ErrorEllipse ellipse;
  ellipse.confidence = confidence;
  ellipse.semi_major_m = std::sqrt(hi * q);
  ellipse.semi_minor_m = std::sqrt(lo * q);
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  double orientation = constants::rad2deg(std::atan2(major(0), major(1)));
  if (orientation < 0.0) orientation += 180.0;
  if (orientation >= 180.0) orientation -= 180.0;
  ellipse.orientation_deg = orientation;
  return ellipse;
}

// Batch weighted nonlinear least squares over the transmitter position and
// one clock frequency error per capture, with the transmitter altitude folded
// in as a pseudo-measurement. Gauss-Newton with Levenberg-style damping;
// failure to converge within the iteration budget is reported through the
// `converged` flag rather than an exception, so partial diagnostics survive.
inline GeolocationSolution estimate(const std::vector<PassCapture>& captures,
                                    const AltitudePrior& prior,
                                    const std::optional<GeodeticPosition>& init = {},
                                    const EstimateOptions& opt = {}) {
  if (captures.empty()) throw InvalidArgument("need at least one capture");
  std::vector<std::string> labels;
  for (const auto& c : captures) {
    validate(c);
    if (std::find(labels.begin(), labels.end(), c.pass.label) != labels.end())
      throw InvalidArgument("duplicate pass label: " + c.pass.label);
    labels.push_back(c.pass.label);
  }
  if (!(prior.sigma_m > 0.0)) throw InvalidArgument("altitude prior sigma must be positive");

  const auto n_params = static_cast<Eigen::Index>(3 + captures.size());
  std::vector<EcefVector> starts;
  if (init) {
    starts.push_back(geodetic_to_ecef(*init));
  } else {
    starts = detail::grid_start_positions(captures, prior, opt);
  }

  detail::SolveOutcome best;
  bool first = true;
  for (const EcefVector& start : starts) {
    Eigen::VectorXd x0(n_params);
    x0.head<3>() = start;
    for (std::size_t j = 0; j < captures.size(); ++j)
      x0(3 + static_cast<Eigen::Index>(j)) =
          detail::closed_form_clock_hz(captures[j], start, opt.frequency_hz);
    detail::SolveOutcome outcome = detail::solve_from(captures, prior, opt, std::move(x0));
    if (first || outcome.cost < best.cost ||
        (outcome.cost == best.cost && outcome.converged && !best.converged)) {
      best = std::move(outcome);
      first = false;
    }
  }

  const Eigen::VectorXd& x = best.x;
  const bool converged = best.converged;
  const int iterations = best.iterations;

  // Covariance and residuals at the final iterate.
  const detail::LinearizedSystem sys = detail::linearize(captures, x, prior, opt.frequency_hz);
  const detail::NormalEquations eq = detail::form_normal_equations(sys, opt.condition_limit);
  const Eigen::MatrixXd scaled_inv =
      eq.scaled.ldlt().solve(Eigen::MatrixXd::Identity(n_params, n_params));
  const Eigen::MatrixXd cov_internal =
      eq.scale.asDiagonal() * scaled_inv * eq.scale.asDiagonal();

  GeolocationSolution sol;
  sol.pass_labels = labels;
  sol.converged = converged;
  sol.iterations = iterations;
  sol.transmitter.frequency_hz = opt.frequency_hz;
  sol.transmitter.position = ecef_to_geodetic(x.head<3>());
  for (std::size_t j = 0; j < captures.size(); ++j)
    sol.transmitter.clock_rate_per_pass[labels[j]] =
        x(3 + static_cast<Eigen::Index>(j)) / opt.frequency_hz;

  Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(n_params, n_params);
  frame.topLeftCorner<3, 3>() = enu_basis(sol.transmitter.position).transpose();
  for (Eigen::Index j = 3; j < n_params; ++j) frame(j, j) = 1.0 / opt.frequency_hz;
  sol.covariance = frame * cov_internal * frame.transpose();

  sol.ellipse95 = error_ellipse(sol.covariance.topLeftCorner<2, 2>(), 0.95);
  sol.ellipse99 = error_ellipse(sol.covariance.topLeftCorner<2, 2>(), 0.99);

  for (std::size_t j = 0; j < captures.size(); ++j) {
    std::vector<double> residuals;
    residuals.reserve(captures[j].measurements.size());
    const auto [begin, end] = sys.capture_rows[j];
    for (std::size_t row = begin; row < end; ++row)
      residuals.push_back(sys.residual(static_cast<Eigen::Index>(row)) * sys.row_sigma[row]);
    sol.postfit_residuals_hz[labels[j]] = std::move(residuals);
  }
  return sol;
}

inline std::map<std::string, ResidualStats> postfit_residual_stats(
    const GeolocationSolution& sol) {
  std::map<std::string, ResidualStats> stats;
  for (const auto& [label, res] : sol.postfit_residuals_hz) {
    ResidualStats s;
    if (!res.empty()) {
      double mean = 0.0;
      for (double r : res) mean += r;
      mean /= static_cast<double>(res.size());
      double var = 0.0;
      for (double r : res) var += (r - mean) * (r - mean);
      s.mean_hz = mean;
      s.std_hz = res.size() > 1 ? std::sqrt(var / static_cast<double>(res.size() - 1)) : 0.0;
    }
    stats[label] = s;
  }
  return stats;
}

// Formal covariance of the weighted least-squares estimate under the true
// noise model: white measurement noise of std `w_sigma_true_hz` plus the
// random-walk clock error of `clock_model` mapped into Doppler. This is the
// sandwich A^{-1} (B^T W C W B) A^{-1} evaluated at `linearization`; with
// purely white noise matching the measurement sigmas it reduces to the
// inverse normal matrix that `estimate` reports. Returned in the same
// (east, north, up, clock rates) frame as GeolocationSolution::covariance.
inline Eigen::MatrixXd formal_covariance(const std::vector<PassCapture>& captures,
                                         const TransmitterState& linearization,
                                         const AltitudePrior& prior,
                                         const ClockModel& clock_model,
                                         double w_sigma_true_hz,
                                         const EstimateOptions& opt = {}) {
  if (captures.empty()) throw InvalidArgument("need at least one capture");
  const auto n_params = static_cast<Eigen::Index>(3 + captures.size());
  Eigen::VectorXd x(n_params);
  x.head<3>() = geodetic_to_ecef(linearization.position);
  for (std::size_t j = 0; j < captures.size(); ++j) {
    const auto it = linearization.clock_rate_per_pass.find(captures[j].pass.label);
    const double rate = it != linearization.clock_rate_per_pass.end() ? it->second : 0.0;
    x(3 + static_cast<Eigen::Index>(j)) = rate * opt.frequency_hz;
  }

  const detail::LinearizedSystem sys = detail::linearize(captures, x, prior, opt.frequency_hz);
  const detail::NormalEquations eq = detail::form_normal_equations(sys, opt.condition_limit);
  const Eigen::MatrixXd scaled_inv =
      eq.scaled.ldlt().solve(Eigen::MatrixXd::Identity(n_params, n_params));
  const Eigen::MatrixXd a_inv = eq.scale.asDiagonal() * scaled_inv * eq.scale.asDiagonal();

  Eigen::MatrixXd noise_info = Eigen::MatrixXd::Zero(n_params, n_params);
  // White measurement noise.
  for (std::size_t j = 0; j < captures.size(); ++j) {
    const auto [begin, end] = sys.capture_rows[j];
    for (std::size_t row = begin; row < end; ++row) {
      const double scale = w_sigma_true_hz / sys.row_sigma[row];
      const Eigen::RowVectorXd b = sys.jacobian.row(static_cast<Eigen::Index>(row));
      noise_info += (scale * scale) * b.transpose() * b;
    }
  }
  // Random-walk clock noise: Cov(i, j) = f_c^2 * q * min(i, j) within a
  // capture, accumulated through suffix sums.
  const double f_c = opt.frequency_hz;
  for (std::size_t j = 0; clock_model.h_minus2 > 0.0 && j < captures.size(); ++j) {
    const auto [begin, end] = sys.capture_rows[j];
    if (end - begin < 2) continue;
    const double dt = captures[j].pass.interval_s();
    const double q = 2.0 * constants::pi * constants::pi * clock_model.h_minus2 * dt;
    Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(n_params);
    Eigen::MatrixXd walk_info = Eigen::MatrixXd::Zero(n_params, n_params);
    for (std::size_t row = end; row-- > begin + 1;) {
      suffix += sys.jacobian.row(static_cast<Eigen::Index>(row)) / sys.row_sigma[row];
      walk_info += suffix.transpose() * suffix;
    }
    noise_info += (f_c * f_c * q) * walk_info;
  }
  // Altitude pseudo-measurement: weighted at its own sigma.
  {
    const Eigen::RowVectorXd b = sys.jacobian.row(sys.jacobian.rows() - 1);
    noise_info += b.transpose() * b;
  }

  const Eigen::MatrixXd cov_internal = a_inv * noise_info * a_inv;
  Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(n_params, n_params);
  frame.topLeftCorner<3, 3>() = enu_basis(linearization.position).transpose();
  for (Eigen::Index j = 3; j < n_params; ++j) frame(j, j) = 1.0 / opt.frequency_hz;
  return frame * cov_internal * frame.transpose();
}

}  // namespace leomon
