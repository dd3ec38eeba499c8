#pragma once

#include <cmath>
#include <limits>

#include "leomon/constants.hpp"
#include "leomon/errors.hpp"

namespace leomon {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double linear) {
  if (linear <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(linear);
}

// RF bookkeeping for one interference geometry. All powers dBW, densities
// dBW/Hz; arithmetic is done in linear units and converted at the edges.
struct LinkBudget {
  double n0_dbw_hz = -204.0;                      // thermal noise density
  double chip_interval_s = constants::ca_chip_interval_s;
  double receiver_gain_db = 0.0;                  // G_r
  double path_loss_db = 0.0;                      // L
  double interference_density_dbw_hz = 0.0;       // I0
  double received_interference_dbw = 0.0;         // P_I
  double transmit_power_dbw = 0.0;                // P_S
  double transmit_power_w = 0.0;
};

// Received interference power implied by a CINR depression, assuming the
// interference behaves as multi-access interference with spectral density
// I0 = (2/3) * P_I * T_C. A zero drop maps to zero linear power (-inf dBW).
inline double interference_power_from_cinr_drop(double drop_db, double n0_dbw_hz,
                                                double chip_interval_s) {
  if (!(drop_db >= 0.0)) throw InvalidArgument("CINR drop must be non-negative");
  if (!(chip_interval_s > 0.0)) throw InvalidArgument("chip interval must be positive");
  const double n0 = db_to_linear(n0_dbw_hz);
  const double i0 = n0 * (db_to_linear(drop_db) - 1.0);
  return linear_to_db(i0 * 3.0 / (2.0 * chip_interval_s));
}

struct TransmitPower {
  double dbw = 0.0;
  double watts = 0.0;
};

inline TransmitPower transmit_power(double p_i_dbw, double g_r_db, double l_db) {
  const double dbw = p_i_dbw - g_r_db + l_db;
  return {dbw, std::pow(10.0, dbw / 10.0)};
}

// Jamming-to-authentic power ratio (dB) needed by a matched-spectrum jammer
// to deny cold-start acquisition at CINR threshold eta:
// P_I/C = -[eta + 10*log10(2*T_C/3)].
inline double matched_jamming_ratio_db(double eta_dbhz, double chip_interval_s) {
  if (!(chip_interval_s > 0.0)) throw InvalidArgument("chip interval must be positive");
  return -(eta_dbhz + 10.0 * std::log10(2.0 * chip_interval_s / 3.0));
}

// How many times less power a power-matched spoofer needs than a
// matched-spectrum jammer for the same cold-start denial (spoofing needs
// P_I/C = 0 dB).
inline double spoofing_efficiency_factor(double eta_dbhz, double chip_interval_s) {
  return db_to_linear(matched_jamming_ratio_db(eta_dbhz, chip_interval_s));
}

// Potency advantage (dB) of a matched-spectrum jammer (I0 = (2/3) P_I T_C)
// over a spectrally flat jammer spreading the same power across a span of
// `flat_span_multiple`/T_C Hz (I0 = P_I T_C / flat_span_multiple).
inline double matched_vs_flat_advantage_db(double flat_span_multiple) {
  if (!(flat_span_multiple > 0.0)) throw InvalidArgument("span multiple must be positive");
  return 10.0 * std::log10((2.0 / 3.0) * flat_span_multiple);
}

namespace detail {

inline double sinc_squared(double u) {
  if (u == 0.0) return 1.0;
  const double x = constants::pi * u;
  const double s = std::sin(x) / x;
  return s * s;
}

inline double adaptive_simpson(double (*f)(double), double a, double b, double fa,
                               double fb, double fm, double whole, double tol,
                               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1);
}

inline double integrate(double (*f)(double), double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fb, fm, whole, tol, 48);
}

}  // namespace detail

// Attenuation suffered by a random binary-code signal when the band
// |f| <= n/T_C is excised along with a jammer occupying it. n = 0 removes
// nothing; n = 2 removes the main lobe plus the adjacent side lobe pair.
// The sinc^2 spectrum is integrated numerically; T_C scales out.
inline double excision_attenuation_db(int excised_halfwidth_lobes) {
  if (excised_halfwidth_lobes < 0)
    throw UnsupportedConfiguration("excised halfwidth must be >= 0 lobes");
  if (excised_halfwidth_lobes == 0) return 0.0;
  const double inside = 2.0 * detail::integrate(detail::sinc_squared, 0.0,
                                                static_cast<double>(excised_halfwidth_lobes),
                                                1e-12);
  const double remaining = 1.0 - inside;
  if (remaining <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(remaining);
}

// Full CINR-drop -> P_I -> P_S chain in one call.
inline LinkBudget solve_budget(double drop_db, double n0_dbw_hz, double chip_interval_s,
                               double g_r_db, double path_loss_db) {
  LinkBudget b;
  b.n0_dbw_hz = n0_dbw_hz;
  b.chip_interval_s = chip_interval_s;
  b.receiver_gain_db = g_r_db;
  b.path_loss_db = path_loss_db;
  b.received_interference_dbw =
      interference_power_from_cinr_drop(drop_db, n0_dbw_hz, chip_interval_s);
  b.interference_density_dbw_hz =
      b.received_interference_dbw + 10.0 * std::log10(2.0 * chip_interval_s / 3.0);
  const TransmitPower tp = transmit_power(b.received_interference_dbw, g_r_db, path_loss_db);
  b.transmit_power_dbw = tp.dbw;
  b.transmit_power_w = tp.watts;
  return b;
}

}  // namespace leomon
