#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "greenlight/channel.hpp"
#include "greenlight/core.hpp"

namespace greenlight {

/// Single-photon bounds estimated from the observed decoy statistics.
/// q1_lower = y1_lower * mu * e^(-mu) by construction; e1_upper defaults to
/// the vacuous 0.5 until an error bound is available.
struct DecoyEstimates {
  double q1_lower = 0.0;
  double y1_lower = 0.0;
  double e1_upper = 0.5;
};

/// Lower bound on the single-photon gain Q1 (and yield Y1) from the
/// two-decoy statistics:
///
///   Y1 >= mu / (mu nu1 - mu nu2 - nu1^2 + nu2^2) *
///         (Q_nu1 e^nu1 - Q_nu2 e^nu2 - (nu1^2 - nu2^2)/mu^2 (Q_mu e^mu - Y0))
///   Q1  = Y1 * mu * e^(-mu)
///
/// Negative intermediate values floor at zero: a vacuous bound, not an error.
inline DecoyEstimates estimate_q1(const ObservedStats& stats,
                                  const IntensitySet& assumed,
                                  const ChannelParams& ch) {
  const double mu = assumed.mu_s();
  const double n1 = assumed.nu_1();
  const double n2 = assumed.nu_2();
  const double denom = mu * n1 - mu * n2 - n1 * n1 + n2 * n2;
  if (!(denom > 0.0))
    throw std::invalid_argument(
        "estimate_q1: invalid decoy configuration, mu*nu1 - mu*nu2 - nu1^2 + nu2^2 <= 0");

  const double q_mu = stats.gain(IntensityLabel::signal);
  const double q_n1 = stats.gain(IntensityLabel::decoy1);
  const double q_n2 = stats.gain(IntensityLabel::decoy2);
  const double y0 = ch.background_rate();

  const double y1 = (mu / denom) *
                    (q_n1 * std::exp(n1) - q_n2 * std::exp(n2) -
                     ((n1 * n1 - n2 * n2) / (mu * mu)) * (q_mu * std::exp(mu) - y0));

  DecoyEstimates est;
  est.y1_lower = std::clamp(y1, 0.0, 1.0);  // a yield is a probability
  est.q1_lower = est.y1_lower * mu * std::exp(-mu);
  return est;
}

/// Upper bound on the single-photon error rate e1 from the decoy QBERs:
///
///   e1 <= (E_nu1 Q_nu1 e^nu1 - E_nu2 Q_nu2 e^nu2) / ((nu1 - nu2) * Y1)
///
/// Undefined at Y1 = 0; the caller must then treat the pulse set as carrying
/// no secure single-photon signal.
inline double estimate_e1(const ObservedStats& stats, const IntensitySet& assumed,
                          double y1_lower) {
  if (!(y1_lower > 0.0))
    throw std::invalid_argument("estimate_e1: undefined for y1_lower <= 0");
  const double n1 = assumed.nu_1();
  const double n2 = assumed.nu_2();
  if (!(n1 > n2))
    throw std::invalid_argument("estimate_e1: require nu_1 > nu_2");
  const double num = stats.qber(IntensityLabel::decoy1) *
                         stats.gain(IntensityLabel::decoy1) * std::exp(n1) -
                     stats.qber(IntensityLabel::decoy2) *
                         stats.gain(IntensityLabel::decoy2) * std::exp(n2);
  return num / ((n1 - n2) * y1_lower);
}

/// Asymptotic secret-key-rate lower bound per emitted pulse:
///
///   R >= 1/2 * (-Q_mu f_e H2(E_mu) + Q1 (1 - H2(e1)))
///
/// e1 is clamped to [0, 0.5] before the entropy evaluation; values above 0.5
/// signal a broken estimate and zero out the single-photon term. The result
/// may be negative; sweeps report max(R, 0) alongside the raw value.
inline double key_rate(double q_signal, double e_signal, double q1, double e1,
                       double f_e) {
  if (!(q_signal >= 0.0) || q_signal > 1.0 || !(e_signal >= 0.0) || e_signal > 1.0 ||
      !(q1 >= 0.0) || q1 > 1.0)
    throw std::domain_error("key_rate: probabilities must lie in [0, 1]");
  const double e1c = std::clamp(e1, 0.0, 0.5);
  return 0.5 * (-q_signal * f_e * binary_entropy(e_signal) +
                q1 * (1.0 - binary_entropy(e1c)));
}

/// Key rate computed the way Alice and Bob would: decoy bounds from the
/// observed statistics under the intensities they believe they emitted.
inline double estimated_key_rate(const ObservedStats& stats,
                                 const IntensitySet& assumed,
                                 const ChannelParams& ch) {
  DecoyEstimates est = estimate_q1(stats, assumed, ch);
  if (est.y1_lower > 0.0) est.e1_upper = estimate_e1(stats, assumed, est.y1_lower);
  return key_rate(stats.gain(IntensityLabel::signal),
                  stats.qber(IntensityLabel::signal), est.q1_lower, est.e1_upper,
                  ch.error_correction_efficiency());
}

/// Intensity scale factor recovered when the attack removes delta_loss of
/// calibrated-in attenuation: k = 10^(delta_loss/10) >= 1.
inline double delta_loss_to_k(Decibel delta_loss) {
  if (delta_loss.value() < 0.0)
    throw std::domain_error("delta_loss_to_k: negative delta loss");
  return std::pow(10.0, delta_loss.value() / 10.0);
}

/// Beam-splitter fraction Eve diverts so the receiver's photon flux is
/// unchanged: k * mu * (1 - f) = mu.
inline double eve_tap_fraction(double k) {
  if (!(k >= 1.0))
    throw std::domain_error("eve_tap_fraction: require k >= 1");
  return 1.0 - 1.0 / k;
}

/// Key rates of the three attack scenarios at one operating point.
struct KeyRateReport {
  double baseline = 0.0;          // no attack, correct intensities
  double unaware_estimate = 0.0;  // attacked statistics, original intensities
  double secure = 0.0;            // attacked statistics, true intensities k*mu
  Decibel delta_loss;
  Decibel total_loss;
};

/// Evaluates the no-attack baseline, the rate Alice and Bob would wrongly
/// estimate under attack, and the true secure rate under attack. The
/// intensities are those calibrated for the unattacked channel; the attack
/// scales every emitted pulse by k = 10^(delta_loss/10).
inline KeyRateReport evaluate_scenarios(const IntensitySet& intensities,
                                        const ChannelParams& ch,
                                        Decibel delta_loss) {
  const double k = delta_loss_to_k(delta_loss);
  const ObservedStats plain = observe(intensities, 1.0, ch);
  const ObservedStats attacked = observe(intensities, k, ch);

  KeyRateReport report;
  report.baseline = estimated_key_rate(plain, intensities, ch);
  report.unaware_estimate = estimated_key_rate(attacked, intensities, ch);
  report.secure = estimated_key_rate(attacked, intensities.scaled(k), ch);
  report.delta_loss = delta_loss;
  report.total_loss = ch.total_loss();
  return report;
}

}  // namespace greenlight
