#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "greenlight/core.hpp"

namespace greenlight {

/// Quantum-channel and receiver parameters of the asymptotic decoy-state
/// forward model.
class ChannelParams {
 public:
  ChannelParams(Decibel link_loss, double detector_efficiency,
                double background_rate, double misalignment_error,
                double error_correction_efficiency, double background_error = 0.5)
      : link_loss_(link_loss),
        detector_efficiency_(detector_efficiency),
        background_rate_(background_rate),
        misalignment_error_(misalignment_error),
        error_correction_efficiency_(error_correction_efficiency),
        background_error_(background_error) {
    if (link_loss.value() < 0.0)
      throw std::invalid_argument("ChannelParams: negative link loss");
    if (!(detector_efficiency > 0.0) || detector_efficiency > 1.0)
      throw std::invalid_argument("ChannelParams: detector efficiency must lie in (0, 1]");
    if (!(background_rate >= 0.0) || background_rate >= 1.0)
      throw std::invalid_argument("ChannelParams: background rate must lie in [0, 1)");
    if (!(misalignment_error >= 0.0) || misalignment_error >= 0.5)
      throw std::invalid_argument("ChannelParams: misalignment error must lie in [0, 0.5)");
    if (!(error_correction_efficiency >= 1.0))
      throw std::invalid_argument("ChannelParams: error correction efficiency must be >= 1");
    if (!(background_error >= 0.0) || background_error > 0.5)
      throw std::invalid_argument("ChannelParams: background error must lie in [0, 0.5]");
  }

  Decibel link_loss() const { return link_loss_; }
  double detector_efficiency() const { return detector_efficiency_; }
  double background_rate() const { return background_rate_; }
  double misalignment_error() const { return misalignment_error_; }
  double error_correction_efficiency() const { return error_correction_efficiency_; }
  double background_error() const { return background_error_; }

  /// Link loss composed with detector efficiency, in dB.
  Decibel total_loss() const {
    return link_loss_ + transmittance_to_db(detector_efficiency_);
  }

  /// The same channel re-expressed at a given total loss (detector
  /// efficiency folded into the link term). Only the product eta enters the
  /// forward model, so observed statistics depend on the total alone.
  ChannelParams with_total_loss(Decibel total) const {
    return ChannelParams(total, 1.0, background_rate_, misalignment_error_,
                         error_correction_efficiency_, background_error_);
  }

 private:
  Decibel link_loss_;
  double detector_efficiency_;
  double background_rate_;
  double misalignment_error_;
  double error_correction_efficiency_;
  double background_error_;
};

/// End-to-end detection probability eta = eta_d * 10^(-link_loss/10).
inline double total_transmittance(const ChannelParams& ch) {
  return ch.detector_efficiency() * db_to_transmittance(ch.link_loss());
}

/// Gain of a coherent pulse of the given mean photon number: the Poisson
/// mixture sum_n P(n|mu) * Y_n with yields Y_n = 1 - (1-Y0)(1-eta)^n, which
/// closes to Q = 1 - (1-Y0) e^(-eta*mu). Evaluated as Y0 + (1-Y0)(1-e^(-x))
/// via expm1 so vacuum pulses give exactly Y0; clamped to 1 at saturation.
inline double simulate_gain(double intensity, const ChannelParams& ch) {
  if (!(intensity >= 0.0))
    throw std::domain_error("simulate_gain: negative intensity");
  const double y0 = ch.background_rate();
  const double clicked = -std::expm1(-total_transmittance(ch) * intensity);
  const double q = y0 + (1.0 - y0) * clicked;
  return q < 1.0 ? q : 1.0;
}

/// QBER of a coherent pulse: E*Q = e0*Y0 + e_d*(1 - e^(-eta*mu)). Vacuum
/// pulses see only background clicks and return e0.
inline double simulate_qber(double intensity, const ChannelParams& ch) {
  if (!(intensity >= 0.0))
    throw std::domain_error("simulate_qber: negative intensity");
  const double q = simulate_gain(intensity, ch);
  if (q == 0.0) return ch.background_error();  // Y0 = 0 and vacuum: no clicks at all
  const double clicked = -std::expm1(-total_transmittance(ch) * intensity);
  const double eq = ch.background_error() * ch.background_rate() +
                    ch.misalignment_error() * clicked;
  return eq / q;
}

enum class IntensityLabel : std::size_t { signal = 0, decoy1 = 1, decoy2 = 2 };

inline constexpr std::array<IntensityLabel, 3> kIntensityLabels = {
    IntensityLabel::signal, IntensityLabel::decoy1, IntensityLabel::decoy2};

/// Per-intensity gains and QBERs as Alice and Bob would tabulate them.
class ObservedStats {
 public:
  ObservedStats(std::array<double, 3> gains, std::array<double, 3> qbers)
      : gains_(gains), qbers_(qbers) {}

  double gain(IntensityLabel l) const { return gains_[static_cast<std::size_t>(l)]; }
  double qber(IntensityLabel l) const { return qbers_[static_cast<std::size_t>(l)]; }

 private:
  std::array<double, 3> gains_;
  std::array<double, 3> qbers_;
};

/// Observed statistics when every emitted intensity is scaled by k (k = 1 is
/// the unattacked channel).
inline ObservedStats observe(const IntensitySet& intensities, double scale,
                             const ChannelParams& ch) {
  if (!(scale > 0.0))
    throw std::domain_error("observe: scale must be positive");
  const std::array<double, 3> mus = {scale * intensities.mu_s(),
                                     scale * intensities.nu_1(),
                                     scale * intensities.nu_2()};
  std::array<double, 3> gains{};
  std::array<double, 3> qbers{};
  for (std::size_t i = 0; i < 3; ++i) {
    gains[i] = simulate_gain(mus[i], ch);
    qbers[i] = simulate_qber(mus[i], ch);
  }
  // Gains must follow the intensity ordering unless both ends saturated.
  for (std::size_t i = 0; i + 1 < 3; ++i) {
    if (gains[i] < gains[i + 1] || (gains[i] == gains[i + 1] && gains[i] < 1.0 &&
                                    mus[i] != mus[i + 1]))
      throw std::logic_error("observe: gain ordering violated");
  }
  return ObservedStats(gains, qbers);
}

}  // namespace greenlight
