#pragma once

#include <stdexcept>

#include "greenlight/core.hpp"
#include "greenlight/modulator.hpp"

namespace greenlight {

/// Transmitter-side defenses against light injection: isolator and filter
/// attenuation at the injection wavelength, plus an incident-light monitor
/// with a detection threshold above its noise floor.
class DefenseStack {
 public:
  DefenseStack(Decibel isolator, Decibel filter, double monitor_threshold_uW,
               double monitor_noise_floor_uW = 0.0)
      : isolator_(isolator),
        filter_(filter),
        monitor_threshold_uW_(monitor_threshold_uW),
        monitor_noise_floor_uW_(monitor_noise_floor_uW) {
    if (isolator.value() < 0.0 || filter.value() < 0.0)
      throw std::invalid_argument("DefenseStack: negative attenuation");
    if (!(monitor_noise_floor_uW >= 0.0) ||
        !(monitor_threshold_uW > monitor_noise_floor_uW))
      throw std::invalid_argument(
          "DefenseStack: monitor threshold must exceed the noise floor (>= 0)");
  }

  Decibel isolator() const { return isolator_; }
  Decibel filter() const { return filter_; }
  Decibel total_attenuation() const { return isolator_ + filter_; }
  double monitor_threshold_uW() const { return monitor_threshold_uW_; }
  double monitor_noise_floor_uW() const { return monitor_noise_floor_uW_; }

 private:
  Decibel isolator_;
  Decibel filter_;
  double monitor_threshold_uW_;
  double monitor_noise_floor_uW_;
};

enum class MonitorPosition { before_defenses, after_defenses };

/// Injected power that survives the isolator and filter.
inline double power_at_modulator(double injected_uW, const DefenseStack& stack) {
  if (!(injected_uW >= 0.0))
    throw std::domain_error("power_at_modulator: negative power");
  return injected_uW * db_to_transmittance(stack.total_attenuation());
}

/// Whether the incident-light monitor trips at the given injected power.
inline bool monitor_detects(double injected_uW, const DefenseStack& stack,
                            MonitorPosition position) {
  if (!(injected_uW >= 0.0))
    throw std::domain_error("monitor_detects: negative power");
  const double seen = position == MonitorPosition::before_defenses
                          ? injected_uW
                          : power_at_modulator(injected_uW, stack);
  return seen > stack.monitor_threshold_uW();
}

/// The insertion-loss change Eve can still induce through the defenses.
inline Decibel residual_attack_strength(double injected_uW,
                                        const DefenseStack& stack,
                                        const PhotorefractiveModel& model) {
  return loss_increase(model, power_at_modulator(injected_uW, stack));
}

}  // namespace greenlight
