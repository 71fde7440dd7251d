#pragma once

#include <cmath>
#include <compare>
#include <stdexcept>
#include <string>

namespace greenlight {

/// Strong type for losses and attenuations in dB. Keeps decibel quantities
/// from mixing silently with linear transmittances and scale factors.
class Decibel {
 public:
  constexpr Decibel() = default;
  constexpr explicit Decibel(double db) : db_(db) {}

  constexpr double value() const { return db_; }

  friend constexpr Decibel operator+(Decibel a, Decibel b) {
    return Decibel{a.db_ + b.db_};
  }
  friend constexpr Decibel operator-(Decibel a, Decibel b) {
    return Decibel{a.db_ - b.db_};
  }
  friend constexpr auto operator<=>(Decibel, Decibel) = default;

 private:
  double db_ = 0.0;
};

/// Binary entropy in bits, with the 0*log2(0) = 0 endpoint convention.
inline double binary_entropy(double x) {
  if (!(x >= 0.0) || x > 1.0)
    throw std::domain_error("binary_entropy: argument must lie in [0, 1], got " +
                            std::to_string(x));
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

/// Linear transmittance 10^(-loss/10) of a non-negative loss.
inline double db_to_transmittance(Decibel loss) {
  if (loss.value() < 0.0)
    throw std::domain_error("db_to_transmittance: negative loss " +
                            std::to_string(loss.value()) + " dB");
  return std::pow(10.0, -loss.value() / 10.0);
}

/// Loss in dB of a linear transmittance in (0, 1].
inline Decibel transmittance_to_db(double t) {
  if (!(t > 0.0) || t > 1.0)
    throw std::domain_error("transmittance_to_db: transmittance must lie in (0, 1], got " +
                            std::to_string(t));
  return Decibel{-10.0 * std::log10(t)};
}

/// Signal and decoy mean photon numbers, ordered mu_s > nu_1 > nu_2 >= 0.
/// The protocol configuration modeled here uses a vacuum second decoy
/// (nu_2 = 0), which the two-argument constructor pins.
class IntensitySet {
 public:
  IntensitySet(double mu_s, double nu_1, double nu_2 = 0.0)
      : mu_s_(mu_s), nu_1_(nu_1), nu_2_(nu_2) {
    if (!(nu_2 >= 0.0 && nu_1 > nu_2 && mu_s > nu_1))
      throw std::invalid_argument(
          "IntensitySet: require mu_s > nu_1 > nu_2 >= 0, got mu_s=" +
          std::to_string(mu_s) + " nu_1=" + std::to_string(nu_1) +
          " nu_2=" + std::to_string(nu_2));
  }

  double mu_s() const { return mu_s_; }
  double nu_1() const { return nu_1_; }
  double nu_2() const { return nu_2_; }

  /// The same pulse set with every intensity multiplied by k > 0.
  IntensitySet scaled(double k) const {
    if (!(k > 0.0))
      throw std::domain_error("IntensitySet::scaled: scale must be positive");
    return IntensitySet(mu_s_ * k, nu_1_ * k, nu_2_ * k);
  }

 private:
  double mu_s_;
  double nu_1_;
  double nu_2_;
};

}  // namespace greenlight
