#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "greenlight/channel.hpp"
#include "oracles.hpp"

using namespace greenlight;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ChannelParams reference_channel() {
  // 10 dB link + 0.6 detector, Y0 = 2.6e-5, e_d = 0.01, f_e = 1.12
  return ChannelParams(Decibel{10.0}, 0.6, 2.6e-5, 0.01, 1.12);
}

}  // namespace

TEST_CASE("channel parameter validation", "[channel]") {
  CHECK_NOTHROW(reference_channel());
  CHECK_THROWS_AS(ChannelParams(Decibel{-1.0}, 0.6, 2.6e-5, 0.01, 1.12),
                  std::invalid_argument);
  CHECK_THROWS_AS(ChannelParams(Decibel{10.0}, 0.0, 2.6e-5, 0.01, 1.12),
                  std::invalid_argument);
  CHECK_THROWS_AS(ChannelParams(Decibel{10.0}, 1.5, 2.6e-5, 0.01, 1.12),
                  std::invalid_argument);
  CHECK_THROWS_AS(ChannelParams(Decibel{10.0}, 0.6, -1e-6, 0.01, 1.12),
                  std::invalid_argument);
  CHECK_THROWS_AS(ChannelParams(Decibel{10.0}, 0.6, 2.6e-5, 0.5, 1.12),
                  std::invalid_argument);
  CHECK_THROWS_AS(ChannelParams(Decibel{10.0}, 0.6, 2.6e-5, 0.01, 0.9),
                  std::invalid_argument);
}

TEST_CASE("total transmittance composes link loss and detector", "[channel]") {
  CHECK_THAT(total_transmittance(reference_channel()), WithinRel(0.06, 1e-12));
  CHECK(total_transmittance(ChannelParams(Decibel{0.0}, 1.0, 0.0, 0.0, 1.0)) == 1.0);
  CHECK_THAT(total_transmittance(ChannelParams(Decibel{20.0}, 0.6, 0.0, 0.0, 1.0)),
             WithinRel(0.006, 1e-12));
}

TEST_CASE("total loss in dB", "[channel]") {
  // 10 dB link + 0.6 detector efficiency = 12.22 dB total
  CHECK_THAT(reference_channel().total_loss().value(), WithinAbs(12.22, 5e-3));
  const ChannelParams re = reference_channel().with_total_loss(Decibel{12.22});
  CHECK_THAT(total_transmittance(re), WithinRel(0.05998, 1e-3));
  CHECK(re.background_rate() == reference_channel().background_rate());
}

TEST_CASE("gain of vacuum, typical and saturated pulses", "[channel]") {
  const ChannelParams ch = reference_channel();
  CHECK(simulate_gain(0.0, ch) == 2.6e-5);
  CHECK_THAT(simulate_gain(0.5, ch), WithinAbs(0.029580, 1e-6));
  CHECK_THAT(simulate_gain(0.5, ch), WithinAbs(0.029579698035364, 1e-12));
  CHECK(simulate_gain(1e9, ch) == 1.0);
  CHECK_THROWS_AS(simulate_gain(-0.1, ch), std::domain_error);
}

TEST_CASE("gain matches the brute-force Poisson mixture", "[channel]") {
  std::mt19937 rng(777);
  std::uniform_real_distribution<double> mu_d(0.0, 1.0), eta_d(1e-4, 1.0),
      y0_d(0.0, 1e-3);
  for (int i = 0; i < 300; ++i) {
    const double mu = mu_d(rng), eta = eta_d(rng), y0 = y0_d(rng);
    const ChannelParams ch(transmittance_to_db(eta), 1.0, y0, 0.01, 1.12);
    CHECK_THAT(simulate_gain(mu, ch),
               WithinAbs(oracles::poisson_mixture_gain(mu, eta, y0), 1e-10));
  }
}

TEST_CASE("gain is strictly increasing and concave in intensity", "[channel]") {
  const ChannelParams ch = reference_channel();
  const double h = 0.01;
  double prev = simulate_gain(0.0, ch);
  double prev_diff = -1.0;
  bool first = true;
  for (int i = 1; i <= 400; ++i) {
    const double q = simulate_gain(i * h, ch);
    const double diff = q - prev;
    CHECK(diff > 0.0);
    if (!first) CHECK(diff <= prev_diff + 1e-10);
    first = false;
    prev = q;
    prev_diff = diff;
  }
}

TEST_CASE("qber of vacuum, typical and bright pulses", "[channel]") {
  const ChannelParams ch = reference_channel();
  CHECK(simulate_qber(0.0, ch) == 0.5);
  CHECK_THAT(simulate_qber(0.5, ch), WithinAbs(0.010430, 1e-5));
  CHECK_THAT(simulate_qber(0.5, ch), WithinAbs(0.010430960591485, 1e-12));
  CHECK_THAT(simulate_qber(500.0, ch), WithinAbs(0.01, 2e-5));
  CHECK_THROWS_AS(simulate_qber(-0.1, ch), std::domain_error);
}

TEST_CASE("qber decreases with intensity when e_0 > e_d", "[channel]") {
  const ChannelParams ch = reference_channel();
  double prev = simulate_qber(0.0, ch);
  for (int i = 1; i <= 200; ++i) {
    const double e = simulate_qber(i * 0.01, ch);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("observation at scale 1 matches the per-intensity simulation", "[channel]") {
  const ChannelParams ch = reference_channel();
  const IntensitySet set(0.48, 0.05);
  const ObservedStats stats = observe(set, 1.0, ch);
  CHECK(stats.gain(IntensityLabel::signal) == simulate_gain(0.48, ch));
  CHECK(stats.gain(IntensityLabel::decoy1) == simulate_gain(0.05, ch));
  CHECK(stats.gain(IntensityLabel::decoy2) == simulate_gain(0.0, ch));
  CHECK(stats.qber(IntensityLabel::signal) == simulate_qber(0.48, ch));
  CHECK(stats.qber(IntensityLabel::decoy2) == 0.5);
}

TEST_CASE("scaled observation equals observing a pre-scaled set", "[channel]") {
  const ChannelParams ch = reference_channel();
  const IntensitySet set(0.48, 0.05);
  for (double k : {1.0, 1.2589254117941673, 2.0, 10.0, 89.7}) {
    const ObservedStats scaled = observe(set, k, ch);
    const ObservedStats direct = observe(set.scaled(k), 1.0, ch);
    for (IntensityLabel l : kIntensityLabels) {
      CHECK(scaled.gain(l) == direct.gain(l));
      CHECK(scaled.qber(l) == direct.qber(l));
    }
  }
}

TEST_CASE("observed gains and QBERs stay in their physical ranges", "[channel]") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> mu_d(0.01, 1.0), k_d(1.0, 90.0);
  const ChannelParams ch = reference_channel();
  for (int i = 0; i < 200; ++i) {
    const double mu = mu_d(rng);
    const IntensitySet set(mu, mu * 0.1);
    const ObservedStats stats = observe(set, k_d(rng), ch);
    double prev_gain = 2.0;
    for (IntensityLabel l : kIntensityLabels) {
      CHECK(stats.gain(l) >= ch.background_rate());
      CHECK(stats.gain(l) <= 1.0);
      CHECK(stats.gain(l) < prev_gain);  // strictly ordered with intensity
      CHECK(stats.qber(l) > 0.0);
      CHECK(stats.qber(l) <= 0.5);
      prev_gain = stats.gain(l);
    }
  }
}

TEST_CASE("a 3.01 dB loss removal doubles every effective intensity", "[channel]") {
  const ChannelParams ch = reference_channel();
  const IntensitySet set(0.48, 0.05);
  const double k = std::pow(10.0, 3.01 / 10.0);  // ~2
  const ObservedStats stats = observe(set, k, ch);
  CHECK_THAT(stats.gain(IntensityLabel::signal),
             WithinRel(simulate_gain(2.0 * 0.48, ch), 1e-4));
  // vacuum decoy row is immune to scaling
  CHECK(stats.gain(IntensityLabel::decoy2) == simulate_gain(0.0, ch));
  CHECK(stats.qber(IntensityLabel::decoy2) == 0.5);
  CHECK_THROWS_AS(observe(set, 0.0, ch), std::domain_error);
}
