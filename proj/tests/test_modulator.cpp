#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "greenlight/modulator.hpp"

using namespace greenlight;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr const char* kHeader =
    "sample_id,phase,step_index,injected_power_uW,exposure_s,insertion_loss_dB\n";

IrradiationSeries synthetic_alteration(double lmax, double p0, int steps = 15,
                                       double step_uW = 200.0) {
  IrradiationSeries s{"PM-X", SeriesPhase::alteration, {}};
  for (int i = 1; i <= steps; ++i) {
    const double p = i * step_uW;
    s.steps.push_back(
        IrradiationStep{p, 300.0, Decibel{lmax * (1.0 - std::exp(-p / p0))}});
  }
  return s;
}

const std::vector<IrradiationSeries>& bundled_series() {
  static const auto series = ingest_series("data/irradiation_series.csv");
  return series;
}

const IrradiationSeries& bundled(const std::string& id, SeriesPhase phase) {
  for (const auto& s : bundled_series())
    if (s.sample_id == id && s.phase == phase) return s;
  throw std::runtime_error("missing bundled series " + id);
}

}  // namespace

TEST_CASE("ingestion parses a well-formed series", "[modulator]") {
  std::stringstream in;
  in << kHeader;
  for (int i = 0; i < 10; ++i)
    in << "PM-5,alteration," << i << ',' << 200 * (i + 1) << ",300," << 2.0 * (i + 1)
       << '\n';
  const auto series = ingest_series(in);
  REQUIRE(series.size() == 1);
  CHECK(series[0].sample_id == "PM-5");
  CHECK(series[0].phase == SeriesPhase::alteration);
  CHECK(series[0].steps.size() == 10);
  CHECK(series[0].steps.back().injected_power_uW == 2000.0);
}

TEST_CASE("ingestion reports value errors with line numbers", "[modulator]") {
  std::stringstream in;
  in << kHeader << "PM-5,alteration,0,200,300,1.0\n"
     << "PM-5,alteration,1,400,300,-2.0\n";
  try {
    ingest_series(in);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    REQUIRE(e.items().size() == 1);
    CHECK_THAT(e.items()[0], ContainsSubstring("line 3"));
    CHECK_THAT(e.items()[0], ContainsSubstring("negative insertion loss"));
  }
}

TEST_CASE("ingestion rejects a wrong header", "[modulator]") {
  std::stringstream in;
  in << "sample,phase,loss\nPM-5,alteration,1.0\n";
  CHECK_THROWS_AS(ingest_series(in), IngestError);
  std::stringstream empty;
  CHECK_THROWS_AS(ingest_series(empty), IngestError);
}

TEST_CASE("ingestion itemizes schema and monotonicity violations", "[modulator]") {
  std::stringstream in;
  in << kHeader << "PM-5,alteration,0,600,300,1.0\n"
     << "PM-5,alteration,1,400,300,2.0\n"     // power decreases
     << "PM-5,alteration,3,800,300,3.0\n"     // step index skips 2
     << "PM-5,bake,0,200,300,1.0\n"           // bad phase
     << "PM-5,alteration,4,800,300\n";        // missing field
  try {
    ingest_series(in);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    REQUIRE(e.items().size() == 4);
    CHECK_THAT(e.items()[0], ContainsSubstring("line 3"));
    CHECK_THAT(e.items()[0], ContainsSubstring("injected power decreases"));
    CHECK_THAT(e.items()[1], ContainsSubstring("line 4"));
    CHECK_THAT(e.items()[1], ContainsSubstring("step_index"));
    CHECK_THAT(e.items()[2], ContainsSubstring("line 5"));
    CHECK_THAT(e.items()[3], ContainsSubstring("line 6"));
  }
}

TEST_CASE("recovery series may hold power constant while loss decays",
          "[modulator]") {
  std::stringstream in;
  in << kHeader << "PM-5,recovery,0,50,0,19.53\n"
     << "PM-5,recovery,1,50,30,11.85\n"
     << "PM-5,recovery,2,50,30,7.19\n";
  const auto series = ingest_series(in);
  REQUIRE(series.size() == 1);
  CHECK(series[0].phase == SeriesPhase::recovery);
  CHECK(series[0].steps.size() == 3);
}

TEST_CASE("bundled dataset carries the measured endpoints", "[modulator]") {
  const auto& pm5 = bundled("PM-5", SeriesPhase::alteration);
  CHECK(pm5.steps.size() == 10);
  CHECK(pm5.steps.back().injected_power_uW == 2000.0);
  CHECK(pm5.steps.back().insertion_loss.value() == 19.53);
  CHECK(bundled("PM-1", SeriesPhase::alteration).steps.back().insertion_loss.value() ==
        7.19);
  CHECK(bundled("IM-2", SeriesPhase::alteration).steps.back().insertion_loss.value() ==
        1.31);
  CHECK(bundled("IM-1", SeriesPhase::alteration).steps.back().insertion_loss.value() ==
        0.39);
  CHECK(bundled("PM-4", SeriesPhase::alteration).steps.back().injected_power_uW ==
        8000.0);
}

TEST_CASE("fitting recovers noiseless synthetic parameters", "[modulator]") {
  const FitResult fit = fit_model(synthetic_alteration(19.53, 600.0));
  CHECK_THAT(fit.model.delta_loss_max().value(), WithinRel(19.53, 1e-6));
  CHECK_THAT(fit.model.p0_uW(), WithinRel(600.0, 1e-6));
  CHECK(fit.rms_residual_db < 1e-9);
  CHECK(fit.residuals_db.size() == 15);

  // round trip across scales, sampling each curve from p0/5 to 8 p0
  for (const auto& [lmax, p0] : {std::pair{0.39, 250.0}, std::pair{1.31, 5000.0},
                                 std::pair{25.0, 60.0}}) {
    const FitResult f = fit_model(synthetic_alteration(lmax, p0, 40, p0 / 5.0));
    CHECK_THAT(f.model.delta_loss_max().value(), WithinRel(lmax, 1e-6));
    CHECK_THAT(f.model.p0_uW(), WithinRel(p0, 1e-6));
  }
}

TEST_CASE("fitting rejects degenerate series", "[modulator]") {
  IrradiationSeries flat{"PM-X", SeriesPhase::alteration, {}};
  for (int i = 1; i <= 5; ++i)
    flat.steps.push_back(IrradiationStep{i * 200.0, 300.0, Decibel{0.0}});
  CHECK_THROWS_AS(fit_model(flat), std::invalid_argument);

  IrradiationSeries two{"PM-X", SeriesPhase::alteration, {}};
  two.steps.push_back(IrradiationStep{200.0, 300.0, Decibel{1.0}});
  two.steps.push_back(IrradiationStep{400.0, 300.0, Decibel{2.0}});
  CHECK_THROWS_AS(fit_model(two), std::invalid_argument);
}

TEST_CASE("slow-saturating sample fits to a sub-dB ceiling", "[modulator]") {
  // barely responding device: 0.5 dB at 8 mW, near-flat below 2 mW
  const double lmax = 0.5 / (1.0 - std::exp(-2.0));
  const FitResult fit = fit_model(synthetic_alteration(lmax, 4000.0, 40));
  CHECK(fit.model.delta_loss_max().value() <= 1.0);
  CHECK_THAT(fit.model.delta_loss_max().value(), WithinRel(lmax, 1e-6));
}

TEST_CASE("fitted response reproduces the PM-5 endpoint", "[modulator]") {
  const FitResult fit = fit_model(bundled("PM-5", SeriesPhase::alteration));
  CHECK_THAT(loss_increase(fit.model, 2000.0).value(), WithinAbs(19.53, 0.05));
  CHECK_THAT(fit.model.delta_loss_max().value(), WithinAbs(19.53, 0.05));
  CHECK(fit.rms_residual_db < 0.01);
}

TEST_CASE("loss increase is zero at zero power and saturates", "[modulator]") {
  const PhotorefractiveModel model(Decibel{19.53}, 600.0);
  CHECK(loss_increase(model, 0.0).value() == 0.0);
  CHECK_THAT(loss_increase(model, 1e12).value(), WithinRel(19.53, 1e-12));
  CHECK_THROWS_AS(loss_increase(model, -1.0), std::domain_error);

  double prev = -1.0;
  for (int i = 0; i <= 50; ++i) {
    const double v = loss_increase(model, i * 100.0).value();
    CHECK(v >= prev - 1e-12);
    CHECK(v <= 19.53 + 1e-12);
    prev = v;
  }
}

TEST_CASE("illuminated recovery decays exponentially", "[modulator]") {
  const PhotorefractiveModel model(Decibel{19.53}, 250.0, 60.0);
  const Decibel initial{19.53};
  CHECK(recovery_excess_loss(model, initial, 0.0, RecoveryMode::illuminated_50uW)
            .value() == 19.53);
  const double after300 =
      recovery_excess_loss(model, initial, 300.0, RecoveryMode::illuminated_50uW)
          .value();
  CHECK(after300 < 0.05 * 19.53);
  double prev = 19.53;
  for (int i = 1; i <= 20; ++i) {
    const double v = recovery_excess_loss(model, initial, i * 30.0,
                                          RecoveryMode::illuminated_50uW)
                         .value();
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
  CHECK_THROWS_AS(
      recovery_excess_loss(model, Decibel{-1.0}, 10.0, RecoveryMode::illuminated_50uW),
      std::domain_error);
  CHECK_THROWS_AS(
      recovery_excess_loss(model, initial, -1.0, RecoveryMode::illuminated_50uW),
      std::domain_error);
}

TEST_CASE("dark storage relaxes linearly from the 3-day measurement", "[modulator]") {
  const PhotorefractiveModel pm1(Decibel{7.19}, 250.0, 60.0, 1.56 / 3.0);
  const double left =
      recovery_excess_loss(pm1, Decibel{7.19}, 3.0 * 86400.0, RecoveryMode::dark)
          .value();
  CHECK_THAT(left, WithinAbs(5.63, 1e-12));
  // long enough dark storage floors at zero
  CHECK(recovery_excess_loss(pm1, Decibel{7.19}, 100.0 * 86400.0, RecoveryMode::dark)
            .value() == 0.0);
}

TEST_CASE("recovery time constant fits from a decay series", "[modulator]") {
  IrradiationSeries series{"PM-X", SeriesPhase::recovery, {}};
  for (int i = 0; i <= 8; ++i)
    series.steps.push_back(IrradiationStep{
        50.0, i == 0 ? 0.0 : 30.0, Decibel{19.53 * std::exp(-(30.0 * i) / 60.0)}});
  CHECK_THAT(fit_recovery_tau(series), WithinRel(60.0, 1e-9));

  const double tau_pm5 = fit_recovery_tau(bundled("PM-5", SeriesPhase::recovery));
  CHECK_THAT(tau_pm5, WithinAbs(60.0, 3.0));
  const double tau_im2 = fit_recovery_tau(bundled("IM-2", SeriesPhase::recovery));
  CHECK_THAT(tau_im2, WithinRel(5000.0, 0.05));
}

TEST_CASE("phase remapping from half-wave voltage shifts", "[modulator]") {
  constexpr double pi = 3.14159265358979323846;
  CHECK(phase_remap_delta(4.0, 4.0) == pi);
  CHECK_THAT(phase_remap_delta(3.99, 6.80), WithinAbs(0.5868 * pi, 1e-3));
  CHECK_THAT(phase_remap_delta(3.99, 6.80), WithinRel(pi * 3.99 / 6.80, 1e-15));
  CHECK_THAT(phase_remap_delta(4.04, 5.57), WithinAbs(0.7253 * pi, 1e-3));
  CHECK(phase_remap_delta(3.99, 6.80) < pi);
  CHECK_THROWS_AS(phase_remap_delta(0.0, 5.0), std::domain_error);
  CHECK_THROWS_AS(phase_remap_delta(4.0, -5.0), std::domain_error);
}

TEST_CASE("extinction penalty of intensity modulators", "[modulator]") {
  const auto records = load_records("data/modulator_records.csv");
  REQUIRE(records.size() == 7);

  const auto find = [&](const std::string& id) -> const ModulatorRecord& {
    for (const auto& r : records)
      if (r.id == id) return r;
    throw std::runtime_error("missing record " + id);
  };

  CHECK(extinction_penalty(find("IM-1")).value() == 21.23);
  CHECK(extinction_penalty(find("IM-2")).value() == 6.50);
  CHECK_THROWS_AS(extinction_penalty(find("PM-5")), std::invalid_argument);

  ModulatorRecord same;
  same.id = "IM-X";
  same.kind = ModulatorKind::intensity;
  same.extinction_before = Decibel{20.0};
  same.extinction_after = Decibel{20.0};
  CHECK(extinction_penalty(same).value() == 0.0);

  for (const auto& r : records) {
    CHECK(r.vpi_after_V >= r.vpi_before_V);
    CHECK((r.kind == ModulatorKind::intensity) == r.extinction_before.has_value());
    CHECK((r.kind == ModulatorKind::intensity) == r.extinction_after.has_value());
  }
}

TEST_CASE("record loading rejects malformed rows", "[modulator]") {
  const auto expect_items = [](const std::string& body, const std::string& needle) {
    std::stringstream in;
    in << "id,kind,vpi_before_V,vpi_after_V,vpi_recovered_V,max_delta_loss_dB,"
          "extinction_before_dB,extinction_after_dB,natural_recovery_3day_dB\n"
       << body;
    try {
      load_records(in);
      FAIL("expected IngestError for: " << body);
    } catch (const IngestError& e) {
      CHECK_THAT(e.what(), ContainsSubstring(needle));
    }
  };
  expect_items("PM-9,laser,1,2,1,3,,,0\n", "kind must be");
  expect_items("PM-9,phase,1,2,1,3,40,20,0\n", "extinction fields must be empty");
  expect_items("IM-9,intensity,1,2,1,3,,,0\n", "bad extinction_before_dB");
  expect_items("PM-9,phase,xx,2,1,3,,,0\n", "bad vpi_before_V");
  expect_items("PM-9,phase,1,2,1\n", "expected 9 fields");
}

TEST_CASE("replicate series stay within the stability bands", "[modulator]") {
  const auto checks = validate_replicates(bundled_series());
  // PM-5 and IM-2 each carry three replicates of both phases
  CHECK(checks.size() == 12);
  for (const auto& c : checks) {
    INFO(c.replicate_id << " max dev " << c.max_deviation_db);
    CHECK(c.within_tolerance);
    if (c.sample_id == "PM-5") CHECK(c.tolerance_db == 0.1);
    if (c.sample_id == "IM-2") CHECK(c.tolerance_db == 0.02);
  }
}

TEST_CASE("diverging replicates are flagged, not fatal", "[modulator]") {
  std::stringstream in;
  in << kHeader;
  for (int i = 0; i < 5; ++i)
    in << "PM-9,alteration," << i << ',' << 200 * (i + 1) << ",300," << 1.0 * (i + 1)
       << '\n';
  for (int i = 0; i < 5; ++i)
    in << "PM-9-rep1,alteration," << i << ',' << 200 * (i + 1) << ",300,"
       << 1.0 * (i + 1) + 0.5 << '\n';
  const auto checks = validate_replicates(ingest_series(in));
  REQUIRE(checks.size() == 1);
  CHECK_FALSE(checks[0].within_tolerance);
  CHECK_THAT(checks[0].max_deviation_db, WithinAbs(0.5, 1e-12));
}

TEST_CASE("sample ids parse into base and kind", "[modulator]") {
  CHECK(base_sample_id("PM-5-rep2") == "PM-5");
  CHECK(base_sample_id("PM-5") == "PM-5");
  CHECK(base_sample_id("IM-2-repX") == "IM-2-repX");  // not a replicate suffix
  CHECK(infer_kind("PM-1") == ModulatorKind::phase);
  CHECK(infer_kind("IM-2") == ModulatorKind::intensity);
  CHECK_FALSE(infer_kind("XZ-1").has_value());
}
