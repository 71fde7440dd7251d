#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "greenlight/core.hpp"

namespace greenlight {

enum class ModulatorKind { phase, intensity };
enum class SeriesPhase { alteration, recovery };
enum class RecoveryMode { illuminated_50uW, dark };

/// Summary measurements of one modulator sample: half-wave voltages before
/// irradiation, after irradiation and after restoring illumination, the
/// maximum insertion-loss increase, extinction ratios (intensity modulators
/// only) and the loss recovered over three days of dark storage.
struct ModulatorRecord {
  std::string id;
  ModulatorKind kind = ModulatorKind::phase;
  double vpi_before_V = 0.0;
  double vpi_after_V = 0.0;
  double vpi_recovered_V = 0.0;
  Decibel max_delta_loss;
  std::optional<Decibel> extinction_before;
  std::optional<Decibel> extinction_after;
  Decibel natural_recovery_3day;
};

struct IrradiationStep {
  double injected_power_uW = 0.0;
  double exposure_s = 0.0;
  Decibel insertion_loss;
};

/// One measured series: stepped-power irradiation (alteration) or decay under
/// restoring illumination (recovery). Losses are increases over the sample's
/// pre-irradiation baseline.
struct IrradiationSeries {
  std::string sample_id;
  SeriesPhase phase = SeriesPhase::alteration;
  std::vector<IrradiationStep> steps;
};

/// Error in a measurement CSV; carries one message per offending line.
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(std::vector<std::string> items)
      : std::runtime_error(join(items)), items_(std::move(items)) {}

  const std::vector<std::string>& items() const { return items_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string all = "measurement CSV rejected:";
    for (const auto& m : items) all += "\n  " + m;
    return all;
  }
  std::vector<std::string> items_;
};

/// Saturating photorefractive response: excess insertion loss
/// delta_loss_max * (1 - e^(-P/p0)) under injected power P, exponential decay
/// with recovery_tau under restoring illumination, and linear dark relaxation.
/// Zero power gives exactly zero excess loss by construction.
class PhotorefractiveModel {
 public:
  PhotorefractiveModel(Decibel delta_loss_max, double p0_uW,
                       double recovery_tau_s = 60.0,
                       double dark_relaxation_db_per_day = 0.0)
      : delta_loss_max_(delta_loss_max),
        p0_uW_(p0_uW),
        recovery_tau_s_(recovery_tau_s),
        dark_relaxation_db_per_day_(dark_relaxation_db_per_day) {
    if (!(delta_loss_max.value() > 0.0) || !(p0_uW > 0.0) || !(recovery_tau_s > 0.0))
      throw std::invalid_argument(
          "PhotorefractiveModel: delta_loss_max, p0 and recovery_tau must be positive");
    if (!(dark_relaxation_db_per_day >= 0.0))
      throw std::invalid_argument("PhotorefractiveModel: negative dark relaxation");
  }

  Decibel delta_loss_max() const { return delta_loss_max_; }
  double p0_uW() const { return p0_uW_; }
  double recovery_tau_s() const { return recovery_tau_s_; }
  double dark_relaxation_db_per_day() const { return dark_relaxation_db_per_day_; }

 private:
  Decibel delta_loss_max_;
  double p0_uW_;
  double recovery_tau_s_;
  double dark_relaxation_db_per_day_;
};

/// Excess insertion loss induced by the given injected power.
inline Decibel loss_increase(const PhotorefractiveModel& model, double power_uW) {
  if (!(power_uW >= 0.0))
    throw std::domain_error("loss_increase: negative power");
  return Decibel{model.delta_loss_max().value() *
                 (1.0 - std::exp(-power_uW / model.p0_uW()))};
}

/// Excess loss remaining after `elapsed_s` of recovery. Illuminated recovery
/// decays exponentially; dark storage relaxes linearly per day and floors at
/// zero.
inline Decibel recovery_excess_loss(const PhotorefractiveModel& model,
                                    Decibel initial_excess, double elapsed_s,
                                    RecoveryMode mode) {
  if (initial_excess.value() < 0.0)
    throw std::domain_error("recovery_excess_loss: negative initial excess");
  if (!(elapsed_s >= 0.0))
    throw std::domain_error("recovery_excess_loss: negative elapsed time");
  if (mode == RecoveryMode::illuminated_50uW)
    return Decibel{initial_excess.value() *
                   std::exp(-elapsed_s / model.recovery_tau_s())};
  const double days = elapsed_s / 86400.0;
  return Decibel{std::max(
      0.0, initial_excess.value() - model.dark_relaxation_db_per_day() * days)};
}

/// Effective encoded-phase span after a half-wave-voltage increase: the
/// nominal {0, pi/2, pi, 3pi/2} alphabet becomes {0, d/2, d, 3d/2} with
/// d = pi * vpi_before / vpi_after.
inline double phase_remap_delta(double vpi_before_V, double vpi_after_V) {
  if (!(vpi_before_V > 0.0) || !(vpi_after_V > 0.0))
    throw std::domain_error("phase_remap_delta: voltages must be positive");
  constexpr double pi = 3.14159265358979323846;
  return pi * vpi_before_V / vpi_after_V;
}

/// Extinction-ratio decrease of an intensity modulator.
inline Decibel extinction_penalty(const ModulatorRecord& record) {
  if (record.kind != ModulatorKind::intensity)
    throw std::invalid_argument("extinction_penalty: '" + record.id +
                                "' is not an intensity modulator");
  if (!record.extinction_before || !record.extinction_after)
    throw std::invalid_argument("extinction_penalty: '" + record.id +
                                "' lacks extinction measurements");
  return *record.extinction_before - *record.extinction_after;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses irradiation series from CSV with the header
///   sample_id,phase,step_index,injected_power_uW,exposure_s,insertion_loss_dB
/// Lines starting with '#' and blank lines are skipped. Rows are grouped into
/// one series per (sample_id, phase) in order of first appearance. All schema,
/// value and monotonicity violations are collected and reported together with
/// their line numbers.
inline std::vector<IrradiationSeries> ingest_series(std::istream& in) {
  static const std::string kHeader =
      "sample_id,phase,step_index,injected_power_uW,exposure_s,insertion_loss_dB";

  std::vector<std::string> errors;
  std::string line;
  int line_no = 0;

  // header (first non-comment, non-blank line)
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t != kHeader)
      throw IngestError({"line " + std::to_string(line_no) +
                         ": expected header '" + kHeader + "', got '" + t + "'"});
    have_header = true;
    break;
  }
  if (!have_header) throw IngestError({"empty file: missing header"});

  std::vector<IrradiationSeries> series;
  std::map<std::pair<std::string, int>, std::size_t> index;  // (id, phase) -> slot
  std::map<std::pair<std::string, int>, int> last_step;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = detail::split_csv_line(t);
    const std::string at = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 6) {
      errors.push_back(at + "expected 6 fields, got " + std::to_string(fields.size()));
      continue;
    }

    const std::string& id = fields[0];
    SeriesPhase phase;
    if (fields[1] == "alteration") {
      phase = SeriesPhase::alteration;
    } else if (fields[1] == "recovery") {
      phase = SeriesPhase::recovery;
    } else {
      errors.push_back(at + "phase must be 'alteration' or 'recovery', got '" +
                       fields[1] + "'");
      continue;
    }

    double step_d, power, exposure, loss;
    if (!detail::parse_double(fields[2], step_d) || step_d != std::floor(step_d)) {
      errors.push_back(at + "step_index is not an integer: '" + fields[2] + "'");
      continue;
    }
    if (!detail::parse_double(fields[3], power)) {
      errors.push_back(at + "bad injected_power_uW: '" + fields[3] + "'");
      continue;
    }
    if (!detail::parse_double(fields[4], exposure)) {
      errors.push_back(at + "bad exposure_s: '" + fields[4] + "'");
      continue;
    }
    if (!detail::parse_double(fields[5], loss)) {
      errors.push_back(at + "bad insertion_loss_dB: '" + fields[5] + "'");
      continue;
    }

    if (id.empty()) errors.push_back(at + "empty sample_id");
    if (power < 0.0) errors.push_back(at + "negative injected power");
    if (exposure < 0.0) errors.push_back(at + "negative exposure");
    if (loss < 0.0) errors.push_back(at + "negative insertion loss");

    const auto key = std::make_pair(id, static_cast<int>(phase));
    const int step = static_cast<int>(step_d);
    auto it = index.find(key);
    if (it == index.end()) {
      if (step != 0)
        errors.push_back(at + "series " + id + "/" + fields[1] +
                         " must start at step_index 0, got " + fields[2]);
      index.emplace(key, series.size());
      series.push_back(IrradiationSeries{id, phase, {}});
      it = index.find(key);
    } else {
      if (step != last_step[key] + 1)
        errors.push_back(at + "step_index not strictly increasing for " + id + "/" +
                         fields[1] + " (previous " + std::to_string(last_step[key]) +
                         ", got " + fields[2] + ")");
      if (phase == SeriesPhase::alteration &&
          power < series[it->second].steps.back().injected_power_uW)
        errors.push_back(at + "injected power decreases within alteration series " +
                         id);
    }
    last_step[key] = step;
    series[it->second].steps.push_back(IrradiationStep{power, exposure, Decibel{loss}});
  }

  if (!errors.empty()) throw IngestError(std::move(errors));
  for (const auto& s : series)
    if (s.steps.empty()) throw IngestError({"series " + s.sample_id + " is empty"});
  return series;
}

inline std::vector<IrradiationSeries> ingest_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError({"cannot open '" + path + "'"});
  return ingest_series(in);
}

/// A fitted response model with its per-point residuals (data minus fit).
struct FitResult {
  PhotorefractiveModel model;
  std::vector<double> residuals_db;
  double rms_residual_db = 0.0;
};

/// Least-squares fit of delta_loss(P) = L_max (1 - e^(-P/p0)) to the
/// step-end losses of an alteration series. For fixed p0 the optimal L_max is
/// linear; p0 itself is located by a coarse logarithmic scan refined by
/// golden-section search, which keeps the fit deterministic and derivative
/// free.
inline FitResult fit_model(const IrradiationSeries& series) {
  if (series.phase != SeriesPhase::alteration)
    throw std::invalid_argument("fit_model: expected an alteration-phase series");

  std::vector<double> powers, losses;
  for (const auto& s : series.steps) {
    powers.push_back(s.injected_power_uW);
    losses.push_back(s.insertion_loss.value());
  }
  std::vector<double> distinct = powers;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3)
    throw std::invalid_argument("fit_model: need at least 3 distinct powers, got " +
                                std::to_string(distinct.size()));
  if (*std::max_element(losses.begin(), losses.end()) <= 0.0)
    throw std::invalid_argument("fit_model: degenerate series, no loss increase in '" +
                                series.sample_id + "'");

  const auto sse_and_lmax = [&](double p0) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
      const double g = 1.0 - std::exp(-powers[i] / p0);
      num += losses[i] * g;
      den += g * g;
    }
    const double lmax = den > 0.0 ? num / den : 0.0;
    double sse = 0.0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
      const double g = 1.0 - std::exp(-powers[i] / p0);
      const double r = losses[i] - lmax * g;
      sse += r * r;
    }
    return std::make_pair(sse, lmax);
  };

  // coarse scan over log10(p0), then golden-section refinement
  const double pmax = distinct.back();
  const double lo = std::log10(pmax) - 5.0;
  const double hi = std::log10(pmax) + 3.0;
  const int n_scan = 400;
  double best_log = lo, best_sse = sse_and_lmax(std::pow(10.0, lo)).first;
  for (int i = 1; i < n_scan; ++i) {
    const double lg = lo + (hi - lo) * i / (n_scan - 1);
    const double s = sse_and_lmax(std::pow(10.0, lg)).first;
    if (s < best_sse) {
      best_sse = s;
      best_log = lg;
    }
  }
  const double span = (hi - lo) / (n_scan - 1);
  double a = best_log - span, b = best_log + span;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = sse_and_lmax(std::pow(10.0, x1)).first;
  double f2 = sse_and_lmax(std::pow(10.0, x2)).first;
  for (int i = 0; i < 120; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = sse_and_lmax(std::pow(10.0, x1)).first;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = sse_and_lmax(std::pow(10.0, x2)).first;
    }
  }
  const double p0 = std::pow(10.0, 0.5 * (a + b));
  const auto [sse, lmax] = sse_and_lmax(p0);
  if (!(lmax > 0.0))
    throw std::invalid_argument("fit_model: degenerate fit for '" + series.sample_id +
                                "'");

  FitResult result{PhotorefractiveModel(Decibel{lmax}, p0), {}, 0.0};
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double g = 1.0 - std::exp(-powers[i] / p0);
    result.residuals_db.push_back(losses[i] - lmax * g);
  }
  result.rms_residual_db = std::sqrt(sse / static_cast<double>(powers.size()));
  return result;
}

/// Exponential time constant of a recovery series, by least squares on
/// log(excess) against cumulative exposure through the origin. The first
/// step anchors the initial excess; later steps with zero remaining loss are
/// ignored.
inline double fit_recovery_tau(const IrradiationSeries& series) {
  if (series.phase != SeriesPhase::recovery)
    throw std::invalid_argument("fit_recovery_tau: expected a recovery-phase series");
  if (series.steps.size() < 2)
    throw std::invalid_argument("fit_recovery_tau: need at least 2 steps");
  const double l0 = series.steps.front().insertion_loss.value();
  if (!(l0 > 0.0))
    throw std::invalid_argument("fit_recovery_tau: zero initial excess in '" +
                                series.sample_id + "'");
  double t = series.steps.front().exposure_s;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 1; i < series.steps.size(); ++i) {
    t += series.steps[i].exposure_s;
    const double l = series.steps[i].insertion_loss.value();
    if (!(l > 0.0)) continue;
    const double y = std::log(l / l0);
    stt += t * t;
    sty += t * y;
  }
  if (!(stt > 0.0) || !(sty < 0.0))
    throw std::invalid_argument("fit_recovery_tau: series '" + series.sample_id +
                                "' does not decay");
  return -stt / sty;
}

/// Modulator kind inferred from the conventional sample-id prefix.
inline std::optional<ModulatorKind> infer_kind(std::string_view sample_id) {
  if (sample_id.substr(0, 2) == "PM") return ModulatorKind::phase;
  if (sample_id.substr(0, 2) == "IM") return ModulatorKind::intensity;
  return std::nullopt;
}

/// Strips a trailing "-rep<N>" replicate suffix, if present.
inline std::string base_sample_id(std::string_view sample_id) {
  const auto pos = sample_id.rfind("-rep");
  if (pos == std::string_view::npos) return std::string(sample_id);
  const auto tail = sample_id.substr(pos + 4);
  if (tail.empty() || tail.find_first_not_of("0123456789") != std::string_view::npos)
    return std::string(sample_id);
  return std::string(sample_id.substr(0, pos));
}

/// Pointwise comparison of a replicate series against its primary.
struct ReplicateCheck {
  std::string sample_id;     // base sample
  std::string replicate_id;  // the -repN series
  SeriesPhase phase = SeriesPhase::alteration;
  double max_deviation_db = 0.0;
  double tolerance_db = 0.0;
  bool within_tolerance = true;
};

/// Checks every replicate series against the primary series of the same
/// sample and phase, step by step. Phase modulators must agree within 0.1 dB
/// and intensity modulators within 0.02 dB; violations are flagged, never
/// fatal.
inline std::vector<ReplicateCheck> validate_replicates(
    const std::vector<IrradiationSeries>& all) {
  const auto find_primary = [&all](const std::string& id,
                                   SeriesPhase phase) -> const IrradiationSeries* {
    for (const auto& s : all)
      if (s.sample_id == id && s.phase == phase) return &s;
    return nullptr;
  };

  std::vector<ReplicateCheck> checks;
  for (const auto& s : all) {
    const std::string base = base_sample_id(s.sample_id);
    if (base == s.sample_id) continue;
    const IrradiationSeries* primary = find_primary(base, s.phase);
    if (!primary) continue;

    ReplicateCheck check;
    check.sample_id = base;
    check.replicate_id = s.sample_id;
    check.phase = s.phase;
    const auto kind = infer_kind(base);
    check.tolerance_db =
        (kind && *kind == ModulatorKind::intensity) ? 0.02 : 0.1;

    const std::size_t n = std::min(s.steps.size(), primary->steps.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double dev = std::abs(s.steps[i].insertion_loss.value() -
                                  primary->steps[i].insertion_loss.value());
      check.max_deviation_db = std::max(check.max_deviation_db, dev);
    }
    check.within_tolerance = check.max_deviation_db <= check.tolerance_db;
    checks.push_back(std::move(check));
  }
  return checks;
}

/// Parses per-sample summary records from CSV with the header
///   id,kind,vpi_before_V,vpi_after_V,vpi_recovered_V,max_delta_loss_dB,
///   extinction_before_dB,extinction_after_dB,natural_recovery_3day_dB
/// Extinction fields must be present exactly for intensity modulators.
inline std::vector<ModulatorRecord> load_records(std::istream& in) {
  static const std::string kHeader =
      "id,kind,vpi_before_V,vpi_after_V,vpi_recovered_V,max_delta_loss_dB,"
      "extinction_before_dB,extinction_after_dB,natural_recovery_3day_dB";

  std::vector<std::string> errors;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t != kHeader)
      throw IngestError({"line " + std::to_string(line_no) +
                         ": expected record header, got '" + t + "'"});
    have_header = true;
    break;
  }
  if (!have_header) throw IngestError({"empty file: missing record header"});

  std::vector<ModulatorRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = detail::split_csv_line(t);
    const std::string at = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 9) {
      errors.push_back(at + "expected 9 fields, got " + std::to_string(fields.size()));
      continue;
    }
    ModulatorRecord rec;
    rec.id = fields[0];
    if (fields[1] == "phase") {
      rec.kind = ModulatorKind::phase;
    } else if (fields[1] == "intensity") {
      rec.kind = ModulatorKind::intensity;
    } else {
      errors.push_back(at + "kind must be 'phase' or 'intensity'");
      continue;
    }
    double v;
    bool ok = true;
    const auto need = [&](const std::string& field, const char* name) -> double {
      if (!detail::parse_double(field, v)) {
        errors.push_back(at + std::string("bad ") + name + ": '" + field + "'");
        ok = false;
        return 0.0;
      }
      return v;
    };
    rec.vpi_before_V = need(fields[2], "vpi_before_V");
    rec.vpi_after_V = need(fields[3], "vpi_after_V");
    rec.vpi_recovered_V = need(fields[4], "vpi_recovered_V");
    rec.max_delta_loss = Decibel{need(fields[5], "max_delta_loss_dB")};
    if (rec.kind == ModulatorKind::intensity) {
      rec.extinction_before = Decibel{need(fields[6], "extinction_before_dB")};
      rec.extinction_after = Decibel{need(fields[7], "extinction_after_dB")};
    } else if (!fields[6].empty() || !fields[7].empty()) {
      errors.push_back(at + "extinction fields must be empty for phase modulators");
      ok = false;
    }
    rec.natural_recovery_3day = Decibel{need(fields[8], "natural_recovery_3day_dB")};
    if (ok) records.push_back(std::move(rec));
  }
  if (!errors.empty()) throw IngestError(std::move(errors));
  return records;
}

inline std::vector<ModulatorRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError({"cannot open '" + path + "'"});
  return load_records(in);
}

}  // namespace greenlight
