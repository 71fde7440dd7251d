#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "greenlight/config.hpp"
#include "greenlight/countermeasures.hpp"
#include "greenlight/decoy.hpp"
#include "greenlight/modulator.hpp"
#include "greenlight/optimizer.hpp"

namespace greenlight {

/// Fixed-width numeric formatting for emitted CSV: 12 significant digits,
/// so identical inputs produce byte-identical output.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

namespace detail {

/// Runs fn(0..n-1) on up to `workers` threads; each index lands in its own
/// output slot, so results are independent of scheduling. The first exception
/// is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers < 1) workers = 1;
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::vector<double> linear_grid(double lo, double hi, double step,
                                       const std::string& what) {
  if (!(step > 0.0)) throw ConfigError(what + ": step must be positive");
  if (hi < lo) throw ConfigError(what + ": max below min");
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pts.push_back(lo + i * step);
  return pts;
}

/// Consistency guard run before emission: the k <-> delta-loss conversion
/// must round-trip, and a zero delta loss must reproduce the baseline in all
/// three scenario rates.
inline void check_scenario_consistency(const IntensitySet& intensities,
                                       const ChannelParams& ch, double delta_db,
                                       double k) {
  if (std::abs(10.0 * std::log10(k) - delta_db) > 1e-9)
    throw std::logic_error("sweep: k <-> delta-loss round trip failed");
  const KeyRateReport zero = evaluate_scenarios(intensities, ch, Decibel{0.0});
  const double scale = std::max(1.0, std::abs(zero.baseline));
  if (std::abs(zero.unaware_estimate - zero.baseline) > 1e-12 * scale ||
      std::abs(zero.secure - zero.baseline) > 1e-12 * scale)
    throw std::logic_error("sweep: zero-delta scenarios do not coincide");
}

}  // namespace detail

/// Channel built from the config's channel keys. Defaults: 10 dB link,
/// eta_d = 0.6, Y0 = 2.6e-5, e_d = 0.01, f_e = 1.12, e_0 = 0.5.
inline ChannelParams channel_from_config(const KeyValueConfig& cfg) {
  return ChannelParams(Decibel{cfg.get_double("link_loss_db", 10.0)},
                       cfg.get_double("detector_efficiency", 0.6),
                       cfg.get_double("y0", 2.6e-5), cfg.get_double("e_d", 0.01),
                       cfg.get_double("f_e", 1.12), cfg.get_double("e_0", 0.5));
}

inline OptimizationConfig optimizer_from_config(const KeyValueConfig& cfg) {
  OptimizationConfig opt;
  opt.mu_range = {cfg.get_double("mu_min", 0.05), cfg.get_double("mu_max", 1.0)};
  opt.nu1_range = {cfg.get_double("nu1_min", 0.005), cfg.get_double("nu1_max", 0.5)};
  opt.coarse_grid = cfg.get_int("coarse_grid", 64);
  opt.refine_iterations = cfg.get_int("refine_iterations", 4);
  opt.refine_shrink = cfg.get_double("refine_shrink", 0.25);
  return opt;
}

inline int workers_from_config(const KeyValueConfig& cfg) {
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int w = cfg.get_int("workers", hw > 0 ? hw : 1);
  if (w < 1) throw ConfigError("workers must be >= 1");
  return w;
}

// ---------------------------------------------------------------------------
// sweep-delta: key rates against the attack strength at a fixed total loss
// ---------------------------------------------------------------------------

struct SweepDeltaRow {
  double delta_loss_db = 0.0;
  double k = 1.0;
  double r_baseline = 0.0;
  double r_unaware = 0.0;
  double r_secure = 0.0;
  double r_secure_floored = 0.0;
};

struct SweepDeltaResult {
  std::vector<SweepDeltaRow> rows;
  IntensitySet intensities;  // no-attack optimum used for every row
  double total_loss_db = 0.0;
  bool any_positive_baseline = false;
};

inline SweepDeltaResult sweep_delta(const KeyValueConfig& cfg) {
  if (cfg.has("delta_loss_db") &&
      (cfg.has("delta_loss_min_db") || cfg.has("delta_loss_max_db") ||
       cfg.has("delta_loss_step_db")))
    throw ConfigError(
        "sweep-delta: give either delta_loss_db or a delta_loss_{min,max,step}_db "
        "grid, not both");

  ChannelParams ch = channel_from_config(cfg);
  if (cfg.has("total_loss_db"))
    ch = ch.with_total_loss(Decibel{cfg.get_double("total_loss_db", 0.0)});

  std::vector<double> deltas;
  if (cfg.has("delta_loss_db")) {
    deltas = {cfg.get_double("delta_loss_db", 0.0)};
  } else {
    deltas = detail::linear_grid(cfg.get_double("delta_loss_min_db", 0.0),
                                 cfg.get_double("delta_loss_max_db", 6.0),
                                 cfg.get_double("delta_loss_step_db", 0.1),
                                 "delta-loss grid");
  }

  const OptimizationResult opt =
      optimize_intensities(ch, optimizer_from_config(cfg));

  SweepDeltaResult result{{}, opt.intensities, ch.total_loss().value(), false};
  result.rows.resize(deltas.size());
  detail::parallel_for(deltas.size(), workers_from_config(cfg), [&](std::size_t i) {
    const Decibel delta{deltas[i]};
    const KeyRateReport report = evaluate_scenarios(opt.intensities, ch, delta);
    detail::check_scenario_consistency(opt.intensities, ch, deltas[i],
                                       delta_loss_to_k(delta));
    result.rows[i] = SweepDeltaRow{deltas[i],
                                   delta_loss_to_k(delta),
                                   report.baseline,
                                   report.unaware_estimate,
                                   report.secure,
                                   std::max(report.secure, 0.0)};
  });
  for (const auto& row : result.rows)
    if (row.r_baseline > 0.0) result.any_positive_baseline = true;
  return result;
}

inline void write_csv(std::ostream& os, const std::vector<SweepDeltaRow>& rows) {
  os << "delta_loss_db,k,r_baseline,r_unaware,r_secure,r_secure_floored\n";
  for (const auto& r : rows)
    os << format_number(r.delta_loss_db) << ',' << format_number(r.k) << ','
       << format_number(r.r_baseline) << ',' << format_number(r.r_unaware) << ','
       << format_number(r.r_secure) << ',' << format_number(r.r_secure_floored)
       << '\n';
}

// ---------------------------------------------------------------------------
// sweep-loss: key rates against the total loss, re-optimizing per loss point
// ---------------------------------------------------------------------------

struct SweepLossRow {
  double total_loss_db = 0.0;
  double delta_loss_db = 0.0;
  double mu_s = 0.0;
  double nu_1 = 0.0;
  double r_baseline = 0.0;
  double r_unaware = 0.0;
  double r_secure = 0.0;
  double r_secure_floored = 0.0;
};

struct SweepLossResult {
  std::vector<SweepLossRow> rows;
  bool any_positive_baseline = false;
};

inline SweepLossResult sweep_loss(const KeyValueConfig& cfg) {
  if (cfg.has("total_loss_db") &&
      (cfg.has("total_loss_min_db") || cfg.has("total_loss_max_db") ||
       cfg.has("total_loss_step_db")))
    throw ConfigError(
        "sweep-loss: give either total_loss_db or a total_loss_{min,max,step}_db "
        "grid, not both");

  const ChannelParams base = channel_from_config(cfg);
  std::vector<double> losses;
  if (cfg.has("total_loss_db")) {
    losses = {cfg.get_double("total_loss_db", 0.0)};
  } else {
    losses = detail::linear_grid(cfg.get_double("total_loss_min_db", 2.0),
                                 cfg.get_double("total_loss_max_db", 40.0),
                                 cfg.get_double("total_loss_step_db", 0.5),
                                 "total-loss grid");
  }
  const std::vector<double> deltas = cfg.get_double_list("delta_loss_db", {1.0, 3.0});
  for (double d : deltas)
    if (d < 0.0) throw ConfigError("delta_loss_db: negative attack loss");
  const OptimizationConfig opt_cfg = optimizer_from_config(cfg);

  SweepLossResult result;
  result.rows.resize(losses.size() * deltas.size());
  detail::parallel_for(losses.size(), workers_from_config(cfg), [&](std::size_t i) {
    const ChannelParams ch = base.with_total_loss(Decibel{losses[i]});
    const OptimizationResult opt = optimize_intensities(ch, opt_cfg);
    for (std::size_t j = 0; j < deltas.size(); ++j) {
      const Decibel delta{deltas[j]};
      const KeyRateReport report = evaluate_scenarios(opt.intensities, ch, delta);
      detail::check_scenario_consistency(opt.intensities, ch, deltas[j],
                                         delta_loss_to_k(delta));
      result.rows[i * deltas.size() + j] =
          SweepLossRow{losses[i],
                       deltas[j],
                       opt.intensities.mu_s(),
                       opt.intensities.nu_1(),
                       report.baseline,
                       report.unaware_estimate,
                       report.secure,
                       std::max(report.secure, 0.0)};
    }
  });
  for (const auto& row : result.rows)
    if (row.r_baseline > 0.0) result.any_positive_baseline = true;
  return result;
}

inline void write_csv(std::ostream& os, const std::vector<SweepLossRow>& rows) {
  os << "total_loss_db,delta_loss_db,mu_s,nu_1,r_baseline,r_unaware,r_secure,"
        "r_secure_floored\n";
  for (const auto& r : rows)
    os << format_number(r.total_loss_db) << ',' << format_number(r.delta_loss_db)
       << ',' << format_number(r.mu_s) << ',' << format_number(r.nu_1) << ','
       << format_number(r.r_baseline) << ',' << format_number(r.r_unaware) << ','
       << format_number(r.r_secure) << ',' << format_number(r.r_secure_floored)
       << '\n';
}

// ---------------------------------------------------------------------------
// fit-modulator: calibrate response models from a measurement CSV
// ---------------------------------------------------------------------------

struct ModulatorFitRow {
  std::string sample_id;
  std::string kind;
  double delta_loss_max_db = 0.0;
  double p0_uW = 0.0;
  double recovery_tau_s = 0.0;
  double rms_residual_db = 0.0;
  std::string validation_flags;
};

inline std::vector<ModulatorFitRow> fit_modulator_report(
    const std::vector<IrradiationSeries>& all) {
  const auto checks = validate_replicates(all);

  std::vector<ModulatorFitRow> rows;
  for (const auto& series : all) {
    if (series.phase != SeriesPhase::alteration) continue;
    const FitResult fit = fit_model(series);

    ModulatorFitRow row;
    row.sample_id = series.sample_id;
    const auto kind = infer_kind(base_sample_id(series.sample_id));
    row.kind = !kind ? "unknown"
               : *kind == ModulatorKind::phase ? "phase"
                                               : "intensity";
    row.delta_loss_max_db = fit.model.delta_loss_max().value();
    row.p0_uW = fit.model.p0_uW();
    row.rms_residual_db = fit.rms_residual_db;

    // recovery time constant from the sibling recovery series when present,
    // else the class default (phase ~ minutes, intensity ~ tens of minutes)
    row.recovery_tau_s =
        (kind && *kind == ModulatorKind::intensity) ? 900.0 : 60.0;
    for (const auto& other : all)
      if (other.sample_id == series.sample_id && other.phase == SeriesPhase::recovery)
        row.recovery_tau_s = fit_recovery_tau(other);

    double worst_dev = 0.0, tol = 0.0;
    bool within = true, checked = false;
    for (const auto& c : checks) {
      if (c.phase != SeriesPhase::alteration) continue;
      if (c.sample_id != series.sample_id && c.replicate_id != series.sample_id)
        continue;
      checked = true;
      tol = c.tolerance_db;
      if (c.max_deviation_db > worst_dev) worst_dev = c.max_deviation_db;
      within = within && c.within_tolerance;
    }
    if (!checked) {
      row.validation_flags = "ok";
    } else if (within) {
      row.validation_flags = "ok";
    } else {
      char buf[96];
      std::snprintf(buf, sizeof(buf),
                    "replicate_tolerance_exceeded(max_dev=%.3fdB tol=%.3fdB)",
                    worst_dev, tol);
      row.validation_flags = buf;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_csv(std::ostream& os, const std::vector<ModulatorFitRow>& rows) {
  os << "sample_id,kind,delta_loss_max_db,p0_uW,recovery_tau_s,rms_residual_db,"
        "validation_flags\n";
  for (const auto& r : rows)
    os << r.sample_id << ',' << r.kind << ',' << format_number(r.delta_loss_max_db)
       << ',' << format_number(r.p0_uW) << ',' << format_number(r.recovery_tau_s)
       << ',' << format_number(r.rms_residual_db) << ',' << r.validation_flags
       << '\n';
}

// ---------------------------------------------------------------------------
// evaluate-defense: residual attack strength through a defense stack
// ---------------------------------------------------------------------------

struct DefenseRow {
  double injected_uW = 0.0;
  double defense_total_db = 0.0;
  double power_at_modulator_uW = 0.0;
  double residual_delta_loss_db = 0.0;
  bool monitor_detected = false;
};

struct DefenseReport {
  std::vector<DefenseRow> rows;
  double security_budget_db = 0.0;
  /// Minimum total defense attenuation keeping the residual loss change
  /// below the budget at the largest injected power of the grid. Absent when
  /// no finite stack suffices (budget <= 0 against a strictly positive
  /// response).
  std::optional<double> min_defense_db;
};

inline PhotorefractiveModel defense_model_from_config(const KeyValueConfig& cfg) {
  if (cfg.has("model_delta_loss_max_db") || cfg.has("model_p0_uW")) {
    if (!cfg.has("model_delta_loss_max_db") || !cfg.has("model_p0_uW"))
      throw ConfigError(
          "evaluate-defense: model_delta_loss_max_db and model_p0_uW go together");
    return PhotorefractiveModel(
        Decibel{cfg.get_double("model_delta_loss_max_db", 0.0)},
        cfg.get_double("model_p0_uW", 0.0));
  }
  if (!cfg.has("data"))
    throw ConfigError(
        "evaluate-defense: need a modulator model (either 'data' + 'sample' or "
        "model_delta_loss_max_db + model_p0_uW)");
  const std::string sample = cfg.get_string("sample", "PM-5");
  for (const auto& series : ingest_series(cfg.get_string("data", ""))) {
    if (series.sample_id == sample && series.phase == SeriesPhase::alteration)
      return fit_model(series).model;
  }
  throw ConfigError("evaluate-defense: no alteration series for sample '" + sample +
                    "' in the data file");
}

inline DefenseReport evaluate_defense(const KeyValueConfig& cfg) {
  const DefenseStack stack(Decibel{cfg.get_double("isolator_db", 0.0)},
                           Decibel{cfg.get_double("filter_db", 0.0)},
                           cfg.get_double("monitor_threshold_uW", 1.0),
                           cfg.get_double("monitor_noise_floor_uW", 0.0));
  const MonitorPosition position =
      cfg.get_string("monitor_position", "before") == "after"
          ? MonitorPosition::after_defenses
          : MonitorPosition::before_defenses;
  if (cfg.has("monitor_position")) {
    const std::string p = cfg.get_string("monitor_position", "");
    if (p != "before" && p != "after")
      throw ConfigError("monitor_position must be 'before' or 'after'");
  }
  const PhotorefractiveModel model = defense_model_from_config(cfg);
  const std::vector<double> injected = detail::linear_grid(
      cfg.get_double("injected_min_uW", 0.0), cfg.get_double("injected_max_uW", 2000.0),
      cfg.get_double("injected_step_uW", 100.0), "injected-power grid");

  DefenseReport report;
  report.security_budget_db = cfg.get_double("security_budget_db", 0.1);
  for (double p : injected) {
    DefenseRow row;
    row.injected_uW = p;
    row.defense_total_db = stack.total_attenuation().value();
    row.power_at_modulator_uW = power_at_modulator(p, stack);
    row.residual_delta_loss_db = residual_attack_strength(p, stack, model).value();
    row.monitor_detected = monitor_detects(p, stack, position);
    report.rows.push_back(row);
  }

  // Minimum defense attenuation at the worst (largest) injected power.
  const double budget = report.security_budget_db;
  const double p_worst = injected.empty() ? 0.0 : injected.back();
  const double lmax = model.delta_loss_max().value();
  if (budget > 0.0) {
    if (p_worst == 0.0 ||
        loss_increase(model, p_worst).value() < budget) {
      report.min_defense_db = 0.0;
    } else {
      // invert L_max (1 - e^(-p t / p0)) = budget for the transmittance t
      const double t_star = -std::log(1.0 - budget / lmax) * model.p0_uW() / p_worst;
      report.min_defense_db = -10.0 * std::log10(t_star);
    }
  }
  return report;
}

inline void write_csv(std::ostream& os, const std::vector<DefenseRow>& rows) {
  os << "injected_uW,defense_total_db,power_at_modulator_uW,residual_delta_loss_db,"
        "monitor_detected\n";
  for (const auto& r : rows)
    os << format_number(r.injected_uW) << ',' << format_number(r.defense_total_db)
       << ',' << format_number(r.power_at_modulator_uW) << ','
       << format_number(r.residual_delta_loss_db) << ','
       << (r.monitor_detected ? "true" : "false") << '\n';
}

}  // namespace greenlight
