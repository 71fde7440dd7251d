// Command-line front end: attack sweeps, modulator-response fitting and
// countermeasure evaluation for decoy-state BB84 under light injection.
//
// Exit codes: 0 success; 2 configuration error; 3 measurement-data error;
// 4 no positive key rate anywhere on the requested grid; 1 internal error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "greenlight/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNoPositiveRate = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::optional<std::string> link_loss_db;
  std::optional<std::string> delta_loss_db;
  std::optional<std::string> total_loss_db;
  std::optional<std::string> workers;
  std::optional<std::string> data;
  std::optional<std::string> sample;
  std::optional<std::string> budget_db;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value configuration file");
  cmd->add_option("--out", args.out_path, "output CSV path (default: stdout)");
  cmd->add_option("--link-loss-db", args.link_loss_db, "override link_loss_db");
  cmd->add_option("--delta-loss-db", args.delta_loss_db, "override delta_loss_db");
  cmd->add_option("--total-loss-db", args.total_loss_db, "override total_loss_db");
  cmd->add_option("--workers", args.workers, "override worker count");
  cmd->add_option("--data", args.data, "override measurement CSV path");
  cmd->add_option("--sample", args.sample, "override modulator sample id");
  cmd->add_option("--budget-db", args.budget_db, "override security_budget_db");
}

greenlight::KeyValueConfig load_config(const CommonArgs& args) {
  greenlight::KeyValueConfig cfg;
  if (!args.config_path.empty())
    cfg = greenlight::KeyValueConfig::parse_file(args.config_path);
  if (args.link_loss_db) cfg.set("link_loss_db", *args.link_loss_db);
  if (args.delta_loss_db) cfg.set("delta_loss_db", *args.delta_loss_db);
  if (args.total_loss_db) cfg.set("total_loss_db", *args.total_loss_db);
  if (args.workers) cfg.set("workers", *args.workers);
  if (args.data) cfg.set("data", *args.data);
  if (args.sample) cfg.set("sample", *args.sample);
  if (args.budget_db) cfg.set("security_budget_db", *args.budget_db);
  return cfg;
}

template <typename Rows>
void emit(const CommonArgs& args, const Rows& rows) {
  if (args.out_path.empty()) {
    greenlight::write_csv(std::cout, rows);
    return;
  }
  std::ofstream out(args.out_path, std::ios::binary);
  if (!out)
    throw greenlight::ConfigError("cannot open output file '" + args.out_path + "'");
  greenlight::write_csv(out, rows);
}

int run_sweep_delta(const CommonArgs& args) {
  const auto cfg = load_config(args);
  const auto result = greenlight::sweep_delta(cfg);
  emit(args, result.rows);
  std::cerr << "sweep-delta: total loss " << greenlight::format_number(result.total_loss_db)
            << " dB, optimized mu_s=" << greenlight::format_number(result.intensities.mu_s())
            << " nu_1=" << greenlight::format_number(result.intensities.nu_1()) << ", "
            << result.rows.size() << " rows\n";
  return result.any_positive_baseline ? kExitOk : kExitNoPositiveRate;
}

int run_sweep_loss(const CommonArgs& args) {
  const auto cfg = load_config(args);
  const auto result = greenlight::sweep_loss(cfg);
  emit(args, result.rows);
  std::cerr << "sweep-loss: " << result.rows.size() << " rows\n";
  return result.any_positive_baseline ? kExitOk : kExitNoPositiveRate;
}

int run_fit_modulator(const CommonArgs& args) {
  const auto cfg = load_config(args);
  if (!cfg.has("data"))
    throw greenlight::ConfigError("fit-modulator: missing 'data' (measurement CSV path)");
  const auto series = greenlight::ingest_series(cfg.get_string("data", ""));
  const auto rows = greenlight::fit_modulator_report(series);
  emit(args, rows);
  for (const auto& r : rows)
    std::cerr << "fit-modulator: " << r.sample_id << " (" << r.kind
              << "): delta_loss_max=" << greenlight::format_number(r.delta_loss_max_db)
              << " dB, p0=" << greenlight::format_number(r.p0_uW)
              << " uW, recovery_tau=" << greenlight::format_number(r.recovery_tau_s)
              << " s, rms_residual=" << greenlight::format_number(r.rms_residual_db)
              << " dB [" << r.validation_flags << "]\n";
  return kExitOk;
}

int run_evaluate_defense(const CommonArgs& args) {
  const auto cfg = load_config(args);
  const auto report = greenlight::evaluate_defense(cfg);
  emit(args, report.rows);
  if (report.min_defense_db) {
    std::cerr << "evaluate-defense: minimum total defense for residual < "
              << greenlight::format_number(report.security_budget_db) << " dB budget: "
              << greenlight::format_number(*report.min_defense_db) << " dB\n";
  } else {
    std::cerr << "evaluate-defense: no finite defense stack keeps the residual below "
              << greenlight::format_number(report.security_budget_db)
              << " dB (the fitted response is positive at any nonzero power)\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Decoy-state BB84 security analysis under modulator light-injection attacks"};
  app.require_subcommand(1);

  CommonArgs sweep_loss_args, sweep_delta_args, fit_args, defense_args;
  CLI::App* cmd_sweep_loss = app.add_subcommand(
      "sweep-loss", "Key rates vs total loss, re-optimizing intensities per point");
  add_common(cmd_sweep_loss, sweep_loss_args);
  CLI::App* cmd_sweep_delta = app.add_subcommand(
      "sweep-delta", "Key rates vs attack strength at a fixed total loss");
  add_common(cmd_sweep_delta, sweep_delta_args);
  CLI::App* cmd_fit = app.add_subcommand(
      "fit-modulator", "Fit photorefractive response models from a measurement CSV");
  add_common(cmd_fit, fit_args);
  CLI::App* cmd_defense = app.add_subcommand(
      "evaluate-defense", "Residual attack strength through a defense stack");
  add_common(cmd_defense, defense_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (cmd_sweep_loss->parsed()) return run_sweep_loss(sweep_loss_args);
    if (cmd_sweep_delta->parsed()) return run_sweep_delta(sweep_delta_args);
    if (cmd_fit->parsed()) return run_fit_modulator(fit_args);
    if (cmd_defense->parsed()) return run_evaluate_defense(defense_args);
    std::cerr << "error: no subcommand\n";
    return kExitConfig;
  } catch (const greenlight::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const greenlight::IngestError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
