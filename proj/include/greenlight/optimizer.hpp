#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "greenlight/decoy.hpp"

namespace greenlight {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Grid-plus-refinement search settings for the intensity optimization.
/// nu_1 feasibility (nu_1 < mu_s) is enforced pointwise, so the ranges may
/// overlap freely.
struct OptimizationConfig {
  Interval mu_range{0.05, 1.0};
  Interval nu1_range{0.005, 0.5};
  int coarse_grid = 64;
  int refine_iterations = 4;
  double refine_shrink = 0.25;
};

struct OptimizationResult {
  IntensitySet intensities;
  double rate = 0.0;
  /// False is the no-positive-rate marker: every feasible point gave R <= 0
  /// and `intensities`/`rate` hold the least-bad point found.
  bool positive = false;
};

namespace detail {

inline std::vector<double> grid_points(Interval range, int n) {
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(n));
  if (n == 1 || range.hi == range.lo) {
    pts.push_back(range.lo);
    return pts;
  }
  const double step = (range.hi - range.lo) / (n - 1);
  for (int i = 0; i < n; ++i) pts.push_back(range.lo + i * step);
  return pts;
}

}  // namespace detail

/// Signal/decoy intensities maximizing the no-attack key rate for the given
/// channel, by coarse grid search followed by local grid refinement around
/// the incumbent. Ties break toward the lowest mu_s, then the lowest nu_1;
/// the search is deterministic. nu_2 is pinned to 0.
inline OptimizationResult optimize_intensities(const ChannelParams& ch,
                                               const OptimizationConfig& cfg) {
  if (!(cfg.mu_range.hi >= cfg.mu_range.lo) ||
      !(cfg.nu1_range.hi >= cfg.nu1_range.lo))
    throw std::invalid_argument("optimize_intensities: empty search range");
  if (cfg.coarse_grid < 1 || cfg.refine_iterations < 0 ||
      !(cfg.refine_shrink > 0.0) || !(cfg.refine_shrink < 1.0))
    throw std::invalid_argument("optimize_intensities: invalid grid settings");
  if (!(cfg.mu_range.hi > 0.0) || !(cfg.nu1_range.lo < cfg.mu_range.hi))
    throw std::invalid_argument("optimize_intensities: no feasible point in range");

  const auto rate_at = [&ch](double mu, double nu1) -> std::optional<double> {
    if (!(nu1 > 0.0) || !(nu1 < mu)) return std::nullopt;
    const IntensitySet set(mu, nu1, 0.0);
    return estimated_key_rate(observe(set, 1.0, ch), set, ch);
  };

  bool found = false;
  double best_rate = 0.0, best_mu = 0.0, best_nu1 = 0.0;
  Interval mu_win = cfg.mu_range;
  Interval nu1_win = cfg.nu1_range;

  for (int round = 0; round <= cfg.refine_iterations; ++round) {
    for (double mu : detail::grid_points(mu_win, cfg.coarse_grid)) {
      for (double nu1 : detail::grid_points(nu1_win, cfg.coarse_grid)) {
        const auto r = rate_at(mu, nu1);
        if (!r) continue;
        if (!found || *r > best_rate) {
          found = true;
          best_rate = *r;
          best_mu = mu;
          best_nu1 = nu1;
        }
      }
    }
    if (!found) break;  // nothing feasible on the coarse grid; nothing to refine
    const double mu_w = (mu_win.hi - mu_win.lo) * cfg.refine_shrink;
    const double nu1_w = (nu1_win.hi - nu1_win.lo) * cfg.refine_shrink;
    mu_win = {std::max(cfg.mu_range.lo, best_mu - mu_w / 2.0),
              std::min(cfg.mu_range.hi, best_mu + mu_w / 2.0)};
    nu1_win = {std::max(cfg.nu1_range.lo, best_nu1 - nu1_w / 2.0),
               std::min(cfg.nu1_range.hi, best_nu1 + nu1_w / 2.0)};
  }

  if (!found)
    throw std::invalid_argument(
        "optimize_intensities: no feasible (mu_s, nu_1) pair on the search grid");

  return OptimizationResult{IntensitySet(best_mu, best_nu1, 0.0), best_rate,
                            best_rate > 0.0};
}

}  // namespace greenlight
