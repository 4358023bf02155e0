#include "adawidth/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "adawidth/encoder.hpp"

namespace adawidth {

std::vector<std::pair<double, double>> thresholds_from_x(double x,
                                                         int n_levels) {
  if (!(x > 0.0) || !(x <= 1.0))
    throw std::invalid_argument("thresholds_from_x: x must lie in (0, 1]");
  if (n_levels < 1)
    throw std::invalid_argument("thresholds_from_x: need at least one level");
  std::vector<std::pair<double, double>> out;
  out.emplace_back(x, 1.0);
  const int rest = n_levels - 1;
  for (int i = 1; i <= rest; ++i) {
    const double hi = x * static_cast<double>(rest - i + 1) / rest;
    const double lo = x * static_cast<double>(rest - i) / rest;
    out.emplace_back(lo, hi);
  }
  return out;
}

std::string sweep_run_id(double x, int prefix_layers, int window,
                         const std::vector<double>& factors,
                         std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "x%g_k%d_w%d_f", x, prefix_layers, window);
  std::string id = buf;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%g", factors[i]);
    if (i) id += '-';
    id += buf;
  }
  std::snprintf(buf, sizeof(buf), "_s%llu",
                static_cast<unsigned long long>(seed));
  id += buf;
  return id;
}

std::vector<ReportRow> run_sweep(const EncoderConfig& base,
                                 const TrainConfig& base_train,
                                 const Dataset& train_set,
                                 const Dataset& eval_set,
                                 const SweepGrid& grid) {
  if (grid.x_values.empty() || grid.prefix_layers.empty() ||
      grid.windows.empty() || grid.factor_sets.empty() || grid.seeds.empty())
    throw std::invalid_argument("run_sweep: every grid dimension needs values");

  std::vector<ReportRow> rows;
  for (double x : grid.x_values) {
    for (int k : grid.prefix_layers) {
      for (int w : grid.windows) {
        for (const auto& factors : grid.factor_sets) {
          for (std::uint64_t seed : grid.seeds) {
            ReportRow row;
            row.run_id = sweep_run_id(x, k, w, factors, seed);
            row.split = "eval";
            row.mode = "routed";
            try {
              EncoderConfig cfg = base;
              cfg.n_prefix_layers = k;
              cfg.width_factors = factors;
              TrainConfig tc = base_train;
              tc.window = w;
              std::vector<LevelInterval> levels;
              for (const auto& [lo, hi] :
                   thresholds_from_x(x, static_cast<int>(factors.size())))
                levels.push_back({lo, hi});
              tc.thresholds = ThresholdTable(std::move(levels));
              tc.seed = seed;
              Model model(cfg, seed);
              TrainResult res =
                  train_and_evaluate(model, train_set, eval_set, tc);
              row = report_row(row.run_id, "eval", "routed", res.routed,
                               factors);
            } catch (const std::exception& e) {
              row.error = e.what();
            }
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return rows;
}

std::vector<double> sweep_factor_columns(const SweepGrid& grid) {
  std::set<double> all;
  for (const auto& fs : grid.factor_sets) all.insert(fs.begin(), fs.end());
  return {all.begin(), all.end()};
}

std::string sweep_csv(const std::vector<ReportRow>& rows,
                      const SweepGrid& grid) {
  return report_csv(rows, sweep_factor_columns(grid), true);
}

}  // namespace adawidth
