#pragma once

// Grid runner for the accuracy-vs-cost frontier. Each cell retrains a model
// from scratch under one combination of easy-threshold lower bound x, router
// placement, history window, and width-factor set, then reports the routed
// evaluation as one CSV row. Cells are independent; a failing cell records
// its error and the sweep moves on.

#include <cstdint>
#include <string>
#include <vector>

#include "adawidth/config.hpp"
#include "adawidth/data.hpp"
#include "adawidth/train.hpp"

namespace adawidth {

struct SweepGrid {
  std::vector<double> x_values;
  std::vector<int> prefix_layers;
  std::vector<int> windows;
  std::vector<std::vector<double>> factor_sets;
  std::vector<std::uint64_t> seeds;
};

// Confidence intervals derived from a single knob x: the easiest level keeps
// [x, 1] and the remaining levels split [0, x] evenly, hardest at the bottom.
std::vector<std::pair<double, double>> thresholds_from_x(double x,
                                                         int n_levels);

std::string sweep_run_id(double x, int prefix_layers, int window,
                         const std::vector<double>& factors,
                         std::uint64_t seed);

// Cells run in fixed grid order: x, placement, window, factor set, seed.
std::vector<ReportRow> run_sweep(const EncoderConfig& base,
                                 const TrainConfig& base_train,
                                 const Dataset& train_set,
                                 const Dataset& eval_set,
                                 const SweepGrid& grid);

// All factor columns that appear anywhere in the grid, ascending.
std::vector<double> sweep_factor_columns(const SweepGrid& grid);

std::string sweep_csv(const std::vector<ReportRow>& rows,
                      const SweepGrid& grid);

}  // namespace adawidth
