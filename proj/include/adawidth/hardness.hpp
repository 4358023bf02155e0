#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace adawidth {

struct LevelInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// Per-level metric intervals, both ends closed. Level 0 is the easiest and
// maps to the smallest width factor; the last level maps to factor 1.
class ThresholdTable {
 public:
  explicit ThresholdTable(std::vector<LevelInterval> levels);

  int n_levels() const { return static_cast<int>(levels_.size()); }
  const LevelInterval& level(int i) const {
    return levels_[static_cast<std::size_t>(i)];
  }
  const std::vector<LevelInterval>& levels() const { return levels_; }

 private:
  std::vector<LevelInterval> levels_;
};

using HardnessLabel = std::vector<std::uint8_t>;

bool all_zero(const HardnessLabel& y);
std::string label_key(const HardnessLabel& y);  // "10"-style bit string

// bit i = 1 iff the history's last `window` values exist (at least window
// entries) and every one of them lies inside level i's closed interval;
// shorter histories give all zeros
HardnessLabel assign_hardness_label(const std::vector<double>& history,
                                    const ThresholdTable& table, int window);

// natural-log prediction entropy with 0*log(0) := 0; p must sum to 1 +- 1e-6
double entropy(const std::vector<double>& probs);

// Ring buffers of a per-epoch prediction metric (ground-truth-class
// probability, or prediction entropy), keyed by stable sample id. Each
// buffer keeps only the last `window` epochs.
class MetricHistory {
 public:
  // max_value bounds recorded values: 1 for probabilities, log(C) for
  // entropies
  MetricHistory(int window, double max_value);

  int window() const { return window_; }

  // one value per (sample, epoch), epochs strictly increasing per sample;
  // entries older than `window` epochs are evicted
  void record(int sample_id, int epoch, double value);

  // buffered values for the sample, oldest first; empty if never recorded
  std::vector<double> values(int sample_id) const;

  // buffered (epoch, value) pairs, oldest first
  std::vector<std::pair<int, double>> entries(int sample_id) const;

  HardnessLabel label(int sample_id, const ThresholdTable& table) const;

  std::size_t n_tracked() const { return buffers_.size(); }

 private:
  int window_;
  double max_value_;
  std::unordered_map<int, std::deque<std::pair<int, double>>> buffers_;
};

}  // namespace adawidth
