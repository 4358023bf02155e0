#include "adawidth/hardness.hpp"

#include <cmath>
#include <stdexcept>

namespace adawidth {

ThresholdTable::ThresholdTable(std::vector<LevelInterval> levels)
    : levels_(std::move(levels)) {
  if (levels_.empty())
    throw std::invalid_argument("threshold table needs at least one level");
  for (const auto& lv : levels_) {
    if (!(lv.lo <= lv.hi))
      throw std::invalid_argument("level interval has lo > hi");
    if (lv.lo < 0.0)
      throw std::invalid_argument("level interval has negative bound");
  }
}

bool all_zero(const HardnessLabel& y) {
  for (auto b : y)
    if (b) return false;
  return true;
}

std::string label_key(const HardnessLabel& y) {
  std::string s(y.size(), '0');
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i]) s[i] = '1';
  return s;
}

HardnessLabel assign_hardness_label(const std::vector<double>& history,
                                    const ThresholdTable& table, int window) {
  if (window < 1) throw std::invalid_argument("window must be at least 1");
  HardnessLabel y(static_cast<std::size_t>(table.n_levels()), 0);
  if (static_cast<int>(history.size()) < window) return y;
  const std::size_t start = history.size() - static_cast<std::size_t>(window);
  for (int i = 0; i < table.n_levels(); ++i) {
    const LevelInterval& lv = table.level(i);
    bool inside = true;
    for (std::size_t k = start; k < history.size(); ++k) {
      const double v = history[k];
      if (v < lv.lo || v > lv.hi) {
        inside = false;
        break;
      }
    }
    if (inside) y[static_cast<std::size_t>(i)] = 1;
  }
  return y;
}

double entropy(const std::vector<double>& probs) {
  if (probs.empty()) throw std::invalid_argument("entropy of empty vector");
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw std::invalid_argument("negative probability");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("probabilities sum to " + std::to_string(sum));
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

MetricHistory::MetricHistory(int window, double max_value)
    : window_(window), max_value_(max_value) {
  if (window < 1) throw std::invalid_argument("window must be at least 1");
  if (max_value <= 0.0) throw std::invalid_argument("max_value must be positive");
}

void MetricHistory::record(int sample_id, int epoch, double value) {
  if (value < 0.0 || value > max_value_)
    throw std::invalid_argument("metric value " + std::to_string(value) +
                                " outside [0, " + std::to_string(max_value_) +
                                "]");
  auto& buf = buffers_[sample_id];
  if (!buf.empty() && buf.back().first >= epoch)
    throw std::invalid_argument("sample " + std::to_string(sample_id) +
                                " already recorded for epoch " +
                                std::to_string(epoch));
  buf.emplace_back(epoch, value);
  while (!buf.empty() && buf.front().first <= epoch - window_) buf.pop_front();
}

std::vector<double> MetricHistory::values(int sample_id) const {
  auto it = buffers_.find(sample_id);
  if (it == buffers_.end()) return {};
  std::vector<double> out;
  out.reserve(it->second.size());
  for (const auto& [epoch, v] : it->second) out.push_back(v);
  return out;
}

std::vector<std::pair<int, double>> MetricHistory::entries(
    int sample_id) const {
  auto it = buffers_.find(sample_id);
  if (it == buffers_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

HardnessLabel MetricHistory::label(int sample_id,
                                   const ThresholdTable& table) const {
  return assign_hardness_label(values(sample_id), table, window_);
}

}  // namespace adawidth
