#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adawidth/data.hpp"
#include "adawidth/encoder.hpp"
#include "adawidth/hardness.hpp"
#include "adawidth/tensor.hpp"

namespace adawidth {

// Flat key=value text config. '#' starts a comment, blank lines are
// skipped, duplicate keys are rejected. Every key must be consumed by a
// getter before require_all_consumed(), so typos fail loudly.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;

  std::string get_str(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<std::string> get_strs(const std::string& key) const;

  void require_all_consumed() const;  // throws listing unknown keys

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> consumed_;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double lambda_task = 1.0;
  double lambda_router = 0.5;
  int window = 3;
  ThresholdTable thresholds{{{0.8, 1.0}, {0.0, 0.8}}};
  std::uint64_t seed = 0;
  std::string label_mode = "confidence";  // confidence | entropy | berxit
  std::string hardness_source = "sampled";
  bool reorder_heads = true;
  int reorder_calibration = 256;
  bool pad_to_max = true;

  void validate(int n_levels) const;
};

// Everything one run needs, decoded from a KvConfig with strict keys.
struct RunConfig {
  EncoderConfig model;
  TrainConfig train;
  Precision precision = Precision::f64;

  std::string train_path;  // empty when synthesizing in-process
  std::string eval_path;
  std::string checkpoint;  // starting point for the eval command
  SynthSpec synth;
  int synth_eval_easy = 0;
  int synth_eval_hard = 0;

  std::vector<double> sweep_x{0.5, 0.7, 0.9};
  std::vector<int> sweep_prefix_layers;
  std::vector<int> sweep_window;
  std::vector<std::vector<double>> sweep_factor_sets;
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3};

  bool synthetic() const { return train_path.empty(); }
};

// "lo:hi,lo:hi,..." with one interval per level, easiest first
ThresholdTable parse_thresholds(const std::string& text);
std::string format_thresholds(const ThresholdTable& table);

RunConfig parse_run_config(const KvConfig& kv);
RunConfig load_run_config(const std::string& path);

}  // namespace adawidth
