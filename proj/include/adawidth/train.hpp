#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "adawidth/config.hpp"
#include "adawidth/data.hpp"
#include "adawidth/encoder.hpp"
#include "adawidth/flops.hpp"
#include "adawidth/hardness.hpp"
#include "adawidth/optim.hpp"
#include "adawidth/rng.hpp"

namespace adawidth {

// stable per-purpose RNG streams from one run seed
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// uniform pick among the set bits of the label; all-zero falls back to the
// full-width factor
double sample_reduction_factor(const HardnessLabel& y,
                               const std::vector<double>& factors, Rng& rng);

struct EpochLog {
  int epoch = 0;
  double l_task = 0.0;
  double l_router = 0.0;
  double l_total = 0.0;  // accumulated combined objective actually optimized
  bool router_trained = false;
  std::map<std::string, int> label_histogram;  // label bit pattern -> count
};

std::string epoch_log_json(const EpochLog& log);

struct StepStats {
  double l_task = 0.0;    // mean task CE over the batch
  double l_router = 0.0;  // mean router BCE over included samples
  double l_total = 0.0;   // summed per-sample objective, as backpropagated
  int batch_size = 0;
  int router_included = 0;
  bool router_stepped = false;
  std::map<std::string, int> label_histogram;
};

struct RouteDecision {
  int sample_id = 0;
  std::vector<double> logits;
  double r = 1.0;
};

std::string route_decision_json(const RouteDecision& d);

struct EvalResult {
  double accuracy = 0.0;
  FlopsLedger ledger;
  // tag -> {correct, total}; one "" entry when samples are untagged
  std::map<std::string, std::pair<int, int>> tag_hits;
  // tag -> factor -> samples routed there
  std::map<std::string, std::map<double, int>> tag_routing;
  std::vector<RouteDecision> decisions;
};

EvalResult evaluate_routed(const Model& model, const Dataset& split);
EvalResult evaluate_fixed(const Model& model, const Dataset& split, double r);

// One model + dataset + config bound together with optimizer and history
// state. Epochs are 1-based; the router optimizer only steps after the
// warm-up window has fully populated the metric history.
class Trainer {
 public:
  Trainer(Model& model, const Dataset& train_set, TrainConfig tc);

  StepStats train_batch(const std::vector<int>& sample_indices);
  EpochLog run_epoch();

  int epoch() const { return epoch_; }
  const MetricHistory& history() const { return history_; }
  const TrainConfig& config() const { return tc_; }
  Model& model() { return model_; }

 private:
  HardnessLabel berxit_label(const Sample& s) const;
  void train_one(const Sample& s, const HardnessLabel& y, bool router_on,
                 int b, int b_inc, StepStats* st);
  void record_metric(const Sample& s, const std::vector<double>& probs);

  Model& model_;
  const Dataset& data_;
  TrainConfig tc_;
  MetricHistory history_;
  AdamW main_opt_;
  AdamW router_opt_;
  Rng shuffle_rng_;
  Rng factor_rng_;
  int epoch_ = 0;
  std::vector<int> order_;
};

struct TrainResult {
  std::vector<EpochLog> logs;
  EvalResult routed;
  std::vector<std::pair<double, EvalResult>> fixed;  // one per width factor
  // JSON-lines of {sample_id, epoch, p_truth, label_bits}, one per retained
  // history entry, samples in dataset order
  std::string history_dump;
};

// full pipeline: optional head reordering, all epochs, routed + fixed evals
TrainResult train_and_evaluate(Model& model, const Dataset& train_set,
                               const Dataset& eval_set, const TrainConfig& tc);

struct ReportRow {
  std::string run_id;
  std::string split;
  std::string mode;
  double accuracy = 0.0;
  std::uint64_t total_flops = 0;
  double mean_flops = 0.0;
  std::map<double, double> frac_r;
  std::string error;
};

ReportRow report_row(const std::string& run_id, const std::string& split,
                     const std::string& mode, const EvalResult& ev,
                     const std::vector<double>& factors);

// header: run_id,split,mode,accuracy,total_flops,mean_flops_per_sample,
// frac_r_<factor>... (+ error when with_error)
std::string report_csv(const std::vector<ReportRow>& rows,
                       const std::vector<double>& factors, bool with_error);

}  // namespace adawidth
