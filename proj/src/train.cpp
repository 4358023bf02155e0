#include "adawidth/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "adawidth/ops.hpp"
#include "adawidth/router.hpp"

namespace adawidth {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kMaskValue = -1e9;

std::vector<double> stable_softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

int argmax_row(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

std::vector<std::pair<std::string, Tensor>> select_params(const Model& m,
                                                          bool router) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : m.parameters())
    if ((name.rfind("router.", 0) == 0) == router) out.emplace_back(name, t);
  return out;
}

double metric_cap(const TrainConfig& tc, int n_classes) {
  if (tc.label_mode == "entropy")
    return std::log(static_cast<double>(n_classes)) + 1e-9;
  return 1.0;
}

void check_dataset(const Dataset& ds, const EncoderConfig& cfg) {
  ds.validate();
  for (const auto& s : ds.samples) {
    if (s.label >= cfg.n_classes)
      throw std::invalid_argument("train: sample " + std::to_string(s.id) +
                                  " label exceeds n_classes");
    if (static_cast<int>(s.token_ids.size()) > cfg.max_seq_len)
      throw std::invalid_argument("train: sample " + std::to_string(s.id) +
                                  " longer than max_seq_len");
    for (int id : s.token_ids)
      if (id < 0 || id >= cfg.vocab_size)
        throw std::invalid_argument("train: sample " + std::to_string(s.id) +
                                    " has token outside the vocabulary");
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double sample_reduction_factor(const HardnessLabel& y,
                               const std::vector<double>& factors, Rng& rng) {
  if (y.size() != factors.size())
    throw std::invalid_argument(
        "sample_reduction_factor: label/factor size mismatch");
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i]) on.push_back(i);
  if (on.empty()) return factors.back();
  if (on.size() == 1) return factors[on[0]];
  return factors[on[rng.below(on.size())]];
}

std::string epoch_log_json(const EpochLog& log) {
  ordered_json j;
  j["epoch"] = log.epoch;
  j["l_task"] = log.l_task;
  j["l_router"] = log.l_router;
  j["l_total"] = log.l_total;
  j["router_trained"] = log.router_trained;
  ordered_json h = ordered_json::object();
  for (const auto& [key, count] : log.label_histogram) h[key] = count;
  j["label_histogram"] = h;
  return j.dump();
}

std::string route_decision_json(const RouteDecision& d) {
  ordered_json j;
  j["sample_id"] = d.sample_id;
  j["logits"] = d.logits;
  j["r"] = d.r;
  return j.dump();
}

Trainer::Trainer(Model& model, const Dataset& train_set, TrainConfig tc)
    : model_(model),
      data_(train_set),
      tc_(std::move(tc)),
      history_(tc_.window, metric_cap(tc_, model.config().n_classes)),
      main_opt_(select_params(model, false), tc_.learning_rate,
                tc_.weight_decay),
      router_opt_(select_params(model, true), tc_.learning_rate,
                  tc_.weight_decay),
      shuffle_rng_(derive_seed(tc_.seed, 1)),
      factor_rng_(derive_seed(tc_.seed, 2)) {
  tc_.validate(model.config().n_levels());
  check_dataset(train_set, model.config());
  order_.resize(data_.samples.size());
  for (std::size_t i = 0; i < order_.size(); ++i)
    order_[i] = static_cast<int>(i);
}

HardnessLabel Trainer::berxit_label(const Sample& s) const {
  NoGradScope ng;
  const auto& factors = model_.config().width_factors;
  HardnessLabel y(factors.size(), 0);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    Tensor logits = model_.forward_adaptive(s.token_ids, factors[i]);
    y[i] = argmax_row(logits.values()) == s.label ? 1 : 0;
  }
  return y;
}

void Trainer::record_metric(const Sample& s, const std::vector<double>& probs) {
  double value;
  if (tc_.label_mode == "entropy") {
    value = entropy(probs);
  } else {
    value = probs[static_cast<std::size_t>(s.label)];
  }
  history_.record(s.id, epoch_, value);
}

void Trainer::train_one(const Sample& s, const HardnessLabel& y,
                        bool router_on, int b, int b_inc, StepStats* st) {
  const auto& cfg = model_.config();
  const auto& factors = cfg.width_factors;
  const bool berxit = tc_.label_mode == "berxit";
  const double r =
      berxit ? 1.0 : sample_reduction_factor(y, factors, factor_rng_);

  TapeScope tape;

  std::vector<int> ids = s.token_ids;
  const int real_len = static_cast<int>(ids.size());
  Tensor mask;
  const Tensor* maskp = nullptr;
  if (tc_.pad_to_max && real_len < cfg.max_seq_len) {
    ids.resize(static_cast<std::size_t>(cfg.max_seq_len), Vocab::kPad);
    mask = Tensor::zeros({cfg.max_seq_len});
    for (int i = real_len; i < cfg.max_seq_len; ++i)
      mask.data()[i] = kMaskValue;
    maskp = &mask;
  }

  Tensor h_full = model_.encode_nonadaptive(model_.embed(ids), maskp);

  Tensor task_loss;
  std::vector<double> record_probs;
  if (berxit) {
    // every sub-network trains on every sample; the task loss is their mean
    Tensor sum;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const double ri = factors[i];
      Tensor h = model_.encode_adaptive(model_.pool(h_full, ri), ri, maskp);
      Tensor logits = model_.classify(model_.unpool(h, ri));
      Tensor ce = cross_entropy(logits, {s.label});
      sum = i == 0 ? ce : add(sum, ce);
      if (ri == 1.0) record_probs = stable_softmax(logits.values());
    }
    task_loss = scale(sum, 1.0 / static_cast<double>(factors.size()));
  } else {
    Tensor h = model_.encode_adaptive(model_.pool(h_full, r), r, maskp);
    Tensor logits = model_.classify(model_.unpool(h, r));
    task_loss = cross_entropy(logits, {s.label});
    record_probs = stable_softmax(logits.values());
  }
  const double ce_value = task_loss.item();
  if (!std::isfinite(ce_value))
    throw std::runtime_error("train: non-finite task loss at epoch " +
                             std::to_string(epoch_) + ", sample " +
                             std::to_string(s.id));

  Tensor loss =
      scale(task_loss, tc_.lambda_task / static_cast<double>(b));
  double bce_value = 0.0;
  const bool include_router = router_on && !all_zero(y);
  if (include_router) {
    Tensor bce = router_bce(model_.router_logits(h_full), y);
    bce_value = bce.item();
    if (!std::isfinite(bce_value))
      throw std::runtime_error("train: non-finite router loss at epoch " +
                               std::to_string(epoch_) + ", sample " +
                               std::to_string(s.id));
    loss = add(loss,
               scale(bce, tc_.lambda_router / static_cast<double>(b_inc)));
  }

  st->l_total += loss.item();
  st->l_task += ce_value;
  if (include_router) st->l_router += bce_value;

  backward(loss);
  record_metric(s, record_probs);
}

StepStats Trainer::train_batch(const std::vector<int>& sample_indices) {
  if (sample_indices.empty())
    throw std::invalid_argument("train_batch: empty batch");
  const bool berxit = tc_.label_mode == "berxit";
  const bool router_on = berxit || epoch_ > tc_.window;

  StepStats st;
  st.batch_size = static_cast<int>(sample_indices.size());

  std::vector<HardnessLabel> labels;
  labels.reserve(sample_indices.size());
  for (int idx : sample_indices) {
    const Sample& s = data_.samples[static_cast<std::size_t>(idx)];
    HardnessLabel y = berxit ? berxit_label(s)
                             : history_.label(s.id, tc_.thresholds);
    st.label_histogram[label_key(y)] += 1;
    if (!all_zero(y)) ++st.router_included;
    labels.push_back(std::move(y));
  }
  const bool router_step = router_on && st.router_included > 0;
  const int b_inc = st.router_included;

  main_opt_.zero_grad();
  router_opt_.zero_grad();
  for (std::size_t k = 0; k < sample_indices.size(); ++k) {
    const Sample& s =
        data_.samples[static_cast<std::size_t>(sample_indices[k])];
    train_one(s, labels[k], router_step, st.batch_size, b_inc, &st);
  }
  main_opt_.step();
  if (router_step) router_opt_.step();

  st.l_task /= st.batch_size;
  st.l_router = b_inc > 0 && router_step ? st.l_router / b_inc : 0.0;
  st.router_stepped = router_step;
  return st;
}

EpochLog Trainer::run_epoch() {
  ++epoch_;
  shuffle_rng_.shuffle(order_);

  EpochLog log;
  log.epoch = epoch_;
  double sum_ce = 0.0, sum_bce = 0.0;
  std::int64_t n_bce = 0;
  const int n = static_cast<int>(order_.size());
  for (int start = 0; start < n; start += tc_.batch_size) {
    const int end = std::min(n, start + tc_.batch_size);
    std::vector<int> batch(order_.begin() + start, order_.begin() + end);
    StepStats st = train_batch(batch);
    sum_ce += st.l_task * st.batch_size;
    if (st.router_stepped) {
      sum_bce += st.l_router * st.router_included;
      n_bce += st.router_included;
      log.router_trained = true;
    }
    for (const auto& [key, count] : st.label_histogram)
      log.label_histogram[key] += count;
  }
  log.l_task = sum_ce / n;
  log.l_router = n_bce > 0 ? sum_bce / static_cast<double>(n_bce) : 0.0;
  log.l_total = tc_.lambda_task * log.l_task + tc_.lambda_router * log.l_router;
  return log;
}

namespace {

EvalResult evaluate_impl(const Model& model, const Dataset& split,
                         bool routed, double fixed_r) {
  if (split.samples.empty())
    throw std::invalid_argument("evaluate: empty split");
  const auto& cfg = model.config();
  check_dataset(split, cfg);

  NoGradScope ng;
  EvalResult ev;
  int hits = 0;
  for (const auto& s : split.samples) {
    const int l = static_cast<int>(s.token_ids.size());
    double r = fixed_r;
    Tensor logits;
    if (routed) {
      Tensor h_full = model.encode_nonadaptive(s.token_ids);
      Tensor rl = model.router_logits(h_full);
      r = route_factor(rl, cfg.width_factors);
      Tensor h = model.encode_adaptive(model.pool(h_full, r), r);
      logits = model.classify(model.unpool(h, r));
      ev.decisions.push_back({s.id, rl.values(), r});
    } else {
      logits = model.forward_adaptive(s.token_ids, r);
    }
    const int pred = argmax_row(logits.values());
    const bool hit = pred == s.label;
    hits += hit ? 1 : 0;
    ev.ledger.add(s.id, l, r, count_forward(cfg, l, r, routed));
    auto& tag = ev.tag_hits[s.tag];
    tag.first += hit ? 1 : 0;
    tag.second += 1;
    ev.tag_routing[s.tag][r] += 1;
  }
  ev.accuracy = static_cast<double>(hits) /
                static_cast<double>(split.samples.size());
  return ev;
}

}  // namespace

EvalResult evaluate_routed(const Model& model, const Dataset& split) {
  return evaluate_impl(model, split, true, 1.0);
}

EvalResult evaluate_fixed(const Model& model, const Dataset& split, double r) {
  model.config().level_of(r);
  return evaluate_impl(model, split, false, r);
}

TrainResult train_and_evaluate(Model& model, const Dataset& train_set,
                               const Dataset& eval_set, const TrainConfig& tc) {
  if (tc.reorder_heads) {
    const int n_cal = std::min<int>(tc.reorder_calibration,
                                    static_cast<int>(train_set.samples.size()));
    std::vector<std::vector<int>> calibration;
    for (int i = 0; i < n_cal; ++i)
      calibration.push_back(
          train_set.samples[static_cast<std::size_t>(i)].token_ids);
    model.reorder_heads(model.head_importance(calibration));
  }

  Trainer trainer(model, train_set, tc);
  TrainResult out;
  for (int e = 0; e < tc.epochs; ++e) out.logs.push_back(trainer.run_epoch());

  out.routed = evaluate_routed(model, eval_set);
  for (double r : model.config().width_factors)
    out.fixed.emplace_back(r, evaluate_fixed(model, eval_set, r));

  for (const auto& s : train_set.samples) {
    const std::string bits =
        label_key(trainer.history().label(s.id, tc.thresholds));
    for (const auto& [epoch, value] : trainer.history().entries(s.id)) {
      ordered_json line;
      line["sample_id"] = s.id;
      line["epoch"] = epoch;
      line["p_truth"] = value;
      line["label_bits"] = bits;
      out.history_dump += line.dump();
      out.history_dump += '\n';
    }
  }
  return out;
}

ReportRow report_row(const std::string& run_id, const std::string& split,
                     const std::string& mode, const EvalResult& ev,
                     const std::vector<double>& factors) {
  ReportRow row;
  row.run_id = run_id;
  row.split = split;
  row.mode = mode;
  row.accuracy = ev.accuracy;
  row.total_flops = ev.ledger.total_flops();
  row.mean_flops = ev.ledger.mean_flops_per_sample();
  const auto counts = ev.ledger.factor_counts();
  const double n = static_cast<double>(ev.ledger.samples().size());
  for (double f : factors) {
    const auto it = counts.find(f);
    row.frac_r[f] = it == counts.end() || n == 0.0
                        ? 0.0
                        : static_cast<double>(it->second) / n;
  }
  return row;
}

std::string report_csv(const std::vector<ReportRow>& rows,
                       const std::vector<double>& factors, bool with_error) {
  std::string out = "run_id,split,mode,accuracy,total_flops,mean_flops_per_sample";
  char buf[96];
  for (double f : factors) {
    std::snprintf(buf, sizeof buf, ",frac_r_%g", f);
    out += buf;
  }
  if (with_error) out += ",error";
  out += '\n';

  for (const auto& row : rows) {
    out += row.run_id + ',' + row.split + ',' + row.mode;
    std::snprintf(buf, sizeof buf, ",%.6f,%llu,%.3f", row.accuracy,
                  static_cast<unsigned long long>(row.total_flops),
                  row.mean_flops);
    out += buf;
    for (double f : factors) {
      const auto it = row.frac_r.find(f);
      std::snprintf(buf, sizeof buf, ",%.6f",
                    it == row.frac_r.end() ? 0.0 : it->second);
      out += buf;
    }
    if (with_error) {
      std::string err = row.error;
      for (char& c : err)
        if (c == ',' || c == '\n') c = ';';
      out += ',' + err;
    }
    out += '\n';
  }
  return out;
}

}  // namespace adawidth
