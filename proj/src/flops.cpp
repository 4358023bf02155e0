#include "adawidth/flops.hpp"

#include <stdexcept>

namespace adawidth {

FlopsBreakdown count_linear(int l, int in_dim, int out_dim) {
  if (l <= 0 || in_dim <= 0 || out_dim <= 0)
    throw std::invalid_argument("count_linear: dimensions must be positive");
  FlopsBreakdown b;
  b.macs = static_cast<std::uint64_t>(l) * in_dim * out_dim;
  b.bias_adds = static_cast<std::uint64_t>(l) * out_dim;
  return b;
}

MhaCost count_mha(int l, const EncoderConfig& cfg, double r) {
  const int w = cfg.width_at(r);
  const int hs = cfg.heads_at(r);
  const int dh = cfg.d_head();
  MhaCost c;
  const FlopsBreakdown one_proj = count_linear(l, w, hs * dh);
  c.proj = one_proj + one_proj + one_proj;
  c.scores.macs = static_cast<std::uint64_t>(hs) * l * l * dh;
  c.values.macs = static_cast<std::uint64_t>(hs) * l * l * dh;
  c.out = count_linear(l, w, w);
  if (cfg.count_elementwise) {
    // scale (1/elem) + softmax (4/elem) over the hs l*l score grids
    c.scores.elementwise = static_cast<std::uint64_t>(hs) * l * l * 5;
  }
  return c;
}

FlopsBreakdown count_ffn(int l, const EncoderConfig& cfg, double r) {
  const int w = cfg.width_at(r);
  const int f = cfg.ffn_at(r);
  FlopsBreakdown b = count_linear(l, w, f) + count_linear(l, f, w);
  if (cfg.count_elementwise)
    b.elementwise += static_cast<std::uint64_t>(l) * f * 8;  // GeLU
  return b;
}

FlopsBreakdown count_layer(int l, const EncoderConfig& cfg, double r) {
  FlopsBreakdown b = count_mha(l, cfg, r).total() + count_ffn(l, cfg, r);
  if (cfg.count_elementwise) {
    const std::uint64_t lw =
        static_cast<std::uint64_t>(l) * static_cast<std::uint64_t>(cfg.width_at(r));
    b.elementwise += 2 * lw * 8;  // two LayerNorms
    b.elementwise += 2 * lw;      // two residual adds
  }
  return b;
}

ForwardCost count_forward(const EncoderConfig& cfg, int l, double r,
                          bool include_router) {
  cfg.level_of(r);
  ForwardCost c;
  if (cfg.count_elementwise)
    c.embedding.elementwise =
        static_cast<std::uint64_t>(l) * cfg.d_model;  // token + position add

  auto add_layer = [&](double factor) {
    const MhaCost m = count_mha(l, cfg, factor);
    c.mha_proj += m.proj;
    c.mha_scores += m.scores;
    c.mha_values += m.values;
    c.mha_out += m.out;
    c.ffn += count_ffn(l, cfg, factor);
    if (cfg.count_elementwise) {
      const std::uint64_t lw = static_cast<std::uint64_t>(l) *
                               static_cast<std::uint64_t>(cfg.width_at(factor));
      c.ffn.elementwise += 2 * lw * 8 + 2 * lw;
    }
  };
  for (int i = 0; i < cfg.n_prefix_layers; ++i) add_layer(1.0);
  for (int i = 0; i < cfg.n_adaptive_layers(); ++i) add_layer(r);

  c.unpooler = count_linear(l, cfg.width_at(r), cfg.d_model);
  c.classifier = count_linear(1, cfg.d_model, cfg.n_classes);
  if (include_router) {
    c.router = count_linear(1, cfg.d_model, cfg.d_router) +
               count_linear(1, cfg.d_router, cfg.n_levels());
    if (cfg.count_elementwise)
      c.router.elementwise += static_cast<std::uint64_t>(cfg.d_router) * 8;
  }
  return c;
}

void FlopsLedger::add(int sample_id, int l, double r, const ForwardCost& cost) {
  components_.embedding += cost.embedding;
  components_.mha_proj += cost.mha_proj;
  components_.mha_scores += cost.mha_scores;
  components_.mha_values += cost.mha_values;
  components_.mha_out += cost.mha_out;
  components_.ffn += cost.ffn;
  components_.unpooler += cost.unpooler;
  components_.classifier += cost.classifier;
  components_.router += cost.router;
  const std::uint64_t f = cost.total().flops();
  samples_.push_back({sample_id, l, r, f});
  total_ += f;
}

void FlopsLedger::merge(const FlopsLedger& other) {
  components_.embedding += other.components_.embedding;
  components_.mha_proj += other.components_.mha_proj;
  components_.mha_scores += other.components_.mha_scores;
  components_.mha_values += other.components_.mha_values;
  components_.mha_out += other.components_.mha_out;
  components_.ffn += other.components_.ffn;
  components_.unpooler += other.components_.unpooler;
  components_.classifier += other.components_.classifier;
  components_.router += other.components_.router;
  samples_.insert(samples_.end(), other.samples_.begin(), other.samples_.end());
  total_ += other.total_;
}

double FlopsLedger::mean_flops_per_sample() const {
  if (samples_.empty()) return 0.0;
  return static_cast<double>(total_) / static_cast<double>(samples_.size());
}

std::map<double, int> FlopsLedger::factor_counts() const {
  std::map<double, int> counts;
  for (const auto& s : samples_) ++counts[s.r];
  return counts;
}

}  // namespace adawidth
