#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adawidth/tensor.hpp"

namespace adawidth {

// Architecture description shared by the model, the static cost model, and
// the checkpoint container. The first n_prefix_layers always run at full
// width; the remaining layers execute at any configured width factor by
// slicing leading parameter blocks.
struct EncoderConfig {
  int vocab_size = 0;
  int max_seq_len = 32;
  int n_layers = 4;
  int n_prefix_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_ffn = 256;
  int n_classes = 2;
  int d_router = 128;
  std::vector<double> width_factors{0.25, 1.0};  // ascending, last must be 1
  bool count_elementwise = false;  // cost model: add non-matmul estimates

  int d_head() const { return d_model / n_heads; }
  int n_levels() const { return static_cast<int>(width_factors.size()); }
  int n_adaptive_layers() const { return n_layers - n_prefix_layers; }

  int width_at(double r) const;  // r * d_model, validated integral
  int heads_at(double r) const;  // r * n_heads
  int ffn_at(double r) const;    // r * d_ffn
  int level_of(double r) const;  // index into width_factors

  void validate() const;  // throws std::invalid_argument
};

// Accumulates, per (layer, head), the L2 norms of each head's contribution
// to the attention output (its block of rows of the output projection),
// summed over processed tokens. Feeds head reordering.
struct HeadStats {
  std::vector<std::vector<double>> norm_sum;
  std::uint64_t tokens = 0;
};

struct LayerRefs {
  Tensor w_q, b_q, w_k, b_k, w_v, b_v;  // projections, per-head column blocks
  Tensor w_o, b_o;
  Tensor ln1_g, ln1_b;
  Tensor w_1, b_1, w_2, b_2;
  Tensor ln2_g, ln2_b;
};

// Transformer classifier with a width-adaptive suffix plus the width
// predictor head. All sub-network widths share one parameter set; running at
// factor r reads only leading blocks (first r*n_heads head blocks, leading
// r*d_model rows/cols, leading bias/LayerNorm slices).
class Model {
 public:
  Model(EncoderConfig cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }
  std::uint64_t init_seed() const { return seed_; }

  std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& parameters() const {
    return params_;
  }
  Tensor param(const std::string& name) const;
  std::int64_t n_scalar_params() const;
  std::int64_t n_router_params() const;

  // token + learned positional embeddings; sequence must be non-empty and
  // fit max_seq_len
  Tensor embed(const std::vector<int>& ids) const;

  // full-width prefix layers; key_mask is an optional additive [l] row
  // (0 for real tokens, large negative for padding)
  Tensor encode_nonadaptive(const Tensor& x0, const Tensor* key_mask = nullptr,
                            HeadStats* stats = nullptr) const;
  Tensor encode_nonadaptive(const std::vector<int>& ids) const;

  // truncation to the leading width_at(r) feature columns; no parameters
  Tensor pool(const Tensor& h, double r) const;

  // adaptive layers at factor r (input already pooled)
  Tensor encode_adaptive(const Tensor& h_r, double r,
                         const Tensor* key_mask = nullptr,
                         HeadStats* stats = nullptr) const;

  // affine map back to d_model using the leading width_at(r) weight rows
  Tensor unpool(const Tensor& h_r, double r) const;

  // first-token row -> class logits [1 x C]; shared across all widths
  Tensor classify(const Tensor& h) const;

  // first-token row of the full-width prefix output -> level logits [1 x M]
  Tensor router_logits(const Tensor& h_full) const;

  // classify(unpool(encode_adaptive(pool(encode_nonadaptive(ids)))))
  Tensor forward_adaptive(const std::vector<int>& ids, double r) const;

  // same pipeline on a padded sequence; positions >= real_len are masked out
  // of attention and cannot influence the first-token logits
  Tensor forward_padded(const std::vector<int>& padded_ids, int real_len,
                        double r) const;

  Tensor mha_forward(const Tensor& x, int layer, double r,
                     const Tensor* key_mask = nullptr,
                     HeadStats* stats = nullptr) const;
  Tensor ffn_forward(const Tensor& x, int layer, double r) const;

  // whether forward_adaptive(*, r) reads the given scalar of the named
  // parameter; drives the prefix-perturbation and gradient-support checks
  bool param_read_by_forward(const std::string& name, std::int64_t flat_index,
                             double r) const;

  // mean per-token contribution norm per (layer, head) over the calibration
  // sequences, computed at full width without recording gradients
  std::vector<std::vector<double>> head_importance(
      const std::vector<std::vector<int>>& calibration) const;

  // permutes head blocks of the query/key/value projections and the matching
  // output-projection rows so scores are non-increasing left to right
  void reorder_heads(const std::vector<std::vector<double>>& scores);

 private:
  Tensor make_param(const std::string& name, std::vector<int> shape);
  void init_params();

  EncoderConfig cfg_;
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::unordered_map<std::string, std::size_t> index_;

  Tensor tok_emb_, pos_emb_;
  std::vector<LayerRefs> layers_;
  Tensor unpool_w_, unpool_b_;
  Tensor cls_w_, cls_b_;
  Tensor router_w1_, router_b1_, router_w2_, router_b2_;
};

}  // namespace adawidth
