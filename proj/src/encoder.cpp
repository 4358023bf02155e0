#include "adawidth/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adawidth/ops.hpp"
#include "adawidth/rng.hpp"

namespace adawidth {

namespace {

constexpr double kMaskValue = -1e9;
constexpr double kInitStd = 0.02;

// params are sliced only when the factor actually narrows them, so the
// full-width path runs on the original tensors
Tensor col_prefix(const Tensor& m, int rows, int cols) {
  if (rows == m.rows() && cols == m.cols()) return m;
  return slice(m, 0, rows, 0, cols);
}

Tensor vec_prefix(const Tensor& v, int len) {
  if (len == v.shape()[0]) return v;
  return slice(v, 0, len);
}

}  // namespace

Model::Model(EncoderConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed) {
  cfg_.validate();
  init_params();
}

Tensor Model::make_param(const std::string& name, std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  index_[name] = params_.size();
  params_.emplace_back(name, t);
  return t;
}

void Model::init_params() {
  const int d = cfg_.d_model;
  const int proj = cfg_.n_heads * cfg_.d_head();
  const int f = cfg_.d_ffn;

  tok_emb_ = make_param("embed.tok", {cfg_.vocab_size, d});
  pos_emb_ = make_param("embed.pos", {cfg_.max_seq_len, d});
  layers_.resize(static_cast<std::size_t>(cfg_.n_layers));
  for (int i = 0; i < cfg_.n_layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    LayerRefs& lr = layers_[static_cast<std::size_t>(i)];
    lr.w_q = make_param(p + "w_q", {d, proj});
    lr.b_q = make_param(p + "b_q", {proj});
    lr.w_k = make_param(p + "w_k", {d, proj});
    lr.b_k = make_param(p + "b_k", {proj});
    lr.w_v = make_param(p + "w_v", {d, proj});
    lr.b_v = make_param(p + "b_v", {proj});
    lr.w_o = make_param(p + "w_o", {d, d});
    lr.b_o = make_param(p + "b_o", {d});
    lr.ln1_g = make_param(p + "ln1.g", {d});
    lr.ln1_b = make_param(p + "ln1.b", {d});
    lr.w_1 = make_param(p + "w_1", {d, f});
    lr.b_1 = make_param(p + "b_1", {f});
    lr.w_2 = make_param(p + "w_2", {f, d});
    lr.b_2 = make_param(p + "b_2", {d});
    lr.ln2_g = make_param(p + "ln2.g", {d});
    lr.ln2_b = make_param(p + "ln2.b", {d});
  }
  unpool_w_ = make_param("unpool.w", {d, d});
  unpool_b_ = make_param("unpool.b", {d});
  cls_w_ = make_param("cls.w", {d, cfg_.n_classes});
  cls_b_ = make_param("cls.b", {cfg_.n_classes});
  router_w1_ = make_param("router.w_1", {d, cfg_.d_router});
  router_b1_ = make_param("router.b_1", {cfg_.d_router});
  router_w2_ = make_param("router.w_2", {cfg_.d_router, cfg_.n_levels()});
  router_b2_ = make_param("router.b_2", {cfg_.n_levels()});

  Rng rng(seed_);
  auto fill_normal = [&rng](Tensor t) {
    double* v = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i) v[i] = kInitStd * rng.normal();
    t.apply_precision();
  };
  auto fill_ones = [](Tensor t) {
    double* v = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i) v[i] = 1.0;
  };

  fill_normal(tok_emb_);
  fill_normal(pos_emb_);
  for (auto& lr : layers_) {
    fill_normal(lr.w_q);
    fill_normal(lr.w_k);
    fill_normal(lr.w_v);
    fill_normal(lr.w_o);
    fill_ones(lr.ln1_g);
    fill_normal(lr.w_1);
    fill_normal(lr.w_2);
    fill_ones(lr.ln2_g);
  }
  // identity start: at any width the unpooler begins as a truncated-identity
  // lift, so early training sees the raw prefix features
  for (int i = 0; i < d; ++i) unpool_w_.data()[i * d + i] = 1.0;
  fill_normal(cls_w_);
  fill_normal(router_w1_);
  fill_normal(router_w2_);
}

Tensor Model::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("unknown parameter " + name);
  return params_[it->second].second;
}

std::int64_t Model::n_scalar_params() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

std::int64_t Model::n_router_params() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : params_)
    if (name.rfind("router.", 0) == 0) n += t.numel();
  return n;
}

Tensor Model::embed(const std::vector<int>& ids) const {
  if (ids.empty()) throw std::invalid_argument("embed: empty sequence");
  if (static_cast<int>(ids.size()) > cfg_.max_seq_len)
    throw std::invalid_argument("embed: sequence length " +
                                std::to_string(ids.size()) + " exceeds " +
                                std::to_string(cfg_.max_seq_len));
  const int l = static_cast<int>(ids.size());
  return add(gather_rows(tok_emb_, ids), slice(pos_emb_, 0, l, 0, cfg_.d_model));
}

Tensor Model::mha_forward(const Tensor& x, int layer, double r,
                          const Tensor* key_mask, HeadStats* stats) const {
  const LayerRefs& lr = layers_[static_cast<std::size_t>(layer)];
  const int w = cfg_.width_at(r);
  const int hs = cfg_.heads_at(r);
  const int dh = cfg_.d_head();
  if (x.cols() != w)
    throw std::invalid_argument("mha_forward: input width " +
                                std::to_string(x.cols()) + " != " +
                                std::to_string(w));
  const int l = x.rows();
  const int pc = hs * dh;  // == w

  Tensor q = add_rowvec(matmul(x, col_prefix(lr.w_q, w, pc)), vec_prefix(lr.b_q, pc));
  Tensor k = add_rowvec(matmul(x, col_prefix(lr.w_k, w, pc)), vec_prefix(lr.b_k, pc));
  Tensor v = add_rowvec(matmul(x, col_prefix(lr.w_v, w, pc)), vec_prefix(lr.b_v, pc));

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> ctx;
  ctx.reserve(static_cast<std::size_t>(hs));
  for (int h = 0; h < hs; ++h) {
    Tensor qh = slice(q, 0, l, h * dh, (h + 1) * dh);
    Tensor kh = slice(k, 0, l, h * dh, (h + 1) * dh);
    Tensor vh = slice(v, 0, l, h * dh, (h + 1) * dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    if (key_mask) scores = add_rowvec(scores, *key_mask);
    ctx.push_back(matmul(softmax(scores, 1), vh));
  }
  Tensor cat = hs == 1 ? ctx[0] : concat_cols(ctx);
  Tensor out =
      add_rowvec(matmul(cat, col_prefix(lr.w_o, w, w)), vec_prefix(lr.b_o, w));

  if (stats) {
    NoGradScope ng;
    auto& sums = stats->norm_sum[static_cast<std::size_t>(layer)];
    for (int h = 0; h < hs; ++h) {
      Tensor contrib = matmul(ctx[static_cast<std::size_t>(h)],
                              slice(lr.w_o, h * dh, (h + 1) * dh, 0, w));
      const double* c = contrib.data();
      double total = 0.0;
      for (int row = 0; row < l; ++row) {
        double sq = 0.0;
        for (int j = 0; j < w; ++j) {
          const double e = c[static_cast<std::size_t>(row) * w + j];
          sq += e * e;
        }
        total += std::sqrt(sq);
      }
      sums[static_cast<std::size_t>(h)] += total;
    }
  }

  return layer_norm(add(x, out), vec_prefix(lr.ln1_g, w), vec_prefix(lr.ln1_b, w));
}

Tensor Model::ffn_forward(const Tensor& x, int layer, double r) const {
  const LayerRefs& lr = layers_[static_cast<std::size_t>(layer)];
  const int w = cfg_.width_at(r);
  const int f = cfg_.ffn_at(r);
  if (x.cols() != w)
    throw std::invalid_argument("ffn_forward: input width " +
                                std::to_string(x.cols()) + " != " +
                                std::to_string(w));
  Tensor h = gelu(
      add_rowvec(matmul(x, col_prefix(lr.w_1, w, f)), vec_prefix(lr.b_1, f)));
  Tensor y =
      add_rowvec(matmul(h, col_prefix(lr.w_2, f, w)), vec_prefix(lr.b_2, w));
  return layer_norm(add(x, y), vec_prefix(lr.ln2_g, w), vec_prefix(lr.ln2_b, w));
}

Tensor Model::encode_nonadaptive(const Tensor& x0, const Tensor* key_mask,
                                 HeadStats* stats) const {
  Tensor h = x0;
  for (int i = 0; i < cfg_.n_prefix_layers; ++i) {
    h = mha_forward(h, i, 1.0, key_mask, stats);
    h = ffn_forward(h, i, 1.0);
  }
  return h;
}

Tensor Model::encode_nonadaptive(const std::vector<int>& ids) const {
  return encode_nonadaptive(embed(ids), nullptr, nullptr);
}

Tensor Model::pool(const Tensor& h, double r) const {
  const int w = cfg_.width_at(r);
  if (h.cols() != cfg_.d_model)
    throw std::invalid_argument("pool: expected full-width input");
  if (w == cfg_.d_model) return h;
  return slice(h, 0, h.rows(), 0, w);
}

Tensor Model::encode_adaptive(const Tensor& h_r, double r,
                              const Tensor* key_mask, HeadStats* stats) const {
  Tensor h = h_r;
  for (int i = cfg_.n_prefix_layers; i < cfg_.n_layers; ++i) {
    h = mha_forward(h, i, r, key_mask, stats);
    h = ffn_forward(h, i, r);
  }
  return h;
}

Tensor Model::unpool(const Tensor& h_r, double r) const {
  const int w = cfg_.width_at(r);
  if (h_r.cols() != w)
    throw std::invalid_argument("unpool: input width " +
                                std::to_string(h_r.cols()) + " != " +
                                std::to_string(w));
  Tensor wu = w == cfg_.d_model ? unpool_w_
                                : slice(unpool_w_, 0, w, 0, cfg_.d_model);
  return add_rowvec(matmul(h_r, wu), unpool_b_);
}

Tensor Model::classify(const Tensor& h) const {
  if (h.cols() != cfg_.d_model)
    throw std::invalid_argument("classify: expected full-width input");
  return add_rowvec(matmul(select_row(h, 0), cls_w_), cls_b_);
}

Tensor Model::router_logits(const Tensor& h_full) const {
  if (h_full.cols() != cfg_.d_model)
    throw std::invalid_argument("router_logits: expected full-width input");
  Tensor hidden = gelu(
      add_rowvec(matmul(select_row(h_full, 0), router_w1_), router_b1_));
  return add_rowvec(matmul(hidden, router_w2_), router_b2_);
}

Tensor Model::forward_adaptive(const std::vector<int>& ids, double r) const {
  cfg_.level_of(r);
  Tensor h = encode_nonadaptive(embed(ids), nullptr, nullptr);
  Tensor ha = encode_adaptive(pool(h, r), r, nullptr, nullptr);
  return classify(unpool(ha, r));
}

Tensor Model::forward_padded(const std::vector<int>& padded_ids, int real_len,
                             double r) const {
  cfg_.level_of(r);
  const int l = static_cast<int>(padded_ids.size());
  if (real_len < 1 || real_len > l)
    throw std::invalid_argument("forward_padded: bad real_len");
  if (real_len == l) return forward_adaptive(padded_ids, r);
  Tensor mask = Tensor::zeros({l});
  for (int i = real_len; i < l; ++i) mask.data()[i] = kMaskValue;
  Tensor h = encode_nonadaptive(embed(padded_ids), &mask, nullptr);
  Tensor ha = encode_adaptive(pool(h, r), r, &mask, nullptr);
  return classify(unpool(ha, r));
}

bool Model::param_read_by_forward(const std::string& name,
                                  std::int64_t flat_index, double r) const {
  const int w = cfg_.width_at(r);
  const int pc = cfg_.heads_at(r) * cfg_.d_head();
  const int f = cfg_.ffn_at(r);
  const int d = cfg_.d_model;

  if (name.rfind("router.", 0) == 0) return false;
  if (name.rfind("embed.", 0) == 0 || name.rfind("cls.", 0) == 0) return true;
  if (name == "unpool.w") return flat_index / d < w;
  if (name == "unpool.b") return true;

  if (name.rfind("layer", 0) != 0)
    throw std::invalid_argument("unknown parameter " + name);
  const std::size_t dot = name.find('.');
  const int layer = std::stoi(name.substr(5, dot - 5));
  if (layer < cfg_.n_prefix_layers) return true;
  const std::string field = name.substr(dot + 1);

  const auto mshape = param(name).shape();
  const std::int64_t row = mshape.size() == 2 ? flat_index / mshape[1] : 0;
  const std::int64_t col = mshape.size() == 2 ? flat_index % mshape[1] : flat_index;

  if (field == "w_q" || field == "w_k" || field == "w_v")
    return row < w && col < pc;
  if (field == "b_q" || field == "b_k" || field == "b_v") return col < pc;
  if (field == "w_o") return row < w && col < w;
  if (field == "b_o" || field == "ln1.g" || field == "ln1.b" ||
      field == "ln2.g" || field == "ln2.b" || field == "b_2")
    return col < w;
  if (field == "w_1") return row < w && col < f;
  if (field == "b_1") return col < f;
  if (field == "w_2") return row < f && col < w;
  throw std::invalid_argument("unknown parameter " + name);
}

std::vector<std::vector<double>> Model::head_importance(
    const std::vector<std::vector<int>>& calibration) const {
  if (calibration.empty())
    throw std::invalid_argument("head_importance: empty calibration set");
  HeadStats stats;
  stats.norm_sum.assign(static_cast<std::size_t>(cfg_.n_layers),
                        std::vector<double>(static_cast<std::size_t>(cfg_.n_heads), 0.0));
  NoGradScope ng;
  for (const auto& ids : calibration) {
    Tensor h = encode_nonadaptive(embed(ids), nullptr, &stats);
    encode_adaptive(h, 1.0, nullptr, &stats);
    stats.tokens += ids.size();
  }
  std::vector<std::vector<double>> scores = stats.norm_sum;
  for (auto& per_layer : scores)
    for (double& s : per_layer) s /= static_cast<double>(stats.tokens);
  return scores;
}

void Model::reorder_heads(const std::vector<std::vector<double>>& scores) {
  if (static_cast<int>(scores.size()) != cfg_.n_layers)
    throw std::invalid_argument("reorder_heads: need scores for every layer");
  const int nh = cfg_.n_heads;
  const int dh = cfg_.d_head();
  const int d = cfg_.d_model;

  for (int layer = 0; layer < cfg_.n_layers; ++layer) {
    const auto& s = scores[static_cast<std::size_t>(layer)];
    if (static_cast<int>(s.size()) != nh)
      throw std::invalid_argument("reorder_heads: need one score per head");
    std::vector<int> order(static_cast<std::size_t>(nh));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&s](int a, int b) {
      return s[static_cast<std::size_t>(a)] > s[static_cast<std::size_t>(b)];
    });
    bool identity = true;
    for (int i = 0; i < nh; ++i)
      if (order[static_cast<std::size_t>(i)] != i) identity = false;
    if (identity) continue;

    LayerRefs& lr = layers_[static_cast<std::size_t>(layer)];
    auto permute_col_blocks = [&](Tensor m) {
      std::vector<double> next(m.values());
      for (int j = 0; j < nh; ++j) {
        const int src = order[static_cast<std::size_t>(j)];
        for (int row = 0; row < d; ++row)
          for (int c = 0; c < dh; ++c)
            next[static_cast<std::size_t>(row) * (nh * dh) + j * dh + c] =
                m.data()[static_cast<std::size_t>(row) * (nh * dh) + src * dh + c];
      }
      std::copy(next.begin(), next.end(), m.data());
    };
    auto permute_vec_blocks = [&](Tensor v) {
      std::vector<double> next(v.values());
      for (int j = 0; j < nh; ++j) {
        const int src = order[static_cast<std::size_t>(j)];
        for (int c = 0; c < dh; ++c) next[static_cast<std::size_t>(j) * dh + c] =
            v.data()[static_cast<std::size_t>(src) * dh + c];
      }
      std::copy(next.begin(), next.end(), v.data());
    };
    auto permute_row_blocks = [&](Tensor m) {
      std::vector<double> next(m.values());
      for (int j = 0; j < nh; ++j) {
        const int src = order[static_cast<std::size_t>(j)];
        for (int c = 0; c < dh; ++c)
          for (int col = 0; col < d; ++col)
            next[static_cast<std::size_t>(j * dh + c) * d + col] =
                m.data()[static_cast<std::size_t>(src * dh + c) * d + col];
      }
      std::copy(next.begin(), next.end(), m.data());
    };
    permute_col_blocks(lr.w_q);
    permute_col_blocks(lr.w_k);
    permute_col_blocks(lr.w_v);
    permute_vec_blocks(lr.b_q);
    permute_vec_blocks(lr.b_k);
    permute_vec_blocks(lr.b_v);
    permute_row_blocks(lr.w_o);
  }
}

}  // namespace adawidth
