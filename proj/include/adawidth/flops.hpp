#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "adawidth/encoder.hpp"

namespace adawidth {

// Static cost model, independent of the tensor library. Counts matmul
// multiply-accumulates (1 MAC = 2 FLOPs) and bias adds exactly; elementwise
// work (GeLU 8, LayerNorm 8, softmax 4 + scale 1 per element, residual and
// embedding adds 1) is estimated only when config.count_elementwise is set,
// so the width-scaling laws on the MAC term stay exact.
struct FlopsBreakdown {
  std::uint64_t macs = 0;
  std::uint64_t bias_adds = 0;
  std::uint64_t elementwise = 0;

  std::uint64_t flops() const { return 2 * macs + bias_adds + elementwise; }
  FlopsBreakdown& operator+=(const FlopsBreakdown& o) {
    macs += o.macs;
    bias_adds += o.bias_adds;
    elementwise += o.elementwise;
    return *this;
  }
};
inline FlopsBreakdown operator+(FlopsBreakdown a, const FlopsBreakdown& b) {
  a += b;
  return a;
}

// l rows through an affine in_dim -> out_dim map
FlopsBreakdown count_linear(int l, int in_dim, int out_dim);

struct MhaCost {
  FlopsBreakdown proj, scores, values, out;
  FlopsBreakdown total() const { return proj + scores + values + out; }
};

// attention at factor r: projections and output scale with r^2, the
// score/value terms with r (head count)
MhaCost count_mha(int l, const EncoderConfig& cfg, double r);

// both feed-forward maps at factor r; scales with exactly r^2
FlopsBreakdown count_ffn(int l, const EncoderConfig& cfg, double r);

// one full block: attention + feed-forward (+ LayerNorm/residual estimates
// under count_elementwise)
FlopsBreakdown count_layer(int l, const EncoderConfig& cfg, double r);

struct ForwardCost {
  FlopsBreakdown embedding, mha_proj, mha_scores, mha_values, mha_out, ffn,
      unpooler, classifier, router;
  FlopsBreakdown total() const {
    return embedding + mha_proj + mha_scores + mha_values + ffn + mha_out +
           unpooler + classifier + router;
  }
};

// whole forward pass of one length-l sequence at factor r: prefix layers at
// full width, the rest at r, unpooler, classifier; the router is charged only
// when the pass is routed (include_router). The pooler costs nothing.
ForwardCost count_forward(const EncoderConfig& cfg, int l, double r,
                          bool include_router = true);

struct SampleCost {
  int sample_id;
  int seq_len;
  double r;
  std::uint64_t flops;
};

// Accumulates per-component counters plus one record per sample; the total
// always equals both the component sum and the per-sample sum.
class FlopsLedger {
 public:
  void add(int sample_id, int l, double r, const ForwardCost& cost);
  void merge(const FlopsLedger& other);

  std::uint64_t total_flops() const { return total_; }
  double mean_flops_per_sample() const;
  const ForwardCost& components() const { return components_; }
  const std::vector<SampleCost>& samples() const { return samples_; }

  // sample counts keyed by chosen factor
  std::map<double, int> factor_counts() const;

 private:
  ForwardCost components_;
  std::vector<SampleCost> samples_;
  std::uint64_t total_ = 0;
};

}  // namespace adawidth
