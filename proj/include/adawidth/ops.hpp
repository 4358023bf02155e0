#pragma once

#include <vector>

#include "adawidth/tensor.hpp"

namespace adawidth {

// Differentiable primitives. Every op computes its forward value eagerly and,
// when a tape is active and any input requires grad, records its backward
// rule onto the tape. Outputs are rounded to the active global precision.

Tensor matmul(const Tensor& a, const Tensor& b);  // [m×k]·[k×n]
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);             // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& bias);   // [m×n] + [n]
Tensor mul(const Tensor& a, const Tensor& b);             // elementwise
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& x);  // exact erf form
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);
Tensor binary_cross_entropy(const Tensor& logits, const Tensor& targets);
Tensor slice(const Tensor& x, int row0, int row1, int col0, int col1);
Tensor slice(const Tensor& x, int i0, int i1);  // 1-D prefix/segment
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor select_row(const Tensor& x, int row);  // -> [1×n]
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
Tensor sum(const Tensor& x);  // -> scalar

// Runs reverse replay on the active tape. The loss must be the scalar output
// of a computation recorded on that tape.
void backward(const Tensor& loss);

// Suspends tape recording on the current thread (pure-inference forwards).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  void* prev_;
};

}  // namespace adawidth
