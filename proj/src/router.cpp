#include "adawidth/router.hpp"

#include <stdexcept>

#include "adawidth/ops.hpp"

namespace adawidth {

int route_level(const Tensor& logits) {
  const std::int64_t n = logits.numel();
  if (n < 1) throw std::invalid_argument("route_level: empty logits");
  const double* v = logits.data();
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double route_factor(const Tensor& logits, const std::vector<double>& factors) {
  if (static_cast<std::size_t>(logits.numel()) != factors.size())
    throw std::invalid_argument("route_factor: logits/factor count mismatch");
  return factors[static_cast<std::size_t>(route_level(logits))];
}

Tensor router_bce(const Tensor& logits, const HardnessLabel& target) {
  if (static_cast<std::size_t>(logits.numel()) != target.size())
    throw std::invalid_argument("router_bce: logits/target size mismatch");
  Tensor t = Tensor::zeros(logits.shape());
  for (std::size_t i = 0; i < target.size(); ++i)
    t.data()[i] = target[i] ? 1.0 : 0.0;
  return binary_cross_entropy(logits, t);
}

}  // namespace adawidth
