#include "adawidth/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace adawidth {

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, double lr,
             double weight_decay)
    : lr_(lr), wd_(weight_decay) {
  if (lr <= 0.0) throw std::invalid_argument("AdamW: lr must be positive");
  if (weight_decay < 0.0)
    throw std::invalid_argument("AdamW: weight_decay must be >= 0");
  for (auto& [name, t] : params) {
    Slot s;
    s.t = t;
    s.decay = decay_applies(name);
    s.m.assign(static_cast<std::size_t>(t.numel()), 0.0);
    s.v.assign(static_cast<std::size_t>(t.numel()), 0.0);
    slots_.push_back(std::move(s));
  }
}

bool AdamW::decay_applies(const std::string& name) {
  std::size_t start = 0;
  while (start <= name.size()) {
    const auto dot = name.find('.', start);
    const std::string seg =
        name.substr(start, dot == std::string::npos ? name.size() - start
                                                    : dot - start);
    if (seg.rfind("ln", 0) == 0) return false;
    if (dot == std::string::npos) return seg.rfind('b', 0) != 0;
    start = dot + 1;
  }
  return true;
}

void AdamW::step() {
  ++steps_;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
  const Precision prec = global_precision();
  for (auto& s : slots_) {
    const double* g = s.t.has_grad() ? s.t.grad().data() : nullptr;
    double* p = s.t.data();
    const std::size_t n = s.m.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g ? g[i] : 0.0;
      s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * gi;
      s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * gi * gi;
      const double mhat = s.m[i] / bias1;
      const double vhat = s.v[i] / bias2;
      double next = p[i] - lr_ * mhat / (std::sqrt(vhat) + kEps);
      if (s.decay) next -= lr_ * wd_ * p[i];
      p[i] = quantize_scalar(next, prec);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& s : slots_) s.t.zero_grad();
}

}  // namespace adawidth
