#pragma once

#include <vector>

#include "adawidth/hardness.hpp"
#include "adawidth/tensor.hpp"

namespace adawidth {

// argmax over level logits; ties break toward the smaller index, i.e. the
// cheaper sub-network
int route_level(const Tensor& logits);

// the width factor selected by the logits
double route_factor(const Tensor& logits, const std::vector<double>& factors);

// mean sigmoid BCE between [1 x M] level logits and an M-bit target
Tensor router_bce(const Tensor& logits, const HardnessLabel& target);

}  // namespace adawidth
