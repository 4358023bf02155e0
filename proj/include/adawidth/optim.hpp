#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adawidth/tensor.hpp"

namespace adawidth {

// Adam with decoupled weight decay and a constant learning rate. Decay is
// skipped for biases and LayerNorm parameters. Parameters without an
// allocated gradient are treated as having gradient zero.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, double lr,
        double weight_decay);

  void step();
  void zero_grad();
  std::int64_t steps() const { return steps_; }
  std::size_t n_params() const { return slots_.size(); }

  // weight matrices decay; biases (last name segment starting with 'b') and
  // LayerNorm scales/shifts do not
  static bool decay_applies(const std::string& name);

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  struct Slot {
    Tensor t;
    bool decay;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_;
  double wd_;
  std::int64_t steps_ = 0;
};

}  // namespace adawidth
