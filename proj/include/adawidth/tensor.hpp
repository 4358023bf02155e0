#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace adawidth {

// Global scalar precision. f64 is the default and is required by the
// gradient-check tests; f32 rounds every primitive's output (and parameter
// updates) through IEEE float32 while keeping gradient buffers in double.
enum class Precision { f64, f32 };

Precision global_precision();
void set_global_precision(Precision p);

inline double quantize_scalar(double v, Precision p) {
  return p == Precision::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

// Thread-local multiply-accumulate counter. Instruments matmul only; used as
// the dynamic side of the static-vs-dynamic FLOPs accounting cross-check.
class MacCounterScope {
 public:
  MacCounterScope();
  ~MacCounterScope();
  MacCounterScope(const MacCounterScope&) = delete;
  MacCounterScope& operator=(const MacCounterScope&) = delete;
  std::uint64_t count() const;
};

// Called from matmul; no-op when no scope is active.
void count_macs(std::uint64_t macs);

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // tape that produced this node; 0 for leaves

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantics handle onto a shared node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  std::int64_t numel() const { return node_->numel(); }
  int rows() const;
  int cols() const;

  const double* data() const { return node_->value.data(); }
  double* data() { return node_->value.data(); }
  const std::vector<double>& values() const { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Read view of the gradient; zero-filled on first access.
  const std::vector<double>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  }

  // Rounds stored values to the active precision. Applied by ops on their
  // outputs and by the optimizer after parameter updates.
  void apply_precision();

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;
};

// Records one closure per primitive application, in forward execution order.
// Reverse replay therefore visits each node exactly once in reverse
// topological order. A tape can be consumed by backward() exactly once.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  void record(std::function<void()> backward_fn,
              const std::shared_ptr<TensorNode>& out);

  // Seeds d(loss)/d(loss)=1 and replays the tape in reverse, accumulating
  // into the grad buffers of every requires-grad node it reaches.
  void backward(const Tensor& loss);

 private:
  std::uint64_t id_;
  std::vector<std::function<void()>> entries_;
  bool consumed_ = false;
};

Tape* active_tape();

// RAII activation of a fresh tape on the current thread.
class TapeScope {
 public:
  TapeScope();
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  Tape& tape() { return tape_; }

 private:
  Tape tape_;
  Tape* prev_;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace adawidth
