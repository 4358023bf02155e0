#include "adawidth/tensor.hpp"

#include <atomic>
#include <sstream>
#include <stdexcept>

namespace adawidth {

namespace {
Precision g_precision = Precision::f64;
thread_local std::uint64_t* t_mac_counter = nullptr;
thread_local Tape* t_active_tape = nullptr;
thread_local std::uint64_t t_scope_count = 0;
thread_local std::uint64_t t_scope_macs = 0;
std::atomic<std::uint64_t> g_next_tape_id{1};
}  // namespace

Precision global_precision() { return g_precision; }
void set_global_precision(Precision p) { g_precision = p; }

MacCounterScope::MacCounterScope() {
  if (t_scope_count++ == 0) {
    t_scope_macs = 0;
    t_mac_counter = &t_scope_macs;
  }
}

MacCounterScope::~MacCounterScope() {
  if (--t_scope_count == 0) t_mac_counter = nullptr;
}

std::uint64_t MacCounterScope::count() const { return t_scope_macs; }

void count_macs(std::uint64_t macs) {
  if (t_mac_counter) *t_mac_counter += macs;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  std::int64_t n = node->numel();
  if (n < 0) throw std::invalid_argument("tensor shape has negative extent");
  node->value.assign(static_cast<std::size_t>(n), 0.0);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data,
                    bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  if (node->numel() != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data.size()) +
                                " does not match shape " +
                                shape_str(node->shape));
  }
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

int Tensor::rows() const {
  if (node_->shape.size() != 2)
    throw std::invalid_argument("rows(): tensor is not 2-D, shape " +
                                shape_str(node_->shape));
  return node_->shape[0];
}

int Tensor::cols() const {
  if (node_->shape.size() != 2)
    throw std::invalid_argument("cols(): tensor is not 2-D, shape " +
                                shape_str(node_->shape));
  return node_->shape[1];
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item(): tensor has " +
                                std::to_string(numel()) + " elements");
  return node_->value[0];
}

void Tensor::apply_precision() {
  if (g_precision == Precision::f32) {
    for (double& v : node_->value) v = quantize_scalar(v, Precision::f32);
  }
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

void Tape::record(std::function<void()> backward_fn,
                  const std::shared_ptr<TensorNode>& out) {
  out->tape_id = id_;
  entries_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  if (consumed_)
    throw std::runtime_error("backward: tape already consumed");
  if (!loss.requires_grad() || loss.node()->tape_id != id_)
    throw std::invalid_argument("backward: loss was not produced on this tape");
  consumed_ = true;
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

Tape* active_tape() { return t_active_tape; }

namespace detail {
Tape* exchange_active_tape(Tape* t) {
  Tape* prev = t_active_tape;
  t_active_tape = t;
  return prev;
}
}  // namespace detail

TapeScope::TapeScope() : prev_(t_active_tape) { t_active_tape = &tape_; }

TapeScope::~TapeScope() { t_active_tape = prev_; }

}  // namespace adawidth
