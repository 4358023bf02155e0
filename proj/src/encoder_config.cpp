#include <cmath>
#include <stdexcept>
#include <string>

#include "adawidth/encoder.hpp"

namespace adawidth {

namespace {

int scaled_dim(double r, int dim, const char* what) {
  const double v = r * dim;
  const double rounded = std::round(v);
  if (rounded < 1.0 || std::fabs(v - rounded) > 1e-9)
    throw std::invalid_argument("width factor " + std::to_string(r) + " * " +
                                what + "=" + std::to_string(dim) +
                                " is not a positive integer");
  return static_cast<int>(rounded);
}

}  // namespace

int EncoderConfig::width_at(double r) const {
  return scaled_dim(r, d_model, "d_model");
}

int EncoderConfig::heads_at(double r) const {
  return scaled_dim(r, n_heads, "n_heads");
}

int EncoderConfig::ffn_at(double r) const { return scaled_dim(r, d_ffn, "d_ffn"); }

int EncoderConfig::level_of(double r) const {
  for (int i = 0; i < n_levels(); ++i)
    if (width_factors[static_cast<std::size_t>(i)] == r) return i;
  throw std::invalid_argument("factor " + std::to_string(r) +
                              " is not in the configured width set");
}

void EncoderConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0)
      throw std::invalid_argument(std::string(what) + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(max_seq_len, "max_seq_len");
  positive(n_layers, "n_layers");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(d_ffn, "d_ffn");
  positive(n_classes, "n_classes");
  positive(d_router, "d_router");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  if (n_prefix_layers <= 0 || n_prefix_layers >= n_layers)
    throw std::invalid_argument(
        "n_prefix_layers must satisfy 0 < n_prefix_layers < n_layers");
  if (width_factors.empty())
    throw std::invalid_argument("width_factors must be non-empty");
  double prev = 0.0;
  for (double r : width_factors) {
    if (!(r > prev))
      throw std::invalid_argument("width_factors must be strictly ascending");
    if (r > 1.0)
      throw std::invalid_argument("width factors must lie in (0, 1]");
    width_at(r);
    heads_at(r);
    ffn_at(r);
    prev = r;
  }
  if (width_factors.back() != 1.0)
    throw std::invalid_argument("the largest width factor must be exactly 1");
}

}  // namespace adawidth
