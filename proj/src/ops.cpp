#include "adawidth/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adawidth {

namespace detail {
Tape* exchange_active_tape(Tape* t);
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

bool grad_needed(const Tensor& a) {
  return active_tape() != nullptr && a.requires_grad();
}

void require_2d(const Tensor& t, const char* op) {
  if (t.shape().size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " +
                                shape_str(t.shape()));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  count_macs(static_cast<std::uint64_t>(m) * k * n);

  const bool rg = active_tape() && (a.requires_grad() || b.requires_grad());
  Tensor out = Tensor::zeros({m, n}, rg);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = out.data();
  for (int i = 0; i < m; ++i) {
    const double* arow = pa + static_cast<std::size_t>(i) * k;
    double* crow = pc + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  out.apply_precision();

  if (rg) {
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record(
        [an, bn, on, m, k, n] {
          on->ensure_grad();
          const double* dc = on->grad.data();
          if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            const double* pb2 = bn->value.data();
            for (int i = 0; i < m; ++i) {
              const double* dcrow = dc + static_cast<std::size_t>(i) * n;
              double* darow = da + static_cast<std::size_t>(i) * k;
              for (int j = 0; j < k; ++j) {
                const double* brow = pb2 + static_cast<std::size_t>(j) * n;
                double s = 0.0;
                for (int l = 0; l < n; ++l) s += dcrow[l] * brow[l];
                darow[j] += s;
              }
            }
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            const double* pa2 = an->value.data();
            for (int i = 0; i < m; ++i) {
              const double* arow = pa2 + static_cast<std::size_t>(i) * k;
              const double* dcrow = dc + static_cast<std::size_t>(i) * n;
              for (int j = 0; j < k; ++j) {
                const double av = arow[j];
                if (av == 0.0) continue;
                double* dbrow = db + static_cast<std::size_t>(j) * n;
                for (int l = 0; l < n; ++l) dbrow[l] += av * dcrow[l];
              }
            }
          }
        },
        on);
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const int m = a.rows(), n = a.cols();
  const bool rg = grad_needed(a);
  Tensor out = Tensor::zeros({n, m}, rg);
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      po[static_cast<std::size_t>(j) * m + i] =
          pa[static_cast<std::size_t>(i) * n + j];
  out.apply_precision();
  if (rg) {
    auto an = a.node(), on = out.node();
    active_tape()->record(
        [an, on, m, n] {
          on->ensure_grad();
          an->ensure_grad();
          const double* dg = on->grad.data();
          double* da = an->grad.data();
          for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
              da[static_cast<std::size_t>(i) * n + j] +=
                  dg[static_cast<std::size_t>(j) * m + i];
        },
        on);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a, b);
  const bool rg = active_tape() && (a.requires_grad() || b.requires_grad());
  Tensor out = Tensor::zeros(a.shape(), rg);
  const std::size_t n = static_cast<std::size_t>(a.numel());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  out.apply_precision();
  if (rg) {
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record(
        [an, bn, on, n] {
          on->ensure_grad();
          const double* dg = on->grad.data();
          if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            for (std::size_t i = 0; i < n; ++i) da[i] += dg[i];
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            for (std::size_t i = 0; i < n; ++i) db[i] += dg[i];
          }
        },
        on);
  }
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
  require_2d(a, "add_rowvec");
  if (bias.shape().size() != 1 || bias.shape()[0] != a.cols())
    shape_error("add_rowvec", a, bias);
  const int m = a.rows(), n = a.cols();
  const bool rg = active_tape() && (a.requires_grad() || bias.requires_grad());
  Tensor out = Tensor::zeros({m, n}, rg);
  const double* pa = a.data();
  const double* pbias = bias.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      po[static_cast<std::size_t>(i) * n + j] =
          pa[static_cast<std::size_t>(i) * n + j] + pbias[j];
  out.apply_precision();
  if (rg) {
    auto an = a.node(), bn = bias.node(), on = out.node();
    active_tape()->record(
        [an, bn, on, m, n] {
          on->ensure_grad();
          const double* dg = on->grad.data();
          if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            const std::size_t total = static_cast<std::size_t>(m) * n;
            for (std::size_t i = 0; i < total; ++i) da[i] += dg[i];
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < n; ++j)
                db[j] += dg[static_cast<std::size_t>(i) * n + j];
          }
        },
        on);
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  const bool rg = active_tape() && (a.requires_grad() || b.requires_grad());
  Tensor out = Tensor::zeros(a.shape(), rg);
  const std::size_t n = static_cast<std::size_t>(a.numel());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  out.apply_precision();
  if (rg) {
    auto an = a.node(), bn = b.node(), on = out.node();
    active_tape()->record(
        [an, bn, on, n] {
          on->ensure_grad();
          const double* dg = on->grad.data();
          if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            const double* pb2 = bn->value.data();
            for (std::size_t i = 0; i < n; ++i) da[i] += dg[i] * pb2[i];
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            const double* pa2 = an->value.data();
            for (std::size_t i = 0; i < n; ++i) db[i] += dg[i] * pa2[i];
          }
        },
        on);
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  const bool rg = grad_needed(a);
  Tensor out = Tensor::zeros(a.shape(), rg);
  const std::size_t n = static_cast<std::size_t>(a.numel());
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * c;
  out.apply_precision();
  if (rg) {
    auto an = a.node(), on = out.node();
    active_tape()->record(
        [an, on, n, c] {
          on->ensure_grad();
          an->ensure_grad();
          const double* dg = on->grad.data();
          double* da = an->grad.data();
          for (std::size_t i = 0; i < n; ++i) da[i] += dg[i] * c;
        },
        on);
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  const bool rg = grad_needed(x);
  Tensor out = Tensor::zeros(x.shape(), rg);
  const std::size_t n = static_cast<std::size_t>(x.numel());
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px[i];
    po[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  out.apply_precision();
  if (rg) {
    auto xn = x.node(), on = out.node();
    active_tape()->record(
        [xn, on, n] {
          on->ensure_grad();
          xn->ensure_grad();
          const double* dg = on->grad.data();
          const double* px2 = xn->value.data();
          double* dx = xn->grad.data();
          for (std::size_t i = 0; i < n; ++i) {
            const double v = px2[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            dx[i] += dg[i] * (cdf + v * pdf);
          }
        },
        on);
  }
  return out;
}

namespace {

// Treats the tensor as `slices` independent vectors of length `len` with
// stride `stride` starting at multiples of `base_step`.
struct AxisView {
  int slices, len;
  std::size_t stride, base_step;
};

AxisView axis_view(const Tensor& x, int axis, const char* op) {
  const auto& s = x.shape();
  if (s.size() == 1) {
    if (axis != 0)
      throw std::invalid_argument(std::string(op) + ": axis out of range for " +
                                  shape_str(s));
    return {1, s[0], 1, 0};
  }
  if (s.size() != 2)
    throw std::invalid_argument(std::string(op) + ": expected 1-D or 2-D, got " +
                                shape_str(s));
  if (axis == 1) return {s[0], s[1], 1, static_cast<std::size_t>(s[1])};
  if (axis == 0) return {s[1], s[0], static_cast<std::size_t>(s[1]), 1};
  throw std::invalid_argument(std::string(op) + ": axis out of range for " +
                              shape_str(s));
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  const AxisView v = axis_view(x, axis, "softmax");
  const bool rg = grad_needed(x);
  Tensor out = Tensor::zeros(x.shape(), rg);
  const double* px = x.data();
  double* po = out.data();
  for (int s = 0; s < v.slices; ++s) {
    const std::size_t base = s * v.base_step;
    double mx = px[base];
    for (int i = 1; i < v.len; ++i)
      mx = std::max(mx, px[base + i * v.stride]);
    double z = 0.0;
    for (int i = 0; i < v.len; ++i) {
      const double e = std::exp(px[base + i * v.stride] - mx);
      po[base + i * v.stride] = e;
      z += e;
    }
    for (int i = 0; i < v.len; ++i) po[base + i * v.stride] /= z;
  }
  out.apply_precision();
  if (rg) {
    auto xn = x.node(), on = out.node();
    active_tape()->record(
        [xn, on, v] {
          on->ensure_grad();
          xn->ensure_grad();
          const double* y = on->value.data();
          const double* dy = on->grad.data();
          double* dx = xn->grad.data();
          for (int s = 0; s < v.slices; ++s) {
            const std::size_t base = s * v.base_step;
            double dot = 0.0;
            for (int i = 0; i < v.len; ++i) {
              const std::size_t k = base + i * v.stride;
              dot += dy[k] * y[k];
            }
            for (int i = 0; i < v.len; ++i) {
              const std::size_t k = base + i * v.stride;
              dx[k] += y[k] * (dy[k] - dot);
            }
          }
        },
        on);
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const auto& s = x.shape();
  if (s.empty()) throw std::invalid_argument("layer_norm: scalar input");
  const int d = s.back();
  if (gamma.shape().size() != 1 || gamma.shape()[0] != d)
    shape_error("layer_norm(gamma)", x, gamma);
  if (beta.shape().size() != 1 || beta.shape()[0] != d)
    shape_error("layer_norm(beta)", x, beta);
  const int rows = static_cast<int>(x.numel() / d);
  const bool rg = active_tape() && (x.requires_grad() || gamma.requires_grad() ||
                                    beta.requires_grad());
  Tensor out = Tensor::zeros(s, rg);
  std::vector<double> xhat(static_cast<std::size_t>(rows) * d);
  std::vector<double> inv_std(rows);
  const double* px = x.data();
  const double* pg = gamma.data();
  const double* pb = beta.data();
  double* po = out.data();
  for (int r = 0; r < rows; ++r) {
    const double* row = px + static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    double* xh = xhat.data() + static_cast<std::size_t>(r) * d;
    double* orow = po + static_cast<std::size_t>(r) * d;
    for (int j = 0; j < d; ++j) {
      xh[j] = (row[j] - mean) * inv;
      orow[j] = pg[j] * xh[j] + pb[j];
    }
  }
  out.apply_precision();
  if (rg) {
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    active_tape()->record(
        [xn, gn, bn, on, rows, d, xhat = std::move(xhat),
         inv_std = std::move(inv_std)] {
          on->ensure_grad();
          const double* dy = on->grad.data();
          const double* pg2 = gn->value.data();
          if (gn->requires_grad) gn->ensure_grad();
          if (bn->requires_grad) bn->ensure_grad();
          if (xn->requires_grad) xn->ensure_grad();
          for (int r = 0; r < rows; ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * d;
            const double* dyr = dy + off;
            const double* xh = xhat.data() + off;
            if (gn->requires_grad) {
              double* dg = gn->grad.data();
              for (int j = 0; j < d; ++j) dg[j] += dyr[j] * xh[j];
            }
            if (bn->requires_grad) {
              double* db = bn->grad.data();
              for (int j = 0; j < d; ++j) db[j] += dyr[j];
            }
            if (xn->requires_grad) {
              double* dx = xn->grad.data() + off;
              double mean_g = 0.0, mean_gx = 0.0;
              for (int j = 0; j < d; ++j) {
                const double g = dyr[j] * pg2[j];
                mean_g += g;
                mean_gx += g * xh[j];
              }
              mean_g /= d;
              mean_gx /= d;
              const double inv = inv_std[r];
              for (int j = 0; j < d; ++j) {
                const double g = dyr[j] * pg2[j];
                dx[j] += inv * (g - mean_g - xh[j] * mean_gx);
              }
            }
          }
        },
        on);
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_2d(logits, "cross_entropy");
  const int b = logits.rows(), c = logits.cols();
  if (static_cast<int>(labels.size()) != b)
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(b) + " rows");
  for (int l : labels)
    if (l < 0 || l >= c)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(l) +
                                  " out of range [0," + std::to_string(c) + ")");
  const bool rg = grad_needed(logits);
  Tensor out = Tensor::zeros({1}, rg);
  std::vector<double> probs(static_cast<std::size_t>(b) * c);
  const double* pl = logits.data();
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = pl + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    loss += lse - row[labels[static_cast<std::size_t>(i)]];
    double* prow = probs.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) prow[j] = std::exp(row[j] - lse);
  }
  out.data()[0] = loss / b;
  out.apply_precision();
  if (rg) {
    auto ln = logits.node(), on = out.node();
    active_tape()->record(
        [ln, on, b, c, labels, probs = std::move(probs)] {
          on->ensure_grad();
          ln->ensure_grad();
          const double dl = on->grad[0] / b;
          double* dlog = ln->grad.data();
          for (int i = 0; i < b; ++i) {
            const std::size_t off = static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) dlog[off + j] += dl * probs[off + j];
            dlog[off + labels[static_cast<std::size_t>(i)]] -= dl;
          }
        },
        on);
  }
  return out;
}

Tensor binary_cross_entropy(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape())
    shape_error("binary_cross_entropy", logits, targets);
  const std::size_t n = static_cast<std::size_t>(logits.numel());
  if (n == 0)
    throw std::invalid_argument("binary_cross_entropy: empty input");
  const double* pt = targets.data();
  for (std::size_t i = 0; i < n; ++i)
    if (pt[i] != 0.0 && pt[i] != 1.0)
      throw std::invalid_argument("binary_cross_entropy: non-binary target " +
                                  std::to_string(pt[i]));
  const bool rg = grad_needed(logits);
  Tensor out = Tensor::zeros({1}, rg);
  const double* pz = logits.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = pz[i];
    // log-sum-exp fused form, stable for large |z|
    loss += std::max(z, 0.0) - z * pt[i] + std::log1p(std::exp(-std::abs(z)));
  }
  out.data()[0] = loss / static_cast<double>(n);
  out.apply_precision();
  if (rg) {
    auto zn = logits.node(), tn = targets.node(), on = out.node();
    active_tape()->record(
        [zn, tn, on, n] {
          on->ensure_grad();
          zn->ensure_grad();
          const double dl = on->grad[0] / static_cast<double>(n);
          const double* z = zn->value.data();
          const double* t = tn->value.data();
          double* dz = zn->grad.data();
          for (std::size_t i = 0; i < n; ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-z[i]));
            dz[i] += dl * (sig - t[i]);
          }
        },
        on);
  }
  return out;
}

Tensor slice(const Tensor& x, int row0, int row1, int col0, int col1) {
  require_2d(x, "slice");
  const int m = x.rows(), n = x.cols();
  if (row0 < 0 || row1 > m || row0 >= row1 || col0 < 0 || col1 > n ||
      col0 >= col1)
    throw std::invalid_argument(
        "slice: range [" + std::to_string(row0) + "," + std::to_string(row1) +
        ")x[" + std::to_string(col0) + "," + std::to_string(col1) +
        ") invalid for " + shape_str(x.shape()));
  const int om = row1 - row0, on_ = col1 - col0;
  const bool rg = grad_needed(x);
  Tensor out = Tensor::zeros({om, on_}, rg);
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < om; ++i)
    for (int j = 0; j < on_; ++j)
      po[static_cast<std::size_t>(i) * on_ + j] =
          px[static_cast<std::size_t>(i + row0) * n + (j + col0)];
  if (rg) {
    auto xn = x.node(), onode = out.node();
    active_tape()->record(
        [xn, onode, row0, col0, om, on_, n] {
          onode->ensure_grad();
          xn->ensure_grad();
          const double* dg = onode->grad.data();
          double* dx = xn->grad.data();
          for (int i = 0; i < om; ++i)
            for (int j = 0; j < on_; ++j)
              dx[static_cast<std::size_t>(i + row0) * n + (j + col0)] +=
                  dg[static_cast<std::size_t>(i) * on_ + j];
        },
        onode);
  }
  return out;
}

Tensor slice(const Tensor& x, int i0, int i1) {
  if (x.shape().size() != 1)
    throw std::invalid_argument("slice: expected 1-D tensor, got " +
                                shape_str(x.shape()));
  const int n = x.shape()[0];
  if (i0 < 0 || i1 > n || i0 >= i1)
    throw std::invalid_argument("slice: range [" + std::to_string(i0) + "," +
                                std::to_string(i1) + ") invalid for " +
                                shape_str(x.shape()));
  const int len = i1 - i0;
  const bool rg = grad_needed(x);
  Tensor out = Tensor::zeros({len}, rg);
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < len; ++i) po[i] = px[i + i0];
  if (rg) {
    auto xn = x.node(), onode = out.node();
    active_tape()->record(
        [xn, onode, i0, len] {
          onode->ensure_grad();
          xn->ensure_grad();
          const double* dg = onode->grad.data();
          double* dx = xn->grad.data();
          for (int i = 0; i < len; ++i) dx[i + i0] += dg[i];
        },
        onode);
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int m = parts[0].rows();
  int total = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != m) shape_error("concat_cols", parts[0], p);
    total += p.cols();
    any_grad = any_grad || p.requires_grad();
  }
  const bool rg = active_tape() && any_grad;
  Tensor out = Tensor::zeros({m, total}, rg);
  double* po = out.data();
  int off = 0;
  for (const auto& p : parts) {
    const int n = p.cols();
    const double* pp = p.data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        po[static_cast<std::size_t>(i) * total + off + j] =
            pp[static_cast<std::size_t>(i) * n + j];
    off += n;
  }
  if (rg) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node());
    auto onode = out.node();
    active_tape()->record(
        [nodes = std::move(nodes), onode, m, total] {
          onode->ensure_grad();
          const double* dg = onode->grad.data();
          int off2 = 0;
          for (const auto& pn : nodes) {
            const int n = pn->shape[1];
            if (pn->requires_grad) {
              pn->ensure_grad();
              double* dp = pn->grad.data();
              for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                  dp[static_cast<std::size_t>(i) * n + j] +=
                      dg[static_cast<std::size_t>(i) * total + off2 + j];
            }
            off2 += n;
          }
        },
        onode);
  }
  return out;
}

Tensor select_row(const Tensor& x, int row) {
  require_2d(x, "select_row");
  if (row < 0 || row >= x.rows())
    throw std::invalid_argument("select_row: row " + std::to_string(row) +
                                " out of range for " + shape_str(x.shape()));
  return slice(x, row, row + 1, 0, x.cols());
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  require_2d(table, "gather_rows");
  const int v = table.rows(), d = table.cols();
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(v) + ")");
  const int l = static_cast<int>(ids.size());
  const bool rg = grad_needed(table);
  Tensor out = Tensor::zeros({l, d}, rg);
  const double* pt = table.data();
  double* po = out.data();
  for (int i = 0; i < l; ++i) {
    const double* row = pt + static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d;
    double* orow = po + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) orow[j] = row[j];
  }
  if (rg) {
    auto tn = table.node(), onode = out.node();
    active_tape()->record(
        [tn, onode, ids, l, d] {
          onode->ensure_grad();
          tn->ensure_grad();
          const double* dg = onode->grad.data();
          double* dt = tn->grad.data();
          for (int i = 0; i < l; ++i) {
            double* drow =
                dt + static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d;
            const double* grow = dg + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) drow[j] += grow[j];
          }
        },
        onode);
  }
  return out;
}

Tensor sum(const Tensor& x) {
  const bool rg = grad_needed(x);
  Tensor out = Tensor::zeros({1}, rg);
  const std::size_t n = static_cast<std::size_t>(x.numel());
  const double* px = x.data();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += px[i];
  out.data()[0] = s;
  out.apply_precision();
  if (rg) {
    auto xn = x.node(), on = out.node();
    active_tape()->record(
        [xn, on, n] {
          on->ensure_grad();
          xn->ensure_grad();
          const double dl = on->grad[0];
          double* dx = xn->grad.data();
          for (std::size_t i = 0; i < n; ++i) dx[i] += dl;
        },
        on);
  }
  return out;
}

void backward(const Tensor& loss) {
  Tape* t = active_tape();
  if (!t) throw std::runtime_error("backward: no active tape");
  t->backward(loss);
}

NoGradScope::NoGradScope() : prev_(detail::exchange_active_tape(nullptr)) {}

NoGradScope::~NoGradScope() {
  detail::exchange_active_tape(static_cast<Tape*>(prev_));
}

}  // namespace adawidth
