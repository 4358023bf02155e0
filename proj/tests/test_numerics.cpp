#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "adawidth/ops.hpp"
#include "adawidth/tensor.hpp"
#include "test_util.hpp"

using namespace adawidth;
using testutil::max_grad_rel_err;
using testutil::random_tensor;

namespace {

struct PrecisionGuard {
  Precision prev = global_precision();
  ~PrecisionGuard() { set_global_precision(prev); }
};

Tensor weighted_sum(const Tensor& x, const Tensor& w) {
  return sum(mul(x, w));
}

}  // namespace

TEST_CASE("matmul values") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
  Tensor c = matmul(eye, b);
  CHECK(c.values() == b.values());

  Tensor row = Tensor::from({1, 2}, {1, 2});
  Tensor col = Tensor::from({2, 1}, {3, 4});
  CHECK(matmul(row, col).item() == doctest::Approx(11.0).epsilon(1e-14));

  CHECK_THROWS_AS(matmul(row, row), std::invalid_argument);
  CHECK_THROWS_AS(matmul(Tensor::from({2}, {1, 2}), b), std::invalid_argument);
}

TEST_CASE("transpose values") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = transpose(a);
  CHECK(t.shape() == std::vector<int>{3, 2});
  CHECK(t.values() == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("gelu values") {
  Tensor x = Tensor::from({3}, {0.0, 10.0, -10.0});
  Tensor y = gelu(x);
  CHECK(y.values()[0] == 0.0);
  CHECK(y.values()[1] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(std::fabs(y.values()[2]) < 1e-12);
}

TEST_CASE("softmax is shift-stable and normalized") {
  Tensor x = Tensor::from({2}, {1000.0, 0.0});
  Tensor y = softmax(x, 0);
  CHECK(y.values()[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(y.values()[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::isfinite(y.values()[0]));

  Tensor m = random_tensor({3, 4}, 11);
  Tensor rows = softmax(m, 1);
  for (int i = 0; i < 3; ++i) {
    double s = 0;
    for (int j = 0; j < 4; ++j) s += rows.values()[i * 4 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  Tensor cols = softmax(m, 0);
  for (int j = 0; j < 4; ++j) {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += cols.values()[i * 4 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(softmax(m, 2), std::invalid_argument);
}

TEST_CASE("layer_norm standardizes each row") {
  Tensor x = random_tensor({4, 8}, 21, false, 3.0);
  Tensor gamma = Tensor::from({8}, std::vector<double>(8, 1.0));
  Tensor beta = Tensor::zeros({8});
  Tensor y = layer_norm(x, gamma, beta);
  for (int r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (int j = 0; j < 8; ++j) mean += y.values()[r * 8 + j];
    mean /= 8;
    for (int j = 0; j < 8; ++j) {
      const double c = y.values()[r * 8 + j] - mean;
      var += c * c;
    }
    var /= 8;
    CHECK(std::fabs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it slightly
  }
}

TEST_CASE("cross_entropy on uniform logits is log C") {
  Tensor logits = Tensor::zeros({3, 2});
  Tensor loss = cross_entropy(logits, {0, 1, 0});
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  Tensor four = Tensor::zeros({1, 4});
  CHECK(cross_entropy(four, {2}).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));

  CHECK_THROWS_AS(cross_entropy(logits, {0, 2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(logits, {0, 1}), std::invalid_argument);
}

TEST_CASE("binary_cross_entropy values") {
  Tensor z = Tensor::from({1}, {0.0});
  Tensor t1 = Tensor::from({1}, {1.0});
  CHECK(binary_cross_entropy(z, t1).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  Tensor big = Tensor::from({2}, {500.0, -500.0});
  Tensor t = Tensor::from({2}, {1.0, 0.0});
  CHECK(binary_cross_entropy(big, t).item() == doctest::Approx(0.0));
  CHECK(std::isfinite(binary_cross_entropy(big, t).item()));

  Tensor bad = Tensor::from({1}, {0.5});
  CHECK_THROWS_AS(binary_cross_entropy(z, bad), std::invalid_argument);
}

TEST_CASE("structural ops move values exactly") {
  Tensor x = Tensor::from({3, 4}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  Tensor s = slice(x, 1, 3, 1, 3);
  CHECK(s.values() == std::vector<double>{5, 6, 9, 10});
  CHECK_THROWS_AS(slice(x, 0, 4, 0, 2), std::invalid_argument);

  Tensor r = select_row(x, 2);
  CHECK(r.values() == std::vector<double>{8, 9, 10, 11});

  Tensor a = Tensor::from({2, 1}, {1, 2});
  Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
  Tensor cat = concat_cols({a, b});
  CHECK(cat.values() == std::vector<double>{1, 3, 4, 2, 5, 6});

  Tensor table = Tensor::from({3, 2}, {0, 1, 10, 11, 20, 21});
  Tensor g = gather_rows(table, {2, 0, 2});
  CHECK(g.values() == std::vector<double>{20, 21, 0, 1, 20, 21});
  CHECK_THROWS_AS(gather_rows(table, {3}), std::invalid_argument);
}

TEST_CASE("gradients match central differences") {
  const double tol = 1e-6;

  SUBCASE("matmul") {
    Tensor a = random_tensor({3, 4}, 1, true);
    Tensor b = random_tensor({4, 2}, 2, true);
    Tensor w = random_tensor({3, 2}, 3);
    CHECK(max_grad_rel_err({a, b}, [&] {
            return weighted_sum(matmul(a, b), w);
          }) < tol);
  }
  SUBCASE("transpose") {
    Tensor a = random_tensor({3, 4}, 4, true);
    Tensor w = random_tensor({4, 3}, 5);
    CHECK(max_grad_rel_err({a}, [&] {
            return weighted_sum(transpose(a), w);
          }) < tol);
  }
  SUBCASE("add and mul and scale") {
    Tensor a = random_tensor({2, 5}, 6, true);
    Tensor b = random_tensor({2, 5}, 7, true);
    Tensor w = random_tensor({2, 5}, 8);
    CHECK(max_grad_rel_err({a, b}, [&] {
            return weighted_sum(mul(add(a, b), scale(a, 0.37)), w);
          }) < tol);
  }
  SUBCASE("add_rowvec") {
    Tensor a = random_tensor({3, 4}, 9, true);
    Tensor bias = random_tensor({4}, 10, true);
    Tensor w = random_tensor({3, 4}, 11);
    CHECK(max_grad_rel_err({a, bias}, [&] {
            return weighted_sum(add_rowvec(a, bias), w);
          }) < tol);
  }
  SUBCASE("gelu") {
    Tensor x = random_tensor({4, 4}, 12, true, 2.0);
    Tensor w = random_tensor({4, 4}, 13);
    CHECK(max_grad_rel_err({x}, [&] { return weighted_sum(gelu(x), w); }) <
          tol);
  }
  SUBCASE("softmax rows and cols") {
    Tensor x = random_tensor({3, 5}, 14, true, 2.0);
    Tensor w = random_tensor({3, 5}, 15);
    CHECK(max_grad_rel_err({x}, [&] {
            return weighted_sum(softmax(x, 1), w);
          }) < tol);
    CHECK(max_grad_rel_err({x}, [&] {
            return weighted_sum(softmax(x, 0), w);
          }) < tol);
  }
  SUBCASE("layer_norm") {
    Tensor x = random_tensor({3, 6}, 16, true, 2.0);
    Tensor gamma = random_tensor({6}, 17, true);
    Tensor beta = random_tensor({6}, 18, true);
    Tensor w = random_tensor({3, 6}, 19);
    CHECK(max_grad_rel_err({x, gamma, beta}, [&] {
            return weighted_sum(layer_norm(x, gamma, beta), w);
          }) < tol);
  }
  SUBCASE("cross_entropy") {
    Tensor logits = random_tensor({4, 3}, 20, true, 2.0);
    CHECK(max_grad_rel_err({logits}, [&] {
            return cross_entropy(logits, {0, 2, 1, 2});
          }) < tol);
  }
  SUBCASE("binary_cross_entropy") {
    Tensor z = random_tensor({2, 3}, 21, true, 2.0);
    Tensor t = Tensor::from({2, 3}, {1, 0, 1, 1, 0, 0});
    CHECK(max_grad_rel_err({z}, [&] {
            return binary_cross_entropy(z, t);
          }) < tol);
  }
  SUBCASE("slice, concat, select, gather") {
    Tensor x = random_tensor({4, 5}, 22, true);
    Tensor w1 = random_tensor({2, 2}, 23);
    CHECK(max_grad_rel_err({x}, [&] {
            return weighted_sum(slice(x, 1, 3, 2, 4), w1);
          }) < tol);

    Tensor a = random_tensor({2, 2}, 24, true);
    Tensor b = random_tensor({2, 3}, 25, true);
    Tensor w2 = random_tensor({2, 5}, 26);
    CHECK(max_grad_rel_err({a, b}, [&] {
            return weighted_sum(concat_cols({a, b}), w2);
          }) < tol);

    Tensor w3 = random_tensor({1, 5}, 27);
    CHECK(max_grad_rel_err({x}, [&] {
            return weighted_sum(select_row(x, 3), w3);
          }) < tol);

    Tensor table = random_tensor({5, 3}, 28, true);
    Tensor w4 = random_tensor({4, 3}, 29);
    CHECK(max_grad_rel_err({table}, [&] {
            return weighted_sum(gather_rows(table, {0, 2, 2, 4}), w4);
          }) < tol);
  }
  SUBCASE("composite expression") {
    Tensor x = random_tensor({2, 6}, 30, true);
    Tensor wq = random_tensor({6, 6}, 31, true, 0.5);
    Tensor gamma = random_tensor({6}, 32, true);
    Tensor beta = random_tensor({6}, 33, true);
    auto f = [&] {
      Tensor h = gelu(matmul(x, wq));
      Tensor n = layer_norm(add(h, x), gamma, beta);
      Tensor att = softmax(matmul(n, transpose(n)), 1);
      return cross_entropy(matmul(att, n), {1, 4});
    };
    CHECK(max_grad_rel_err({x, wq, gamma, beta}, f) < tol);
  }
}

TEST_CASE("sum backward is all ones") {
  Tensor x = random_tensor({2, 3}, 40, true);
  TapeScope ts;
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("gradients accumulate across tapes until cleared") {
  Tensor x = random_tensor({3}, 41, true);
  for (int k = 0; k < 2; ++k) {
    TapeScope ts;
    backward(sum(x));
  }
  for (double g : x.grad()) CHECK(g == 2.0);
  x.zero_grad();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("tape is single use and owns its losses") {
  Tensor x = random_tensor({2}, 42, true);
  CHECK_THROWS_AS(backward(sum(x)), std::runtime_error);  // no active tape

  Tensor stale;
  {
    TapeScope ts;
    stale = sum(x);
    backward(stale);
    CHECK_THROWS_AS(backward(stale), std::runtime_error);  // consumed
  }
  {
    TapeScope ts;
    CHECK_THROWS_AS(backward(stale), std::invalid_argument);  // wrong tape
  }
}

TEST_CASE("non-scalar loss is rejected") {
  Tensor x = random_tensor({2}, 43, true);
  TapeScope ts;
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(ts.tape().backward(y), std::invalid_argument);
}

TEST_CASE("NoGradScope suspends recording") {
  Tensor x = random_tensor({2, 2}, 44, true);
  TapeScope ts;
  {
    NoGradScope ng;
    Tensor y = matmul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(ts.tape().size() == 0);
  Tensor z = matmul(x, x);
  CHECK(z.requires_grad());
  CHECK(ts.tape().size() == 1);
}

TEST_CASE("repeated runs are bitwise identical") {
  auto run = [](std::vector<double>& loss_bits, std::vector<double>& grad_bits) {
    Tensor x = random_tensor({3, 4}, 45, true);
    Tensor w = random_tensor({4, 4}, 46, true, 0.5);
    Tensor gamma = Tensor::from({4}, std::vector<double>(4, 1.0), true);
    Tensor beta = Tensor::zeros({4}, true);
    TapeScope ts;
    Tensor h = layer_norm(gelu(matmul(x, w)), gamma, beta);
    Tensor loss = cross_entropy(h, {0, 3, 1});
    backward(loss);
    loss_bits = loss.values();
    grad_bits = w.grad();
  };
  std::vector<double> l1, g1, l2, g2;
  run(l1, g1);
  run(l2, g2);
  CHECK(std::memcmp(l1.data(), l2.data(), l1.size() * sizeof(double)) == 0);
  CHECK(g1.size() == g2.size());
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("mac counter instruments matmul") {
  Tensor a = random_tensor({2, 3}, 47);
  Tensor b = random_tensor({3, 4}, 48);
  {
    MacCounterScope outer;
    matmul(a, b);
    CHECK(outer.count() == 24);
    {
      MacCounterScope inner;  // nested scopes share one counter
      matmul(a, b);
      CHECK(inner.count() == 48);
    }
    gelu(a);  // elementwise ops do not count
    CHECK(outer.count() == 48);
  }
  MacCounterScope fresh;
  CHECK(fresh.count() == 0);
}

TEST_CASE("f32 mode quantizes outputs but not gradient arithmetic") {
  PrecisionGuard guard;
  set_global_precision(Precision::f32);

  Tensor x = Tensor::from({1}, {1.0}, true);
  TapeScope ts;
  Tensor y = scale(x, 0.1);
  CHECK(y.item() == static_cast<double>(static_cast<float>(0.1)));
  CHECK(y.item() != 0.1);

  backward(sum(y));
  CHECK(x.grad()[0] == 0.1);  // exact double product 1.0 * 0.1
}
