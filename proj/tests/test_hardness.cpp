#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "adawidth/hardness.hpp"
#include "adawidth/rng.hpp"

using namespace adawidth;

namespace {

// independent re-derivation used as the reference for label assignment
HardnessLabel oracle_label(const std::vector<double>& h,
                           const ThresholdTable& t, int w) {
  HardnessLabel y(static_cast<std::size_t>(t.n_levels()), 0);
  if (static_cast<int>(h.size()) < w) return y;
  for (int i = 0; i < t.n_levels(); ++i) {
    int inside = 0;
    for (int k = 0; k < w; ++k) {
      const double v = h[h.size() - 1 - static_cast<std::size_t>(k)];
      if (v >= t.level(i).lo && v <= t.level(i).hi) ++inside;
    }
    if (inside == w) y[static_cast<std::size_t>(i)] = 1;
  }
  return y;
}

const ThresholdTable kTwoLevel({{0.8, 1.0}, {0.0, 0.8}});
const ThresholdTable kThreeLevel({{0.9, 1.0}, {0.5, 0.9}, {0.0, 0.5}});

double binary_entropy(double p) { return entropy({p, 1.0 - p}); }

}  // namespace

TEST_CASE("documented label examples") {
  CHECK(assign_hardness_label({0.85, 0.90, 0.95}, kTwoLevel, 3) ==
        HardnessLabel{1, 0});
  CHECK(assign_hardness_label({0.85, 0.50, 0.90}, kTwoLevel, 3) ==
        HardnessLabel{0, 0});
  CHECK(assign_hardness_label({0.85, 0.90}, kTwoLevel, 3) ==
        HardnessLabel{0, 0});

  // closed ends: a history pinned to the shared bound sets both bits
  CHECK(assign_hardness_label({0.8, 0.8, 0.8}, kTwoLevel, 3) ==
        HardnessLabel{1, 1});

  // only the trailing window counts
  CHECK(assign_hardness_label({0.1, 0.85, 0.9, 0.95}, kTwoLevel, 3) ==
        HardnessLabel{1, 0});

  CHECK_THROWS_AS(assign_hardness_label({0.5}, kTwoLevel, 0),
                  std::invalid_argument);
}

TEST_CASE("labels match the brute-force oracle on the probability grid") {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);

  for (const ThresholdTable* table : {&kTwoLevel, &kThreeLevel}) {
    std::vector<std::vector<double>> histories{{}};
    for (int len = 1; len <= 3; ++len) {
      std::vector<std::vector<double>> next;
      for (const auto& h : histories) {
        if (static_cast<int>(h.size()) != len - 1) continue;
        for (double v : grid) {
          auto e = h;
          e.push_back(v);
          next.push_back(e);
        }
      }
      for (const auto& h : next) {
        for (int w = 1; w <= 3; ++w)
          CHECK(assign_hardness_label(h, *table, w) == oracle_label(h, *table, w));
      }
      histories.insert(histories.end(), next.begin(), next.end());
    }
  }
}

TEST_CASE("window shrink can only raise bits") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> h;
    const int len = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < len; ++i) h.push_back(rng.uniform());
    for (int w = 1; w < len; ++w) {
      const auto wide = assign_hardness_label(h, kThreeLevel, w + 1);
      const auto narrow = assign_hardness_label(h, kThreeLevel, w);
      for (std::size_t i = 0; i < wide.size(); ++i)
        if (wide[i]) CHECK(narrow[i] == 1);
    }
  }
}

TEST_CASE("disjoint intervals set at most one bit") {
  const ThresholdTable disjoint({{0.75, 1.0}, {0.5, 0.7}, {0.0, 0.45}});
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> h;
    for (int i = 0; i < 3; ++i) h.push_back(rng.uniform());
    const auto y = assign_hardness_label(h, disjoint, 3);
    int set = 0;
    for (auto b : y) set += b;
    CHECK(set <= 1);
    CHECK(assign_hardness_label(h, disjoint, 3) == y);  // pure function
  }
}

TEST_CASE("entropy values") {
  CHECK(entropy({0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(entropy({1.0, 0.0}) == 0.0);
  CHECK(entropy({0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(entropy({0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(entropy({1.2, -0.2}), std::invalid_argument);
  CHECK_THROWS_AS(entropy({}), std::invalid_argument);
}

TEST_CASE("entropy-mode labels mirror confidence-mode labels") {
  // on [0.5, 1] the binary entropy map is strictly decreasing, so mapping the
  // interval ends analytically must reproduce confidence-mode labels exactly
  const ThresholdTable conf({{0.8, 1.0}, {0.5, 0.8}});
  const ThresholdTable ent(
      {{binary_entropy(1.0), binary_entropy(0.8)},
       {binary_entropy(0.8), binary_entropy(0.5)}});

  Rng rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> probs, ents;
    const int len = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < len; ++i) {
      double p = 0.5 + 0.5 * rng.uniform();
      if (trial % 5 == 0) p = 0.5 + 0.025 * static_cast<double>(rng.below(21));
      probs.push_back(p);
      ents.push_back(binary_entropy(p));
    }
    for (int w = 1; w <= len; ++w)
      CHECK(assign_hardness_label(probs, conf, w) ==
            assign_hardness_label(ents, ent, w));
  }
}

TEST_CASE("history ring buffer keeps the last window epochs") {
  MetricHistory hist(3, 1.0);
  hist.record(5, 1, 0.1);
  CHECK(hist.values(5) == std::vector<double>{0.1});
  hist.record(5, 2, 0.2);
  hist.record(5, 3, 0.3);
  hist.record(5, 4, 0.4);
  CHECK(hist.values(5) == std::vector<double>{0.2, 0.3, 0.4});
  CHECK(hist.values(99).empty());
  CHECK(hist.n_tracked() == 1);
}

TEST_CASE("history rejects bad records") {
  MetricHistory hist(3, 1.0);
  hist.record(0, 1, 0.5);
  CHECK_THROWS_AS(hist.record(0, 1, 0.6), std::invalid_argument);  // same epoch
  CHECK_THROWS_AS(hist.record(0, 0, 0.6), std::invalid_argument);  // backwards
  CHECK_THROWS_AS(hist.record(1, 1, 1.02), std::invalid_argument);
  CHECK_THROWS_AS(hist.record(1, 1, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(MetricHistory(0, 1.0), std::invalid_argument);

  MetricHistory ent_hist(3, std::log(4.0));
  CHECK_NOTHROW(ent_hist.record(0, 1, 1.2));
  CHECK_THROWS_AS(ent_hist.record(1, 1, 1.5), std::invalid_argument);
}

TEST_CASE("history labels agree with direct assignment") {
  MetricHistory hist(3, 1.0);
  hist.record(2, 1, 0.85);
  CHECK(hist.label(2, kTwoLevel) == HardnessLabel{0, 0});  // short history
  hist.record(2, 2, 0.90);
  hist.record(2, 3, 0.95);
  CHECK(hist.label(2, kTwoLevel) == HardnessLabel{1, 0});
  CHECK(hist.label(2, kTwoLevel) ==
        assign_hardness_label(hist.values(2), kTwoLevel, 3));
  CHECK(hist.label(7, kTwoLevel) == HardnessLabel{0, 0});  // untracked
}

TEST_CASE("label helpers") {
  CHECK(all_zero(HardnessLabel{0, 0, 0}));
  CHECK_FALSE(all_zero(HardnessLabel{0, 1}));
  CHECK(label_key(HardnessLabel{1, 0, 1}) == "101");
  CHECK_THROWS_AS(ThresholdTable({{0.9, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdTable({}), std::invalid_argument);
}
