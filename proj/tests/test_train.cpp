#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "adawidth/data.hpp"
#include "adawidth/encoder.hpp"
#include "adawidth/ops.hpp"
#include "adawidth/optim.hpp"
#include "adawidth/tensor.hpp"
#include "adawidth/train.hpp"

using namespace adawidth;

namespace {

EncoderConfig tiny_cfg(int vocab_size) {
  EncoderConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.max_seq_len = 9;
  cfg.n_layers = 2;
  cfg.n_prefix_layers = 1;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_ffn = 16;
  cfg.n_classes = 2;
  cfg.d_router = 8;
  cfg.width_factors = {0.5, 1.0};
  return cfg;
}

Dataset tiny_data(int n_easy, int n_hard, std::uint64_t seed) {
  return generate_synthetic({n_easy, n_hard, 8, 8, 0.82}, seed);
}

TrainConfig tiny_tc() {
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 8;
  tc.learning_rate = 5e-3;
  tc.weight_decay = 0.01;
  tc.window = 2;
  tc.thresholds = ThresholdTable({{0.8, 1.0}, {0.0, 0.8}});
  tc.seed = 5;
  tc.reorder_heads = false;
  return tc;
}

std::vector<std::vector<double>> snapshot_router(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.parameters())
    if (name.rfind("router.", 0) == 0) out.push_back(t.values());
  return out;
}

}  // namespace

TEST_CASE("seed streams are stable and distinct") {
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1) != derive_seed(8, 1));
}

TEST_CASE("factor sampling follows the label bits") {
  Rng rng(3);
  CHECK(sample_reduction_factor({0, 1}, {0.25, 1.0}, rng) == 1.0);
  CHECK(sample_reduction_factor({0, 0}, {0.25, 1.0}, rng) == 1.0);
  CHECK(sample_reduction_factor({1, 0}, {0.25, 1.0}, rng) == 0.25);

  int small = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    if (sample_reduction_factor({1, 1}, {0.25, 1.0}, rng) == 0.25) ++small;
  const double freq = static_cast<double>(small) / trials;
  CHECK(freq > 0.45);
  CHECK(freq < 0.55);

  CHECK_THROWS_AS(sample_reduction_factor({1}, {0.25, 1.0}, rng),
                  std::invalid_argument);
}

TEST_CASE("optimizer applies the adaptive update and decoupled decay") {
  Tensor w = Tensor::from({1, 1}, {1.0}, true);
  Tensor b = Tensor::from({1}, {1.0}, true);
  AdamW opt({{"layer.w", w}, {"layer.b_x", b}}, 0.1, 0.5);

  {
    TapeScope tape;
    backward(add(sum(w), sum(b)));  // unit gradient on every element
  }
  opt.step();

  // first step: mhat = g, vhat = g^2, so the adaptive term is lr * 1/(1+eps)
  const double adaptive = 0.1 / (1.0 + AdamW::kEps);
  CHECK(w.values()[0] == doctest::Approx(1.0 - adaptive - 0.1 * 0.5 * 1.0)
                             .epsilon(1e-12));
  CHECK(b.values()[0] == doctest::Approx(1.0 - adaptive).epsilon(1e-12));

  // zero gradient: only decay moves the weight, the bias stays put
  Tensor w2 = Tensor::from({1, 1}, {2.0}, true);
  Tensor b2 = Tensor::from({1}, {2.0}, true);
  AdamW opt2({{"layer.w", w2}, {"layer.b_x", b2}}, 0.1, 0.5);
  opt2.step();
  CHECK(w2.values()[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0).epsilon(1e-12));
  CHECK(b2.values()[0] == 2.0);

  CHECK_THROWS_AS(AdamW({}, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("decay skips biases and LayerNorm parameters") {
  CHECK(AdamW::decay_applies("layer0.w_q"));
  CHECK(AdamW::decay_applies("embed.tok"));
  CHECK(AdamW::decay_applies("unpool.w"));
  CHECK(AdamW::decay_applies("router.w_1"));
  CHECK_FALSE(AdamW::decay_applies("layer0.b_q"));
  CHECK_FALSE(AdamW::decay_applies("layer0.ln1.g"));
  CHECK_FALSE(AdamW::decay_applies("layer1.ln2.b"));
  CHECK_FALSE(AdamW::decay_applies("cls.b"));
  CHECK_FALSE(AdamW::decay_applies("router.b_2"));
}

TEST_CASE("the task loss falls over training") {
  Dataset ds = tiny_data(40, 0, 21);
  Model m(tiny_cfg(ds.vocab.size()), 1);
  TrainConfig tc = tiny_tc();
  tc.epochs = 5;
  Trainer trainer(m, ds, tc);
  std::vector<EpochLog> logs;
  for (int e = 0; e < tc.epochs; ++e) logs.push_back(trainer.run_epoch());
  CHECK(logs.back().l_task < logs.front().l_task);
  CHECK(logs.front().l_task > 0.0);
}

TEST_CASE("warm-up epochs never touch the router") {
  Dataset ds = tiny_data(20, 20, 22);
  Model m(tiny_cfg(ds.vocab.size()), 2);
  TrainConfig tc = tiny_tc();
  tc.window = 3;
  tc.epochs = 6;
  const auto init = snapshot_router(m);

  Trainer trainer(m, ds, tc);
  bool changed_during_warmup = false;
  for (int e = 1; e <= 3; ++e) {
    EpochLog log = trainer.run_epoch();
    CHECK_FALSE(log.router_trained);
    CHECK(log.l_router == 0.0);
    if (snapshot_router(m) != init) changed_during_warmup = true;
  }
  CHECK_FALSE(changed_during_warmup);
  // every warm-up label is all-zero
  Trainer fresh(m, ds, tc);
  EpochLog first = fresh.run_epoch();
  REQUIRE(first.label_histogram.count("00") == 1);
  CHECK(first.label_histogram.at("00") == 40);

  bool trained_later = false;
  for (int e = 4; e <= 6; ++e)
    if (trainer.run_epoch().router_trained) trained_later = true;
  CHECK(trained_later);
  CHECK(snapshot_router(m) != init);
}

TEST_CASE("the optimized objective decomposes into weighted parts") {
  Dataset ds = tiny_data(12, 12, 23);

  // full decomposition with both terms live (labels exist from epoch one)
  Model m(tiny_cfg(ds.vocab.size()), 3);
  TrainConfig tc = tiny_tc();
  tc.label_mode = "berxit";
  Trainer trainer(m, ds, tc);
  StepStats st = trainer.train_batch({0, 1, 2, 3, 12, 13, 14, 15});
  CHECK(st.batch_size == 8);
  CHECK(st.router_stepped);
  CHECK(st.router_included > 0);
  CHECK(std::fabs(st.l_total - (tc.lambda_task * st.l_task +
                                tc.lambda_router * st.l_router)) < 1e-12);

  // warm-up step: router contributes exactly nothing
  Model m2(tiny_cfg(ds.vocab.size()), 3);
  Trainer t2(m2, ds, tiny_tc());
  StepStats st2 = t2.train_batch({0, 1, 2, 3});
  CHECK_FALSE(st2.router_stepped);
  CHECK(st2.l_router == 0.0);
  CHECK(std::fabs(st2.l_total - tiny_tc().lambda_task * st2.l_task) < 1e-12);
}

TEST_CASE("a step at one width leaves the rest of the network ungraded") {
  Dataset ds = tiny_data(16, 0, 24);
  Model m(tiny_cfg(ds.vocab.size()), 4);
  TrainConfig tc = tiny_tc();
  tc.batch_size = 1;
  tc.window = 1;
  tc.epochs = 2;
  // easiest interval swallows everything, so epoch two runs wholly at r=0.5
  tc.thresholds = ThresholdTable({{0.0, 1.0}, {0.99, 1.0}});
  Trainer trainer(m, ds, tc);
  trainer.run_epoch();
  EpochLog second = trainer.run_epoch();
  CHECK(second.router_trained);
  REQUIRE(second.label_histogram.count("10") == 1);
  CHECK(second.label_histogram.at("10") == 16);

  // gradients of the last single-sample batch are still in place
  for (const auto& [name, t] : m.parameters()) {
    if (name.rfind("router.", 0) == 0) continue;
    if (!t.has_grad()) continue;
    const auto& g = t.grad();
    for (std::int64_t i = 0; i < t.numel(); ++i)
      if (!m.param_read_by_forward(name, i, 0.5))
        CHECK(g[static_cast<std::size_t>(i)] == 0.0);
  }
}

TEST_CASE("berxit labels come from fresh per-iteration correctness") {
  Dataset ds = tiny_data(10, 10, 25);
  Model m(tiny_cfg(ds.vocab.size()), 5);
  TrainConfig tc = tiny_tc();
  tc.label_mode = "berxit";
  tc.window = 5;  // irrelevant in this mode
  Trainer trainer(m, ds, tc);
  EpochLog log = trainer.run_epoch();
  CHECK(log.router_trained);
  int total = 0;
  for (const auto& [key, count] : log.label_histogram) {
    CHECK(key.size() == 2);
    total += count;
  }
  CHECK(total == 20);
}

TEST_CASE("evaluation accounts accuracy and cost per routing mode") {
  Dataset ds = tiny_data(12, 12, 26);
  Model m(tiny_cfg(ds.vocab.size()), 6);

  EvalResult fixed_full = evaluate_fixed(m, ds, 1.0);
  CHECK(fixed_full.ledger.samples().size() == 24);
  CHECK(fixed_full.decisions.empty());
  {
    int hits = 0;
    NoGradScope ng;
    for (const auto& s : ds.samples) {
      const auto logits = m.forward_adaptive(s.token_ids, 1.0).values();
      hits += (logits[0] >= logits[1] ? 0 : 1) == s.label;
    }
    CHECK(fixed_full.accuracy ==
          doctest::Approx(static_cast<double>(hits) / 24.0));
  }
  CHECK(fixed_full.ledger.factor_counts().at(1.0) == 24);

  EvalResult routed = evaluate_routed(m, ds);
  CHECK(routed.decisions.size() == 24);
  int histogram_total = 0;
  for (const auto& [r, count] : routed.ledger.factor_counts())
    histogram_total += count;
  CHECK(histogram_total == 24);

  // routed cost must sit between the two fixed costs (router included)
  EvalResult fixed_small = evaluate_fixed(m, ds, 0.5);
  CHECK(fixed_small.ledger.total_flops() < fixed_full.ledger.total_flops());
  CHECK(routed.ledger.total_flops() <=
        evaluate_fixed(m, ds, 1.0).ledger.total_flops() +
            24 * 2 * count_forward(m.config(), 1, 1.0, true).router.macs +
            24 * count_forward(m.config(), 1, 1.0, true).router.bias_adds);

  CHECK_THROWS_AS(evaluate_fixed(m, ds, 0.25), std::invalid_argument);
  Dataset empty;
  empty.num_classes = 2;
  CHECK_THROWS_AS(evaluate_routed(m, empty), std::invalid_argument);
}

TEST_CASE("dynamic instrumentation agrees with the evaluators ledger") {
  Dataset ds = tiny_data(8, 8, 27);
  Model m(tiny_cfg(ds.vocab.size()), 7);

  MacCounterScope macs;
  EvalResult routed = evaluate_routed(m, ds);
  const auto c = routed.ledger.components();
  CHECK(macs.count() == c.total().macs);
}

TEST_CASE("full training pipeline is reproducible") {
  Dataset train_set = tiny_data(24, 24, 28);
  Dataset eval_set = tiny_data(12, 12, 29);
  TrainConfig tc = tiny_tc();
  tc.epochs = 4;
  tc.reorder_heads = true;
  tc.reorder_calibration = 16;

  Model a(tiny_cfg(train_set.vocab.size()), 11);
  TrainResult ra = train_and_evaluate(a, train_set, eval_set, tc);
  Model b(tiny_cfg(train_set.vocab.size()), 11);
  TrainResult rb = train_and_evaluate(b, train_set, eval_set, tc);

  REQUIRE(ra.logs.size() == rb.logs.size());
  for (std::size_t i = 0; i < ra.logs.size(); ++i)
    CHECK(epoch_log_json(ra.logs[i]) == epoch_log_json(rb.logs[i]));
  CHECK(ra.routed.accuracy == rb.routed.accuracy);
  CHECK(ra.routed.ledger.total_flops() == rb.routed.ledger.total_flops());
  REQUIRE(ra.routed.decisions.size() == rb.routed.decisions.size());
  for (std::size_t i = 0; i < ra.routed.decisions.size(); ++i) {
    CHECK(route_decision_json(ra.routed.decisions[i]) ==
          route_decision_json(rb.routed.decisions[i]));
  }
  REQUIRE(ra.fixed.size() == 2);
  CHECK(ra.fixed[1].second.accuracy == rb.fixed[1].second.accuracy);

  // a different seed shifts at least the training trajectory
  Model c(tiny_cfg(train_set.vocab.size()), 11);
  TrainConfig tc2 = tc;
  tc2.seed = 77;
  TrainResult rc = train_and_evaluate(c, train_set, eval_set, tc2);
  bool any_diff = false;
  for (std::size_t i = 0; i < ra.logs.size(); ++i)
    if (epoch_log_json(ra.logs[i]) != epoch_log_json(rc.logs[i]))
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("non-finite losses abort with context") {
  Dataset ds = tiny_data(8, 0, 30);
  Model m(tiny_cfg(ds.vocab.size()), 12);
  m.param("cls.w").data()[0] = std::numeric_limits<double>::quiet_NaN();
  Trainer trainer(m, ds, tiny_tc());
  CHECK_THROWS_AS(trainer.run_epoch(), std::runtime_error);
}

TEST_CASE("training rejects data the model cannot take") {
  Dataset ds = tiny_data(8, 0, 31);
  EncoderConfig cfg = tiny_cfg(ds.vocab.size());

  cfg.max_seq_len = 5;  // samples are 9 tokens long
  Model short_model(cfg, 13);
  CHECK_THROWS_AS(Trainer(short_model, ds, tiny_tc()), std::invalid_argument);

  cfg.max_seq_len = 9;
  cfg.vocab_size = 6;  // tokens reach beyond this
  Model small_vocab(cfg, 13);
  CHECK_THROWS_AS(Trainer(small_vocab, ds, tiny_tc()), std::invalid_argument);
}

TEST_CASE("epoch logs and reports serialize deterministically") {
  EpochLog log;
  log.epoch = 3;
  log.l_task = 0.5;
  log.l_router = 0.25;
  log.l_total = 0.625;
  log.router_trained = true;
  log.label_histogram["10"] = 7;
  log.label_histogram["00"] = 1;
  CHECK(epoch_log_json(log) ==
        "{\"epoch\":3,\"l_task\":0.5,\"l_router\":0.25,\"l_total\":0.625,"
        "\"router_trained\":true,\"label_histogram\":{\"00\":1,\"10\":7}}");

  RouteDecision d{4, {0.5, -0.25}, 0.25};
  CHECK(route_decision_json(d) ==
        "{\"sample_id\":4,\"logits\":[0.5,-0.25],\"r\":0.25}");

  ReportRow row;
  row.run_id = "main";
  row.split = "eval";
  row.mode = "routed";
  row.accuracy = 0.9375;
  row.total_flops = 123456;
  row.mean_flops = 512.0;
  row.frac_r[0.25] = 0.75;
  row.frac_r[1.0] = 0.25;
  const std::string csv = report_csv({row}, {0.25, 1.0}, false);
  CHECK(csv ==
        "run_id,split,mode,accuracy,total_flops,mean_flops_per_sample,"
        "frac_r_0.25,frac_r_1\n"
        "main,eval,routed,0.937500,123456,512.000,0.750000,0.250000\n");

  ReportRow bad;
  bad.run_id = "cell";
  bad.split = "eval";
  bad.mode = "routed";
  bad.error = "boom, with comma";
  const std::string csv2 = report_csv({bad}, {0.25, 1.0}, true);
  CHECK(csv2.find(",error\n") != std::string::npos);
  CHECK(csv2.find("boom; with comma") != std::string::npos);
}
