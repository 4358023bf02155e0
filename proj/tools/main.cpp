// Command-line front end: data generation, training, evaluation, threshold
// sweeps, and the static cost table, all driven by one key=value config.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adawidth/checkpoint.hpp"
#include "adawidth/config.hpp"
#include "adawidth/data.hpp"
#include "adawidth/encoder.hpp"
#include "adawidth/flops.hpp"
#include "adawidth/sweep.hpp"
#include "adawidth/train.hpp"

namespace fs = std::filesystem;
using namespace adawidth;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir = "out";
  bool seed_given = false;
  std::uint64_t seed = 0;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

RunConfig load_config(const CliArgs& args) {
  if (args.config_path.empty())
    throw std::invalid_argument("--config is required");
  RunConfig rc = load_run_config(args.config_path);
  if (args.seed_given) rc.train.seed = args.seed;
  return rc;
}

SynthSpec eval_spec(const RunConfig& rc) {
  SynthSpec spec = rc.synth;
  spec.n_easy = rc.synth_eval_easy;
  spec.n_hard = rc.synth_eval_hard;
  return spec;
}

// Train and eval splits share one vocabulary: the synthetic generator
// registers the same word list for any seed, and file-based eval data is
// re-encoded against the training vocabulary.
std::pair<Dataset, Dataset> load_splits(const RunConfig& rc) {
  if (rc.synthetic()) {
    Dataset train_set = generate_synthetic(rc.synth, rc.train.seed);
    Dataset eval_set = generate_synthetic(eval_spec(rc), rc.train.seed + 1);
    return {std::move(train_set), std::move(eval_set)};
  }
  Dataset train_set = load_jsonl(rc.train_path, rc.model.max_seq_len);
  Dataset eval_set =
      load_jsonl(rc.eval_path, train_set.vocab, rc.model.max_seq_len);
  eval_set.num_classes = train_set.num_classes;
  return {std::move(train_set), std::move(eval_set)};
}

EncoderConfig resolve_model(const RunConfig& rc, const Dataset& train_set) {
  EncoderConfig cfg = rc.model;
  if (cfg.vocab_size == 0) cfg.vocab_size = train_set.vocab.size();
  if (train_set.num_classes > cfg.n_classes)
    throw std::invalid_argument("config: n_classes smaller than the data's");
  return cfg;
}

std::string decisions_jsonl(const EvalResult& ev) {
  std::string out;
  for (const auto& d : ev.decisions) {
    out += route_decision_json(d);
    out += '\n';
  }
  return out;
}

std::string run_report_csv(const Model& model, const TrainResult& res,
                           std::uint64_t seed) {
  const auto& factors = model.config().width_factors;
  char run_id[32];
  std::snprintf(run_id, sizeof run_id, "s%llu",
                static_cast<unsigned long long>(seed));
  std::vector<ReportRow> rows;
  rows.push_back(report_row(run_id, "eval", "routed", res.routed, factors));
  for (const auto& [r, ev] : res.fixed) {
    char mode[32];
    std::snprintf(mode, sizeof mode, "fixed_r%g", r);
    rows.push_back(report_row(run_id, "eval", mode, ev, factors));
  }
  return report_csv(rows, factors, false);
}

int cmd_gen_data(const CliArgs& args) {
  const RunConfig rc = load_config(args);
  if (!rc.synthetic())
    throw std::invalid_argument(
        "gen-data works on the synthetic spec; drop train_path/eval_path");
  fs::create_directories(args.out_dir);
  const Dataset train_set = generate_synthetic(rc.synth, rc.train.seed);
  const Dataset eval_set =
      generate_synthetic(eval_spec(rc), rc.train.seed + 1);
  save_jsonl(train_set, (fs::path(args.out_dir) / "train.jsonl").string());
  save_jsonl(eval_set, (fs::path(args.out_dir) / "eval.jsonl").string());
  std::printf("wrote %zu train and %zu eval samples to %s\n",
              train_set.samples.size(), eval_set.samples.size(),
              args.out_dir.c_str());
  return 0;
}

int cmd_train(const CliArgs& args) {
  const RunConfig rc = load_config(args);
  set_global_precision(rc.precision);
  auto [train_set, eval_set] = load_splits(rc);
  const EncoderConfig cfg = resolve_model(rc, train_set);

  Model model(cfg, rc.train.seed);
  const TrainResult res = train_and_evaluate(model, train_set, eval_set,
                                             rc.train);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  std::string log_lines;
  for (const auto& log : res.logs) {
    log_lines += epoch_log_json(log);
    log_lines += '\n';
  }
  write_file(out / "train_log.jsonl", log_lines);
  write_file(out / "decisions.jsonl", decisions_jsonl(res.routed));
  write_file(out / "histories.jsonl", res.history_dump);
  write_file(out / "report.csv", run_report_csv(model, res, rc.train.seed));
  save_checkpoint((out / "checkpoint.json").string(), model, train_set.vocab);

  std::printf("routed accuracy %.6f, mean flops %.3f\n", res.routed.accuracy,
              res.routed.ledger.mean_flops_per_sample());
  for (const auto& [r, ev] : res.fixed)
    std::printf("fixed r=%g accuracy %.6f, mean flops %.3f\n", r, ev.accuracy,
                ev.ledger.mean_flops_per_sample());
  return 0;
}

int cmd_eval(const CliArgs& args) {
  const RunConfig rc = load_config(args);
  if (rc.checkpoint.empty())
    throw std::invalid_argument("eval needs a checkpoint= path");
  set_global_precision(rc.precision);

  Vocab vocab;
  Model model = load_checkpoint(rc.checkpoint, &vocab);

  Dataset eval_set;
  if (rc.synthetic()) {
    eval_set = generate_synthetic(eval_spec(rc), rc.train.seed + 1);
    if (eval_set.vocab.words() != vocab.words())
      throw std::invalid_argument(
          "checkpoint vocabulary does not match the synthetic spec");
  } else {
    eval_set = load_jsonl(rc.eval_path, vocab, model.config().max_seq_len);
  }

  TrainResult res;
  res.routed = evaluate_routed(model, eval_set);
  for (double r : model.config().width_factors)
    res.fixed.emplace_back(r, evaluate_fixed(model, eval_set, r));

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  write_file(out / "decisions.jsonl", decisions_jsonl(res.routed));
  write_file(out / "report.csv", run_report_csv(model, res, rc.train.seed));

  std::printf("routed accuracy %.6f, mean flops %.3f\n", res.routed.accuracy,
              res.routed.ledger.mean_flops_per_sample());
  return 0;
}

int cmd_sweep(const CliArgs& args) {
  const RunConfig rc = load_config(args);
  set_global_precision(rc.precision);
  auto [train_set, eval_set] = load_splits(rc);
  const EncoderConfig cfg = resolve_model(rc, train_set);

  SweepGrid grid;
  grid.x_values = rc.sweep_x;
  grid.prefix_layers = rc.sweep_prefix_layers;
  grid.windows = rc.sweep_window;
  grid.factor_sets = rc.sweep_factor_sets;
  grid.seeds = rc.sweep_seeds;

  const auto rows = run_sweep(cfg, rc.train, train_set, eval_set, grid);
  fs::create_directories(args.out_dir);
  write_file(fs::path(args.out_dir) / "report.csv", sweep_csv(rows, grid));

  int failed = 0;
  for (const auto& row : rows) failed += row.error.empty() ? 0 : 1;
  std::printf("%zu cells, %d failed\n", rows.size(), failed);
  return 0;
}

int cmd_flops(const CliArgs& args) {
  const RunConfig rc = load_config(args);
  EncoderConfig cfg = rc.model;
  if (cfg.vocab_size == 0) cfg.vocab_size = 4 + rc.synth.vocab_words;

  const int l = cfg.max_seq_len;
  std::printf("seq_len,factor,mode,macs,bias_adds,total_flops\n");
  for (double r : cfg.width_factors) {
    const auto fixed = count_forward(cfg, l, r, false).total();
    std::printf("%d,%g,fixed,%llu,%llu,%llu\n", l, r,
                static_cast<unsigned long long>(fixed.macs),
                static_cast<unsigned long long>(fixed.bias_adds),
                static_cast<unsigned long long>(fixed.flops()));
    const auto routed = count_forward(cfg, l, r, true).total();
    std::printf("%d,%g,routed,%llu,%llu,%llu\n", l, r,
                static_cast<unsigned long long>(routed.macs),
                static_cast<unsigned long long>(routed.bias_adds),
                static_cast<unsigned long long>(routed.flops()));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"width-adaptive transformer classifier"};
  app.require_subcommand(1);

  CliArgs args;
  CLI::App* sub_gen = app.add_subcommand("gen-data", "write synthetic splits");
  CLI::App* sub_train = app.add_subcommand("train", "train and report");
  CLI::App* sub_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CLI::App* sub_sweep = app.add_subcommand("sweep", "grid of training runs");
  CLI::App* sub_flops = app.add_subcommand("flops", "static cost table");
  for (CLI::App* sub : {sub_gen, sub_train, sub_eval, sub_sweep, sub_flops}) {
    sub->add_option("--config", args.config_path, "key=value config file");
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed, "overrides the config seed")
        ->check([&args](const std::string&) {
          args.seed_given = true;
          return std::string();
        });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad usage is a validation error
  }

  try {
    if (sub_gen->parsed()) return cmd_gen_data(args);
    if (sub_train->parsed()) return cmd_train(args);
    if (sub_eval->parsed()) return cmd_eval(args);
    if (sub_sweep->parsed()) return cmd_sweep(args);
    if (sub_flops->parsed()) return cmd_flops(args);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
