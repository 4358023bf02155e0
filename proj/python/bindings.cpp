// Python surface over the core: synthetic data, model construction, adaptive
// forwards, training, evaluation, cost counting, and checkpoints.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adawidth/checkpoint.hpp"
#include "adawidth/config.hpp"
#include "adawidth/data.hpp"
#include "adawidth/encoder.hpp"
#include "adawidth/flops.hpp"
#include "adawidth/hardness.hpp"
#include "adawidth/ops.hpp"
#include "adawidth/router.hpp"
#include "adawidth/train.hpp"

namespace py = pybind11;
using namespace adawidth;

namespace {

py::dict eval_to_dict(const EvalResult& ev) {
  py::dict out;
  out["accuracy"] = ev.accuracy;
  out["total_flops"] = ev.ledger.total_flops();
  out["mean_flops_per_sample"] = ev.ledger.mean_flops_per_sample();
  py::dict counts;
  for (const auto& [r, n] : ev.ledger.factor_counts())
    counts[py::float_(r)] = n;
  out["factor_counts"] = counts;
  py::dict tags;
  for (const auto& [tag, hits] : ev.tag_hits) {
    py::dict t;
    t["correct"] = hits.first;
    t["total"] = hits.second;
    tags[py::str(tag)] = t;
  }
  out["tag_hits"] = tags;
  py::list decisions;
  for (const auto& d : ev.decisions) {
    py::dict row;
    row["sample_id"] = d.sample_id;
    row["logits"] = d.logits;
    row["r"] = d.r;
    decisions.append(row);
  }
  out["decisions"] = decisions;
  return out;
}

std::vector<std::pair<double, double>> table_to_pairs(
    const ThresholdTable& table) {
  std::vector<std::pair<double, double>> out;
  for (const auto& iv : table.levels()) out.emplace_back(iv.lo, iv.hi);
  return out;
}

ThresholdTable pairs_to_table(
    const std::vector<std::pair<double, double>>& pairs) {
  std::vector<LevelInterval> levels;
  for (const auto& [lo, hi] : pairs) levels.push_back({lo, hi});
  return ThresholdTable(std::move(levels));
}

}  // namespace

PYBIND11_MODULE(adawidth_py, mod) {
  mod.doc() = "width-adaptive transformer classifier";

  py::class_<EncoderConfig>(mod, "EncoderConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &EncoderConfig::vocab_size)
      .def_readwrite("max_seq_len", &EncoderConfig::max_seq_len)
      .def_readwrite("n_layers", &EncoderConfig::n_layers)
      .def_readwrite("n_prefix_layers", &EncoderConfig::n_prefix_layers)
      .def_readwrite("d_model", &EncoderConfig::d_model)
      .def_readwrite("n_heads", &EncoderConfig::n_heads)
      .def_readwrite("d_ffn", &EncoderConfig::d_ffn)
      .def_readwrite("n_classes", &EncoderConfig::n_classes)
      .def_readwrite("d_router", &EncoderConfig::d_router)
      .def_readwrite("width_factors", &EncoderConfig::width_factors)
      .def_readwrite("count_elementwise", &EncoderConfig::count_elementwise);

  py::class_<TrainConfig>(mod, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("lambda_task", &TrainConfig::lambda_task)
      .def_readwrite("lambda_router", &TrainConfig::lambda_router)
      .def_readwrite("window", &TrainConfig::window)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("label_mode", &TrainConfig::label_mode)
      .def_readwrite("reorder_heads", &TrainConfig::reorder_heads)
      .def_readwrite("reorder_calibration", &TrainConfig::reorder_calibration)
      .def_readwrite("pad_to_max", &TrainConfig::pad_to_max)
      .def_property(
          "thresholds",
          [](const TrainConfig& tc) { return table_to_pairs(tc.thresholds); },
          [](TrainConfig& tc,
             const std::vector<std::pair<double, double>>& pairs) {
            tc.thresholds = pairs_to_table(pairs);
          });

  py::class_<Dataset>(mod, "Dataset")
      .def_property_readonly(
          "size", [](const Dataset& ds) { return ds.samples.size(); })
      .def_property_readonly(
          "vocab_size", [](const Dataset& ds) { return ds.vocab.size(); })
      .def_readonly("num_classes", &Dataset::num_classes)
      .def("tokens",
           [](const Dataset& ds, std::size_t i) {
             return ds.samples.at(i).token_ids;
           })
      .def("label",
           [](const Dataset& ds, std::size_t i) {
             return ds.samples.at(i).label;
           })
      .def("tag",
           [](const Dataset& ds, std::size_t i) {
             return ds.samples.at(i).tag;
           })
      .def("save", [](const Dataset& ds, const std::string& path) {
        save_jsonl(ds, path);
      });

  mod.def(
      "generate_synthetic",
      [](int n_easy, int n_hard, int seq_len, int vocab_words,
         double agreement, std::uint64_t seed) {
        return generate_synthetic(
            {n_easy, n_hard, seq_len, vocab_words, agreement}, seed);
      },
      py::arg("n_easy"), py::arg("n_hard"), py::arg("seq_len") = 16,
      py::arg("vocab_words") = 16, py::arg("agreement") = 0.82,
      py::arg("seed") = 0);

  mod.def(
      "load_jsonl",
      [](const std::string& path, int max_len) {
        return load_jsonl(path, max_len);
      },
      py::arg("path"), py::arg("max_len") = 0);

  py::class_<Model>(mod, "Model")
      .def(py::init<const EncoderConfig&, std::uint64_t>(), py::arg("config"),
           py::arg("seed"))
      .def("forward",
           [](Model& m, const std::vector<int>& ids, double r) {
             NoGradScope ng;
             return m.forward_adaptive(ids, r).values();
           })
      .def("route",
           [](Model& m, const std::vector<int>& ids) {
             NoGradScope ng;
             Tensor h = m.encode_nonadaptive(m.embed(ids));
             const Tensor logits = m.router_logits(h);
             const double r =
                 route_factor(logits, m.config().width_factors);
             return py::make_tuple(r, logits.values());
           })
      .def("n_parameters", &Model::n_scalar_params)
      .def_property_readonly("width_factors", [](const Model& m) {
        return m.config().width_factors;
      });

  mod.def("count_forward",
          [](const EncoderConfig& cfg, int l, double r, bool include_router) {
            const auto cost = count_forward(cfg, l, r, include_router).total();
            py::dict out;
            out["macs"] = cost.macs;
            out["bias_adds"] = cost.bias_adds;
            out["flops"] = cost.flops();
            return out;
          },
          py::arg("config"), py::arg("seq_len"), py::arg("factor"),
          py::arg("include_router") = true);

  mod.def("train_and_evaluate",
          [](Model& m, const Dataset& train_set, const Dataset& eval_set,
             const TrainConfig& tc) {
            const TrainResult res =
                train_and_evaluate(m, train_set, eval_set, tc);
            py::dict out;
            py::list logs;
            for (const auto& log : res.logs)
              logs.append(epoch_log_json(log));
            out["logs"] = logs;
            out["routed"] = eval_to_dict(res.routed);
            py::dict fixed;
            for (const auto& [r, ev] : res.fixed)
              fixed[py::float_(r)] = eval_to_dict(ev);
            out["fixed"] = fixed;
            return out;
          });

  mod.def("evaluate_routed", [](Model& m, const Dataset& split) {
    return eval_to_dict(evaluate_routed(m, split));
  });
  mod.def("evaluate_fixed", [](Model& m, const Dataset& split, double r) {
    return eval_to_dict(evaluate_fixed(m, split, r));
  });

  mod.def("save_checkpoint",
          [](const std::string& path, const Model& m, const Dataset& ds) {
            save_checkpoint(path, m, ds.vocab);
          });
  mod.def("load_checkpoint", [](const std::string& path) {
    return load_checkpoint(path);
  });
}
