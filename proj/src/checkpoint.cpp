#include "adawidth/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace adawidth {

using ordered_json = nlohmann::ordered_json;

namespace {
constexpr const char* kFormat = "adawidth-checkpoint-v1";
}

std::string checkpoint_to_string(const Model& model, const Vocab& vocab) {
  const EncoderConfig& cfg = model.config();
  ordered_json j;
  j["format"] = kFormat;
  j["seed"] = model.init_seed();

  ordered_json jc;
  jc["vocab_size"] = cfg.vocab_size;
  jc["max_seq_len"] = cfg.max_seq_len;
  jc["n_layers"] = cfg.n_layers;
  jc["n_prefix_layers"] = cfg.n_prefix_layers;
  jc["d_model"] = cfg.d_model;
  jc["n_heads"] = cfg.n_heads;
  jc["d_ffn"] = cfg.d_ffn;
  jc["n_classes"] = cfg.n_classes;
  jc["d_router"] = cfg.d_router;
  jc["width_factors"] = cfg.width_factors;
  jc["count_elementwise"] = cfg.count_elementwise;
  j["config"] = jc;

  j["vocab"] = vocab.words();

  ordered_json params = ordered_json::object();
  for (const auto& [name, t] : model.parameters()) {
    ordered_json p;
    p["shape"] = t.shape();
    p["data"] = t.values();
    params[name] = p;
  }
  j["params"] = params;
  return j.dump();
}

void save_checkpoint(const std::string& path, const Model& model,
                     const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << checkpoint_to_string(model, vocab) << '\n';
}

Model load_checkpoint(const std::string& path, Vocab* vocab_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("checkpoint: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  ordered_json j = ordered_json::parse(text.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw std::invalid_argument("checkpoint: malformed JSON in " + path);
  if (j.value("format", "") != kFormat)
    throw std::invalid_argument("checkpoint: unrecognized format in " + path);

  const auto& jc = j.at("config");
  EncoderConfig cfg;
  cfg.vocab_size = jc.at("vocab_size").get<int>();
  cfg.max_seq_len = jc.at("max_seq_len").get<int>();
  cfg.n_layers = jc.at("n_layers").get<int>();
  cfg.n_prefix_layers = jc.at("n_prefix_layers").get<int>();
  cfg.d_model = jc.at("d_model").get<int>();
  cfg.n_heads = jc.at("n_heads").get<int>();
  cfg.d_ffn = jc.at("d_ffn").get<int>();
  cfg.n_classes = jc.at("n_classes").get<int>();
  cfg.d_router = jc.at("d_router").get<int>();
  cfg.width_factors = jc.at("width_factors").get<std::vector<double>>();
  cfg.count_elementwise = jc.at("count_elementwise").get<bool>();

  Model model(cfg, j.at("seed").get<std::uint64_t>());

  const auto& params = j.at("params");
  for (auto& [name, t] : model.parameters()) {
    if (!params.contains(name))
      throw std::invalid_argument("checkpoint: missing parameter " + name);
    const auto& p = params.at(name);
    const auto shape = p.at("shape").get<std::vector<int>>();
    if (shape != t.shape())
      throw std::invalid_argument("checkpoint: shape mismatch for " + name);
    const auto data = p.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(t.numel()))
      throw std::invalid_argument("checkpoint: size mismatch for " + name);
    for (std::size_t i = 0; i < data.size(); ++i) t.data()[i] = data[i];
  }
  if (params.size() != model.parameters().size())
    throw std::invalid_argument("checkpoint: unexpected extra parameters");

  if (vocab_out) *vocab_out = Vocab::from_words(
      j.at("vocab").get<std::vector<std::string>>());
  return model;
}

}  // namespace adawidth
