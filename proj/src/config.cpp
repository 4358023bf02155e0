#include "adawidth/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adawidth {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_string(text.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": empty key");
    if (kv.values_.count(key))
      throw std::invalid_argument("config: duplicate key " + key);
    kv.values_[key] = value;
    kv.order_.push_back(key);
  }
  return kv;
}

bool KvConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::string KvConfig::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("config: missing required key " + key);
  consumed_.insert(key);
  return it->second;
}

std::string KvConfig::get_str(const std::string& key,
                              const std::string& fallback) const {
  if (!has(key)) return fallback;
  return get_str(key);
}

std::int64_t KvConfig::get_int(const std::string& key,
                               std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_str(key);
  try {
    std::size_t used = 0;
    const std::int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key " + key + ": not an integer: " + v);
  }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_str(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key " + key + ": not a number: " + v);
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: key " + key + ": not a bool: " + v);
}

std::uint64_t KvConfig::get_u64(const std::string& key,
                                std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_str(key);
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key " + key +
                                ": not an unsigned integer: " + v);
  }
}

std::vector<double> KvConfig::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& part : split(get_str(key), ',')) {
    if (part.empty()) continue;
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key " + key +
                                  ": not a number list");
    }
  }
  if (out.empty())
    throw std::invalid_argument("config: key " + key + ": empty list");
  return out;
}

std::vector<std::string> KvConfig::get_strs(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& part : split(get_str(key), ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

void KvConfig::require_all_consumed() const {
  std::string unknown;
  for (const auto& key : order_)
    if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty())
    throw std::invalid_argument("config: unknown keys: " + unknown);
}

void TrainConfig::validate(int n_levels) const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("train: batch_size must be >= 1");
  if (learning_rate <= 0.0)
    throw std::invalid_argument("train: learning_rate must be positive");
  if (weight_decay < 0.0)
    throw std::invalid_argument("train: weight_decay must be >= 0");
  if (lambda_task < 0.0 || lambda_router < 0.0)
    throw std::invalid_argument("train: loss weights must be >= 0");
  if (window < 1) throw std::invalid_argument("train: window must be >= 1");
  if (thresholds.n_levels() != n_levels)
    throw std::invalid_argument(
        "train: thresholds must list one interval per width factor");
  if (label_mode != "confidence" && label_mode != "entropy" &&
      label_mode != "berxit")
    throw std::invalid_argument("train: unknown label_mode " + label_mode);
  if (hardness_source != "sampled")
    throw std::invalid_argument(
        "train: hardness_source supports only \"sampled\"");
  if (reorder_calibration < 1)
    throw std::invalid_argument("train: reorder_calibration must be >= 1");
}

ThresholdTable parse_thresholds(const std::string& text) {
  std::vector<LevelInterval> levels;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("thresholds: expected lo:hi, got " + part);
    try {
      levels.push_back({std::stod(part.substr(0, colon)),
                        std::stod(part.substr(colon + 1))});
    } catch (const std::exception&) {
      throw std::invalid_argument("thresholds: bad interval " + part);
    }
  }
  return ThresholdTable(levels);
}

std::string format_thresholds(const ThresholdTable& table) {
  std::string out;
  char buf[64];
  for (const auto& iv : table.levels()) {
    if (!out.empty()) out += ',';
    std::snprintf(buf, sizeof buf, "%g:%g", iv.lo, iv.hi);
    out += buf;
  }
  return out;
}

RunConfig parse_run_config(const KvConfig& kv) {
  RunConfig rc;

  rc.model.vocab_size = static_cast<int>(kv.get_int("vocab_size", 0));
  rc.model.max_seq_len = static_cast<int>(kv.get_int("max_seq_len", 17));
  rc.model.n_layers = static_cast<int>(kv.get_int("n_layers", 4));
  rc.model.n_prefix_layers =
      static_cast<int>(kv.get_int("n_prefix_layers", 2));
  rc.model.d_model = static_cast<int>(kv.get_int("d_model", 64));
  rc.model.n_heads = static_cast<int>(kv.get_int("n_heads", 4));
  rc.model.d_ffn = static_cast<int>(kv.get_int("d_ffn", 256));
  rc.model.n_classes = static_cast<int>(kv.get_int("n_classes", 2));
  rc.model.d_router = static_cast<int>(kv.get_int("d_router", 128));
  rc.model.width_factors = kv.get_doubles("width_factors", {0.25, 1.0});
  rc.model.count_elementwise = kv.get_bool("count_elementwise", false);

  rc.train.epochs = static_cast<int>(kv.get_int("epochs", 10));
  rc.train.batch_size = static_cast<int>(kv.get_int("batch_size", 16));
  rc.train.learning_rate = kv.get_double("learning_rate", 1e-3);
  rc.train.weight_decay = kv.get_double("weight_decay", 0.01);
  rc.train.lambda_task = kv.get_double("lambda_task", 1.0);
  rc.train.lambda_router = kv.get_double("lambda_router", 0.5);
  rc.train.window = static_cast<int>(kv.get_int("window", 3));
  if (kv.has("thresholds"))
    rc.train.thresholds = parse_thresholds(kv.get_str("thresholds"));
  rc.train.seed = kv.get_u64("seed", 0);
  rc.train.label_mode = kv.get_str("label_mode", "confidence");
  rc.train.hardness_source = kv.get_str("hardness_source", "sampled");
  rc.train.reorder_heads = kv.get_bool("reorder_heads", true);
  rc.train.reorder_calibration =
      static_cast<int>(kv.get_int("reorder_calibration", 256));
  rc.train.pad_to_max = kv.get_bool("pad_to_max", true);

  const std::string precision = kv.get_str("precision", "f64");
  if (precision == "f64") {
    rc.precision = Precision::f64;
  } else if (precision == "f32") {
    rc.precision = Precision::f32;
  } else {
    throw std::invalid_argument("config: precision must be f64 or f32");
  }

  rc.train_path = kv.get_str("train_path", "");
  rc.eval_path = kv.get_str("eval_path", "");
  rc.checkpoint = kv.get_str("checkpoint", "");
  if (rc.train_path.empty() != rc.eval_path.empty())
    throw std::invalid_argument(
        "config: train_path and eval_path go together");

  rc.synth.n_easy = static_cast<int>(kv.get_int("synth_easy", 2000));
  rc.synth.n_hard = static_cast<int>(kv.get_int("synth_hard", 2000));
  rc.synth.seq_len = static_cast<int>(kv.get_int("synth_seq_len", 16));
  rc.synth.vocab_words = static_cast<int>(kv.get_int("synth_vocab", 16));
  rc.synth.agreement = kv.get_double("synth_agreement", 0.82);
  rc.synth_eval_easy = static_cast<int>(kv.get_int("synth_eval_easy", 1000));
  rc.synth_eval_hard = static_cast<int>(kv.get_int("synth_eval_hard", 1000));

  rc.sweep_x = kv.get_doubles("sweep_x", {0.5, 0.7, 0.9});
  for (double k : kv.get_doubles(
           "sweep_prefix_layers",
           {static_cast<double>(rc.model.n_prefix_layers)}))
    rc.sweep_prefix_layers.push_back(static_cast<int>(k));
  for (double w : kv.get_doubles("sweep_window",
                                 {static_cast<double>(rc.train.window)}))
    rc.sweep_window.push_back(static_cast<int>(w));
  if (kv.has("sweep_factor_sets")) {
    // semicolon-separated sets of comma-separated factors
    std::istringstream in(kv.get_str("sweep_factor_sets"));
    std::string part;
    while (std::getline(in, part, ';')) {
      std::vector<double> set;
      std::istringstream inner(part);
      std::string num;
      while (std::getline(inner, num, ','))
        if (!num.empty()) set.push_back(std::stod(num));
      if (!set.empty()) rc.sweep_factor_sets.push_back(set);
    }
  } else {
    rc.sweep_factor_sets.push_back(rc.model.width_factors);
  }
  rc.sweep_seeds.clear();
  for (double s : kv.get_doubles("sweep_seeds", {1, 2, 3}))
    rc.sweep_seeds.push_back(static_cast<std::uint64_t>(s));

  kv.require_all_consumed();

  rc.train.validate(rc.model.n_levels());
  if (!rc.synthetic() && rc.model.vocab_size != 0)
    throw std::invalid_argument(
        "config: vocab_size is derived from the training file");
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(KvConfig::parse_file(path));
}

}  // namespace adawidth
