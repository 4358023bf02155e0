#include "adawidth/data.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "adawidth/rng.hpp"

namespace adawidth {

using nlohmann::json;

Vocab::Vocab() {
  for (const char* w : {"<pad>", "<bos>", "<sep>", "<unk>"}) add_or_get(w);
}

Vocab Vocab::from_words(const std::vector<std::string>& all_words) {
  Vocab v;
  v.words_.clear();
  v.index_.clear();
  for (const auto& w : all_words) v.add_or_get(w);
  if (v.size() < 4) throw std::invalid_argument("Vocab: missing reserved words");
  return v;
}

int Vocab::add_or_get(const std::string& word) {
  auto it = index_.find(word);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  words_.push_back(word);
  index_.emplace(word, id);
  return id;
}

int Vocab::lookup(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || id >= size())
    throw std::invalid_argument("Vocab: id out of range");
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : split_whitespace(text)) ids.push_back(lookup(w));
  return ids;
}

void Dataset::validate() const {
  std::unordered_set<int> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second)
      throw std::invalid_argument("Dataset: duplicate sample id " +
                                  std::to_string(s.id));
    if (s.label < 0 || s.label >= num_classes)
      throw std::invalid_argument("Dataset: label out of range for sample " +
                                  std::to_string(s.id));
    if (s.token_ids.empty() || s.token_ids.front() != Vocab::kBos)
      throw std::invalid_argument("Dataset: sample " + std::to_string(s.id) +
                                  " does not start with BOS");
  }
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

namespace {

Dataset load_jsonl_impl(const std::string& path, const Vocab* fixed,
                        int max_len) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_jsonl: cannot open " + path);

  Dataset ds;
  if (fixed) ds.vocab = *fixed;
  const auto to_id = [&](const std::string& w) {
    return fixed ? ds.vocab.lookup(w) : ds.vocab.add_or_get(w);
  };
  std::string line;
  int line_no = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    const std::string where = "load_jsonl: line " + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw std::invalid_argument(where + ": malformed JSON object");
    if (!j.contains("text") || !j["text"].is_string())
      throw std::invalid_argument(where + ": missing string field \"text\"");
    if (!j.contains("label") || !j["label"].is_number_integer())
      throw std::invalid_argument(where + ": missing integer field \"label\"");
    const int label = j["label"].get<int>();
    if (label < 0) throw std::invalid_argument(where + ": negative label");

    Sample s;
    s.id = line_no;
    s.label = label;
    s.token_ids.push_back(Vocab::kBos);
    for (const auto& w : split_whitespace(j["text"].get<std::string>()))
      s.token_ids.push_back(to_id(w));
    if (j.contains("text2")) {
      if (!j["text2"].is_string())
        throw std::invalid_argument(where + ": \"text2\" must be a string");
      s.token_ids.push_back(Vocab::kSep);
      for (const auto& w : split_whitespace(j["text2"].get<std::string>()))
        s.token_ids.push_back(to_id(w));
    }
    if (j.contains("tag") && j["tag"].is_string())
      s.tag = j["tag"].get<std::string>();
    if (max_len > 0 && static_cast<int>(s.token_ids.size()) > max_len)
      s.token_ids.resize(static_cast<std::size_t>(max_len));

    max_label = std::max(max_label, label);
    ds.samples.push_back(std::move(s));
    ++line_no;
  }
  if (ds.samples.empty())
    throw std::invalid_argument("load_jsonl: no samples in " + path);
  ds.num_classes = std::max(2, max_label + 1);
  return ds;
}

}  // namespace

Dataset load_jsonl(const std::string& path, int max_len) {
  return load_jsonl_impl(path, nullptr, max_len);
}

Dataset load_jsonl(const std::string& path, const Vocab& vocab, int max_len) {
  return load_jsonl_impl(path, &vocab, max_len);
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_jsonl: cannot write " + path);
  for (const auto& s : ds.samples) {
    std::string text, text2;
    bool past_sep = false;
    for (std::size_t i = 1; i < s.token_ids.size(); ++i) {
      const int id = s.token_ids[i];
      if (id == Vocab::kSep && !past_sep) {
        past_sep = true;
        continue;
      }
      std::string& dst = past_sep ? text2 : text;
      if (!dst.empty()) dst += ' ';
      dst += ds.vocab.word(id);
    }
    json j;
    j["text"] = text;
    j["label"] = s.label;
    if (past_sep) j["text2"] = text2;
    if (!s.tag.empty()) j["tag"] = s.tag;
    out << j.dump() << '\n';
  }
}

std::string detokenize(const Dataset& ds, const Sample& s) {
  std::string out;
  for (int id : s.token_ids) {
    if (!out.empty()) out += ' ';
    out += ds.vocab.word(id);
  }
  return out;
}

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_easy < 0 || spec.n_hard < 0 || spec.n_easy + spec.n_hard == 0)
    throw std::invalid_argument("generate_synthetic: need samples to generate");
  if (spec.vocab_words < 3)
    throw std::invalid_argument(
        "generate_synthetic: vocab needs two cue words plus a filler");
  if (spec.seq_len < 6)
    throw std::invalid_argument(
        "generate_synthetic: seq_len too small for the hard-sample margin");
  if (spec.agreement < 0.5 || spec.agreement > 1.0)
    throw std::invalid_argument(
        "generate_synthetic: agreement must lie in [0.5, 1]");

  Dataset ds;
  ds.num_classes = 2;
  std::vector<int> word_ids;
  for (int w = 0; w < spec.vocab_words; ++w)
    word_ids.push_back(ds.vocab.add_or_get("w" + std::to_string(w)));
  const int cue[2] = {word_ids[0], word_ids[1]};
  const int n_fillers = spec.vocab_words - 2;

  const int l = spec.seq_len;
  const int easy_cues = (4 * l + 4) / 5;  // ceil(0.8 l)
  const int minority = (l - 1) / 3;
  const int majority = minority + 1;

  Rng rng(seed);
  auto filler = [&] {
    return word_ids[2 + static_cast<int>(
                            rng.below(static_cast<std::uint64_t>(n_fillers)))];
  };
  int next_id = 0;
  auto emit = [&](bool easy, int i) {
    const int c = i % 2;
    std::vector<int> toks;
    const int n_cue = easy ? easy_cues : majority;
    for (int k = 0; k < n_cue; ++k) toks.push_back(cue[c]);
    if (!easy)
      for (int k = 0; k < minority; ++k) toks.push_back(cue[1 - c]);
    while (static_cast<int>(toks.size()) < l) toks.push_back(filler());
    rng.shuffle(toks);

    Sample s;
    s.id = next_id++;
    s.label = easy ? c : (rng.uniform() < spec.agreement ? c : 1 - c);
    s.tag = easy ? "easy" : "hard";
    s.token_ids.push_back(Vocab::kBos);
    s.token_ids.insert(s.token_ids.end(), toks.begin(), toks.end());
    ds.samples.push_back(std::move(s));
  };
  for (int i = 0; i < spec.n_easy; ++i) emit(true, i);
  for (int i = 0; i < spec.n_hard; ++i) emit(false, i);
  return ds;
}

}  // namespace adawidth
