#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace adawidth {

// Whitespace-token vocabulary with four reserved ids. Built in first-seen
// order while loading so a given file always produces the same ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kSep = 2;
  static constexpr int kUnk = 3;

  Vocab();
  static Vocab from_words(const std::vector<std::string>& all_words);

  int add_or_get(const std::string& word);
  int lookup(const std::string& word) const;  // unknown -> kUnk
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  // whitespace tokenization against the frozen vocabulary; no BOS added
  std::vector<int> encode(const std::string& text) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct Sample {
  int id = 0;
  std::vector<int> token_ids;  // position 0 is the BOS token
  int label = 0;
  std::string tag;  // "easy" / "hard" for synthetic data, else empty
};

struct Dataset {
  std::vector<Sample> samples;
  Vocab vocab;
  int num_classes = 0;

  void validate() const;  // unique ids, labels within num_classes
};

std::vector<std::string> split_whitespace(const std::string& text);

// One JSON object per line: {"text": str, "label": int, "text2"?: str,
// "tag"?: str}. Sample id = 0-based line number. max_len > 0 truncates
// token sequences (BOS included) to that many positions.
Dataset load_jsonl(const std::string& path, int max_len = 0);
// Same, but encodes against a frozen vocabulary; unseen words become <unk>.
Dataset load_jsonl(const std::string& path, const Vocab& vocab,
                   int max_len = 0);
void save_jsonl(const Dataset& ds, const std::string& path);

// space-joined words including the <bos>/<sep> markers; re-encoding the
// result reproduces the sample's token ids
std::string detokenize(const Dataset& ds, const Sample& s);

// Binary task with construction-controlled difficulty. Easy samples repeat
// the class cue in at least 80% of content positions; hard samples give the
// cue a majority of exactly one over the opposing cue and follow it with
// probability `agreement` only.
struct SynthSpec {
  int n_easy = 0;
  int n_hard = 0;
  int seq_len = 16;
  int vocab_words = 16;     // cue words w0,w1 plus fillers
  double agreement = 0.82;  // chance a hard label matches its majority cue
};

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

}  // namespace adawidth
