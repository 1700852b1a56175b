#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "duality/tensor.hpp"

namespace duality {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One slot-value pair from a meaning representation. Identity is
// case-insensitive; the original casing is kept for rendering.
struct SlotValuePair {
  std::string slot;
  std::string value;

  std::string slot_key() const;
  std::string value_key() const;
  std::string label_key() const;  // "slot[value]", lowercased

  bool operator==(const SlotValuePair& o) const {
    return slot_key() == o.slot_key() && value_key() == o.value_key();
  }
};

// Set of slot-value pairs, at most one value per slot, kept sorted by
// lowercase (slot, value).
struct SemanticFrame {
  std::vector<SlotValuePair> pairs;

  static SemanticFrame from_pairs(std::vector<SlotValuePair> pairs);
  std::string canonical_key() const;
  std::string render() const;  // canonical order, original casing
  bool operator==(const SemanticFrame& o) const {
    return canonical_key() == o.canonical_key();
  }
};

// slot[value], slot[value], ... with commas inside brackets left intact.
SemanticFrame parse_semantic_frame(const std::string& mr);

// Deterministic label space over distinct slot-value pairs of the training
// frames, ordered lexicographically by lowercase (slot, value).
class LabelIndex {
 public:
  static LabelIndex build(const std::vector<SemanticFrame>& frames);
  int size() const { return static_cast<int>(labels_.size()); }
  std::optional<int> lookup(const SlotValuePair& p) const;
  const std::string& label(int i) const { return labels_.at(i); }
  const SlotValuePair& pair(int i) const { return pairs_.at(i); }

 private:
  std::vector<std::string> labels_;
  std::vector<SlotValuePair> pairs_;
  std::unordered_map<std::string, int> by_key_;
};

enum class UnseenPairPolicy { drop_with_warning, hard_error };

// Binary indicator vector of length D. Unseen pairs follow the policy;
// dropped counts accumulate into *dropped when provided.
std::vector<double> frame_to_label_vector(
    const SemanticFrame& frame, const LabelIndex& index,
    UnseenPairPolicy policy = UnseenPairPolicy::drop_with_warning,
    int* dropped = nullptr);

SemanticFrame vector_to_frame(const std::vector<double>& v,
                              const LabelIndex& index);

struct PreprocessOptions {
  bool lemmatize = true;
};

// lowercase, trim punctuation, whitespace-tokenize, rule-lemmatize.
std::vector<std::string> preprocess_utterance(
    const std::string& raw, const PreprocessOptions& opt = {});

std::string lemmatize_token(const std::string& token);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  static Vocabulary build(const std::vector<std::vector<std::string>>& seqs,
                          int min_count = 1);
  // Exact token list constructor, used by synthetic tasks and checkpoints.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Token-id sequence with sentinels: BOS ... EOS.
struct Utterance {
  std::vector<int> tokens;
  std::string surface;
};

Utterance encode_utterance(const std::vector<std::string>& tokens,
                           const Vocabulary& vocab,
                           const std::string& surface = "");
std::vector<std::string> decode_utterance(const Utterance& utt,
                                          const Vocabulary& vocab);
void check_well_formed(const Utterance& utt, int vocab_size);

struct CorpusRecord {
  std::string mr;
  std::string ref;
};

enum class Split { train, test };

// Reads an E2E-format CSV (header row, MR column + reference column,
// RFC-4180 quoting). path may be the CSV file itself or a directory holding
// trainset.csv / testset_w_refs.csv / testset.csv.
std::vector<CorpusRecord> load_corpus(const std::string& path, Split split);

// Groups references by canonical frame for multi-reference scoring.
std::map<std::string, std::vector<std::string>> group_multi_references(
    const std::vector<std::pair<SemanticFrame, std::string>>& records);

// One JSON object per line: {"mr": ..., "labels": [...], "tokens": [...]}.
void dump_preprocessed_jsonl(
    const std::string& path, const std::vector<SemanticFrame>& frames,
    const std::vector<std::vector<std::string>>& token_seqs,
    const LabelIndex& index);

}  // namespace duality
