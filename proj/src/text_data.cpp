#include "duality/text_data.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace duality {

namespace {

std::string lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_ascii_punct(char c) {
  return c > 0 && c < 127 && std::ispunct(static_cast<unsigned char>(c));
}

}  // namespace

std::string SlotValuePair::slot_key() const { return lower_ascii(trim(slot)); }
std::string SlotValuePair::value_key() const {
  return lower_ascii(trim(value));
}
std::string SlotValuePair::label_key() const {
  return slot_key() + "[" + value_key() + "]";
}

SemanticFrame SemanticFrame::from_pairs(std::vector<SlotValuePair> in) {
  SemanticFrame frame;
  std::map<std::string, SlotValuePair> by_slot;
  for (auto& p : in) {
    if (trim(p.slot).empty() || trim(p.value).empty())
      throw ValidationError("semantic frame: empty slot or value");
    const std::string sk = p.slot_key();
    auto it = by_slot.find(sk);
    if (it != by_slot.end()) {
      if (it->second.value_key() != p.value_key())
        throw ValidationError("semantic frame: slot '" + sk +
                              "' given two values");
      continue;  // exact duplicate collapses
    }
    by_slot.emplace(sk, SlotValuePair{trim(p.slot), trim(p.value)});
  }
  for (auto& [k, p] : by_slot) frame.pairs.push_back(std::move(p));
  std::sort(frame.pairs.begin(), frame.pairs.end(),
            [](const SlotValuePair& a, const SlotValuePair& b) {
              const auto ka = std::make_pair(a.slot_key(), a.value_key());
              const auto kb = std::make_pair(b.slot_key(), b.value_key());
              return ka < kb;
            });
  return frame;
}

std::string SemanticFrame::canonical_key() const {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out += ", ";
    out += pairs[i].label_key();
  }
  return out;
}

std::string SemanticFrame::render() const {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out += ", ";
    out += trim(pairs[i].slot) + "[" + trim(pairs[i].value) + "]";
  }
  return out;
}

SemanticFrame parse_semantic_frame(const std::string& mr) {
  std::vector<SlotValuePair> pairs;
  std::size_t i = 0;
  const std::size_t n = mr.size();
  while (true) {
    while (i < n && (std::isspace(static_cast<unsigned char>(mr[i])) ||
                     mr[i] == ','))
      ++i;
    if (i >= n) break;
    const std::size_t item_start = i;
    std::size_t open = std::string::npos;
    while (i < n) {
      if (mr[i] == '[') {
        open = i;
        break;
      }
      if (mr[i] == ']')
        throw ParseError("unbalanced ']' at offset " + std::to_string(i));
      ++i;
    }
    if (open == std::string::npos)
      throw ParseError("missing '[' after offset " +
                       std::to_string(item_start));
    const std::string slot = trim(mr.substr(item_start, open - item_start));
    if (slot.empty())
      throw ParseError("empty slot at offset " + std::to_string(item_start));
    // value runs to the matching bracket; commas inside do not split
    std::size_t depth = 1;
    std::size_t j = open + 1;
    while (j < n && depth > 0) {
      if (mr[j] == '[') ++depth;
      if (mr[j] == ']') --depth;
      ++j;
    }
    if (depth != 0)
      throw ParseError("unbalanced '[' at offset " + std::to_string(open));
    const std::string value = trim(mr.substr(open + 1, j - open - 2));
    if (value.empty())
      throw ParseError("empty value for slot '" + slot + "' at offset " +
                       std::to_string(open));
    pairs.push_back({slot, value});
    i = j;
  }
  try {
    return SemanticFrame::from_pairs(std::move(pairs));
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
}

LabelIndex LabelIndex::build(const std::vector<SemanticFrame>& frames) {
  if (frames.empty())
    throw ValidationError("label index requires at least one frame");
  std::map<std::string, SlotValuePair> distinct;
  for (const auto& f : frames)
    for (const auto& p : f.pairs)
      distinct.emplace(p.label_key(),
                       SlotValuePair{p.slot_key(), p.value_key()});
  LabelIndex idx;
  for (auto& [key, pair] : distinct) {
    idx.by_key_.emplace(key, static_cast<int>(idx.labels_.size()));
    idx.labels_.push_back(key);
    idx.pairs_.push_back(pair);
  }
  return idx;
}

std::optional<int> LabelIndex::lookup(const SlotValuePair& p) const {
  auto it = by_key_.find(p.label_key());
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> frame_to_label_vector(const SemanticFrame& frame,
                                          const LabelIndex& index,
                                          UnseenPairPolicy policy,
                                          int* dropped) {
  std::vector<double> v(static_cast<std::size_t>(index.size()), 0.0);
  for (const auto& p : frame.pairs) {
    auto idx = index.lookup(p);
    if (!idx) {
      if (policy == UnseenPairPolicy::hard_error)
        throw ValidationError("slot-value pair '" + p.label_key() +
                              "' is not in the label index");
      if (dropped) ++*dropped;
      continue;
    }
    v[static_cast<std::size_t>(*idx)] = 1.0;
  }
  return v;
}

SemanticFrame vector_to_frame(const std::vector<double>& v,
                              const LabelIndex& index) {
  if (static_cast<int>(v.size()) != index.size())
    throw ShapeError("label vector length " + std::to_string(v.size()) +
                     " vs index size " + std::to_string(index.size()));
  std::vector<SlotValuePair> pairs;
  for (int i = 0; i < index.size(); ++i) {
    if (v[static_cast<std::size_t>(i)] == 0.0) continue;
    if (v[static_cast<std::size_t>(i)] != 1.0)
      throw ValidationError("label vector entries must be 0 or 1");
    pairs.push_back(index.pair(i));
  }
  return SemanticFrame::from_pairs(std::move(pairs));
}

namespace {

const std::unordered_map<std::string, std::string>& irregular_forms() {
  static const std::unordered_map<std::string, std::string> table = {
      {"children", "child"}, {"men", "man"},         {"women", "woman"},
      {"feet", "foot"},      {"teeth", "tooth"},     {"mice", "mouse"},
      {"geese", "goose"},    {"priced", "price"},    {"pricing", "price"},
      {"located", "locate"}, {"rated", "rate"},      {"situated", "situate"},
      {"serving", "serve"},  {"offering", "offer"},  {"providing", "provide"},
      {"dining", "dine"},    {"families", "family"}, {"averaging", "average"},
  };
  return table;
}

const std::unordered_set<std::string>& keep_list() {
  static const std::unordered_set<std::string> keep = {
      "rating",   "during",    "evening", "morning",    "thing",
      "anything", "something", "nothing", "everything", "building",
      "pudding",  "wedding",   "sibling", "string",     "spring",
  };
  return keep;
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

std::string undouble(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1]))
    stem.pop_back();
  return stem;
}

bool ends_with(const std::string& s, const char* suf) {
  const std::size_t m = std::strlen(suf);
  return s.size() >= m && s.compare(s.size() - m, m, suf) == 0;
}

}  // namespace

std::string lemmatize_token(const std::string& token) {
  if (token.size() < 4) return token;
  auto irr = irregular_forms().find(token);
  if (irr != irregular_forms().end()) return irr->second;
  if (keep_list().count(token)) return token;

  // plurals
  if (ends_with(token, "ies") && token.size() > 4)
    return token.substr(0, token.size() - 3) + "y";
  if (ends_with(token, "sses")) return token.substr(0, token.size() - 2);
  if (ends_with(token, "es")) {
    const std::string stem = token.substr(0, token.size() - 2);
    if (ends_with(stem, "s") || ends_with(stem, "x") || ends_with(stem, "z") ||
        ends_with(stem, "ch") || ends_with(stem, "sh"))
      return stem;
  }
  if (!ends_with(token, "ss") && !ends_with(token, "us") &&
      !ends_with(token, "is") && !ends_with(token, "'s") &&
      ends_with(token, "s"))
    return token.substr(0, token.size() - 1);

  // past tense
  if (ends_with(token, "ied") && token.size() > 4)
    return token.substr(0, token.size() - 3) + "y";
  if (ends_with(token, "eed")) return token;
  if (ends_with(token, "ed") && token.size() > 4)
    return undouble(token.substr(0, token.size() - 2));

  // progressive
  if (ends_with(token, "ing") && token.size() > 5) {
    std::string stem = undouble(token.substr(0, token.size() - 3));
    if (stem.size() >= 3) return stem;
  }
  return token;
}

std::vector<std::string> preprocess_utterance(const std::string& raw,
                                              const PreprocessOptions& opt) {
  std::vector<std::string> out;
  std::istringstream ss(raw);
  std::string tok;
  while (ss >> tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && is_ascii_punct(tok[b])) ++b;
    while (e > b && is_ascii_punct(tok[e - 1])) --e;
    if (b >= e) continue;
    std::string t = lower_ascii(tok.substr(b, e - b));
    if (opt.lemmatize) t = lemmatize_token(t);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& seqs,
                             int min_count) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& seq : seqs)
    for (const auto& tok : seq) ++counts[tok];
  std::vector<std::pair<std::string, std::int64_t>> entries(counts.begin(),
                                                            counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.id_to_token_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (auto& [tok, cnt] : entries) {
    if (cnt < min_count) continue;
    v.id_to_token_.push_back(tok);
  }
  for (int i = 0; i < static_cast<int>(v.id_to_token_.size()); ++i)
    v.token_to_id_.emplace(v.id_to_token_[static_cast<std::size_t>(i)], i);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  v.id_to_token_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  std::unordered_set<std::string> seen(v.id_to_token_.begin(),
                                       v.id_to_token_.end());
  for (const auto& t : tokens)
    if (seen.insert(t).second) v.id_to_token_.push_back(t);
  for (int i = 0; i < static_cast<int>(v.id_to_token_.size()); ++i)
    v.token_to_id_.emplace(v.id_to_token_[static_cast<std::size_t>(i)], i);
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  return id_to_token_.at(static_cast<std::size_t>(id));
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

Utterance encode_utterance(const std::vector<std::string>& tokens,
                           const Vocabulary& vocab,
                           const std::string& surface) {
  Utterance u;
  u.surface = surface;
  u.tokens.reserve(tokens.size() + 2);
  u.tokens.push_back(Vocabulary::kBos);
  for (const auto& t : tokens) u.tokens.push_back(vocab.id(t));
  u.tokens.push_back(Vocabulary::kEos);
  return u;
}

std::vector<std::string> decode_utterance(const Utterance& utt,
                                          const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : utt.tokens) {
    if (id == Vocabulary::kBos || id == Vocabulary::kEos ||
        id == Vocabulary::kPad)
      continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

void check_well_formed(const Utterance& utt, int vocab_size) {
  if (utt.tokens.size() < 2 || utt.tokens.front() != Vocabulary::kBos ||
      utt.tokens.back() != Vocabulary::kEos)
    throw ContractError("utterance must be BOS ... EOS");
  for (int id : utt.tokens)
    if (id < 0 || id >= vocab_size)
      throw ContractError("utterance token id " + std::to_string(id) +
                          " outside vocabulary of size " +
                          std::to_string(vocab_size));
}

namespace {

// RFC-4180 scanner over the whole file; quoted fields may contain commas,
// doubled quotes, and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& origin) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any_field_content = false;
  int line = 1;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && row[0].empty() && !any_field_content;
    if (!blank) rows.push_back(row);
    row.clear();
    any_field_content = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw IngestError(origin + ": line " + std::to_string(line) +
                            ": quote inside unquoted field");
        in_quotes = true;
        any_field_content = true;
        break;
      case ',':
        end_field();
        any_field_content = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field += c;
        any_field_content = true;
    }
  }
  if (in_quotes)
    throw IngestError(origin + ": line " + std::to_string(line) +
                      ": unterminated quoted field");
  if (any_field_content || !field.empty() || !row.empty()) end_row();
  return rows;
}

}  // namespace

std::vector<CorpusRecord> load_corpus(const std::string& path, Split split) {
  namespace fs = std::filesystem;
  std::string file = path;
  if (fs::is_directory(path)) {
    if (split == Split::train) {
      file = (fs::path(path) / "trainset.csv").string();
    } else {
      const auto with_refs = fs::path(path) / "testset_w_refs.csv";
      file = fs::exists(with_refs) ? with_refs.string()
                                   : (fs::path(path) / "testset.csv").string();
    }
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestError("cannot open corpus file '" + file + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.empty()) return {};

  auto rows = parse_csv(text, file);
  if (rows.empty()) return {};

  int mr_col = -1, ref_col = -1;
  for (int c = 0; c < static_cast<int>(rows[0].size()); ++c) {
    const std::string h =
        lower_ascii(trim(rows[0][static_cast<std::size_t>(c)]));
    if (h == "mr") mr_col = c;
    if (h == "ref" || h == "reference") ref_col = c;
  }
  if (mr_col < 0 || ref_col < 0)
    throw IngestError(file +
                      ": header must name an MR column and a reference "
                      "column");

  std::vector<CorpusRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (static_cast<int>(row.size()) <= std::max(mr_col, ref_col))
      throw IngestError(file + ": row " + std::to_string(r + 1) + " has " +
                        std::to_string(row.size()) + " fields");
    records.push_back({row[static_cast<std::size_t>(mr_col)],
                       row[static_cast<std::size_t>(ref_col)]});
  }
  return records;
}

std::map<std::string, std::vector<std::string>> group_multi_references(
    const std::vector<std::pair<SemanticFrame, std::string>>& records) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [frame, ref] : records)
    groups[frame.canonical_key()].push_back(ref);
  return groups;
}

void dump_preprocessed_jsonl(
    const std::string& path, const std::vector<SemanticFrame>& frames,
    const std::vector<std::vector<std::string>>& token_seqs,
    const LabelIndex& index) {
  if (frames.size() != token_seqs.size())
    throw ContractError("dump: frames and token sequences differ in length");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write '" + path + "'");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    nlohmann::json rec;
    rec["mr"] = frames[i].render();
    std::vector<int> labels;
    for (const auto& p : frames[i].pairs)
      if (auto idx = index.lookup(p)) labels.push_back(*idx);
    rec["labels"] = labels;
    rec["tokens"] = token_seqs[i];
    out << rec.dump() << "\n";
  }
}

}  // namespace duality
