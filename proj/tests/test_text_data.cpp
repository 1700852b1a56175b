#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "duality/rng.hpp"
#include "duality/text_data.hpp"

using namespace duality;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s += " ";
    s += toks[i];
  }
  return s;
}

}  // namespace

TEST_CASE("load_corpus parses quoted rows with embedded commas") {
  auto path = write_temp(
      "corpus_basic.csv",
      "mr,ref\n"
      "\"name[Alimentum], area[city centre]\",\"Alimentum is in the city "
      "centre.\"\n");
  auto records = load_corpus(path, Split::train);
  REQUIRE(records.size() == 1);
  CHECK(records[0].mr == "name[Alimentum], area[city centre]");
  CHECK(records[0].ref == "Alimentum is in the city centre.");
}

TEST_CASE("load_corpus handles escaped quotes and embedded newlines") {
  auto path = write_temp(
      "corpus_quotes.csv",
      "mr,ref\n"
      "\"food[English]\",\"A \"\"local gem\"\",\nreally.\"\n"
      "\"area[riverside]\",plain text\n");
  auto records = load_corpus(path, Split::train);
  REQUIRE(records.size() == 2);
  CHECK(records[0].ref == "A \"local gem\",\nreally.");
  CHECK(records[1].ref == "plain text");
}

TEST_CASE("load_corpus on an empty file yields zero records") {
  auto path = write_temp("corpus_empty.csv", "");
  CHECK(load_corpus(path, Split::train).empty());
  auto header_only = write_temp("corpus_header.csv", "mr,ref\n");
  CHECK(load_corpus(header_only, Split::train).empty());
}

TEST_CASE("load_corpus errors carry position information") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/file.csv", Split::train),
                  IngestError);
  auto bad = write_temp("corpus_bad.csv", "mr,ref\nonlyonefield\n");
  CHECK_THROWS_WITH_AS(load_corpus(bad, Split::train),
                       doctest::Contains("row 2"), IngestError);
  auto noheader = write_temp("corpus_nohdr.csv", "a,b\nx,y\n");
  CHECK_THROWS_AS(load_corpus(noheader, Split::train), IngestError);
}

TEST_CASE("preprocess_utterance lowercases, trims punctuation, lemmatizes") {
  auto toks = preprocess_utterance(
      "Bibimbap House is a moderately priced restaurant.");
  CHECK(join(toks) == "bibimbap house is a moderately price restaurant");
  PreprocessOptions no_lemma;
  no_lemma.lemmatize = false;
  auto raw = preprocess_utterance(
      "Bibimbap House is a moderately priced restaurant.", no_lemma);
  CHECK(join(raw) == "bibimbap house is a moderately priced restaurant");
}

TEST_CASE("punctuation-only input preprocesses to nothing") {
  CHECK(preprocess_utterance("...").empty());
  CHECK(preprocess_utterance("?! -- ...").empty());
}

TEST_CASE("intra-token apostrophes and hyphens survive") {
  auto toks = preprocess_utterance("Who's near the family-friendly pub?");
  CHECK(join(toks) == "who's near the family-friendly pub");
}

TEST_CASE("lemmatizer handles plural and suffix families") {
  CHECK(lemmatize_token("restaurants") == "restaurant");
  CHECK(lemmatize_token("cities") == "city");
  CHECK(lemmatize_token("dishes") == "dish");
  CHECK(lemmatize_token("glasses") == "glass");
  CHECK(lemmatize_token("children") == "child");
  CHECK(lemmatize_token("is") == "is");
  CHECK(lemmatize_token("yes") == "yes");
  CHECK(lemmatize_token("less") == "less");
  CHECK(lemmatize_token("rating") == "rating");
  CHECK(lemmatize_token("ratings") == "rating");
  CHECK(lemmatize_token("stopped") == "stop");
  CHECK(lemmatize_token("serving") == "serve");
}

TEST_CASE("preprocessing is idempotent over a corpus sample") {
  const std::vector<std::string> samples = {
      "The Eagle is a cheap family-friendly coffee shop near Burger King.",
      "Prices are less than £20; customers rated it 3 out of 5!",
      "Serving French food, The Mill offers riverside dining for families.",
      "It's child friendly and has an average customer rating...",
      "Located in the city centre, near Café Rouge, it is not kid friendly.",
  };
  for (const auto& s : samples) {
    auto once = preprocess_utterance(s);
    auto twice = preprocess_utterance(join(once));
    CHECK(once == twice);
  }
}

TEST_CASE("parse_semantic_frame on the five-pair example") {
  auto frame = parse_semantic_frame(
      "name[Bibimbap House], food[English], priceRange[moderate], "
      "area[riverside], near[Clare Hall]");
  REQUIRE(frame.pairs.size() == 5);
  // canonical order sorts by lowercase slot
  CHECK(frame.pairs[0].slot == "area");
  CHECK(frame.pairs[1].slot == "food");
  CHECK(frame.pairs[2].slot == "name");
  CHECK(frame.pairs[2].value == "Bibimbap House");
  CHECK(frame.pairs[3].slot == "near");
  CHECK(frame.pairs[4].slot == "priceRange");
}

TEST_CASE("parse_semantic_frame singleton and bracketed commas") {
  auto one = parse_semantic_frame("food[English]");
  REQUIRE(one.pairs.size() == 1);
  CHECK(one.pairs[0].value == "English");

  auto tricky = parse_semantic_frame("food[English, sort of]");
  REQUIRE(tricky.pairs.size() == 1);
  CHECK(tricky.pairs[0].value == "English, sort of");
}

TEST_CASE("parse_semantic_frame reports offsets on malformed input") {
  CHECK_THROWS_WITH_AS(parse_semantic_frame("food[English"),
                       doctest::Contains("offset"), ParseError);
  CHECK_THROWS_AS(parse_semantic_frame("[English]"), ParseError);
  CHECK_THROWS_AS(parse_semantic_frame("food English]"), ParseError);
  CHECK_THROWS_AS(parse_semantic_frame("food[A], food[B]"), ParseError);
  CHECK_THROWS_AS(parse_semantic_frame("food[]"), ParseError);
}

TEST_CASE("label index deduplicates and is order independent") {
  auto f1 = parse_semantic_frame("food[English], area[riverside]");
  auto f2 = parse_semantic_frame("area[riverside], food[English]");
  auto f3 = parse_semantic_frame("food[French]");
  auto idx = LabelIndex::build({f1, f2, f3});
  CHECK(idx.size() == 3);

  auto idx2 = LabelIndex::build({f3, f2, f1});
  REQUIRE(idx2.size() == idx.size());
  for (int i = 0; i < idx.size(); ++i) CHECK(idx.label(i) == idx2.label(i));

  CHECK_THROWS_AS(LabelIndex::build({}), ValidationError);
}

TEST_CASE("label index permutation invariance over random frames") {
  Rng rng(99);
  const std::vector<std::string> slots = {"a", "b", "c", "d"};
  std::vector<SemanticFrame> frames;
  for (int i = 0; i < 40; ++i) {
    std::vector<SlotValuePair> pairs;
    for (const auto& s : slots)
      if (rng.uniform() < 0.6)
        pairs.push_back(
            {s, "v" + std::to_string(rng.uniform_int(5))});
    if (pairs.empty()) pairs.push_back({"a", "v0"});
    frames.push_back(SemanticFrame::from_pairs(pairs));
  }
  auto idx = LabelIndex::build(frames);
  auto shuffled = frames;
  rng.shuffle(shuffled);
  auto idx2 = LabelIndex::build(shuffled);
  REQUIRE(idx.size() == idx2.size());
  for (int i = 0; i < idx.size(); ++i) CHECK(idx.label(i) == idx2.label(i));
}

TEST_CASE("frame/vector round trip is the identity on the index support") {
  auto f1 = parse_semantic_frame(
      "name[Bibimbap House], food[English], priceRange[moderate], "
      "area[riverside], near[Clare Hall]");
  auto f2 = parse_semantic_frame("food[French], area[city centre]");
  auto idx = LabelIndex::build({f1, f2});

  auto v1 = frame_to_label_vector(f1, idx);
  int ones = 0;
  for (double x : v1) ones += x == 1.0 ? 1 : 0;
  CHECK(ones == 5);
  CHECK(vector_to_frame(v1, idx) == f1);

  SemanticFrame empty;
  auto v0 = frame_to_label_vector(empty, idx);
  for (double x : v0) CHECK(x == 0.0);
  CHECK(vector_to_frame(v0, idx).pairs.empty());
}

TEST_CASE("unseen pairs follow the configured policy") {
  auto idx = LabelIndex::build({parse_semantic_frame("food[English]")});
  auto unseen = parse_semantic_frame("food[Martian]");
  int dropped = 0;
  auto v = frame_to_label_vector(unseen, idx,
                                 UnseenPairPolicy::drop_with_warning,
                                 &dropped);
  CHECK(dropped == 1);
  for (double x : v) CHECK(x == 0.0);
  CHECK_THROWS_AS(
      frame_to_label_vector(unseen, idx, UnseenPairPolicy::hard_error),
      ValidationError);
}

TEST_CASE("parse of a rendered frame is the identity (random frames)") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SlotValuePair> pairs;
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    for (int i = 0; i < n; ++i)
      pairs.push_back({"slot" + std::to_string(i),
                       "Value " + std::to_string(rng.uniform_int(10)) +
                           (rng.uniform() < 0.3 ? ", extra" : "")});
    auto frame = SemanticFrame::from_pairs(pairs);
    CHECK(parse_semantic_frame(frame.render()) == frame);
  }
}

TEST_CASE("vocabulary thresholds and determinism") {
  std::vector<std::vector<std::string>> seqs = {
      {"the", "cat", "sat"}, {"the", "dog"}, {"the", "cat"}};
  auto v1 = Vocabulary::build(seqs, 1);
  CHECK(v1.size() == 4 + 4);  // reserved + {the, cat, dog, sat}
  CHECK(v1.id("the") == 4);   // most frequent first
  CHECK(v1.token(Vocabulary::kUnk) == "<unk>");

  auto v2 = Vocabulary::build(seqs, 2);
  CHECK(v2.id("dog") == Vocabulary::kUnk);  // frequency min_count-1
  CHECK(v2.id("the") != Vocabulary::kUnk);
  CHECK(v2.id("cat") != Vocabulary::kUnk);

  Rng rng(7);
  auto shuffled = seqs;
  rng.shuffle(shuffled);
  auto v3 = Vocabulary::build(shuffled, 1);
  CHECK(v3.tokens() == v1.tokens());
}

TEST_CASE("encode_utterance adds sentinels and maps unknowns") {
  auto vocab = Vocabulary::build({{"a", "b"}}, 1);
  auto empty = encode_utterance({}, vocab);
  CHECK(empty.tokens == std::vector<int>{Vocabulary::kBos, Vocabulary::kEos});

  auto u = encode_utterance({"a", "zzz", "b"}, vocab);
  CHECK(u.tokens.size() == 5);
  CHECK(u.tokens[2] == Vocabulary::kUnk);

  auto round = encode_utterance({"a", "b", "a"}, vocab);
  CHECK(decode_utterance(round, vocab) ==
        std::vector<std::string>{"a", "b", "a"});
  check_well_formed(round, vocab.size());
  CHECK_THROWS_AS(check_well_formed(Utterance{{0}, ""}, vocab.size()),
                  ContractError);
}

TEST_CASE("group_multi_references keys by canonical frame") {
  auto fa = parse_semantic_frame("food[English], area[riverside]");
  auto fb = parse_semantic_frame("area[riverside], food[English]");
  auto fc = parse_semantic_frame("food[French]");
  auto groups = group_multi_references(
      {{fa, "ref one"}, {fb, "ref two"}, {fc, "ref three"}});
  CHECK(groups.size() == 2);
  CHECK(groups.at(fa.canonical_key()).size() == 2);

  // group count equals distinct canonical keys, counted independently
  std::set<std::string> distinct;
  for (const auto& f : {fa, fb, fc}) distinct.insert(f.canonical_key());
  CHECK(groups.size() == distinct.size());
}

TEST_CASE("preprocessed dump writes one json object per record") {
  auto f = parse_semantic_frame("food[English], area[riverside]");
  auto idx = LabelIndex::build({f});
  auto path = std::filesystem::temp_directory_path() / "dump_test.jsonl";
  dump_preprocessed_jsonl(path.string(), {f}, {{"a", "b"}}, idx);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.find("\"mr\"") != std::string::npos);
  CHECK(line.find("\"labels\"") != std::string::npos);
  CHECK(line.find("\"tokens\"") != std::string::npos);
  CHECK_FALSE(std::getline(in, line));
}
