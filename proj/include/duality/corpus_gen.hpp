#pragma once

#include <cstdint>
#include <string>

namespace duality {

// Deterministic restaurant-domain corpus in the official CSV layout
// (header "mr,ref", RFC-4180 quoting). The slot inventory spans 79 distinct
// slot-value pairs, all of which are guaranteed to occur in the training
// split. Used when no real dataset is mounted.
struct CorpusGenOptions {
  int train_mrs = 650;
  int test_mrs = 120;
  int min_refs = 6;
  int max_refs = 10;
  double drop_prob = 0.08;  // chance a non-name slot goes unmentioned
  std::uint64_t seed = 20250809;
};

// Writes trainset.csv and testset.csv under out_dir.
void synthesize_corpus(const std::string& out_dir,
                       const CorpusGenOptions& opt = {});

}  // namespace duality
