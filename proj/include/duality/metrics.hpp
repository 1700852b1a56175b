#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "duality/tensor.hpp"

namespace duality {

using Tokens = std::vector<std::string>;
using RefSet = std::vector<Tokens>;

// Per-hypothesis BLEU sufficient statistics: clipped n-gram matches and
// totals for n = 1..4, hypothesis length, and the closest reference length
// (ties to the shorter reference).
struct BleuStats {
  std::array<std::int64_t, 4> matched{0, 0, 0, 0};
  std::array<std::int64_t, 4> total{0, 0, 0, 0};
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_statistics(const Tokens& hyp, const RefSet& refs);

// Corpus BLEU-4 in percent: geometric mean of clipped modified precisions,
// no smoothing, brevity penalty from closest reference lengths.
double corpus_bleu(const std::vector<Tokens>& hyps,
                   const std::vector<RefSet>& ref_sets);

// Mean over instances of the best per-reference n-gram recall, in percent.
// References shorter than n contribute no n-grams and are skipped.
double rouge_n(const std::vector<Tokens>& hyps,
               const std::vector<RefSet>& ref_sets, int n);

// Mean over instances of the best per-reference LCS F-measure, in percent.
// beta weights recall; large beta makes the score recall-oriented.
double rouge_l(const std::vector<Tokens>& hyps,
               const std::vector<RefSet>& ref_sets, double beta = 8.0);

std::int64_t lcs_length(const Tokens& a, const Tokens& b);

// Pooled-count micro F1 over label sets, in percent.
double micro_f1(const std::vector<std::set<int>>& predicted,
                const std::vector<std::set<int>>& gold);

struct EvalReport {
  double nlu_micro_f1 = 0.0;
  double bleu = 0.0;
  double rouge_1 = 0.0;
  double rouge_2 = 0.0;
  double rouge_l = 0.0;
  std::int64_t nlg_instances = 0;
  std::int64_t nlu_instances = 0;
};

}  // namespace duality
