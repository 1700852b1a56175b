#include "duality/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

namespace duality {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::int64_t>;

NgramCounts count_ngrams(const Tokens& toks, int n) {
  NgramCounts counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i)
    ++counts[std::vector<std::string>(toks.begin() + static_cast<long>(i),
                                      toks.begin() + static_cast<long>(i) + n)];
  return counts;
}

void check_ref_sets(const std::vector<Tokens>& hyps,
                    const std::vector<RefSet>& ref_sets) {
  if (hyps.size() != ref_sets.size())
    throw ContractError("one reference set required per hypothesis");
  for (const auto& refs : ref_sets)
    if (refs.empty())
      throw ValidationError("every hypothesis needs at least one reference");
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < 4; ++n) {
    matched[static_cast<std::size_t>(n)] += o.matched[static_cast<std::size_t>(n)];
    total[static_cast<std::size_t>(n)] += o.total[static_cast<std::size_t>(n)];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

BleuStats bleu_statistics(const Tokens& hyp, const RefSet& refs) {
  if (refs.empty())
    throw ValidationError("bleu_statistics requires at least one reference");
  BleuStats st;
  st.hyp_len = static_cast<std::int64_t>(hyp.size());

  // closest reference length; ties broken toward the shorter reference
  std::int64_t best_len = static_cast<std::int64_t>(refs[0].size());
  for (const auto& r : refs) {
    const auto len = static_cast<std::int64_t>(r.size());
    const auto d_new = std::llabs(len - st.hyp_len);
    const auto d_old = std::llabs(best_len - st.hyp_len);
    if (d_new < d_old || (d_new == d_old && len < best_len)) best_len = len;
  }
  st.ref_len = best_len;

  for (int n = 1; n <= 4; ++n) {
    auto hyp_counts = count_ngrams(hyp, n);
    std::int64_t total = 0;
    for (const auto& [g, c] : hyp_counts) total += c;
    st.total[static_cast<std::size_t>(n - 1)] = total;

    NgramCounts max_ref;
    for (const auto& r : refs)
      for (const auto& [g, c] : count_ngrams(r, n)) {
        auto& slot = max_ref[g];
        slot = std::max(slot, c);
      }
    std::int64_t matched = 0;
    for (const auto& [g, c] : hyp_counts) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    st.matched[static_cast<std::size_t>(n - 1)] = matched;
  }
  return st;
}

double corpus_bleu(const std::vector<Tokens>& hyps,
                   const std::vector<RefSet>& ref_sets) {
  if (hyps.empty()) throw ValidationError("corpus_bleu requires hypotheses");
  check_ref_sets(hyps, ref_sets);
  BleuStats agg;
  for (std::size_t i = 0; i < hyps.size(); ++i)
    agg += bleu_statistics(hyps[i], ref_sets[i]);

  double log_precision = 0.0;
  for (int n = 0; n < 4; ++n) {
    const auto m = agg.matched[static_cast<std::size_t>(n)];
    const auto t = agg.total[static_cast<std::size_t>(n)];
    if (m == 0 || t == 0) return 0.0;  // smoothing off
    log_precision += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  log_precision /= 4.0;
  double bp = 1.0;
  if (agg.hyp_len < agg.ref_len && agg.hyp_len > 0)
    bp = std::exp(1.0 - static_cast<double>(agg.ref_len) /
                            static_cast<double>(agg.hyp_len));
  return 100.0 * bp * std::exp(log_precision);
}

double rouge_n(const std::vector<Tokens>& hyps,
               const std::vector<RefSet>& ref_sets, int n) {
  if (n != 1 && n != 2)
    throw ContractError("rouge_n supports n in {1, 2}");
  if (hyps.empty()) throw ValidationError("rouge_n requires hypotheses");
  check_ref_sets(hyps, ref_sets);
  double total_score = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    auto hyp_counts = count_ngrams(hyps[i], n);
    double best = 0.0;
    for (const auto& r : ref_sets[i]) {
      auto ref_counts = count_ngrams(r, n);
      std::int64_t ref_total = 0;
      for (const auto& [g, c] : ref_counts) ref_total += c;
      if (ref_total == 0) continue;  // reference shorter than n
      std::int64_t matched = 0;
      for (const auto& [g, c] : ref_counts) {
        auto it = hyp_counts.find(g);
        if (it != hyp_counts.end()) matched += std::min(c, it->second);
      }
      best = std::max(best, static_cast<double>(matched) /
                                static_cast<double>(ref_total));
    }
    total_score += best;
  }
  return 100.0 * total_score / static_cast<double>(hyps.size());
}

std::int64_t lcs_length(const Tokens& a, const Tokens& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<std::int64_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

double rouge_l(const std::vector<Tokens>& hyps,
               const std::vector<RefSet>& ref_sets, double beta) {
  if (hyps.empty()) throw ValidationError("rouge_l requires hypotheses");
  check_ref_sets(hyps, ref_sets);
  const double b2 = beta * beta;
  double total_score = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    double best = 0.0;
    for (const auto& r : ref_sets[i]) {
      if (r.empty() || hyps[i].empty()) continue;
      const double lcs = static_cast<double>(lcs_length(hyps[i], r));
      const double rec = lcs / static_cast<double>(r.size());
      const double prec = lcs / static_cast<double>(hyps[i].size());
      if (rec + prec == 0.0) continue;
      const double denom = rec + b2 * prec;
      if (denom == 0.0) continue;
      best = std::max(best, (1.0 + b2) * rec * prec / denom);
    }
    total_score += best;
  }
  return 100.0 * total_score / static_cast<double>(hyps.size());
}

double micro_f1(const std::vector<std::set<int>>& predicted,
                const std::vector<std::set<int>>& gold) {
  if (predicted.size() != gold.size())
    throw ContractError("micro_f1: prediction/gold length mismatch");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (int label : predicted[i])
      gold[i].count(label) ? ++tp : ++fp;
    for (int label : gold[i])
      if (!predicted[i].count(label)) ++fn;
  }
  const double denom = 2.0 * static_cast<double>(tp) +
                       static_cast<double>(fp) + static_cast<double>(fn);
  if (denom == 0.0) return 0.0;  // P + R = 0
  return 100.0 * 2.0 * static_cast<double>(tp) / denom;
}

}  // namespace duality
