#include "duality/dual_models.hpp"

#include <algorithm>
#include <cmath>

namespace duality {

namespace {

void check_frame(const std::vector<double>& x, int D) {
  if (static_cast<int>(x.size()) != D)
    throw ContractError("frame vector length " + std::to_string(x.size()) +
                        " vs label dimension " + std::to_string(D));
  for (double v : x)
    if (v != 0.0 && v != 1.0)
      throw ValidationError("frame vector entries must be 0 or 1");
}

TensorPtr frames_tensor(const std::vector<std::vector<double>>& frames,
                        int D) {
  std::vector<double> flat;
  flat.reserve(frames.size() * static_cast<std::size_t>(D));
  for (const auto& f : frames) {
    if (static_cast<int>(f.size()) != D)
      throw ContractError("frame vector length mismatch in batch");
    for (double v : f) flat.push_back(v);
  }
  return Tensor::from(std::move(flat),
                      {static_cast<int>(frames.size()), D});
}

constexpr double kNegInf = -1e30;

}  // namespace

NlgModel::NlgModel(int D, int vocab, int emb_dim, int hidden, Rng& rng)
    : label_dim(D),
      vocab_size(vocab),
      embedding_dim(emb_dim),
      hidden_size(hidden) {
  const double hb = 1.0 / std::sqrt(static_cast<double>(hidden));
  const double db = 1.0 / std::sqrt(static_cast<double>(D));
  W_frame = make_uniform_param("nlg.W_frame", {hidden, D}, -db, db, rng);
  b_frame = make_uniform_param("nlg.b_frame", {hidden}, -db, db, rng);
  embedding =
      make_uniform_param("nlg.embedding", {vocab, emb_dim}, -0.1, 0.1, rng);
  gru = GruCell("nlg.gru", emb_dim, hidden, rng);
  W_out = make_uniform_param("nlg.W_out", {vocab, hidden}, -hb, hb, rng);
  b_out = make_uniform_param("nlg.b_out", {vocab}, -hb, hb, rng);
}

std::vector<Parameter*> NlgModel::parameters() {
  std::vector<Parameter*> ps = {&W_frame, &b_frame, &embedding, &W_out,
                                &b_out};
  for (auto* p : gru.parameters()) ps.push_back(p);
  return ps;
}

TensorPtr NlgModel::initial_hidden(Tape& tape, const TensorPtr& frames) const {
  return ops::tanh_act(
      tape, ops::linear(tape, frames, W_frame.tensor, b_frame.tensor));
}

TensorPtr NlgModel::log_likelihood_batch(
    Tape& tape, const TensorPtr& frames,
    const std::vector<const Utterance*>& utts) const {
  if (frames->shape.size() != 2 || frames->shape[1] != label_dim)
    throw ContractError("NLG frames batch must be [batch x D]");
  if (frames->shape[0] != static_cast<int>(utts.size()))
    throw ContractError("NLG batch size mismatch");
  for (const auto* u : utts) check_well_formed(*u, vocab_size);
  auto sb = make_sequence_batch(utts);
  auto h0 = initial_hidden(tape, frames);
  return sequence_log_likelihood(tape, embedding, gru, W_out, b_out, h0, sb);
}

NluModel::NluModel(int D, int vocab, int emb_dim, int hidden, Rng& rng)
    : label_dim(D),
      vocab_size(vocab),
      embedding_dim(emb_dim),
      hidden_size(hidden) {
  const double hb = 1.0 / std::sqrt(static_cast<double>(hidden));
  embedding =
      make_uniform_param("nlu.embedding", {vocab, emb_dim}, -0.1, 0.1, rng);
  gru = GruCell("nlu.gru", emb_dim, hidden, rng);
  W_label = make_uniform_param("nlu.W_label", {D, hidden}, -hb, hb, rng);
  b_label = make_uniform_param("nlu.b_label", {D}, -hb, hb, rng);
}

std::vector<Parameter*> NluModel::parameters() {
  std::vector<Parameter*> ps = {&embedding, &W_label, &b_label};
  for (auto* p : gru.parameters()) ps.push_back(p);
  return ps;
}

TensorPtr NluModel::logits_batch(
    Tape& tape, const std::vector<const Utterance*>& utts) const {
  for (const auto* u : utts) check_well_formed(*u, vocab_size);
  auto h0 = Tensor::zeros({static_cast<int>(utts.size()), hidden_size});
  auto h = gru_encode_batch(tape, embedding, gru, utts, h0);
  return ops::linear(tape, h, W_label.tensor, b_label.tensor);
}

TensorPtr NluModel::log_likelihood_batch(Tape& tape,
                                         const std::vector<const Utterance*>& utts,
                                         const TensorPtr& frames) const {
  if (frames->shape.size() != 2 || frames->shape[1] != label_dim)
    throw ContractError("NLU frames batch must be [batch x D]");
  if (frames->shape[0] != static_cast<int>(utts.size()))
    throw ContractError("NLU batch size mismatch");
  auto logits = logits_batch(tape, utts);
  return ops::bernoulli_loglik(tape, logits, frames);
}

double nlg_conditional_log_likelihood(const NlgModel& m,
                                      const std::vector<double>& x,
                                      const Utterance& y) {
  check_frame(x, m.label_dim);
  Tape tape(false);
  auto frames = frames_tensor({x}, m.label_dim);
  auto ll = m.log_likelihood_batch(tape, frames, {&y});
  return ll->values[0];
}

double nlu_conditional_log_likelihood(const NluModel& m, const Utterance& y,
                                      const std::vector<double>& x) {
  check_frame(x, m.label_dim);
  Tape tape(false);
  auto frames = frames_tensor({x}, m.label_dim);
  auto ll = m.log_likelihood_batch(tape, {&y}, frames);
  return ll->values[0];
}

std::vector<Utterance> nlg_generate_greedy_batch(
    const NlgModel& m, const std::vector<std::vector<double>>& frames,
    int max_len) {
  const int batch = static_cast<int>(frames.size());
  if (batch == 0) return {};
  Tape tape(false);
  auto x = frames_tensor(frames, m.label_dim);
  TensorPtr h = m.initial_hidden(tape, x);
  std::vector<int> prev(static_cast<std::size_t>(batch), Vocabulary::kBos);
  std::vector<bool> done(static_cast<std::size_t>(batch), false);
  std::vector<std::vector<int>> bodies(static_cast<std::size_t>(batch));

  for (int t = 0; t < max_len; ++t) {
    auto emb = ops::embedding_lookup(tape, m.embedding.tensor, prev);
    h = m.gru.step(tape, emb, h);
    auto logits = ops::linear(tape, h, m.W_out.tensor, m.b_out.tensor);
    bool all_done = true;
    for (int b = 0; b < batch; ++b) {
      if (done[static_cast<std::size_t>(b)]) {
        prev[static_cast<std::size_t>(b)] = Vocabulary::kPad;
        continue;
      }
      const double* row =
          logits->values.data() + static_cast<std::size_t>(b) * m.vocab_size;
      int best = Vocabulary::kEos;
      double best_v = kNegInf;
      for (int v = 0; v < m.vocab_size; ++v) {
        if (v == Vocabulary::kPad || v == Vocabulary::kBos) continue;
        if (row[v] > best_v) {
          best_v = row[v];
          best = v;
        }
      }
      if (best == Vocabulary::kEos) {
        done[static_cast<std::size_t>(b)] = true;
        prev[static_cast<std::size_t>(b)] = Vocabulary::kPad;
      } else {
        bodies[static_cast<std::size_t>(b)].push_back(best);
        prev[static_cast<std::size_t>(b)] = best;
        all_done = false;
      }
    }
    if (all_done) break;
  }

  std::vector<Utterance> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    Utterance u;
    u.tokens.push_back(Vocabulary::kBos);
    for (int w : bodies[static_cast<std::size_t>(b)]) u.tokens.push_back(w);
    u.tokens.push_back(Vocabulary::kEos);
    out.push_back(std::move(u));
  }
  return out;
}

namespace {

struct BeamHyp {
  std::vector<int> body;
  double logprob = 0.0;
  TensorPtr h;
  bool finished = false;
};

Utterance finish_hyp(const BeamHyp& hyp) {
  Utterance u;
  u.tokens.push_back(Vocabulary::kBos);
  for (int w : hyp.body) u.tokens.push_back(w);
  u.tokens.push_back(Vocabulary::kEos);
  return u;
}

}  // namespace

Utterance nlg_generate(const NlgModel& m, const std::vector<double>& x,
                       DecodeStrategy strategy, int beam_width, int max_len) {
  check_frame(x, m.label_dim);
  if (strategy == DecodeStrategy::greedy)
    return nlg_generate_greedy_batch(m, {x}, max_len)[0];
  if (beam_width < 1) throw ContractError("beam width must be >= 1");

  Tape tape(false);
  auto frames = frames_tensor({x}, m.label_dim);
  BeamHyp root;
  root.h = m.initial_hidden(tape, frames);
  std::vector<BeamHyp> live = {root};
  std::vector<BeamHyp> completed;

  for (int t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<BeamHyp> candidates;
    for (auto& hyp : live) {
      const int prev = hyp.body.empty() ? Vocabulary::kBos : hyp.body.back();
      auto emb = ops::embedding_lookup(tape, m.embedding.tensor, {prev});
      auto h = m.gru.step(tape, emb, hyp.h);
      auto logp = ops::log_softmax_rows(
          tape, ops::linear(tape, h, m.W_out.tensor, m.b_out.tensor));
      // top beam_width continuations of this hypothesis
      std::vector<int> idx;
      for (int v = 0; v < m.vocab_size; ++v) {
        if (v == Vocabulary::kPad || v == Vocabulary::kBos) continue;
        idx.push_back(v);
      }
      std::partial_sort(idx.begin(),
                        idx.begin() + std::min<std::size_t>(
                                          idx.size(),
                                          static_cast<std::size_t>(beam_width)),
                        idx.end(), [&](int a, int b) {
                          if (logp->values[a] != logp->values[b])
                            return logp->values[a] > logp->values[b];
                          return a < b;
                        });
      const int take =
          std::min(beam_width, static_cast<int>(idx.size()));
      for (int i = 0; i < take; ++i) {
        BeamHyp next;
        next.body = hyp.body;
        next.logprob = hyp.logprob + logp->values[static_cast<std::size_t>(idx[i])];
        next.h = h;
        if (idx[i] == Vocabulary::kEos) {
          next.finished = true;
          completed.push_back(next);
        } else {
          next.body.push_back(idx[i]);
          candidates.push_back(std::move(next));
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const BeamHyp& a, const BeamHyp& b) {
                if (a.logprob != b.logprob) return a.logprob > b.logprob;
                return a.body < b.body;
              });
    if (static_cast<int>(candidates.size()) > beam_width)
      candidates.resize(static_cast<std::size_t>(beam_width));
    live = std::move(candidates);
  }

  const BeamHyp* best = nullptr;
  for (const auto& hyp : completed)
    if (!best || hyp.logprob > best->logprob) best = &hyp;
  if (!best)  // nothing completed within max_len; fall back to best live
    for (const auto& hyp : live)
      if (!best || hyp.logprob > best->logprob) best = &hyp;
  if (!best) throw ContractError("beam search produced no hypotheses");
  return finish_hyp(*best);
}

std::vector<double> nlu_predict_probs(const NluModel& m, const Utterance& y) {
  Tape tape(false);
  auto logits = m.logits_batch(tape, {&y});
  std::vector<double> probs(static_cast<std::size_t>(m.label_dim));
  for (int d = 0; d < m.label_dim; ++d)
    probs[static_cast<std::size_t>(d)] =
        1.0 / (1.0 + std::exp(-logits->values[static_cast<std::size_t>(d)]));
  return probs;
}

std::vector<double> nlu_predict(const NluModel& m, const Utterance& y,
                                double threshold) {
  auto probs = nlu_predict_probs(m, y);
  std::vector<double> labels(probs.size(), 0.0);
  for (std::size_t d = 0; d < probs.size(); ++d)
    labels[d] = probs[d] > threshold ? 1.0 : 0.0;
  return labels;
}

}  // namespace duality
