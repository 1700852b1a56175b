#include "duality/lm.hpp"

#include <cmath>

namespace duality {

LanguageModel::LanguageModel(int vocab, int emb_dim, int hidden, Rng& rng)
    : vocab_size(vocab), embedding_dim(emb_dim), hidden_size(hidden) {
  embedding = make_uniform_param("lm.embedding", {vocab, emb_dim}, -0.1, 0.1,
                                 rng);
  gru = GruCell("lm.gru", emb_dim, hidden, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  W_out = make_uniform_param("lm.W_out", {vocab, hidden}, -bound, bound, rng);
  b_out = make_uniform_param("lm.b_out", {vocab}, -bound, bound, rng);
}

std::vector<Parameter*> LanguageModel::parameters() {
  std::vector<Parameter*> ps = {&embedding, &W_out, &b_out};
  for (auto* p : gru.parameters()) ps.push_back(p);
  return ps;
}

TensorPtr LanguageModel::log_likelihood_batch(
    Tape& tape, const std::vector<const Utterance*>& utts) const {
  for (const auto* u : utts) check_well_formed(*u, vocab_size);
  auto sb = make_sequence_batch(utts);
  auto h0 = Tensor::zeros({sb.batch, hidden_size});
  return sequence_log_likelihood(tape, embedding, gru, W_out, b_out, h0, sb);
}

LmTrainStats train_language_model(LanguageModel& model,
                                  const std::vector<Utterance>& corpus,
                                  int epochs, int batch_size,
                                  std::uint64_t seed, const AdamConfig& adam) {
  if (corpus.empty())
    throw ValidationError("language model training requires a corpus");
  Rng rng(seed);
  auto params = model.parameters();
  LmTrainStats stats;
  std::vector<int> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t token_sum = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      std::vector<const Utterance*> batch;
      for (std::size_t i = start;
           i < std::min(order.size(), start + static_cast<std::size_t>(batch_size));
           ++i)
        batch.push_back(&corpus[static_cast<std::size_t>(order[i])]);
      Tape tape;
      auto ll = model.log_likelihood_batch(tape, batch);
      auto sb_tokens = [&] {
        std::int64_t n = 0;
        for (const auto* u : batch)
          n += static_cast<std::int64_t>(u->tokens.size()) - 1;
        return n;
      }();
      auto loss = ops::scale(tape, ops::sum(tape, ll),
                             -1.0 / static_cast<double>(sb_tokens));
      loss_sum += loss->item() * static_cast<double>(sb_tokens);
      token_sum += sb_tokens;
      tape.backward(loss);
      adam_update(params, adam);
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(token_sum));
  }
  return stats;
}

double sentence_log_probability(const LanguageModel& model,
                                const Utterance& y) {
  Tape tape(false);
  auto ll = model.log_likelihood_batch(tape, {&y});
  return ll->values[0];
}

std::vector<double> sentence_log_probability_batch(
    const LanguageModel& model, const std::vector<const Utterance*>& utts) {
  if (utts.empty()) return {};
  Tape tape(false);
  auto ll = model.log_likelihood_batch(tape, utts);
  return ll->values;
}

double perplexity(const LanguageModel& model,
                  const std::vector<Utterance>& corpus) {
  if (corpus.empty())
    throw ValidationError("perplexity requires a non-empty corpus");
  double ll_sum = 0.0;
  std::int64_t tokens = 0;
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < corpus.size(); start += chunk) {
    std::vector<const Utterance*> batch;
    for (std::size_t i = start; i < std::min(corpus.size(), start + chunk); ++i)
      batch.push_back(&corpus[i]);
    auto lls = sentence_log_probability_batch(model, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ll_sum += lls[i];
      tokens += static_cast<std::int64_t>(batch[i]->tokens.size()) - 1;
    }
  }
  return std::exp(-ll_sum / static_cast<double>(tokens));
}

}  // namespace duality
