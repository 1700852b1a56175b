#pragma once

#include <cstdint>
#include <vector>

#include "duality/gru.hpp"

namespace duality {

// Recurrent language model giving the empirical sentence marginal log P(y).
// Pretrained on the training split, then frozen while the conditional models
// train against it.
struct LanguageModel {
  int vocab_size = 0;
  int embedding_dim = 50;
  int hidden_size = 200;
  Parameter embedding;  // [vocab x emb]
  GruCell gru;
  Parameter W_out;  // [vocab x hidden]
  Parameter b_out;  // [vocab]

  LanguageModel() = default;
  LanguageModel(int vocab, int emb_dim, int hidden, Rng& rng);
  std::vector<Parameter*> parameters();

  // Per-example log-likelihood tensor for a batch, shape [batch].
  TensorPtr log_likelihood_batch(Tape& tape,
                                 const std::vector<const Utterance*>& utts) const;
};

struct LmTrainStats {
  std::vector<double> epoch_loss;  // mean per-token negative log-likelihood
};

LmTrainStats train_language_model(LanguageModel& model,
                                  const std::vector<Utterance>& corpus,
                                  int epochs, int batch_size,
                                  std::uint64_t seed,
                                  const AdamConfig& adam = {});

// log P(y) in nats, scoring everything after BOS through EOS. Always <= 0.
double sentence_log_probability(const LanguageModel& model,
                                const Utterance& y);

std::vector<double> sentence_log_probability_batch(
    const LanguageModel& model, const std::vector<const Utterance*>& utts);

// exp(-mean per-token log probability) over the corpus.
double perplexity(const LanguageModel& model,
                  const std::vector<Utterance>& corpus);

}  // namespace duality
