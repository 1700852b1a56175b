#pragma once

#include <cstdint>
#include <vector>

#include "duality/gru.hpp"

namespace duality {

// Frame-to-sentence generator: a fully-connected layer maps the label vector
// to the initial GRU hidden state, and a symmetric projection maps hidden
// states to vocabulary logits.
struct NlgModel {
  int label_dim = 0;
  int vocab_size = 0;
  int embedding_dim = 50;
  int hidden_size = 200;
  Parameter W_frame;  // [hidden x D]
  Parameter b_frame;  // [hidden]
  Parameter embedding;
  GruCell gru;
  Parameter W_out;  // [vocab x hidden]
  Parameter b_out;

  NlgModel() = default;
  NlgModel(int label_dim, int vocab, int emb_dim, int hidden, Rng& rng);
  std::vector<Parameter*> parameters();

  TensorPtr initial_hidden(Tape& tape, const TensorPtr& frames) const;
  // Per-example log P(y|x), shape [batch]. frames is [batch x D].
  TensorPtr log_likelihood_batch(Tape& tape, const TensorPtr& frames,
                                 const std::vector<const Utterance*>& utts) const;
};

// Sentence-to-frame recognizer: encode with the GRU, then map the final
// hidden state to D independent Bernoulli logits.
struct NluModel {
  int label_dim = 0;
  int vocab_size = 0;
  int embedding_dim = 50;
  int hidden_size = 200;
  Parameter embedding;
  GruCell gru;
  Parameter W_label;  // [D x hidden]
  Parameter b_label;  // [D]

  NluModel() = default;
  NluModel(int label_dim, int vocab, int emb_dim, int hidden, Rng& rng);
  std::vector<Parameter*> parameters();

  TensorPtr logits_batch(Tape& tape,
                         const std::vector<const Utterance*>& utts) const;
  // Per-example log P(x|y), shape [batch]. frames is [batch x D].
  TensorPtr log_likelihood_batch(Tape& tape,
                                 const std::vector<const Utterance*>& utts,
                                 const TensorPtr& frames) const;
};

double nlg_conditional_log_likelihood(const NlgModel& m,
                                      const std::vector<double>& x,
                                      const Utterance& y);

double nlu_conditional_log_likelihood(const NluModel& m, const Utterance& y,
                                      const std::vector<double>& x);

enum class DecodeStrategy { greedy, beam };

Utterance nlg_generate(const NlgModel& m, const std::vector<double>& x,
                       DecodeStrategy strategy = DecodeStrategy::greedy,
                       int beam_width = 4, int max_len = 60);

// Greedy decode for many frames at once (row-parallel batching).
std::vector<Utterance> nlg_generate_greedy_batch(
    const NlgModel& m, const std::vector<std::vector<double>>& frames,
    int max_len = 60);

// Bernoulli probabilities for one utterance.
std::vector<double> nlu_predict_probs(const NluModel& m, const Utterance& y);

// Binary label vector: label d is on iff sigma_d > threshold.
std::vector<double> nlu_predict(const NluModel& m, const Utterance& y,
                                double threshold = 0.5);

}  // namespace duality
