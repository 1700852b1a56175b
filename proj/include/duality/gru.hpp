#pragma once

#include <string>
#include <vector>

#include "duality/ops.hpp"
#include "duality/optim.hpp"
#include "duality/text_data.hpp"

namespace duality {

// Gated recurrent unit, one layer.
//   r = sig(W_ir x + b_ir + W_hr h + b_hr)
//   z = sig(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r .* (W_hn h + b_hn))
//   h' = n + z .* (h - n)
struct GruCell {
  int input_size = 0;
  int hidden_size = 0;
  Parameter W_ir, W_iz, W_in, W_hr, W_hz, W_hn;
  Parameter b_ir, b_iz, b_in, b_hr, b_hz, b_hn;

  GruCell() = default;
  GruCell(const std::string& prefix, int input, int hidden, Rng& rng);

  TensorPtr step(Tape& tape, const TensorPtr& x, const TensorPtr& h) const;
  std::vector<Parameter*> parameters();
};

// Teacher-forcing layout for a padded batch: step t feeds tokens[t] and
// scores tokens[t+1]. Positions past each sequence's EOS carry mask 0.
struct SequenceBatch {
  int batch = 0;
  int steps = 0;
  std::vector<std::vector<int>> inputs;     // [steps][batch]
  std::vector<std::vector<int>> targets;    // [steps][batch]
  std::vector<std::vector<double>> mask;    // [steps][batch], 0/1
  std::int64_t scored_tokens = 0;
};

SequenceBatch make_sequence_batch(const std::vector<const Utterance*>& utts);

// Per-example sum over valid steps of log p(target | prefix), computed with
// the shared embedding/GRU/projection parameters. Returns shape [batch].
TensorPtr sequence_log_likelihood(Tape& tape, const Parameter& embedding,
                                  const GruCell& gru, const Parameter& W_out,
                                  const Parameter& b_out, TensorPtr h0,
                                  const SequenceBatch& sb);

// Runs the GRU over whole utterances (BOS through EOS) and returns the final
// hidden state per row; padded positions leave the state untouched.
TensorPtr gru_encode_batch(Tape& tape, const Parameter& embedding,
                           const GruCell& gru,
                           const std::vector<const Utterance*>& utts,
                           TensorPtr h0);

}  // namespace duality
