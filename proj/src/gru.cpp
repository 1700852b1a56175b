#include "duality/gru.hpp"

#include <algorithm>
#include <cmath>

namespace duality {

GruCell::GruCell(const std::string& prefix, int input, int hidden, Rng& rng)
    : input_size(input), hidden_size(hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto mk = [&](const char* name, std::vector<int> shape) {
    return make_uniform_param(prefix + "." + name, std::move(shape), -bound,
                              bound, rng);
  };
  W_ir = mk("W_ir", {hidden, input});
  W_iz = mk("W_iz", {hidden, input});
  W_in = mk("W_in", {hidden, input});
  W_hr = mk("W_hr", {hidden, hidden});
  W_hz = mk("W_hz", {hidden, hidden});
  W_hn = mk("W_hn", {hidden, hidden});
  b_ir = mk("b_ir", {hidden});
  b_iz = mk("b_iz", {hidden});
  b_in = mk("b_in", {hidden});
  b_hr = mk("b_hr", {hidden});
  b_hz = mk("b_hz", {hidden});
  b_hn = mk("b_hn", {hidden});
}

TensorPtr GruCell::step(Tape& tape, const TensorPtr& x,
                        const TensorPtr& h) const {
  using namespace ops;
  auto r = sigmoid(tape, add(tape, linear(tape, x, W_ir.tensor, b_ir.tensor),
                             linear(tape, h, W_hr.tensor, b_hr.tensor)));
  auto z = sigmoid(tape, add(tape, linear(tape, x, W_iz.tensor, b_iz.tensor),
                             linear(tape, h, W_hz.tensor, b_hz.tensor)));
  auto n = tanh_act(
      tape, add(tape, linear(tape, x, W_in.tensor, b_in.tensor),
                mul(tape, r, linear(tape, h, W_hn.tensor, b_hn.tensor))));
  return add(tape, n, mul(tape, z, sub(tape, h, n)));
}

std::vector<Parameter*> GruCell::parameters() {
  return {&W_ir, &W_iz, &W_in, &W_hr, &W_hz, &W_hn,
          &b_ir, &b_iz, &b_in, &b_hr, &b_hz, &b_hn};
}

SequenceBatch make_sequence_batch(const std::vector<const Utterance*>& utts) {
  SequenceBatch sb;
  sb.batch = static_cast<int>(utts.size());
  int max_len = 0;
  for (const auto* u : utts)
    max_len = std::max(max_len, static_cast<int>(u->tokens.size()));
  sb.steps = std::max(0, max_len - 1);
  sb.inputs.assign(sb.steps, std::vector<int>(sb.batch, Vocabulary::kPad));
  sb.targets.assign(sb.steps, std::vector<int>(sb.batch, Vocabulary::kPad));
  sb.mask.assign(sb.steps, std::vector<double>(sb.batch, 0.0));
  for (int b = 0; b < sb.batch; ++b) {
    const auto& toks = utts[static_cast<std::size_t>(b)]->tokens;
    for (int t = 0; t + 1 < static_cast<int>(toks.size()); ++t) {
      sb.inputs[t][b] = toks[static_cast<std::size_t>(t)];
      sb.targets[t][b] = toks[static_cast<std::size_t>(t) + 1];
      sb.mask[t][b] = 1.0;
      ++sb.scored_tokens;
    }
  }
  return sb;
}

TensorPtr sequence_log_likelihood(Tape& tape, const Parameter& embedding,
                                  const GruCell& gru, const Parameter& W_out,
                                  const Parameter& b_out, TensorPtr h0,
                                  const SequenceBatch& sb) {
  using namespace ops;
  TensorPtr h = std::move(h0);
  TensorPtr ll;
  for (int t = 0; t < sb.steps; ++t) {
    auto x = embedding_lookup(tape, embedding.tensor, sb.inputs[t]);
    auto h_new = gru.step(tape, x, h);
    h = lerp_rows(tape, h_new, h, sb.mask[t]);
    auto logits = linear(tape, h, W_out.tensor, b_out.tensor);
    auto logp = log_softmax_rows(tape, logits);
    auto picked = pick_per_row(tape, logp, sb.targets[t]);
    auto mask_t = Tensor::from(sb.mask[t], {sb.batch});
    auto term = mul(tape, picked, mask_t);
    ll = ll ? add(tape, ll, term) : term;
  }
  if (!ll) throw ContractError("sequence batch with zero steps");
  return ll;
}

TensorPtr gru_encode_batch(Tape& tape, const Parameter& embedding,
                           const GruCell& gru,
                           const std::vector<const Utterance*>& utts,
                           TensorPtr h0) {
  const int batch = static_cast<int>(utts.size());
  int max_len = 0;
  for (const auto* u : utts)
    max_len = std::max(max_len, static_cast<int>(u->tokens.size()));
  TensorPtr h = std::move(h0);
  for (int t = 0; t < max_len; ++t) {
    std::vector<int> ids(static_cast<std::size_t>(batch), Vocabulary::kPad);
    std::vector<double> present(static_cast<std::size_t>(batch), 0.0);
    for (int b = 0; b < batch; ++b) {
      const auto& toks = utts[static_cast<std::size_t>(b)]->tokens;
      if (t < static_cast<int>(toks.size())) {
        ids[static_cast<std::size_t>(b)] = toks[static_cast<std::size_t>(t)];
        present[static_cast<std::size_t>(b)] = 1.0;
      }
    }
    auto x = ops::embedding_lookup(tape, embedding.tensor, ids);
    auto h_new = gru.step(tape, x, h);
    h = ops::lerp_rows(tape, h_new, h, present);
  }
  return h;
}

}  // namespace duality
