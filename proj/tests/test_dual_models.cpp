#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "duality/dual_models.hpp"
#include "duality/gradcheck.hpp"
#include "duality/optim.hpp"

using namespace duality;

namespace {

Vocabulary toy_vocab() { return Vocabulary::from_tokens({"a", "b", "c", "d"}); }

void zero_all(std::vector<Parameter*> params) {
  for (auto* p : params)
    std::fill(p->tensor->values.begin(), p->tensor->values.end(), 0.0);
}

std::vector<std::vector<double>> all_binary_vectors(int D) {
  std::vector<std::vector<double>> out;
  for (int m = 0; m < (1 << D); ++m) {
    std::vector<double> x(static_cast<std::size_t>(D));
    for (int d = 0; d < D; ++d) x[static_cast<std::size_t>(d)] = (m >> d) & 1;
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace

TEST_CASE("zero-weight NLG scores uniformly") {
  auto v = toy_vocab();
  Rng rng(1);
  NlgModel m(3, v.size(), 6, 10, rng);
  zero_all(m.parameters());
  auto y = encode_utterance({"a", "b"}, v);  // 4 tokens, 3 scored
  const double lp = nlg_conditional_log_likelihood(m, {1, 0, 1}, y);
  CHECK(lp == doctest::Approx(3.0 * std::log(1.0 / v.size())).epsilon(1e-12));
  CHECK_THROWS_AS(nlg_conditional_log_likelihood(m, {1, 0}, y), ContractError);
}

TEST_CASE("NLG likelihood ignores PAD embedding rows") {
  auto v = toy_vocab();
  Rng rng(2);
  NlgModel m(3, v.size(), 6, 10, rng);
  auto y1 = encode_utterance({"a", "b", "c", "d", "a"}, v);
  auto y2 = encode_utterance({"b"}, v);  // shorter row forces padding
  auto frames = Tensor::from({1, 0, 0, 0, 1, 1}, {2, 3});

  Tape t1(false);
  auto before = m.log_likelihood_batch(t1, frames, {&y1, &y2})->values;

  for (int c = 0; c < m.embedding_dim; ++c)
    m.embedding.tensor->values[static_cast<std::size_t>(Vocabulary::kPad) *
                                   m.embedding_dim +
                               c] = 123.456;
  Tape t2(false);
  auto after = m.log_likelihood_batch(t2, frames, {&y1, &y2})->values;
  CHECK(before == after);
}

TEST_CASE("batched NLG likelihood is bit-identical to single scoring") {
  auto v = toy_vocab();
  Rng rng(3);
  NlgModel m(4, v.size(), 6, 12, rng);
  std::vector<std::vector<double>> frames = {
      {1, 0, 0, 1}, {0, 1, 0, 0}, {1, 1, 1, 0}};
  std::vector<Utterance> ys = {encode_utterance({"a", "b", "c"}, v),
                               encode_utterance({"d"}, v),
                               encode_utterance({"c", "c", "a", "b"}, v)};
  std::vector<double> flat;
  for (const auto& f : frames)
    for (double x : f) flat.push_back(x);
  Tape tape(false);
  auto batch_ll = m.log_likelihood_batch(
      tape, Tensor::from(flat, {3, 4}), {&ys[0], &ys[1], &ys[2]});
  for (int b = 0; b < 3; ++b)
    CHECK(batch_ll->values[static_cast<std::size_t>(b)] ==
          nlg_conditional_log_likelihood(m, frames[static_cast<std::size_t>(b)],
                                         ys[static_cast<std::size_t>(b)]));
}

TEST_CASE("NLG gradients pass finite differences") {
  auto v = toy_vocab();
  Rng rng(4);
  NlgModel m(3, v.size(), 4, 6, rng);
  std::vector<double> flat = {1, 0, 1, 0, 1, 0};
  auto frames = Tensor::from(flat, {2, 3});
  auto y1 = encode_utterance({"a", "c"}, v);
  auto y2 = encode_utterance({"b", "a", "d"}, v);

  auto loss = [&](bool grads) {
    Tape tape(grads);
    auto ll = m.log_likelihood_batch(tape, frames, {&y1, &y2});
    auto l = ops::scale(tape, ops::sum(tape, ll), -0.5);
    if (grads) tape.backward(l);
    return l->item();
  };
  // frame projection first, then the full parameter set
  auto report = finite_difference_check(loss, {&m.W_frame, &m.b_frame}, 1e-5,
                                        1e-4);
  CHECK(report.all_ok);
  auto full = finite_difference_check(loss, m.parameters(), 1e-5, 1e-4);
  CHECK(full.all_ok);
  CHECK(full.max_rel_err < 1e-4);
}

TEST_CASE("memorizing a single pair makes greedy decode reproduce it") {
  auto v = toy_vocab();
  Rng rng(5);
  NlgModel m(3, v.size(), 8, 16, rng);
  const std::vector<double> x = {1, 0, 1};
  auto y = encode_utterance({"b", "a", "c", "c"}, v);
  auto params = m.parameters();
  AdamConfig adam;
  adam.learning_rate = 1e-2;
  auto frames = Tensor::from(x, {1, 3});
  for (int it = 0; it < 150; ++it) {
    Tape tape;
    auto ll = m.log_likelihood_batch(tape, frames, {&y});
    auto loss = ops::scale(tape, ops::sum(tape, ll), -1.0);
    tape.backward(loss);
    adam_update(params, adam);
  }
  auto decoded = nlg_generate(m, x, DecodeStrategy::greedy);
  CHECK(decoded.tokens == y.tokens);
}

TEST_CASE("beam width 1 equals greedy and decoding always terminates") {
  auto v = toy_vocab();
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    Rng rng(seed);
    NlgModel m(3, v.size(), 6, 10, rng);
    const std::vector<double> x = {0, 1, 1};
    auto greedy = nlg_generate(m, x, DecodeStrategy::greedy, 1, 20);
    auto beam1 = nlg_generate(m, x, DecodeStrategy::beam, 1, 20);
    CHECK(greedy.tokens == beam1.tokens);

    auto beam4 = nlg_generate(m, x, DecodeStrategy::beam, 4, 20);
    CHECK(beam4.tokens.front() == Vocabulary::kBos);
    CHECK(beam4.tokens.back() == Vocabulary::kEos);
    CHECK(static_cast<int>(greedy.tokens.size()) - 2 <= 20);
  }
}

TEST_CASE("beam search finds a hypothesis at least as likely as greedy") {
  auto v = toy_vocab();
  Rng rng(77);
  NlgModel m(3, v.size(), 8, 12, rng);
  const std::vector<double> x = {1, 1, 0};
  auto greedy = nlg_generate(m, x, DecodeStrategy::greedy, 1, 16);
  auto beam = nlg_generate(m, x, DecodeStrategy::beam, 4, 16);
  if (greedy.tokens.back() == Vocabulary::kEos &&
      beam.tokens.back() == Vocabulary::kEos) {
    CHECK(nlg_conditional_log_likelihood(m, x, beam) >=
          nlg_conditional_log_likelihood(m, x, greedy) - 1e-9);
  }
}

TEST_CASE("zero-weight NLU scores D log(1/2) and predicts nothing at 0.5") {
  auto v = toy_vocab();
  Rng rng(6);
  NluModel m(5, v.size(), 6, 10, rng);
  zero_all(m.parameters());
  auto y = encode_utterance({"a", "d"}, v);
  const double lp = nlu_conditional_log_likelihood(m, y, {1, 0, 1, 0, 1});
  CHECK(lp == doctest::Approx(5.0 * std::log(0.5)).epsilon(1e-12));
  // sigma == 0.5 exactly is not strictly above the threshold
  auto labels = nlu_predict(m, y, 0.5);
  for (double l : labels) CHECK(l == 0.0);
}

TEST_CASE("bias-only NLU realizes the documented thresholding example") {
  auto v = toy_vocab();
  Rng rng(7);
  NluModel m(3, v.size(), 6, 10, rng);
  zero_all(m.parameters());
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  m.b_label.tensor->values = {logit(0.9), logit(0.1), logit(0.6)};
  auto y = encode_utterance({"c"}, v);
  auto labels = nlu_predict(m, y, 0.5);
  CHECK(labels == std::vector<double>{1, 0, 1});
}

TEST_CASE("NLU factorized likelihood normalizes over the label cube") {
  auto v = toy_vocab();
  Rng rng(8);
  const int D = 8;
  NluModel m(D, v.size(), 6, 10, rng);
  auto y = encode_utterance({"b", "c", "a"}, v);
  double total = 0.0;
  for (const auto& x : all_binary_vectors(D))
    total += std::exp(nlu_conditional_log_likelihood(m, y, x));
  CHECK(std::fabs(total - 1.0) < 1e-9);
}

TEST_CASE("threshold-0.5 prediction is the enumeration argmax") {
  auto v = toy_vocab();
  for (std::uint64_t seed = 30; seed < 36; ++seed) {
    Rng rng(seed);
    const int D = 8;
    NluModel m(D, v.size(), 6, 10, rng);
    auto y = encode_utterance({"d", "a", "b", "b"}, v);
    auto predicted = nlu_predict(m, y, 0.5);
    double best = -1e300;
    std::vector<double> argmax;
    for (const auto& x : all_binary_vectors(D)) {
      const double lp = nlu_conditional_log_likelihood(m, y, x);
      if (lp > best) {
        best = lp;
        argmax = x;
      }
    }
    CHECK(predicted == argmax);
  }
}

TEST_CASE("NLU gradients pass finite differences") {
  auto v = toy_vocab();
  Rng rng(9);
  NluModel m(4, v.size(), 4, 6, rng);
  auto y1 = encode_utterance({"a", "b"}, v);
  auto y2 = encode_utterance({"c"}, v);
  auto frames = Tensor::from({1, 0, 0, 1, 0, 1, 1, 0}, {2, 4});
  auto loss = [&](bool grads) {
    Tape tape(grads);
    auto ll = m.log_likelihood_batch(tape, {&y1, &y2}, frames);
    auto l = ops::scale(tape, ops::sum(tape, ll), -0.5);
    if (grads) tape.backward(l);
    return l->item();
  };
  auto report = finite_difference_check(loss, m.parameters(), 1e-5, 1e-4);
  CHECK(report.all_ok);
}
