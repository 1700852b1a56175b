#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "duality/gradcheck.hpp"
#include "duality/ops.hpp"
#include "duality/optim.hpp"
#include "duality/rng.hpp"
#include "duality/tensor.hpp"

using namespace duality;

namespace {

// Test-local finite-difference oracle: central differences on the forward
// values only, recomputed through a caller-supplied builder. Deliberately
// not the library's finite_difference_check.
double fd_vs_tape(const std::vector<TensorPtr>& leaves,
                  const std::function<TensorPtr(Tape&)>& build,
                  double step = 1e-5) {
  for (const auto& t : leaves) t->zero_grad();
  Tape tape;
  auto loss = build(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> tape_grads;
  for (const auto& t : leaves) tape_grads.push_back(t->grad);

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& t = leaves[li];
    for (std::size_t i = 0; i < t->values.size(); ++i) {
      const double orig = t->values[i];
      Tape eval(false);
      t->values[i] = orig + step;
      const double lp = build(eval)->item();
      t->values[i] = orig - step;
      const double lm = build(eval)->item();
      t->values[i] = orig;
      const double fd = (lp - lm) / (2.0 * step);
      const double tg = tape_grads[li][i];
      const double denom = std::max({std::fabs(fd), std::fabs(tg), 1e-6});
      worst = std::max(worst, std::fabs(fd - tg) / denom);
    }
    t->zero_grad();
  }
  return worst;
}

TensorPtr leaf(std::vector<double> v, std::vector<int> shape) {
  return Tensor::from(std::move(v), std::move(shape), true);
}

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.5,
                               double hi = 1.5) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("matmul identity and basis projection") {
  Tape tape(false);
  auto I = Tensor::from({1, 0, 0, 1}, {2, 2});
  auto A = Tensor::from({1, 2, 3, 4}, {2, 2});
  auto out = ops::matmul(tape, I, A);
  CHECK(out->values == std::vector<double>{1, 2, 3, 4});

  auto P = Tensor::from({1, 0, 0, 0}, {2, 2});
  auto v = Tensor::from({5, 7}, {2, 1});
  auto pv = ops::matmul(tape, P, v);
  CHECK(pv->values == std::vector<double>{5, 0});

  CHECK_THROWS_AS(ops::matmul(tape, Tensor::from({1, 2}, {1, 2}),
                              Tensor::from({1}, {1, 1})),
                  ShapeError);
}

TEST_CASE("matmul gradient matches central finite differences") {
  Rng rng(5);
  auto a = leaf(random_vec(6, rng), {2, 3});
  auto b = leaf(random_vec(12, rng), {3, 4});
  const double err = fd_vs_tape({a, b}, [&](Tape& t) {
    return ops::sum(t, ops::matmul(t, a, b));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("activation fixed points") {
  Tape tape(false);
  auto z = Tensor::from({0.0}, {1, 1});
  CHECK(ops::apply_activation(tape, ops::Activation::sigmoid, z)->values[0] ==
        doctest::Approx(0.5));
  auto u = Tensor::from({0, 0, 0}, {1, 3});
  auto sm = ops::apply_activation(tape, ops::Activation::softmax, u);
  for (double p : sm->values) CHECK(p == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(ops::apply_activation(tape, ops::Activation::softmax,
                                        Tensor::from({0, 0}, {1, 2}), 0),
                  ShapeError);
}

TEST_CASE("tanh gradient matches finite differences") {
  Rng rng(9);
  auto x = leaf(random_vec(8, rng), {2, 4});
  const double err = fd_vs_tape({x}, [&](Tape& t) {
    return ops::sum(t, ops::tanh_act(t, x));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("masked_linear mask identity and severed cases") {
  Rng rng(13);
  auto x = leaf(random_vec(6, rng), {2, 3});
  auto W = leaf(random_vec(12, rng), {4, 3});
  auto b = leaf(random_vec(4, rng), {4});
  auto ones = Tensor::from(std::vector<double>(12, 1.0), {4, 3});
  auto zeros = Tensor::from(std::vector<double>(12, 0.0), {4, 3});

  Tape tape(false);
  auto full = ops::masked_linear(tape, x, W, ones, b);
  auto plain = ops::linear(tape, x, W, b);
  for (std::size_t i = 0; i < full->values.size(); ++i)
    CHECK(full->values[i] == doctest::Approx(plain->values[i]).epsilon(1e-14));

  auto severed = ops::masked_linear(tape, x, W, zeros, b);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(severed->values[r * 4 + c] == doctest::Approx(b->values[c]));

  auto bad = Tensor::from({0.5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {4, 3});
  CHECK_THROWS_AS(ops::masked_linear(tape, x, W, bad, b), ValidationError);
}

TEST_CASE("masked entries of the weight gradient are exactly zero") {
  Rng rng(17);
  auto x = leaf(random_vec(9, rng), {3, 3});
  auto W = leaf(random_vec(12, rng), {4, 3});
  auto b = leaf(random_vec(4, rng), {4});
  std::vector<double> mv(12);
  for (auto& m : mv) m = rng.uniform() < 0.5 ? 0.0 : 1.0;
  auto M = Tensor::from(mv, {4, 3});

  Tape tape;
  auto loss = ops::sum(tape, ops::square(tape, ops::masked_linear(tape, x, W, M, b)));
  tape.backward(loss);
  for (std::size_t i = 0; i < mv.size(); ++i)
    if (mv[i] == 0.0) CHECK(W->grad[i] == 0.0);

  const double err = fd_vs_tape({x, W, b}, [&](Tape& t) {
    return ops::sum(t, ops::square(t, ops::masked_linear(t, x, W, M, b)));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("backward on sum gives all-ones, on half-norm-squared gives x") {
  auto x = leaf({1.5, -2.0, 0.25, 3.0}, {4});
  {
    Tape tape;
    auto loss = ops::sum(tape, x);
    tape.backward(loss);
    for (double g : x->grad) CHECK(g == 1.0);
    CHECK(tape.size() == 0);  // cleared for reuse
    x->zero_grad();
  }
  {
    Tape tape;
    auto loss = ops::scale(tape, ops::sum(tape, ops::square(tape, x)), 0.5);
    tape.backward(loss);
    for (std::size_t i = 0; i < x->values.size(); ++i)
      CHECK(x->grad[i] == doctest::Approx(x->values[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward rejects non-scalar and foreign losses") {
  auto x = leaf({1, 2}, {2});
  Tape tape;
  auto y = ops::square(tape, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
  Tape other;
  auto z = ops::sum(other, x);
  CHECK_THROWS_AS(tape.backward(z), ContractError);
}

TEST_CASE("gradient accumulates when a tensor is used twice") {
  auto x = leaf({2.0}, {1});
  Tape tape;
  auto loss = ops::sum(tape, ops::mul(tape, x, x));  // x^2
  tape.backward(loss);
  CHECK(x->grad[0] == doctest::Approx(4.0));
}

TEST_CASE("adam zero gradient is the identity on values") {
  Rng rng(19);
  auto p = make_uniform_param("w", {3, 2}, -1, 1, rng);
  const auto before = p.tensor->values;
  p.tensor->zero_grad();
  AdamConfig cfg;
  adam_update({&p}, cfg);
  CHECK(p.tensor->values == before);
  CHECK(p.step == 1);
}

TEST_CASE("adam first step scales equal-magnitude gradients equally") {
  Rng rng(21);
  auto p = make_uniform_param("w", {4}, -1, 1, rng);
  const auto before = p.tensor->values;
  p.tensor->grad = {0.5, -0.5, 0.5, -0.5};
  AdamConfig cfg;
  cfg.clip_norm = 0.0;
  adam_update({&p}, cfg);
  const double mag0 = std::fabs(p.tensor->values[0] - before[0]);
  for (int i = 0; i < 4; ++i) {
    const double mag = std::fabs(p.tensor->values[i] - before[i]);
    CHECK(mag == doctest::Approx(mag0).epsilon(1e-12));
    // update direction opposes the gradient sign
    const double dir = p.tensor->values[i] - before[i];
    CHECK(dir * p.tensor->grad[i] == 0.0);  // grads zeroed after the step
  }
}

TEST_CASE("adam converges on a quadratic bowl") {
  Rng rng(23);
  auto p = make_uniform_param("w", {5}, -1, 1, rng);
  const std::vector<double> target = {0.3, -0.7, 1.1, 0.0, -0.2};
  AdamConfig cfg;
  cfg.learning_rate = 5e-2;
  cfg.clip_norm = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (int i = 0; i < 5; ++i)
      p.tensor->grad[i] = 2.0 * (p.tensor->values[i] - target[i]);
    adam_update({&p}, cfg);
  }
  for (int i = 0; i < 5; ++i)
    CHECK(std::fabs(p.tensor->values[i] - target[i]) < 1e-3);
}

TEST_CASE("adam reports missing gradients by name") {
  Rng rng(27);
  auto p = make_uniform_param("theta", {2}, -1, 1, rng);
  p.tensor->grad.clear();
  AdamConfig cfg;
  CHECK_THROWS_WITH_AS(adam_update({&p}, cfg),
                       doctest::Contains("theta"), ContractError);
}

TEST_CASE("finite_difference_check: linear loss has zero error") {
  Rng rng(29);
  auto p = make_uniform_param("w", {6}, -1, 1, rng);
  auto loss = [&](bool grads) {
    Tape tape(grads);
    auto l = ops::sum(tape, ops::scale(tape, p.tensor, 3.0));
    if (grads) tape.backward(l);
    return l->item();
  };
  auto report = finite_difference_check(loss, {&p}, 1e-5, 1e-4);
  CHECK(report.all_ok);
  CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("finite_difference_check flags a corrupted backward rule") {
  // Op with a wrong backward rule, defined only for this mutation test.
  auto bad_double = [](Tape& tape, const TensorPtr& x) {
    auto out = Tensor::zeros(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->values.size(); ++i)
      out->values[i] = 2.0 * x->values[i];
    tape.record(out, {x}, [x, out] {
      if (!x->requires_grad) return;
      for (std::size_t i = 0; i < x->grad.size(); ++i)
        x->grad[i] += 3.0 * out->grad[i];  // should be 2.0
    });
    return out;
  };
  Rng rng(31);
  auto p = make_uniform_param("w", {4}, -1, 1, rng);
  auto loss = [&](bool grads) {
    Tape tape(grads);
    auto l = ops::sum(tape, bad_double(tape, p.tensor));
    if (grads) tape.backward(l);
    return l->item();
  };
  auto report = finite_difference_check(loss, {&p}, 1e-5, 1e-4);
  CHECK_FALSE(report.all_ok);
}

TEST_CASE("property: every op's gradient passes finite differences over 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 7919 + 1);
    const int r = 2 + static_cast<int>(rng.uniform_int(2));
    const int c = 2 + static_cast<int>(rng.uniform_int(3));
    auto x = leaf(random_vec(static_cast<std::size_t>(r) * c, rng), {r, c});
    auto y = leaf(random_vec(static_cast<std::size_t>(r) * c, rng), {r, c});
    auto W = leaf(random_vec(static_cast<std::size_t>(3) * c, rng), {3, c});
    auto b = leaf(random_vec(3, rng), {3});
    std::vector<double> mv(static_cast<std::size_t>(3) * c);
    for (auto& m : mv) m = rng.uniform() < 0.4 ? 0.0 : 1.0;
    auto M = Tensor::from(mv, {3, c});
    std::vector<double> tv(static_cast<std::size_t>(r) * c);
    for (auto& t : tv) t = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto targets = Tensor::from(tv, {r, c});
    std::vector<int> picks(r);
    for (auto& pk : picks) pk = static_cast<int>(rng.uniform_int(c));
    std::vector<double> rowmask(r);
    for (auto& m : rowmask) m = rng.uniform() < 0.5 ? 0.0 : 1.0;
    std::vector<int> ids(4);
    for (auto& id : ids) id = static_cast<int>(rng.uniform_int(r));
    auto Z = Tensor::from(random_vec(static_cast<std::size_t>(c) * c, rng),
                          {c, c});

    using Build = std::function<TensorPtr(Tape&)>;
    const std::vector<Build> builders = {
        [&](Tape& t) { return ops::sum(t, ops::tanh_act(t, ops::matmul(t, x, Z))); },
        [&](Tape& t) { return ops::sum(t, ops::linear(t, x, W, b)); },
        [&](Tape& t) { return ops::sum(t, ops::square(t, ops::masked_linear(t, x, W, M, b))); },
        [&](Tape& t) { return ops::sum(t, ops::mul(t, ops::add(t, x, y), ops::sub(t, x, y))); },
        [&](Tape& t) { return ops::mean(t, ops::sigmoid(t, x)); },
        [&](Tape& t) { return ops::sum(t, ops::square(t, ops::softmax_rows(t, x))); },
        [&](Tape& t) { return ops::sum(t, ops::mul(t, ops::log_softmax_rows(t, x), y)); },
        [&](Tape& t) { return ops::sum(t, ops::pick_per_row(t, ops::log_softmax_rows(t, x), picks)); },
        [&](Tape& t) { return ops::sum(t, ops::lerp_rows(t, ops::tanh_act(t, x), y, rowmask)); },
        [&](Tape& t) { return ops::sum(t, ops::embedding_lookup(t, x, ids)); },
        [&](Tape& t) { return ops::sum(t, ops::bernoulli_loglik(t, ops::scale(t, x, 2.0), targets)); },
    };
    // One builder per seed keeps the suite fast while cycling through all ops.
    const auto& build = builders[seed % builders.size()];
    const double err = fd_vs_tape({x, y, W, b}, build);
    CAPTURE(seed);
    CHECK(err < 1e-4);
  }
}
