#include "duality/made.hpp"

#include <algorithm>
#include <cmath>

namespace duality {

namespace {

void check_binary(const std::vector<double>& x) {
  for (double v : x)
    if (v != 0.0 && v != 1.0)
      throw ValidationError("MADE input must be a binary vector");
}

TensorPtr build_mask(const std::vector<int>& out_deg,
                     const std::vector<int>& in_deg, bool strict) {
  const int rows = static_cast<int>(out_deg.size());
  const int cols = static_cast<int>(in_deg.size());
  auto m = Tensor::zeros({rows, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const bool on = strict ? out_deg[static_cast<std::size_t>(r)] >
                                   in_deg[static_cast<std::size_t>(c)]
                             : out_deg[static_cast<std::size_t>(r)] >=
                                   in_deg[static_cast<std::size_t>(c)];
      m->values[static_cast<std::size_t>(r) * cols + c] = on ? 1.0 : 0.0;
    }
  return m;
}

}  // namespace

MaskedLayerSet masks_from_degrees(
    const std::vector<int>& ordering,
    const std::vector<std::vector<int>>& hidden) {
  MaskedLayerSet set;
  set.ordering = ordering;
  set.hidden_degrees = hidden;
  const std::vector<int>* prev = &set.ordering;
  for (const auto& layer : set.hidden_degrees) {
    set.masks.push_back(build_mask(layer, *prev, /*strict=*/false));
    prev = &layer;
  }
  set.masks.push_back(build_mask(set.ordering, *prev, /*strict=*/true));
  return set;
}

MaskedLayerSet sample_ordering_and_masks(int D,
                                         const std::vector<int>& hidden_widths,
                                         std::uint64_t seed) {
  if (D < 2)
    throw ValidationError("MADE needs D >= 2 for a non-trivial decomposition");
  for (int w : hidden_widths)
    if (w < 1) throw ValidationError("MADE hidden widths must be >= 1");
  Rng rng(seed);
  std::vector<int> ordering(static_cast<std::size_t>(D));
  auto perm = rng.permutation(D);
  for (int i = 0; i < D; ++i)
    ordering[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(i)] + 1;
  std::vector<std::vector<int>> hidden;
  for (int w : hidden_widths) {
    std::vector<int> deg(static_cast<std::size_t>(w));
    for (auto& d : deg)
      d = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(D - 1)));
    hidden.push_back(std::move(deg));
  }
  return masks_from_degrees(ordering, hidden);
}

MadeNetwork::MadeNetwork(int D_, std::vector<int> hidden, MaskedLayerSet set,
                         Rng& rng, const std::string& prefix)
    : D(D_), hidden_widths(std::move(hidden)), mask_set(std::move(set)) {
  std::vector<int> dims;
  dims.push_back(D);
  for (int w : hidden_widths) dims.push_back(w);
  dims.push_back(D);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    weights.push_back(make_uniform_param(
        prefix + ".W" + std::to_string(l), {fan_out, fan_in}, -bound, bound,
        rng));
    biases.push_back(make_uniform_param(prefix + ".b" + std::to_string(l),
                                        {fan_out}, -bound, bound, rng));
  }
  if (mask_set.masks.size() != weights.size())
    throw ShapeError("mask count does not match layer count");
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (mask_set.masks[l]->shape != weights[l].tensor->shape)
      throw ShapeError("mask shape does not match layer " + std::to_string(l));
}

std::vector<Parameter*> MadeNetwork::parameters() {
  std::vector<Parameter*> ps;
  for (auto& w : weights) ps.push_back(&w);
  for (auto& b : biases) ps.push_back(&b);
  return ps;
}

TensorPtr MadeNetwork::logits_batch(Tape& tape, const TensorPtr& x) const {
  TensorPtr h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = ops::masked_linear(tape, h, weights[l].tensor, mask_set.masks[l],
                           biases[l].tensor);
    if (l + 1 < weights.size()) h = ops::tanh_act(tape, h);
  }
  return h;
}

std::vector<double> made_forward(const MadeNetwork& net,
                                 const std::vector<double>& x) {
  check_binary(x);
  if (static_cast<int>(x.size()) != net.D)
    throw ShapeError("MADE input length " + std::to_string(x.size()) +
                     " vs D=" + std::to_string(net.D));
  Tape tape(false);
  auto xt = Tensor::from(x, {1, net.D});
  auto logits = net.logits_batch(tape, xt);
  auto probs = ops::sigmoid(tape, logits);
  return probs->values;
}

namespace {

inline double clamped_log_bernoulli(double logit, double target) {
  const double ll =
      target == 1.0 ? -ops::softplus(-logit) : -ops::softplus(logit);
  return std::max(ll, ops::kLogProbFloor);
}

}  // namespace

double frame_log_probability(const MadeNetwork& net,
                             const std::vector<double>& x) {
  check_binary(x);
  Tape tape(false);
  auto xt = Tensor::from(x, {1, net.D});
  auto logits = net.logits_batch(tape, xt);
  double ll = 0.0;
  for (int d = 0; d < net.D; ++d)
    ll += clamped_log_bernoulli(logits->values[static_cast<std::size_t>(d)],
                                x[static_cast<std::size_t>(d)]);
  return ll;
}

TensorPtr frame_log_likelihood_batch(Tape& tape, const MadeNetwork& net,
                                     const TensorPtr& x_batch) {
  auto logits = net.logits_batch(tape, x_batch);
  return ops::bernoulli_loglik(tape, logits, x_batch);
}

MadeEnsemble MadeEnsemble::create(int D, int ensemble_size,
                                  const std::vector<int>& hidden_widths,
                                  std::uint64_t seed) {
  if (ensemble_size < 1)
    throw ValidationError("ensemble size must be at least 1");
  MadeEnsemble ens;
  ens.D = D;
  Rng root(seed);
  for (int k = 0; k < ensemble_size; ++k) {
    auto mask_rng = root.fork(2 * static_cast<std::uint64_t>(k));
    auto init_rng = root.fork(2 * static_cast<std::uint64_t>(k) + 1);
    auto masks = sample_ordering_and_masks(D, hidden_widths,
                                           mask_rng.next_u64());
    ens.members.emplace_back(D, hidden_widths, std::move(masks), init_rng,
                             "made" + std::to_string(k));
  }
  return ens;
}

double ensemble_log_probability(const MadeEnsemble& ens,
                                const std::vector<double>& x) {
  if (ens.members.empty()) throw ContractError("empty MADE ensemble");
  std::vector<double> lps;
  lps.reserve(ens.members.size());
  for (const auto& m : ens.members)
    lps.push_back(frame_log_probability(m, x));
  const double mx = *std::max_element(lps.begin(), lps.end());
  double acc = 0.0;
  for (double lp : lps) acc += std::exp(lp - mx);
  return mx + std::log(acc) - std::log(static_cast<double>(lps.size()));
}

MadeTrainStats train_made(MadeEnsemble& ens,
                          const std::vector<std::vector<double>>& frames,
                          int epochs, int batch_size, std::uint64_t seed,
                          const AdamConfig& adam) {
  if (frames.empty())
    throw ValidationError("MADE training requires at least one frame");
  for (const auto& f : frames) check_binary(f);
  MadeTrainStats stats;
  stats.member_epoch_loss.resize(ens.members.size());

  for (std::size_t k = 0; k < ens.members.size(); ++k) {
    auto& member = ens.members[k];
    auto params = member.parameters();
    Rng order_rng(Rng(seed).fork(1000 + k).next_u64());
    std::vector<int> order(frames.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<int>(i);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      order_rng.shuffle(order);
      double loss_sum = 0.0;
      std::int64_t seen = 0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        const int b = static_cast<int>(stop - start);
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(b) * ens.D);
        for (std::size_t i = start; i < stop; ++i)
          for (double v : frames[static_cast<std::size_t>(order[i])])
            flat.push_back(v);
        auto x = Tensor::from(std::move(flat), {b, ens.D});
        Tape tape;
        auto ll = frame_log_likelihood_batch(tape, member, x);
        auto loss =
            ops::scale(tape, ops::sum(tape, ll), -1.0 / static_cast<double>(b));
        loss_sum += loss->item() * b;
        seen += b;
        tape.backward(loss);
        adam_update(params, adam);
      }
      stats.member_epoch_loss[k].push_back(loss_sum /
                                           static_cast<double>(seen));
    }
  }
  return stats;
}

double IndependentMarginal::score(const std::vector<double>& x) const {
  if (x.size() != p.size())
    throw ShapeError("independent marginal: dimension mismatch");
  check_binary(x);
  double ll = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d)
    ll += x[d] == 1.0 ? std::log(p[d]) : std::log(1.0 - p[d]);
  return ll;
}

IndependentMarginal independent_marginal_estimator(
    const std::vector<std::vector<double>>& frames) {
  if (frames.empty())
    throw ValidationError("independent marginal requires frames");
  const std::size_t D = frames[0].size();
  std::vector<double> counts(D, 0.0);
  for (const auto& f : frames) {
    check_binary(f);
    if (f.size() != D)
      throw ShapeError("independent marginal: ragged frame list");
    for (std::size_t d = 0; d < D; ++d) counts[d] += f[d];
  }
  IndependentMarginal im;
  im.p.resize(D);
  const double n = static_cast<double>(frames.size());
  for (std::size_t d = 0; d < D; ++d) im.p[d] = (counts[d] + 1.0) / (n + 2.0);
  return im;
}

}  // namespace duality
