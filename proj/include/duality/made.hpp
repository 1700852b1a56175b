#pragma once

#include <cstdint>
#include <vector>

#include "duality/ops.hpp"
#include "duality/optim.hpp"

namespace duality {

// One autoregressive decomposition: a degree per input/output unit (shared
// permutation of 1..D), a degree per hidden unit, and the binary masks the
// degree rule induces. Hidden mask entries connect k' <- k when
// m(k') >= m(k); output mask entries require strict inequality, so the unit
// of degree d sees only inputs of degree < d.
struct MaskedLayerSet {
  std::vector<int> ordering;                     // length D, perm of 1..D
  std::vector<std::vector<int>> hidden_degrees;  // per hidden layer
  std::vector<TensorPtr> masks;                  // hidden layers + output
};

MaskedLayerSet sample_ordering_and_masks(int D,
                                         const std::vector<int>& hidden_widths,
                                         std::uint64_t seed);

// Build the mask set from already-chosen degrees (used by checkpoint load
// and the worked unit tests).
MaskedLayerSet masks_from_degrees(const std::vector<int>& ordering,
                                  const std::vector<std::vector<int>>& hidden);

// Masked autoencoder with sigmoid output units; each output d is the
// Bernoulli probability p(x_d = 1 | S_d).
struct MadeNetwork {
  int D = 0;
  std::vector<int> hidden_widths;
  MaskedLayerSet mask_set;
  std::vector<Parameter> weights;  // one [out x in] per layer
  std::vector<Parameter> biases;

  MadeNetwork() = default;
  MadeNetwork(int D, std::vector<int> hidden_widths, MaskedLayerSet masks,
              Rng& rng, const std::string& name_prefix = "made");
  std::vector<Parameter*> parameters();

  // Pre-sigmoid outputs for a batch of binary rows, shape [batch x D].
  TensorPtr logits_batch(Tape& tape, const TensorPtr& x) const;
};

// Bernoulli probabilities for one binary vector; errors on non-binary input.
std::vector<double> made_forward(const MadeNetwork& net,
                                 const std::vector<double>& x);

// log p(x) = sum_d [x_d log s_d + (1-x_d) log(1-s_d)], each log floored at
// log(1e-12).
double frame_log_probability(const MadeNetwork& net,
                             const std::vector<double>& x);

// Differentiable batch version, shape [batch].
TensorPtr frame_log_likelihood_batch(Tape& tape, const MadeNetwork& net,
                                     const TensorPtr& x_batch);

// Fixed-size ensemble over independently sampled decompositions.
struct MadeEnsemble {
  int D = 0;
  std::vector<MadeNetwork> members;

  static MadeEnsemble create(int D, int ensemble_size,
                             const std::vector<int>& hidden_widths,
                             std::uint64_t seed);
};

// log of the arithmetic mean of member probabilities:
// logsumexp_k log p_k(x) - log K.
double ensemble_log_probability(const MadeEnsemble& ens,
                                const std::vector<double>& x);

struct MadeTrainStats {
  std::vector<std::vector<double>> member_epoch_loss;  // [member][epoch]
};

// Maximum likelihood per member on identical data; members differ only in
// their sampled masks and init streams.
MadeTrainStats train_made(MadeEnsemble& ens,
                          const std::vector<std::vector<double>>& frames,
                          int epochs, int batch_size, std::uint64_t seed,
                          const AdamConfig& adam = {});

// Ablation scorer: per-label empirical Bernoulli with add-1 smoothing over
// N+2; factorized, hence exactly normalized.
struct IndependentMarginal {
  std::vector<double> p;
  double score(const std::vector<double>& x) const;
};

IndependentMarginal independent_marginal_estimator(
    const std::vector<std::vector<double>>& frames);

}  // namespace duality
