#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "duality/dual_trainer.hpp"
#include "duality/text_data.hpp"

namespace duality {

// Small closed-form task: a correlated Bernoulli chain over D labels with an
// injective token template, so every distribution of interest is exactly
// enumerable.
struct SyntheticTask {
  int D = 0;
  double p_first = 0.5;
  std::vector<std::array<double, 2>> p_cond;  // p(x_d = 1 | x_{d-1} = 0/1)
  Vocabulary vocab;

  static SyntheticTask uniform(int D);

  double log_prob(const std::vector<double>& x) const;  // exact chain product
  Utterance realize(const std::vector<double>& x) const;  // injective
  std::vector<double> sample_frame(Rng& rng) const;
  std::vector<double> frame_from_mask(int mask) const;
  int mask_from_frame(const std::vector<double>& x) const;
};

// Chain parameters drawn from the seed, in [0.3, 0.7]. 2 <= D <= 10.
SyntheticTask synthetic_task_generate(int D, std::uint64_t seed);

// Deterministic dataset: each support point appears round(N * P(x)) times.
DualDataset synthetic_dataset(const SyntheticTask& task, int target_size);

// Exact log-marginal tables by enumeration; log P(y) of a realized template
// equals log P(x) of its unique preimage.
struct JointOracle {
  std::vector<double> log_px;  // indexed by frame mask
  double total_probability = 0.0;
};

JointOracle brute_force_joint_oracle(const SyntheticTask& task);

// Mean over the exact joint of the squared duality gap of the two trained
// conditionals, using the exact marginals.
double oracle_mean_duality_residual(const SyntheticTask& task,
                                    const JointOracle& oracle,
                                    const NlgModel& nlg, const NluModel& nlu);

}  // namespace duality
