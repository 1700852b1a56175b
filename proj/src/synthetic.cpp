#include "duality/synthetic.hpp"

#include <cmath>

namespace duality {

namespace {

Vocabulary task_vocab(int D) {
  std::vector<std::string> tokens;
  for (int d = 0; d < D; ++d) tokens.push_back("slot" + std::to_string(d));
  tokens.push_back("on");
  tokens.push_back("off");
  return Vocabulary::from_tokens(tokens);
}

void check_task_frame(const std::vector<double>& x, int D) {
  if (static_cast<int>(x.size()) != D)
    throw ContractError("synthetic frame has wrong dimension");
  for (double v : x)
    if (v != 0.0 && v != 1.0)
      throw ValidationError("synthetic frame must be binary");
}

}  // namespace

SyntheticTask SyntheticTask::uniform(int D) {
  SyntheticTask t;
  t.D = D;
  t.p_first = 0.5;
  t.p_cond.assign(static_cast<std::size_t>(D - 1), {0.5, 0.5});
  t.vocab = task_vocab(D);
  return t;
}

double SyntheticTask::log_prob(const std::vector<double>& x) const {
  check_task_frame(x, D);
  double lp = std::log(x[0] == 1.0 ? p_first : 1.0 - p_first);
  for (int d = 1; d < D; ++d) {
    const double p1 =
        p_cond[static_cast<std::size_t>(d - 1)]
              [x[static_cast<std::size_t>(d - 1)] == 1.0 ? 1 : 0];
    lp += std::log(x[static_cast<std::size_t>(d)] == 1.0 ? p1 : 1.0 - p1);
  }
  return lp;
}

Utterance SyntheticTask::realize(const std::vector<double>& x) const {
  check_task_frame(x, D);
  std::vector<std::string> toks;
  for (int d = 0; d < D; ++d) {
    toks.push_back("slot" + std::to_string(d));
    toks.push_back(x[static_cast<std::size_t>(d)] == 1.0 ? "on" : "off");
  }
  return encode_utterance(toks, vocab);
}

std::vector<double> SyntheticTask::sample_frame(Rng& rng) const {
  std::vector<double> x(static_cast<std::size_t>(D), 0.0);
  x[0] = rng.uniform() < p_first ? 1.0 : 0.0;
  for (int d = 1; d < D; ++d) {
    const double p1 = p_cond[static_cast<std::size_t>(d - 1)]
                            [x[static_cast<std::size_t>(d - 1)] == 1.0 ? 1 : 0];
    x[static_cast<std::size_t>(d)] = rng.uniform() < p1 ? 1.0 : 0.0;
  }
  return x;
}

std::vector<double> SyntheticTask::frame_from_mask(int mask) const {
  std::vector<double> x(static_cast<std::size_t>(D), 0.0);
  for (int d = 0; d < D; ++d)
    x[static_cast<std::size_t>(d)] = (mask >> d) & 1 ? 1.0 : 0.0;
  return x;
}

int SyntheticTask::mask_from_frame(const std::vector<double>& x) const {
  check_task_frame(x, D);
  int mask = 0;
  for (int d = 0; d < D; ++d)
    if (x[static_cast<std::size_t>(d)] == 1.0) mask |= 1 << d;
  return mask;
}

SyntheticTask synthetic_task_generate(int D, std::uint64_t seed) {
  if (D < 2 || D > 10)
    throw ValidationError("synthetic task supports 2 <= D <= 10");
  Rng rng(seed);
  SyntheticTask t;
  t.D = D;
  t.p_first = rng.uniform(0.3, 0.7);
  for (int d = 1; d < D; ++d)
    t.p_cond.push_back({rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)});
  t.vocab = task_vocab(D);
  return t;
}

DualDataset synthetic_dataset(const SyntheticTask& task, int target_size) {
  DualDataset data;
  for (int mask = 0; mask < (1 << task.D); ++mask) {
    auto x = task.frame_from_mask(mask);
    const double p = std::exp(task.log_prob(x));
    const auto copies = static_cast<long long>(
        std::llround(p * static_cast<double>(target_size)));
    auto y = task.realize(x);
    for (long long i = 0; i < copies; ++i) data.push_back({x, y});
  }
  if (data.empty())
    throw ValidationError("synthetic dataset target size too small");
  return data;
}

JointOracle brute_force_joint_oracle(const SyntheticTask& task) {
  JointOracle oracle;
  oracle.log_px.resize(static_cast<std::size_t>(1) << task.D);
  for (int mask = 0; mask < (1 << task.D); ++mask) {
    const double lp = task.log_prob(task.frame_from_mask(mask));
    oracle.log_px[static_cast<std::size_t>(mask)] = lp;
    oracle.total_probability += std::exp(lp);
  }
  return oracle;
}

double oracle_mean_duality_residual(const SyntheticTask& task,
                                    const JointOracle& oracle,
                                    const NlgModel& nlg, const NluModel& nlu) {
  double acc = 0.0;
  for (int mask = 0; mask < (1 << task.D); ++mask) {
    auto x = task.frame_from_mask(mask);
    auto y = task.realize(x);
    const double log_px = oracle.log_px[static_cast<std::size_t>(mask)];
    const double log_py = log_px;  // injective template pushforward
    auto rec = duality_residual(log_px,
                                nlg_conditional_log_likelihood(nlg, x, y),
                                log_py,
                                nlu_conditional_log_likelihood(nlu, y, x));
    acc += std::exp(log_px) * rec.residual;
  }
  return acc;
}

}  // namespace duality
