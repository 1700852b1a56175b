#include "duality/dual_trainer.hpp"

#include <chrono>
#include <cmath>

namespace duality {

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

TensorPtr batch_frames(const std::vector<const DualExample*>& batch, int D) {
  std::vector<double> flat;
  flat.reserve(batch.size() * static_cast<std::size_t>(D));
  for (const auto* ex : batch) {
    if (static_cast<int>(ex->x.size()) != D)
      throw ContractError("frame dimension mismatch in dual batch");
    for (double v : ex->x) flat.push_back(v);
  }
  return Tensor::from(std::move(flat), {static_cast<int>(batch.size()), D});
}

std::vector<const Utterance*> batch_utts(
    const std::vector<const DualExample*>& batch) {
  std::vector<const Utterance*> utts;
  utts.reserve(batch.size());
  for (const auto* ex : batch) utts.push_back(&ex->y);
  return utts;
}

struct StepOutcome {
  StepStats stats;
};

// Core coupled step. Residual constants c[i] = log px_i - log py_i are
// precomputed by the caller; an empty span means "no residual term"
// (baseline reduction path never builds the coupling graph differently,
// lambda = 0 simply keeps the objectives at l1 and l2).
StepStats coupled_step(const std::vector<const DualExample*>& batch,
                       NlgModel& nlg, NluModel& nlu,
                       const std::vector<double>& c,
                       const TrainingConfig& cfg) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw ContractError("dsl_step requires a non-empty batch");
  auto frames = batch_frames(batch, nlg.label_dim);
  auto utts = batch_utts(batch);

  Tape tape;
  auto ll_nlg = nlg.log_likelihood_batch(tape, frames, utts);
  auto l1 = ops::scale(tape, ops::sum(tape, ll_nlg), -1.0 / B);
  auto ll_nlu = nlu.log_likelihood_batch(tape, utts, frames);
  auto l2 = ops::scale(tape, ops::sum(tape, ll_nlu), -1.0 / B);

  TensorPtr mean_res;
  if (!c.empty()) {
    auto c_t = Tensor::from(c, {B});
    auto gap = ops::add(tape, c_t, ops::sub(tape, ll_nlg, ll_nlu));
    auto res = ops::square(tape, gap);
    mean_res = ops::scale(tape, ops::sum(tape, res), 1.0 / B);
  }

  auto nlg_params = nlg.parameters();
  auto nlu_params = nlu.parameters();

  auto obj_xy = (mean_res && cfg.lambda_xy != 0.0)
                    ? ops::add(tape, l1, ops::scale(tape, mean_res,
                                                    cfg.lambda_xy))
                    : l1;
  tape.backward_retain(obj_xy);
  adam_update(nlg_params, cfg.adam);
  tape.zero_grads();

  auto obj_yx = (mean_res && cfg.lambda_yx != 0.0)
                    ? ops::add(tape, l2, ops::scale(tape, mean_res,
                                                    cfg.lambda_yx))
                    : l2;
  tape.backward_retain(obj_yx);
  adam_update(nlu_params, cfg.adam);
  // The second pass also pushed (unused) gradients through the generator
  // subgraph; drop them so the next step starts clean.
  tape.zero_grads();
  tape.clear();

  StepStats stats;
  stats.nlg_loss = l1->item();
  stats.nlu_loss = l2->item();
  stats.mean_residual = mean_res ? mean_res->item() : 0.0;
  return stats;
}

std::vector<double> residual_constants(
    const std::vector<const DualExample*>& batch,
    const MarginalScorers& marginals) {
  std::vector<double> c;
  c.reserve(batch.size());
  for (const auto* ex : batch) {
    const double lpx = marginals.log_px(ex->x);
    const double lpy = marginals.log_py(ex->y);
    if (!std::isfinite(lpx) || !std::isfinite(lpy))
      throw ContractError("marginal scorer returned a non-finite value");
    c.push_back(lpx - lpy);
  }
  return c;
}

// Shared epoch/batch driver so baseline and dual runs consume randomness
// identically under the same seed.
TrainCurves run_epochs(
    const DualDataset& data, const TrainingConfig& cfg, const EpochSink& sink,
    const std::function<StepStats(const std::vector<const DualExample*>&)>&
        step,
    bool with_residual) {
  if (data.empty()) throw ValidationError("training requires a dataset");
  if (cfg.batch_size < 1) throw ValidationError("batch size must be >= 1");
  Rng rng(cfg.seed);
  std::vector<int> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<int>(i);

  TrainCurves curves;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double t0 = now_s();
    rng.shuffle(order);
    double nlg_sum = 0.0, nlu_sum = 0.0, res_sum = 0.0;
    std::int64_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const DualExample*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&data[static_cast<std::size_t>(order[i])]);
      auto stats = step(batch);
      nlg_sum += stats.nlg_loss;
      nlu_sum += stats.nlu_loss;
      res_sum += stats.mean_residual;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.nlg_loss = nlg_sum / static_cast<double>(batches);
    rec.nlu_loss = nlu_sum / static_cast<double>(batches);
    if (with_residual)
      rec.duality_residual_mean = res_sum / static_cast<double>(batches);
    rec.wallclock_s = now_s() - t0;
    if (sink) sink(rec);
    curves.epochs.push_back(rec);
  }
  return curves;
}

}  // namespace

DualityRecord duality_residual(double log_px, double log_y_given_x,
                               double log_py, double log_x_given_y) {
  for (double v : {log_px, log_y_given_x, log_py, log_x_given_y})
    if (!std::isfinite(v))
      throw ContractError("duality residual requires finite log terms");
  DualityRecord rec;
  rec.log_px = log_px;
  rec.log_y_given_x = log_y_given_x;
  rec.log_py = log_py;
  rec.log_x_given_y = log_x_given_y;
  const double gap = log_px + log_y_given_x - log_py - log_x_given_y;
  rec.residual = gap * gap;
  return rec;
}

MarginalScorers scorers_from_models(const MadeEnsemble& made,
                                    const LanguageModel& lm) {
  MarginalScorers s;
  s.log_px = [&made](const std::vector<double>& x) {
    return ensemble_log_probability(made, x);
  };
  s.log_py = [&lm](const Utterance& y) {
    return sentence_log_probability(lm, y);
  };
  s.log_py_bulk = [&lm](const std::vector<const Utterance*>& ys) {
    return sentence_log_probability_batch(lm, ys);
  };
  return s;
}

MarginalScorers scorers_from_models(const IndependentMarginal& independent,
                                    const LanguageModel& lm) {
  MarginalScorers s;
  s.log_px = [&independent](const std::vector<double>& x) {
    return independent.score(x);
  };
  s.log_py = [&lm](const Utterance& y) {
    return sentence_log_probability(lm, y);
  };
  s.log_py_bulk = [&lm](const std::vector<const Utterance*>& ys) {
    return sentence_log_probability_batch(lm, ys);
  };
  return s;
}

StepStats dsl_step(const std::vector<const DualExample*>& batch, NlgModel& nlg,
                   NluModel& nlu, const MarginalScorers& marginals,
                   const TrainingConfig& cfg) {
  if (cfg.scheme == Scheme::baseline)
    throw ContractError("dsl_step called with the baseline scheme");
  if (!marginals.log_px || !marginals.log_py)
    throw ContractError("dsl_step requires both marginal scorers");
  return coupled_step(batch, nlg, nlu, residual_constants(batch, marginals),
                      cfg);
}

TrainCurves train_baseline(const DualDataset& data, NlgModel& nlg,
                           NluModel& nlu, const TrainingConfig& cfg,
                           const EpochSink& sink) {
  if (cfg.scheme != Scheme::baseline)
    throw ContractError("train_baseline requires cfg.scheme == baseline");
  auto step = [&](const std::vector<const DualExample*>& batch) {
    return coupled_step(batch, nlg, nlu, /*c=*/{}, cfg);
  };
  return run_epochs(data, cfg, sink, step, /*with_residual=*/false);
}

TrainCurves train_dsl(const DualDataset& data, NlgModel& nlg, NluModel& nlu,
                      const MarginalScorers& marginals,
                      const TrainingConfig& cfg, const EpochSink& sink) {
  if (cfg.scheme != Scheme::dsl && cfg.scheme != Scheme::dsl_without_made)
    throw ContractError("train_dsl requires a dual scheme");
  if (!marginals.log_px || !marginals.log_py)
    throw ContractError(
        "train_dsl requires pretrained marginal scorers for scheme dsl");

  // The scorers are frozen, so each example's constant is computed once.
  std::vector<double> log_px_all(data.size()), log_py_all(data.size());
  if (marginals.log_px_bulk) {
    std::vector<const std::vector<double>*> xs;
    xs.reserve(data.size());
    for (const auto& ex : data) xs.push_back(&ex.x);
    log_px_all = marginals.log_px_bulk(xs);
  } else {
    for (std::size_t i = 0; i < data.size(); ++i)
      log_px_all[i] = marginals.log_px(data[i].x);
  }
  if (marginals.log_py_bulk) {
    std::vector<const Utterance*> ys;
    ys.reserve(data.size());
    for (const auto& ex : data) ys.push_back(&ex.y);
    log_py_all = marginals.log_py_bulk(ys);
  } else {
    for (std::size_t i = 0; i < data.size(); ++i)
      log_py_all[i] = marginals.log_py(data[i].y);
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(log_px_all[i]) || !std::isfinite(log_py_all[i]))
      throw ContractError("marginal scorer returned a non-finite value");

  const DualExample* base = data.data();
  auto step = [&](const std::vector<const DualExample*>& batch) {
    std::vector<double> c;
    c.reserve(batch.size());
    for (const auto* ex : batch) {
      const std::size_t i = static_cast<std::size_t>(ex - base);
      c.push_back(log_px_all[i] - log_py_all[i]);
    }
    return coupled_step(batch, nlg, nlu, c, cfg);
  };
  return run_epochs(data, cfg, sink, step, /*with_residual=*/true);
}

double measure_mean_residual(const DualDataset& data, const NlgModel& nlg,
                             const NluModel& nlu,
                             const MarginalScorers& marginals) {
  if (data.empty()) throw ValidationError("residual measurement needs data");
  double sum = 0.0;
  for (const auto& ex : data) {
    auto rec = duality_residual(marginals.log_px(ex.x),
                                nlg_conditional_log_likelihood(nlg, ex.x, ex.y),
                                marginals.log_py(ex.y),
                                nlu_conditional_log_likelihood(nlu, ex.y, ex.x));
    sum += rec.residual;
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace duality
