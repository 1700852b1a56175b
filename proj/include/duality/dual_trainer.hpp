#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "duality/dual_models.hpp"
#include "duality/lm.hpp"
#include "duality/made.hpp"

namespace duality {

// Per-example quadruple of the duality equation and its squared residual.
struct DualityRecord {
  double log_px = 0.0;
  double log_y_given_x = 0.0;
  double log_py = 0.0;
  double log_x_given_y = 0.0;
  double residual = 0.0;
};

// residual = (log px + log p(y|x) - log py - log p(x|y))^2
DualityRecord duality_residual(double log_px, double log_y_given_x,
                               double log_py, double log_x_given_y);

enum class Scheme { baseline, dsl, dsl_without_made };

struct TrainingConfig {
  Scheme scheme = Scheme::dsl;
  double lambda_xy = 0.1;
  double lambda_yx = 0.1;
  int epochs = 10;
  int batch_size = 64;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

// Frozen marginal scorers. The per-example forms define the contract; the
// bulk forms, when provided, only warm the trainer's cache faster.
struct MarginalScorers {
  std::function<double(const std::vector<double>&)> log_px;
  std::function<double(const Utterance&)> log_py;
  std::function<std::vector<double>(const std::vector<const std::vector<double>*>&)>
      log_px_bulk;
  std::function<std::vector<double>(const std::vector<const Utterance*>&)>
      log_py_bulk;
};

MarginalScorers scorers_from_models(const MadeEnsemble& made,
                                    const LanguageModel& lm);
MarginalScorers scorers_from_models(const IndependentMarginal& independent,
                                    const LanguageModel& lm);

struct DualExample {
  std::vector<double> x;
  Utterance y;
};
using DualDataset = std::vector<DualExample>;

struct StepStats {
  double nlg_loss = 0.0;
  double nlu_loss = 0.0;
  double mean_residual = 0.0;
};

// One synchronous coupled update from one batch: Adam on the generator
// objective l1 + lambda_xy * r, then Adam on the recognizer objective
// l2 + lambda_yx * r, both differentiated from the same forward pass. The
// residual gradient reaches both conditional models and never the frozen
// scorers.
StepStats dsl_step(const std::vector<const DualExample*>& batch, NlgModel& nlg,
                   NluModel& nlu, const MarginalScorers& marginals,
                   const TrainingConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double nlg_loss = 0.0;
  double nlu_loss = 0.0;
  std::optional<double> duality_residual_mean;
  double wallclock_s = 0.0;
};

struct TrainCurves {
  std::vector<EpochRecord> epochs;
};

using EpochSink = std::function<void(const EpochRecord&)>;

// Independent supervised training of the two models, no coupling.
TrainCurves train_baseline(const DualDataset& data, NlgModel& nlg,
                           NluModel& nlu, const TrainingConfig& cfg,
                           const EpochSink& sink = nullptr);

// Dual supervised learning: epochs x batches of dsl_step.
TrainCurves train_dsl(const DualDataset& data, NlgModel& nlg, NluModel& nlu,
                      const MarginalScorers& marginals,
                      const TrainingConfig& cfg,
                      const EpochSink& sink = nullptr);

// Mean squared duality residual of the models under the given scorers,
// without touching any parameters.
double measure_mean_residual(const DualDataset& data, const NlgModel& nlg,
                             const NluModel& nlu,
                             const MarginalScorers& marginals);

}  // namespace duality
