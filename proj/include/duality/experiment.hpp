#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "duality/corpus_gen.hpp"
#include "duality/dual_trainer.hpp"
#include "duality/metrics.hpp"
#include "duality/synthetic.hpp"

namespace duality {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string data_dir;
  std::string out_dir = "out";
  int subset_size = 5000;  // 0 keeps every training row
  int runs = 3;
  std::uint64_t base_seed = 1;

  int embedding_dim = 50;
  int hidden_size = 200;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;

  int lm_epochs = 10;
  int made_epochs = 10;
  int made_ensemble_size = 10;
  std::vector<int> made_hidden = {200, 200};

  int min_count = 1;
  bool lemmatize = true;
  int max_decode_len = 60;
  double nlu_threshold = 0.5;
  double rouge_l_beta = 8.0;
  bool hard_unseen_error = false;

  std::vector<double> lambdas = {0.1, 0.01, 0.001};
  std::vector<std::string> schemes = {"baseline", "dsl", "dsl-no-made"};
  bool show_paper_reference = false;

  AdamConfig adam() const {
    AdamConfig a;
    a.learning_rate = learning_rate;
    a.clip_norm = clip_norm;
    return a;
  }
  nlohmann::json to_json() const;
};

struct PreparedData {
  LabelIndex index;
  Vocabulary vocab;
  DualDataset train;                            // subset applied
  std::vector<DualExample> test_rows;           // one per test CSV row
  std::vector<std::vector<double>> test_frames; // one per distinct test MR
  std::vector<RefSet> test_refs;                // aligned with test_frames
  std::int64_t train_rows_total = 0;
  int dropped_unseen_pairs = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

EvalReport evaluate_models(const NlgModel& nlg, const NluModel& nlu,
                           const PreparedData& data,
                           const ExperimentConfig& cfg);

struct AggregateReport {
  EvalReport mean;
  EvalReport stddev;
  std::vector<EvalReport> raw;
};

AggregateReport aggregate_runs(const std::vector<EvalReport>& reports);

// Scheme rows in presentation order: baseline, dsl by descending lambda,
// then the no-MADE ablation.
struct SchemeCell {
  Scheme scheme = Scheme::baseline;
  double lambda = 0.0;
  std::string label() const;
};

std::vector<SchemeCell> scheme_cells(const ExperimentConfig& cfg);

std::string format_table(
    const std::vector<std::pair<std::string, AggregateReport>>& rows,
    bool show_paper_reference);

nlohmann::json report_json(
    const std::vector<std::pair<std::string, AggregateReport>>& rows);

struct RunOutcome {
  std::string cell;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::vector<std::pair<std::string, AggregateReport>> aggregates;
};

// Full pipeline: ingest, pretrain marginals, train every (scheme, lambda,
// seed) cell, decode, score, and write all artifacts under cfg.out_dir.
// A failing cell is recorded and the remaining cells still run.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

nlohmann::json eval_report_json(const EvalReport& r);

}  // namespace duality
