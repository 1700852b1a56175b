#include "duality/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "duality/checkpoint.hpp"

namespace duality {

namespace fs = std::filesystem;

nlohmann::json ExperimentConfig::to_json() const {
  return {
      {"data_dir", data_dir},
      {"out_dir", out_dir},
      {"subset_size", subset_size},
      {"runs", runs},
      {"base_seed", base_seed},
      {"embedding_dim", embedding_dim},
      {"hidden_size", hidden_size},
      {"epochs", epochs},
      {"batch_size", batch_size},
      {"learning_rate", learning_rate},
      {"clip_norm", clip_norm},
      {"lm_epochs", lm_epochs},
      {"made_epochs", made_epochs},
      {"made_ensemble_size", made_ensemble_size},
      {"made_hidden", made_hidden},
      {"min_count", min_count},
      {"lemmatize", lemmatize},
      {"max_decode_len", max_decode_len},
      {"nlu_threshold", nlu_threshold},
      {"rouge_l_beta", rouge_l_beta},
      {"lambdas", lambdas},
      {"schemes", schemes},
      // paper-silent choices, recorded so every run is auditable
      {"preprocessing_order", "trim_punct -> lowercase -> lemmatize"},
      {"decode_strategy", "greedy"},
      {"bleu", "corpus BLEU-4, no smoothing, closest-ref-length brevity"},
      {"rouge", "recall n-gram, max over refs, instance mean; L via F-beta"},
  };
}

nlohmann::json eval_report_json(const EvalReport& r) {
  return {{"nlu_micro_f1", r.nlu_micro_f1}, {"bleu", r.bleu},
          {"rouge_1", r.rouge_1},           {"rouge_2", r.rouge_2},
          {"rouge_l", r.rouge_l},           {"nlg_instances", r.nlg_instances},
          {"nlu_instances", r.nlu_instances}};
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  if (cfg.data_dir.empty())
    throw ConfigError("data_dir is required; run prepare-data first");
  auto train_records = load_corpus(cfg.data_dir, Split::train);
  if (train_records.empty())
    throw ConfigError("training split under '" + cfg.data_dir + "' is empty");
  auto test_records = load_corpus(cfg.data_dir, Split::test);

  PreprocessOptions pre;
  pre.lemmatize = cfg.lemmatize;

  PreparedData data;
  data.train_rows_total = static_cast<std::int64_t>(train_records.size());

  // Label space and vocabulary come from the full training split; the
  // subset only limits which rows the optimizers see.
  std::vector<SemanticFrame> train_frames;
  std::vector<std::vector<std::string>> train_tokens;
  train_frames.reserve(train_records.size());
  for (const auto& rec : train_records) {
    train_frames.push_back(parse_semantic_frame(rec.mr));
    train_tokens.push_back(preprocess_utterance(rec.ref, pre));
  }
  data.index = LabelIndex::build(train_frames);
  data.vocab = Vocabulary::build(train_tokens, cfg.min_count);

  const auto policy = cfg.hard_unseen_error ? UnseenPairPolicy::hard_error
                                            : UnseenPairPolicy::drop_with_warning;

  const std::size_t limit =
      cfg.subset_size > 0
          ? std::min(train_records.size(),
                     static_cast<std::size_t>(cfg.subset_size))
          : train_records.size();
  data.train.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) {
    DualExample ex;
    ex.x = frame_to_label_vector(train_frames[i], data.index, policy,
                                 &data.dropped_unseen_pairs);
    ex.y = encode_utterance(train_tokens[i], data.vocab, train_records[i].ref);
    data.train.push_back(std::move(ex));
  }

  // Test rows for recognition; grouped multi-reference sets for generation.
  std::vector<std::pair<SemanticFrame, std::string>> grouped_input;
  for (const auto& rec : test_records) {
    auto frame = parse_semantic_frame(rec.mr);
    auto toks = preprocess_utterance(rec.ref, pre);
    DualExample ex;
    ex.x = frame_to_label_vector(frame, data.index, policy,
                                 &data.dropped_unseen_pairs);
    ex.y = encode_utterance(toks, data.vocab, rec.ref);
    data.test_rows.push_back(std::move(ex));
    grouped_input.emplace_back(std::move(frame), rec.ref);
  }
  auto groups = group_multi_references(grouped_input);
  std::map<std::string, SemanticFrame> frame_by_key;
  for (const auto& [frame, ref] : grouped_input)
    frame_by_key.emplace(frame.canonical_key(), frame);
  for (const auto& [key, refs] : groups) {
    data.test_frames.push_back(frame_to_label_vector(
        frame_by_key.at(key), data.index, policy, &data.dropped_unseen_pairs));
    RefSet tokenized;
    for (const auto& ref : refs)
      tokenized.push_back(preprocess_utterance(ref, pre));
    data.test_refs.push_back(std::move(tokenized));
  }
  return data;
}

EvalReport evaluate_models(const NlgModel& nlg, const NluModel& nlu,
                           const PreparedData& data,
                           const ExperimentConfig& cfg) {
  EvalReport report;

  // generation: greedy decode per distinct test MR, multi-reference scoring
  std::vector<Tokens> hyps;
  hyps.reserve(data.test_frames.size());
  const std::size_t chunk = static_cast<std::size_t>(
      std::max(1, cfg.batch_size));
  for (std::size_t start = 0; start < data.test_frames.size();
       start += chunk) {
    std::vector<std::vector<double>> frames(
        data.test_frames.begin() + static_cast<long>(start),
        data.test_frames.begin() +
            static_cast<long>(
                std::min(data.test_frames.size(), start + chunk)));
    auto utts = nlg_generate_greedy_batch(nlg, frames, cfg.max_decode_len);
    for (const auto& u : utts) hyps.push_back(decode_utterance(u, data.vocab));
  }
  if (!hyps.empty()) {
    report.bleu = corpus_bleu(hyps, data.test_refs);
    report.rouge_1 = rouge_n(hyps, data.test_refs, 1);
    report.rouge_2 = rouge_n(hyps, data.test_refs, 2);
    report.rouge_l = rouge_l(hyps, data.test_refs, cfg.rouge_l_beta);
  }
  report.nlg_instances = static_cast<std::int64_t>(hyps.size());

  // recognition: per-row thresholded prediction, pooled micro F1
  std::vector<std::set<int>> predicted, gold;
  for (std::size_t start = 0; start < data.test_rows.size(); start += chunk) {
    const std::size_t stop =
        std::min(data.test_rows.size(), start + chunk);
    std::vector<const Utterance*> utts;
    for (std::size_t i = start; i < stop; ++i)
      utts.push_back(&data.test_rows[i].y);
    Tape tape(false);
    auto logits = nlu.logits_batch(tape, utts);
    for (std::size_t i = start; i < stop; ++i) {
      std::set<int> pred_set, gold_set;
      const double* row = logits->values.data() +
                          (i - start) * static_cast<std::size_t>(nlu.label_dim);
      for (int d = 0; d < nlu.label_dim; ++d) {
        const double sigma = 1.0 / (1.0 + std::exp(-row[d]));
        if (sigma > cfg.nlu_threshold) pred_set.insert(d);
        if (data.test_rows[i].x[static_cast<std::size_t>(d)] == 1.0)
          gold_set.insert(d);
      }
      predicted.push_back(std::move(pred_set));
      gold.push_back(std::move(gold_set));
    }
  }
  if (!predicted.empty()) report.nlu_micro_f1 = micro_f1(predicted, gold);
  report.nlu_instances = static_cast<std::int64_t>(predicted.size());
  return report;
}

namespace {

std::array<double, 5> metric_array(const EvalReport& r) {
  return {r.nlu_micro_f1, r.rouge_1, r.rouge_2, r.rouge_l, r.bleu};
}

void set_metrics(EvalReport& r, const std::array<double, 5>& m) {
  r.nlu_micro_f1 = m[0];
  r.rouge_1 = m[1];
  r.rouge_2 = m[2];
  r.rouge_l = m[3];
  r.bleu = m[4];
}

}  // namespace

AggregateReport aggregate_runs(const std::vector<EvalReport>& reports) {
  if (reports.empty())
    throw ValidationError("aggregate_runs requires at least one report");
  AggregateReport agg;
  agg.raw = reports;
  const double n = static_cast<double>(reports.size());
  std::array<double, 5> mean{};
  for (const auto& r : reports) {
    auto m = metric_array(r);
    for (std::size_t i = 0; i < 5; ++i) mean[i] += m[i] / n;
  }
  std::array<double, 5> sd{};
  if (reports.size() > 1) {
    for (const auto& r : reports) {
      auto m = metric_array(r);
      for (std::size_t i = 0; i < 5; ++i)
        sd[i] += (m[i] - mean[i]) * (m[i] - mean[i]) / (n - 1.0);
    }
    for (auto& v : sd) v = std::sqrt(v);
  }
  set_metrics(agg.mean, mean);
  set_metrics(agg.stddev, sd);
  agg.mean.nlg_instances = reports[0].nlg_instances;
  agg.mean.nlu_instances = reports[0].nlu_instances;
  return agg;
}

std::string SchemeCell::label() const {
  switch (scheme) {
    case Scheme::baseline:
      return "baseline";
    case Scheme::dsl: {
      std::ostringstream os;
      os << "dsl lambda=" << lambda;
      return os.str();
    }
    case Scheme::dsl_without_made:
      return "dsl w/o made";
  }
  return "?";
}

std::vector<SchemeCell> scheme_cells(const ExperimentConfig& cfg) {
  std::vector<SchemeCell> cells;
  for (const auto& s : cfg.schemes) {
    if (s == "baseline") {
      cells.push_back({Scheme::baseline, 0.0});
    } else if (s == "dsl") {
      auto sorted = cfg.lambdas;
      std::sort(sorted.rbegin(), sorted.rend());
      for (double l : sorted) cells.push_back({Scheme::dsl, l});
    } else if (s == "dsl-no-made") {
      const double l = cfg.lambdas.empty() ? 0.1 : *std::max_element(
                                                       cfg.lambdas.begin(),
                                                       cfg.lambdas.end());
      cells.push_back({Scheme::dsl_without_made, l});
    } else {
      throw ConfigError("unknown scheme '" + s + "'");
    }
  }
  return cells;
}

namespace {

struct PaperRow {
  const char* label;
  double f1, bleu, r1, r2, rl;
};

// Published reference results rendered for side-by-side comparison only.
const PaperRow kReferenceRows[] = {
    {"(a) baseline: iterative training", 71.14, 55.05, 55.37, 27.95, 39.90},
    {"(b) dual supervised learning, lambda=0.1", 72.32, 57.16, 56.37, 29.19,
     40.44},
    {"(c) dual supervised learning, lambda=0.01", 72.08, 55.07, 55.56, 28.42,
     40.04},
    {"(d) dual supervised learning, lambda=0.001", 71.71, 56.17, 55.90, 28.44,
     40.08},
    {"(e) dual supervised learning w/o MADE", 70.97, 55.96, 55.99, 28.74,
     39.98},
};

}  // namespace

std::string format_table(
    const std::vector<std::pair<std::string, AggregateReport>>& rows,
    bool show_paper_reference) {
  std::ostringstream os;
  os << std::fixed;
  os.precision(2);
  os << "learning scheme                      |    F1 |  BLEU | ROUGE-1 | "
        "ROUGE-2 | ROUGE-L\n";
  os << "-------------------------------------+-------+-------+---------+---"
        "------+--------\n";
  char tag = 'a';
  for (const auto& [label, agg] : rows) {
    std::ostringstream name;
    name << "(" << tag++ << ") " << label;
    os << name.str();
    for (std::size_t i = name.str().size(); i < 37; ++i) os << ' ';
    os << "| " << std::setw(5) << agg.mean.nlu_micro_f1 << " | " << std::setw(5)
       << agg.mean.bleu << " | " << std::setw(7) << agg.mean.rouge_1 << " | "
       << std::setw(7) << agg.mean.rouge_2 << " | " << std::setw(7)
       << agg.mean.rouge_l << "\n";
  }
  if (show_paper_reference) {
    os << "\nreference results (published)\n";
    for (const auto& row : kReferenceRows) {
      os << row.label;
      for (std::size_t i = std::string(row.label).size(); i < 45; ++i)
        os << ' ';
      os << std::setw(6) << row.f1 << "  " << std::setw(6) << row.bleu << "  "
         << std::setw(7) << row.r1 << "  " << std::setw(7) << row.r2 << "  "
         << std::setw(7) << row.rl << "\n";
    }
  }
  return os.str();
}

nlohmann::json report_json(
    const std::vector<std::pair<std::string, AggregateReport>>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [label, agg] : rows) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : agg.raw) runs.push_back(eval_report_json(r));
    out.push_back({{"scheme", label},
                   {"mean", eval_report_json(agg.mean)},
                   {"stddev", eval_report_json(agg.stddev)},
                   {"runs", runs}});
  }
  return out;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_text((fs::path(cfg.out_dir) / "run_manifest.json").string(),
             cfg.to_json().dump(2) + "\n");

  auto data = prepare_data(cfg);
  {
    nlohmann::json stats = {
        {"label_count", data.index.size()},
        {"expected_label_count", 79},
        {"label_count_deviation", data.index.size() - 79},
        {"vocab_size", data.vocab.size()},
        {"train_rows_total", data.train_rows_total},
        {"train_rows_used", data.train.size()},
        {"test_rows", data.test_rows.size()},
        {"distinct_test_mrs", data.test_frames.size()},
        {"dropped_unseen_pairs", data.dropped_unseen_pairs}};
    write_text((fs::path(cfg.out_dir) / "data_stats.json").string(),
               stats.dump(2) + "\n");
    std::cout << "data: D=" << data.index.size()
              << " vocab=" << data.vocab.size()
              << " train=" << data.train.size()
              << " test_rows=" << data.test_rows.size() << "\n";
  }

  // pretrain the frozen marginal estimators
  std::vector<Utterance> lm_corpus;
  lm_corpus.reserve(data.train.size());
  std::vector<std::vector<double>> frames;
  frames.reserve(data.train.size());
  for (const auto& ex : data.train) {
    lm_corpus.push_back(ex.y);
    frames.push_back(ex.x);
  }

  Rng lm_init(Rng(cfg.base_seed).fork(101).next_u64());
  LanguageModel lm(data.vocab.size(), cfg.embedding_dim, cfg.hidden_size,
                   lm_init);
  train_language_model(lm, lm_corpus, cfg.lm_epochs, cfg.batch_size,
                       Rng(cfg.base_seed).fork(102).next_u64(), cfg.adam());
  save_checkpoint(lm, (fs::path(cfg.out_dir) / "lm.ckpt").string());
  std::cout << "lm pretrained: perplexity=" << perplexity(lm, lm_corpus)
            << "\n";

  auto made = MadeEnsemble::create(data.index.size(), cfg.made_ensemble_size,
                                   cfg.made_hidden,
                                   Rng(cfg.base_seed).fork(103).next_u64());
  train_made(made, frames, cfg.made_epochs, cfg.batch_size,
             Rng(cfg.base_seed).fork(104).next_u64(), cfg.adam());
  save_checkpoint(made, (fs::path(cfg.out_dir) / "made.ckpt").string());
  std::cout << "made ensemble pretrained (" << made.members.size()
            << " members)\n";

  auto independent = independent_marginal_estimator(frames);
  auto made_scorers = scorers_from_models(made, lm);
  auto independent_scorers = scorers_from_models(independent, lm);

  ExperimentResult result;
  std::map<std::string, std::vector<EvalReport>> per_cell;
  std::vector<std::string> cell_order;

  for (const auto& cell : scheme_cells(cfg)) {
    cell_order.push_back(cell.label());
    for (int run = 0; run < cfg.runs; ++run) {
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(run);
      RunOutcome outcome;
      outcome.cell = cell.label();
      outcome.seed = seed;
      const auto cell_dir = fs::path(cfg.out_dir) / "cells" /
                            (cell.label() + " seed" + std::to_string(seed));
      try {
        fs::create_directories(cell_dir);
        Rng nlg_init(Rng(seed).fork(201).next_u64());
        Rng nlu_init(Rng(seed).fork(202).next_u64());
        NlgModel nlg(data.index.size(), data.vocab.size(), cfg.embedding_dim,
                     cfg.hidden_size, nlg_init);
        NluModel nlu(data.index.size(), data.vocab.size(), cfg.embedding_dim,
                     cfg.hidden_size, nlu_init);

        TrainingConfig tc;
        tc.scheme = cell.scheme;
        tc.lambda_xy = cell.lambda;
        tc.lambda_yx = cell.lambda;
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch_size;
        tc.seed = Rng(seed).fork(203).next_u64();
        tc.adam = cfg.adam();

        std::ofstream log((cell_dir / "train_log.jsonl").string(),
                          std::ios::binary);
        EpochSink sink = [&log](const EpochRecord& rec) {
          nlohmann::json j = {{"epoch", rec.epoch},
                              {"nlg_loss", rec.nlg_loss},
                              {"nlu_loss", rec.nlu_loss},
                              {"wallclock_s", rec.wallclock_s}};
          if (rec.duality_residual_mean)
            j["duality_residual_mean"] = *rec.duality_residual_mean;
          else
            j["duality_residual_mean"] = nullptr;
          log << j.dump() << "\n";
          log.flush();
        };

        if (cell.scheme == Scheme::baseline)
          train_baseline(data.train, nlg, nlu, tc, sink);
        else if (cell.scheme == Scheme::dsl)
          train_dsl(data.train, nlg, nlu, made_scorers, tc, sink);
        else
          train_dsl(data.train, nlg, nlu, independent_scorers, tc, sink);

        save_checkpoint(nlg, (cell_dir / "nlg.ckpt").string());
        save_checkpoint(nlu, (cell_dir / "nlu.ckpt").string());

        outcome.report = evaluate_models(nlg, nlu, data, cfg);
        outcome.ok = true;
        write_text((cell_dir / "report.json").string(),
                   eval_report_json(outcome.report).dump(2) + "\n");
        per_cell[cell.label()].push_back(outcome.report);
        std::cout << cell.label() << " seed " << seed
                  << ": F1=" << outcome.report.nlu_micro_f1
                  << " BLEU=" << outcome.report.bleu << "\n";
      } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.error = e.what();
        nlohmann::json err = {{"cell", outcome.cell},
                              {"seed", outcome.seed},
                              {"error", outcome.error}};
        write_text((cell_dir / "error.json").string(), err.dump(2) + "\n");
        std::cerr << cell.label() << " seed " << seed
                  << " failed: " << e.what() << "\n";
      }
      result.runs.push_back(std::move(outcome));
    }
  }

  for (const auto& label : cell_order) {
    auto it = per_cell.find(label);
    if (it == per_cell.end() || it->second.empty()) continue;
    result.aggregates.emplace_back(label, aggregate_runs(it->second));
  }

  const auto table = format_table(result.aggregates, cfg.show_paper_reference);
  write_text((fs::path(cfg.out_dir) / "table.txt").string(), table);
  write_text((fs::path(cfg.out_dir) / "report.json").string(),
             report_json(result.aggregates).dump(2) + "\n");
  std::cout << "\n" << table;
  return result;
}

}  // namespace duality
