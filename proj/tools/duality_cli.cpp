// Command-line front end: data preparation, marginal pretraining, scheme
// training, evaluation, the full table sweep, and the synthetic-task suite.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "duality/checkpoint.hpp"
#include "duality/experiment.hpp"
#include "duality/kernels.hpp"

using namespace duality;
namespace fs = std::filesystem;

namespace {

void add_shared_options(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--data-dir", cfg.data_dir, "corpus directory");
  cmd->add_option("--out-dir", cfg.out_dir, "output directory");
  cmd->add_option("--runs", cfg.runs, "runs per scheme");
  cmd->add_option("--subset-size", cfg.subset_size,
                  "training rows used (0 = all)");
  cmd->add_option("--seed", cfg.base_seed, "base seed");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--batch-size", cfg.batch_size, "batch size");
  cmd->add_option("--hidden-size", cfg.hidden_size, "GRU hidden width");
  cmd->add_option("--embedding-dim", cfg.embedding_dim, "embedding size");
  cmd->add_option("--learning-rate", cfg.learning_rate, "Adam learning rate");
  cmd->add_option("--clip-norm", cfg.clip_norm,
                  "global gradient clip (0 disables)");
  cmd->add_option("--lm-epochs", cfg.lm_epochs, "language model epochs");
  cmd->add_option("--made-epochs", cfg.made_epochs, "MADE epochs");
  cmd->add_option("--made-ensemble", cfg.made_ensemble_size,
                  "MADE ensemble size");
  cmd->add_option("--min-count", cfg.min_count, "vocabulary count threshold");
  cmd->add_flag(
      "--no-lemmatize", [&cfg](std::int64_t) { cfg.lemmatize = false; },
      "disable the rule lemmatizer");
  cmd->add_option("--max-decode-len", cfg.max_decode_len, "decode length cap");
  cmd->add_option("--nlu-threshold", cfg.nlu_threshold,
                  "label decision threshold");
  cmd->add_option("--rouge-l-beta", cfg.rouge_l_beta, "ROUGE-L beta");
  cmd->add_flag("--show-paper-reference", cfg.show_paper_reference,
                "render published reference rows next to the table");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duality-regularized NLU/NLG training"};
  app.set_config("--config", "", "key = value config file with [sections]");
  app.require_subcommand(1);

  ExperimentConfig cfg;
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread cap (0 = default)");
  bool serial_kernels = false;
  app.add_flag("--serial-kernels", serial_kernels,
               "use the serial reference kernels");

  auto* prep = app.add_subcommand(
      "prepare-data", "synthesize or inspect the corpus and dump stats");
  add_shared_options(prep, cfg);
  bool synthesize = false;
  prep->add_flag("--synthesize", synthesize,
                 "write a deterministic corpus into --data-dir");
  bool dump_jsonl = false;
  prep->add_flag("--dump", dump_jsonl,
                 "write preprocessed train records as JSON lines");

  auto* tlm =
      app.add_subcommand("train-lm", "pretrain the sentence marginal model");
  add_shared_options(tlm, cfg);

  auto* tmade =
      app.add_subcommand("train-made", "pretrain the frame marginal ensemble");
  add_shared_options(tmade, cfg);

  auto* train = app.add_subcommand("train", "train one scheme cell");
  add_shared_options(train, cfg);
  std::string scheme = "dsl";
  double lambda = 0.1;
  std::uint64_t run_seed = 1;
  train->add_option("--scheme", scheme, "baseline | dsl | dsl-no-made");
  train->add_option("--lambda", lambda, "Lagrange coefficient");
  train->add_option("--run-seed", run_seed, "seed for this run");

  auto* eval = app.add_subcommand(
      "evaluate", "score saved generator/recognizer checkpoints");
  add_shared_options(eval, cfg);
  std::string nlg_path, nlu_path;
  eval->add_option("--nlg", nlg_path, "generator checkpoint")->required();
  eval->add_option("--nlu", nlu_path, "recognizer checkpoint")->required();

  auto* table = app.add_subcommand(
      "reproduce-table1", "full sweep: every scheme and lambda, multi-seed");
  add_shared_options(table, cfg);

  auto* synth = app.add_subcommand(
      "synthetic-suite", "closed-form oracle experiment on a small task");
  add_shared_options(synth, cfg);
  int synth_d = 6;
  synth->add_option("--dimension", synth_d, "label dimension (2..10)");

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) kernels::set_threads(threads);
  if (serial_kernels) kernels::set_backend(kernels::Backend::serial);

  try {
    if (*prep) {
      if (synthesize) {
        if (cfg.data_dir.empty()) cfg.data_dir = "data";
        CorpusGenOptions gen;
        gen.seed = cfg.base_seed * 1000003ULL + 20250809ULL;
        synthesize_corpus(cfg.data_dir, gen);
        std::cout << "wrote trainset.csv and testset.csv under "
                  << cfg.data_dir << "\n";
      }
      auto data = prepare_data(cfg);
      std::cout << "labels D=" << data.index.size()
                << " (expected 79, deviation " << data.index.size() - 79
                << ")\nvocab=" << data.vocab.size()
                << "\ntrain rows=" << data.train_rows_total << " (using "
                << data.train.size() << ")\ntest rows="
                << data.test_rows.size() << " in " << data.test_frames.size()
                << " distinct MRs\n";
      if (dump_jsonl) {
        fs::create_directories(cfg.out_dir);
        std::vector<SemanticFrame> frames;
        std::vector<std::vector<std::string>> tokens;
        for (const auto& ex : data.train) {
          frames.push_back(vector_to_frame(ex.x, data.index));
          tokens.push_back(decode_utterance(ex.y, data.vocab));
        }
        const auto path =
            (fs::path(cfg.out_dir) / "train_preprocessed.jsonl").string();
        dump_preprocessed_jsonl(path, frames, tokens, data.index);
        std::cout << "dumped " << frames.size() << " records to " << path
                  << "\n";
      }
      return 0;
    }

    if (*tlm) {
      auto data = prepare_data(cfg);
      std::vector<Utterance> corpus;
      for (const auto& ex : data.train) corpus.push_back(ex.y);
      Rng init(Rng(cfg.base_seed).fork(101).next_u64());
      LanguageModel lm(data.vocab.size(), cfg.embedding_dim, cfg.hidden_size,
                       init);
      auto stats = train_language_model(
          lm, corpus, cfg.lm_epochs, cfg.batch_size,
          Rng(cfg.base_seed).fork(102).next_u64(), cfg.adam());
      fs::create_directories(cfg.out_dir);
      save_checkpoint(lm, (fs::path(cfg.out_dir) / "lm.ckpt").string());
      std::cout << "final epoch loss " << stats.epoch_loss.back()
                << ", perplexity " << perplexity(lm, corpus) << "\nsaved "
                << (fs::path(cfg.out_dir) / "lm.ckpt").string() << "\n";
      return 0;
    }

    if (*tmade) {
      auto data = prepare_data(cfg);
      std::vector<std::vector<double>> frames;
      for (const auto& ex : data.train) frames.push_back(ex.x);
      auto made = MadeEnsemble::create(
          data.index.size(), cfg.made_ensemble_size, cfg.made_hidden,
          Rng(cfg.base_seed).fork(103).next_u64());
      train_made(made, frames, cfg.made_epochs, cfg.batch_size,
                 Rng(cfg.base_seed).fork(104).next_u64(), cfg.adam());
      fs::create_directories(cfg.out_dir);
      save_checkpoint(made, (fs::path(cfg.out_dir) / "made.ckpt").string());
      std::cout << "saved " << (fs::path(cfg.out_dir) / "made.ckpt").string()
                << "\n";
      return 0;
    }

    if (*train) {
      if (scheme != "baseline" && scheme != "dsl" && scheme != "dsl-no-made")
        throw ConfigError("unknown scheme '" + scheme + "'");
      cfg.schemes = {scheme};
      cfg.lambdas = {lambda};
      cfg.runs = 1;
      cfg.base_seed = run_seed;
      auto result = run_experiment(cfg);
      for (const auto& run : result.runs)
        if (!run.ok) return 1;
      return 0;
    }

    if (*eval) {
      auto data = prepare_data(cfg);
      auto nlg = load_nlg_model(nlg_path);
      auto nlu = load_nlu_model(nlu_path);
      auto report = evaluate_models(nlg, nlu, data, cfg);
      std::cout << eval_report_json(report).dump(2) << "\n";
      return 0;
    }

    if (*table) {
      auto result = run_experiment(cfg);
      bool any_failed = false;
      for (const auto& run : result.runs) any_failed |= !run.ok;
      return any_failed ? 1 : 0;
    }

    if (*synth) {
      auto task = synthetic_task_generate(synth_d, cfg.base_seed);
      auto dataset = synthetic_dataset(task, 4000);
      auto oracle = brute_force_joint_oracle(task);
      std::cout << "task D=" << synth_d << ", dataset " << dataset.size()
                << " rows, oracle total probability "
                << oracle.total_probability << "\n";

      std::vector<Utterance> corpus;
      std::vector<std::vector<double>> frames;
      for (const auto& ex : dataset) {
        corpus.push_back(ex.y);
        frames.push_back(ex.x);
      }
      AdamConfig adam = cfg.adam();
      Rng lm_init(Rng(cfg.base_seed).fork(11).next_u64());
      LanguageModel lm(task.vocab.size(), 16, 32, lm_init);
      train_language_model(lm, corpus, 8, 64,
                           Rng(cfg.base_seed).fork(12).next_u64(), adam);
      auto made =
          MadeEnsemble::create(synth_d, cfg.made_ensemble_size, {64},
                               Rng(cfg.base_seed).fork(13).next_u64());
      train_made(made, frames, 30, 64,
                 Rng(cfg.base_seed).fork(14).next_u64(), adam);

      double made_mae = 0.0;
      for (int mask = 0; mask < (1 << synth_d); ++mask) {
        auto x = task.frame_from_mask(mask);
        made_mae += std::fabs(ensemble_log_probability(made, x) -
                              oracle.log_px[static_cast<std::size_t>(mask)]);
      }
      made_mae /= static_cast<double>(1 << synth_d);
      std::cout << "made mean |log-prob error| = " << made_mae << " nats\n";

      auto scorers = scorers_from_models(made, lm);
      for (const char* label : {"baseline", "dsl"}) {
        double mean_residual = 0.0;
        for (int run = 0; run < cfg.runs; ++run) {
          const std::uint64_t seed =
              cfg.base_seed + static_cast<std::uint64_t>(run);
          Rng gi(Rng(seed).fork(21).next_u64());
          Rng ui(Rng(seed).fork(22).next_u64());
          NlgModel nlg(synth_d, task.vocab.size(), 16, 32, gi);
          NluModel nlu(synth_d, task.vocab.size(), 16, 32, ui);
          TrainingConfig tc;
          tc.scheme = std::string(label) == "baseline" ? Scheme::baseline
                                                       : Scheme::dsl;
          tc.lambda_xy = tc.lambda_yx = 0.1;
          tc.epochs = cfg.epochs;
          tc.batch_size = 64;
          tc.seed = Rng(seed).fork(23).next_u64();
          tc.adam = adam;
          if (tc.scheme == Scheme::baseline)
            train_baseline(dataset, nlg, nlu, tc);
          else
            train_dsl(dataset, nlg, nlu, scorers, tc);
          mean_residual +=
              oracle_mean_duality_residual(task, oracle, nlg, nlu) /
              static_cast<double>(cfg.runs);
        }
        std::cout << label << ": oracle mean duality residual "
                  << mean_residual << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
