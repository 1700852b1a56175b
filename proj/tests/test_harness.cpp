#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "duality/checkpoint.hpp"
#include "duality/experiment.hpp"

using namespace duality;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("language model checkpoints restore scores bit for bit") {
  auto v = Vocabulary::from_tokens({"a", "b", "c"});
  Rng rng(5);
  LanguageModel lm(v.size(), 6, 10, rng);
  std::vector<Utterance> corpus = {encode_utterance({"a", "b"}, v),
                                   encode_utterance({"c", "c", "a"}, v)};
  train_language_model(lm, corpus, 3, 2, 9);
  const auto path = (temp_dir("ckpt_lm") / "lm.ckpt").string();
  save_checkpoint(lm, path);
  auto loaded = load_language_model(path);
  for (const auto& u : corpus)
    CHECK(sentence_log_probability(lm, u) ==
          sentence_log_probability(loaded, u));
}

TEST_CASE("made checkpoints restore masks and scores") {
  const int D = 6;
  auto ens = MadeEnsemble::create(D, 3, {10, 8}, 7);
  Rng data_rng(1);
  std::vector<std::vector<double>> frames;
  for (int i = 0; i < 80; ++i) {
    std::vector<double> x(D);
    for (auto& val : x) val = data_rng.uniform() < 0.5 ? 1.0 : 0.0;
    frames.push_back(std::move(x));
  }
  train_made(ens, frames, 2, 16, 3);
  const auto path = (temp_dir("ckpt_made") / "made.ckpt").string();
  save_checkpoint(ens, path);
  auto loaded = load_made_ensemble(path);
  REQUIRE(loaded.members.size() == ens.members.size());
  for (int mask = 0; mask < (1 << D); ++mask) {
    std::vector<double> x(D);
    for (int d = 0; d < D; ++d)
      x[static_cast<std::size_t>(d)] = (mask >> d) & 1;
    CHECK(ensemble_log_probability(ens, x) ==
          ensemble_log_probability(loaded, x));
  }
  for (std::size_t k = 0; k < ens.members.size(); ++k) {
    CHECK(loaded.members[k].mask_set.ordering ==
          ens.members[k].mask_set.ordering);
    for (std::size_t l = 0; l < ens.members[k].mask_set.masks.size(); ++l)
      CHECK(loaded.members[k].mask_set.masks[l]->values ==
            ens.members[k].mask_set.masks[l]->values);
  }
}

TEST_CASE("conditional model checkpoints round-trip") {
  auto v = Vocabulary::from_tokens({"a", "b", "c", "d"});
  Rng g(11), u(12);
  NlgModel nlg(3, v.size(), 6, 10, g);
  NluModel nlu(3, v.size(), 6, 10, u);
  auto dir = temp_dir("ckpt_cond");
  save_checkpoint(nlg, (dir / "nlg.ckpt").string());
  save_checkpoint(nlu, (dir / "nlu.ckpt").string());
  auto nlg2 = load_nlg_model((dir / "nlg.ckpt").string());
  auto nlu2 = load_nlu_model((dir / "nlu.ckpt").string());
  auto y = encode_utterance({"b", "d", "a"}, v);
  const std::vector<double> x = {1, 0, 1};
  CHECK(nlg_conditional_log_likelihood(nlg, x, y) ==
        nlg_conditional_log_likelihood(nlg2, x, y));
  CHECK(nlu_conditional_log_likelihood(nlu, y, x) ==
        nlu_conditional_log_likelihood(nlu2, y, x));
  CHECK(nlg_generate(nlg, x).tokens == nlg_generate(nlg2, x).tokens);
}

TEST_CASE("checkpoint loading rejects damage with structured errors") {
  auto v = Vocabulary::from_tokens({"a"});
  Rng rng(3);
  LanguageModel lm(v.size(), 4, 6, rng);
  auto dir = temp_dir("ckpt_bad");
  const auto path = (dir / "lm.ckpt").string();
  save_checkpoint(lm, path);

  {
    auto bytes = slurp(path);
    std::ofstream out(dir / "trunc.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_language_model((dir / "trunc.ckpt").string()),
                  LoadError);

  {
    auto bytes = slurp(path);
    bytes[8] = 99;  // version byte follows the 8-byte magic
    std::ofstream out(dir / "ver.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH_AS(load_language_model((dir / "ver.ckpt").string()),
                       doctest::Contains("format_version"), LoadError);

  CHECK_THROWS_WITH_AS(load_nlg_model(path), doctest::Contains("module"),
                       LoadError);
  {
    std::ofstream out(dir / "junk.ckpt", std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_language_model((dir / "junk.ckpt").string()),
                  LoadError);
}

TEST_CASE("uniform two-label task enumerates four equally likely frames") {
  auto task = SyntheticTask::uniform(2);
  auto data = synthetic_dataset(task, 400);
  CHECK(data.size() == 400);
  std::map<int, int> counts;
  for (const auto& ex : data) ++counts[task.mask_from_frame(ex.x)];
  REQUIRE(counts.size() == 4);
  for (const auto& [mask, n] : counts) CHECK(n == 100);
}

TEST_CASE("synthetic template is injective") {
  auto task = synthetic_task_generate(6, 31);
  std::set<std::vector<int>> seen;
  for (int mask = 0; mask < 64; ++mask) {
    auto u = task.realize(task.frame_from_mask(mask));
    CHECK(seen.insert(u.tokens).second);
  }
}

TEST_CASE("synthetic oracle marginals sum to one exactly") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto task = synthetic_task_generate(2 + static_cast<int>(seed), seed);
    auto oracle = brute_force_joint_oracle(task);
    CHECK(oracle.total_probability == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(synthetic_task_generate(1, 0), ValidationError);
  CHECK_THROWS_AS(synthetic_task_generate(11, 0), ValidationError);
}

TEST_CASE("sampled frame frequencies track the constructed joint") {
  auto task = synthetic_task_generate(5, 17);
  auto oracle = brute_force_joint_oracle(task);
  Rng rng(99);
  const int n = 10000;
  std::vector<int> counts(32, 0);
  for (int i = 0; i < n; ++i)
    ++counts[static_cast<std::size_t>(
        task.mask_from_frame(task.sample_frame(rng)))];
  double chi2 = 0.0;
  for (int mask = 0; mask < 32; ++mask) {
    const double expected =
        n * std::exp(oracle.log_px[static_cast<std::size_t>(mask)]);
    const double diff = counts[static_cast<std::size_t>(mask)] - expected;
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < 70.0);  // far tail of chi-square with 31 dof
}

TEST_CASE("dataset multiplicities are proportional to the joint") {
  auto task = synthetic_task_generate(4, 23);
  auto data = synthetic_dataset(task, 5000);
  std::map<int, int> counts;
  for (const auto& ex : data) ++counts[task.mask_from_frame(ex.x)];
  for (const auto& [mask, n] : counts) {
    const double expected =
        5000.0 * std::exp(task.log_prob(task.frame_from_mask(mask)));
    CHECK(std::fabs(n - expected) <= 0.5 + 1e-9);
  }
}

TEST_CASE("synthesized corpus covers all 79 labels and parses cleanly") {
  auto dir = temp_dir("gen_corpus");
  CorpusGenOptions opt;
  opt.train_mrs = 120;
  opt.test_mrs = 25;
  opt.min_refs = 2;
  opt.max_refs = 4;
  synthesize_corpus(dir.string(), opt);

  auto train = load_corpus(dir.string(), Split::train);
  auto test = load_corpus(dir.string(), Split::test);
  CHECK(train.size() >= 2 * 120);
  CHECK(test.size() >= 2 * 25);
  std::vector<SemanticFrame> frames;
  for (const auto& rec : train) frames.push_back(parse_semantic_frame(rec.mr));
  auto idx = LabelIndex::build(frames);
  CHECK(idx.size() == 79);

  auto dir2 = temp_dir("gen_corpus2");
  synthesize_corpus(dir2.string(), opt);
  CHECK(slurp(dir / "trainset.csv") == slurp(dir2 / "trainset.csv"));
  CHECK(slurp(dir / "testset.csv") == slurp(dir2 / "testset.csv"));
}

TEST_CASE("aggregate_runs means and sample deviations") {
  EvalReport a, b, c;
  a.bleu = 50;
  b.bleu = 60;
  c.bleu = 70;
  a.nlu_micro_f1 = b.nlu_micro_f1 = c.nlu_micro_f1 = 80;
  auto agg = aggregate_runs({a, b, c});
  CHECK(agg.mean.bleu == doctest::Approx(60.0));
  CHECK(agg.stddev.bleu == doctest::Approx(10.0));
  CHECK(agg.stddev.nlu_micro_f1 == doctest::Approx(0.0));

  auto single = aggregate_runs({b});
  CHECK(single.mean.bleu == 60.0);
  CHECK(single.stddev.bleu == 0.0);

  auto agg2 = aggregate_runs({c, a, b});
  CHECK(agg2.mean.bleu == doctest::Approx(agg.mean.bleu));
  CHECK(agg2.stddev.bleu == doctest::Approx(agg.stddev.bleu));
  CHECK_THROWS_AS(aggregate_runs({}), ValidationError);
}

TEST_CASE("table formatting orders rows and renders the reference block") {
  CHECK(format_table({}, false).find("ROUGE-L") != std::string::npos);

  EvalReport r;
  r.nlu_micro_f1 = 71.0;
  r.bleu = 55.0;
  auto agg = aggregate_runs({r});
  auto text = format_table({{"baseline", agg}, {"dsl lambda=0.1", agg}},
                           false);
  CHECK(text.find("(a) baseline") != std::string::npos);
  CHECK(text.find("(b) dsl lambda=0.1") != std::string::npos);
  CHECK(text.find("reference results") == std::string::npos);

  auto with_ref = format_table({{"baseline", agg}}, true);
  CHECK(with_ref.find("reference results (published)") != std::string::npos);
  CHECK(with_ref.find("72.32") != std::string::npos);
  CHECK(with_ref.find("57.16") != std::string::npos);
}

TEST_CASE("scheme cells expand in presentation order") {
  ExperimentConfig cfg;
  cfg.lambdas = {0.001, 0.1, 0.01};
  auto cells = scheme_cells(cfg);
  REQUIRE(cells.size() == 5);
  CHECK(cells[0].label() == "baseline");
  CHECK(cells[1].label() == "dsl lambda=0.1");
  CHECK(cells[2].label() == "dsl lambda=0.01");
  CHECK(cells[3].label() == "dsl lambda=0.001");
  CHECK(cells[4].label() == "dsl w/o made");
  cfg.schemes = {"nonsense"};
  CHECK_THROWS_AS(scheme_cells(cfg), ConfigError);
}

TEST_CASE("small experiment pipeline is reproducible bit for bit") {
  auto data_dir = temp_dir("exp_data");
  CorpusGenOptions gen;
  gen.train_mrs = 90;
  gen.test_mrs = 12;
  gen.min_refs = 2;
  gen.max_refs = 3;
  synthesize_corpus(data_dir.string(), gen);

  ExperimentConfig cfg;
  cfg.data_dir = data_dir.string();
  cfg.subset_size = 160;
  cfg.runs = 1;
  cfg.epochs = 2;
  cfg.lm_epochs = 2;
  cfg.made_epochs = 2;
  cfg.made_ensemble_size = 2;
  cfg.made_hidden = {16};
  cfg.hidden_size = 16;
  cfg.embedding_dim = 8;
  cfg.batch_size = 16;
  cfg.schemes = {"baseline", "dsl", "dsl-no-made"};
  cfg.lambdas = {0.1};

  const auto out1 = temp_dir("exp_out1");
  cfg.out_dir = out1.string();
  auto r1 = run_experiment(cfg);
  REQUIRE(r1.runs.size() == 3);
  for (const auto& run : r1.runs) CHECK(run.ok);
  REQUIRE(r1.aggregates.size() == 3);

  const auto out2 = temp_dir("exp_out2");
  cfg.out_dir = out2.string();
  auto r2 = run_experiment(cfg);

  const auto report1 = slurp(out1 / "report.json");
  const auto report2 = slurp(out2 / "report.json");
  CHECK_FALSE(report1.empty());
  CHECK(report1 == report2);
  CHECK(slurp(out1 / "table.txt") == slurp(out2 / "table.txt"));

  CHECK(fs::exists(out1 / "lm.ckpt"));
  CHECK(fs::exists(out1 / "made.ckpt"));
  CHECK(fs::exists(out1 / "run_manifest.json"));
  CHECK(fs::exists(out1 / "data_stats.json"));
  for (const auto& run : r1.runs) {
    const auto cell_dir =
        out1 / "cells" / (run.cell + " seed" + std::to_string(run.seed));
    CHECK(fs::exists(cell_dir / "report.json"));
    CHECK(fs::exists(cell_dir / "train_log.jsonl"));
    CHECK(fs::exists(cell_dir / "nlg.ckpt"));
    CHECK(fs::exists(cell_dir / "nlu.ckpt"));
    // training log is valid json-lines with the documented keys
    std::ifstream log(cell_dir / "train_log.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
      auto j = nlohmann::json::parse(line);
      CHECK(j.contains("epoch"));
      CHECK(j.contains("nlg_loss"));
      CHECK(j.contains("nlu_loss"));
      CHECK(j.contains("duality_residual_mean"));
      CHECK(j.contains("wallclock_s"));
      ++lines;
    }
    CHECK(lines == cfg.epochs);
  }
}
