#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "planted_world.hpp"
#include "pttrust/pipeline.hpp"
#include "test_util.hpp"

namespace pttrust {
namespace {

using testing::PlantedSpec;
using testing::TempDir;

PlantedSpec small_spec() {
  PlantedSpec s;
  s.dim = 16;
  s.corpus = 30;
  s.bind = 60;
  s.assess = 40;
  s.sae_epochs = 3;
  s.ranker_epochs = 40;
  s.classifier_epochs = 40;
  s.seed = 11;
  return s;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// One trained world shared by the read-only tests below.
class TrainedWorld : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    testing::write_planted_world(dir_->path(), small_spec());
    const auto cfg = config();
    cmd_mutate(cfg);
    testing::extract_mutation_states(dir_->path(), small_spec());
    cmd_pretrain(cfg);
    cmd_bind(cfg);
    cmd_assess(cfg);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static PipelineConfig config() { return load_config(dir_->path() / "config.json"); }
  static const fs::path& root() { return dir_->path(); }

  static TempDir* dir_;
};

TempDir* TrainedWorld::dir_ = nullptr;

// ---------------------------------------------------------------------------
// config

TEST(Config, ResolvesPathsAgainstConfigDirectory) {
  TempDir dir;
  fs::create_directories(dir / "sub");
  write_text(dir / "sub/c.json", R"({"paths": {"corpus": "data/corpus.jsonl", "models_dir": "/abs/models"}})");
  const auto c = load_config(dir / "sub/c.json");
  EXPECT_EQ(c.paths.corpus, (dir.path() / "sub/data/corpus.jsonl").lexically_normal());
  EXPECT_EQ(c.paths.models_dir, fs::path("/abs/models"));
  EXPECT_EQ(c.metrics.k_values, (std::vector<int>{1, 3, 5}));
}

TEST(Config, EchoParsesBackToTheSameSettings) {
  const auto c = parse_config(testing::planted_config_json(small_spec()), "/work");
  EXPECT_EQ(parse_config(c.echo(), "/elsewhere").echo(), c.echo());
  EXPECT_EQ(c.sae.k, 8);
  EXPECT_EQ(c.mutated_store_paths(), (std::vector<fs::path>{"/work/mutated/mutated_pass0.ptas"}));
}

TEST(Config, RejectsInvalidDocuments) {
  EXPECT_THROW(parse_config(nlohmann::json{{"sae", {{"kk", 3}}}}, "/"), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json{{"bogus", 1}}, "/"), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json{{"metrics", {{"k_values", nlohmann::json::array()}}}}, "/"), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json{{"metrics", {{"k_values", {1, 0}}}}}, "/"), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json{{"sae", {{"k", 10}, {"latent_dim", 4}}}}, "/"), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json{{"sae", {{"k", "eight"}}}}, "/"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
  TempDir dir;
  write_text(dir / "bad.json", "{not json");
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  const auto c = parse_config(nlohmann::json::object(), "/");
  EXPECT_THROW(cmd_mutate(c), ConfigError);
}

// ---------------------------------------------------------------------------
// mutate

TEST(Mutate, CountsFollowEligibilityRules) {
  TempDir dir;
  std::vector<SnippetFileEntry> corpus;
  const std::vector<std::size_t> sizes{1, 2, 3, 4, 1, 5, 2, 6, 3, 7};
  for (std::uint32_t i = 0; i < sizes.size(); ++i) {
    SnippetFileEntry e;
    e.snippet.snippet_id = i;
    e.snippet.language = i < 6 ? "c" : "java";
    for (std::size_t l = 0; l < sizes[i]; ++l) e.snippet.lines.push_back("s" + std::to_string(i) + "_" + std::to_string(l));
    corpus.push_back(e);
  }
  write_snippets(dir / "corpus.jsonl", corpus);
  const auto cfg = parse_config({{"paths", {{"corpus", "corpus.jsonl"}, {"mutated_dir", "out"}}}}, dir.path());
  cmd_mutate(cfg);

  // Oracle: inside and delete need two lines; outside pairs languages off.
  std::size_t expect = 0;
  std::map<std::string, std::size_t> per_language;
  for (const auto& e : corpus) {
    if (e.snippet.lines.size() >= 2) expect += 2;
    ++per_language[e.snippet.language];
  }
  for (const auto& [lang, n] : per_language) expect += (n / 2) * 2;
  const auto mutated = read_snippets(dir / "out" / mutated_corpus_name(0));
  EXPECT_EQ(mutated.size(), expect);
  EXPECT_LE(mutated.size(), 30u);

  const auto specs = read_pair_specs(dir / "out" / kPairSpecsFile);
  for (const auto& m : mutated) {
    EXPECT_GE(m.snippet.snippet_id, 10u);
    ASSERT_TRUE(m.error_lines.has_value());
    EXPECT_FALSE(m.error_lines->empty());
    for (auto line : *m.error_lines)
      EXPECT_TRUE(std::ranges::any_of(specs, [&](const PairSpec& s) {
        return s.mutated_snippet_id == m.snippet.snippet_id && s.mutated_line_index == line;
      }));
  }
  const auto manifest = read_json(dir / "out" / kMutateManifest);
  EXPECT_EQ(manifest["passes"][0]["snippets"], expect);
  EXPECT_TRUE(manifest.contains("config"));
}

TEST(Mutate, RerunIsByteIdenticalAndSeedSensitive) {
  TempDir dir;
  testing::write_planted_world(dir.path(), small_spec());
  auto cfg = load_config(dir / "config.json");
  cfg.mutator.passes = 2;
  auto snapshot = [&] {
    return slurp(dir / "mutated/mutated_pass0.jsonl") + slurp(dir / "mutated/mutated_pass1.jsonl") +
           slurp(dir / "mutated" / kPairSpecsFile) + slurp(dir / "mutated" / kMutateManifest);
  };
  cmd_mutate(cfg);
  const auto first = snapshot();
  cmd_mutate(cfg);
  EXPECT_EQ(snapshot(), first);
  EXPECT_NE(slurp(dir / "mutated/mutated_pass0.jsonl"), slurp(dir / "mutated/mutated_pass1.jsonl"));
  cfg.mutator.master_seed += 1;
  cmd_mutate(cfg);
  EXPECT_NE(snapshot(), first);
}

TEST(Mutate, CorpusErrors) {
  TempDir dir;
  write_text(dir / "corpus.jsonl", "");
  const auto cfg = parse_config({{"paths", {{"corpus", "corpus.jsonl"}, {"mutated_dir", "out"}}}}, dir.path());
  EXPECT_THROW(cmd_mutate(cfg), DataError);
  write_text(dir / "corpus.jsonl", R"({"snippet_id": 0, "lines": ["a", "b"]})" "\n" "{broken\n");
  try {
    cmd_mutate(cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("corpus.jsonl:2"), std::string::npos) << e.what();
  }
}

// ---------------------------------------------------------------------------
// pretrain

TEST_F(TrainedWorld, PretrainWritesValidModelAndLog) {
  const auto cfg = config();
  const auto model = load_sae(cfg.paths.models_dir / kSaeFile);
  EXPECT_EQ(model.b_pre.size(), 16);
  EXPECT_EQ(model.w_enc.rows(), cfg.sae.latent_dim);
  EXPECT_EQ(model.k, cfg.sae.k);
  const auto log = slurp(cfg.paths.models_dir / kPretrainLog);
  EXPECT_EQ(std::ranges::count(log, '\n'), cfg.sae.epochs);
  const auto summary = read_json(cfg.paths.models_dir / kPretrainSummary);
  EXPECT_GT(summary["contrastive_pairs"].get<int>(), 0);
  EXPECT_EQ(summary["config"]["sae"]["epochs"], cfg.sae.epochs);
}

TEST(Pretrain, DimMismatchAndMissingStore) {
  TempDir dir;
  auto spec = small_spec();
  testing::write_planted_world(dir.path(), spec);
  auto cfg = load_config(dir / "config.json");
  cmd_mutate(cfg);
  EXPECT_THROW(cmd_pretrain(cfg), DataError);  // stores not extracted yet
  testing::extract_mutation_states(dir.path(), spec);
  auto wide = spec;
  wide.dim = 17;
  write_store(cfg.paths.original_store, testing::planted_header(wide),
              std::vector<ActivationRecord>{{0, 0, 0, 1, LabelFlag::correct, std::vector<float>(17, 0.5f)}});
  try {
    cmd_pretrain(cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dim mismatch"), std::string::npos) << e.what();
  }
}

// ---------------------------------------------------------------------------
// bind

TEST_F(TrainedWorld, ThresholdReproducibleFromSavedTrainingScores) {
  const auto cfg = config();
  const auto th = load_thresholds(cfg.paths.models_dir / kThresholdsFile);
  const auto again = youden_threshold(th.training_scores, th.training_labels);
  EXPECT_EQ(again.threshold, th.youden.threshold);
  EXPECT_EQ(again.j, th.youden.j);

  // The saved scores are what the saved classifier produces (up to the
  // summation order of a batched versus single-column product).
  const auto sae = load_sae(cfg.paths.models_dir / kSaeFile);
  const auto clf = load_ranker(cfg.paths.models_dir / kClassifierFile);
  const StateIndex index(cfg.paths.bind_store);
  const auto entries = read_snippets(cfg.paths.bind_snippets);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double s = score_lines(clf, std::vector{snippet_feature(sae, index.lookup(entries[i]))}).front();
    EXPECT_NEAR(s, th.training_scores[i], 1e-12);
  }
}

TEST_F(TrainedWorld, BindIsDeterministic) {
  TempDir copy;
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  const auto cfg = load_config(copy / "config.json");
  cmd_bind(cfg);
  for (const char* f : {kRankerFile, kClassifierFile, kThresholdsFile, kBindLog}) {
    const auto a = slurp(config().paths.models_dir / f);
    const auto b = slurp(cfg.paths.models_dir / f);
    if (std::string(f) == kThresholdsFile) continue;  // echoes its own paths
    EXPECT_EQ(a, b) << f;
  }
  auto ta = read_json(config().paths.models_dir / kThresholdsFile);
  auto tb = read_json(cfg.paths.models_dir / kThresholdsFile);
  ta.erase("config");
  tb.erase("config");
  EXPECT_EQ(ta, tb);
}

TEST_F(TrainedWorld, LabelLogSupersedesSnippetLabels) {
  TempDir copy;
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  const auto cfg = load_config(copy / "config.json");
  // Mark every bind snippet all-correct: nothing left to rank.
  LabelLog log(cfg.paths.labels);
  for (const auto& e : read_snippets(cfg.paths.bind_snippets)) log.append(e.snippet.snippet_id, {});
  try {
    cmd_bind(cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("excluded"), std::string::npos) << e.what();
  }
}

TEST_F(TrainedWorld, BindNeedsStatesForLabeledSnippets) {
  TempDir copy;
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  auto cfg = load_config(copy / "config.json");
  auto recs = read_store(cfg.paths.bind_store);
  std::erase_if(recs, [](const ActivationRecord& r) { return r.snippet_id == 1'000'003 && r.line_index == 1; });
  write_store(cfg.paths.bind_store, testing::planted_header(small_spec()), recs);
  EXPECT_THROW(cmd_bind(cfg), DataError);
  fs::remove(cfg.paths.models_dir / kSaeFile);
  EXPECT_THROW(cmd_bind(cfg), ModelFileError);
}

// ---------------------------------------------------------------------------
// assess

TEST_F(TrainedWorld, PlantedBuggyLinesRankFirst) {
  const auto cfg = config();
  std::size_t buggy = 0, top = 0;
  for (const auto& e : read_snippets(cfg.paths.assess_snippets)) {
    const auto r = read_json(cfg.paths.reports_dir / report_name(e.snippet.snippet_id));
    ASSERT_EQ(r["lines"].size(), e.snippet.lines.size());
    EXPECT_EQ(r["model_ids"]["sae"].get<std::string>().size(), 16u);
    for (std::size_t l = 0; l < e.snippet.lines.size(); ++l) EXPECT_EQ(r["lines"][l]["text"], e.snippet.lines[l]);
    if (e.error_lines->empty()) continue;
    ++buggy;
    const auto bad = e.error_lines->front();
    top += r["lines"][bad]["rank"] == 0 ? 1 : 0;
  }
  ASSERT_GT(buggy, 10u);
  EXPECT_GE(static_cast<double>(top) / static_cast<double>(buggy), 0.9);
}

TEST_F(TrainedWorld, AssessIsIdempotentAndIsolatesFailures) {
  TempDir copy;
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  const auto cfg = load_config(copy / "config.json");
  const auto before = slurp(cfg.paths.reports_dir / report_name(2'000'000));

  // Append a one-line snippet with inline states and one with no states.
  auto entries = read_snippets(cfg.paths.assess_snippets);
  SnippetFileEntry one;
  one.snippet = {3'000'000, "c", {"return 0;"}};
  one.line_states = std::vector<std::vector<float>>{std::vector<float>(16, 0.1f)};
  SnippetFileEntry missing;
  missing.snippet = {3'000'001, "c", {"a", "b"}};
  entries.push_back(one);
  entries.push_back(missing);
  write_snippets(cfg.paths.assess_snippets, entries);

  const auto summary = cmd_assess(cfg);
  EXPECT_EQ(summary["errors"], 1);
  EXPECT_EQ(summary["reports"], entries.size() - 1);
  EXPECT_EQ(slurp(cfg.paths.reports_dir / report_name(2'000'000)), before);
  const auto single = read_json(cfg.paths.reports_dir / report_name(3'000'000));
  ASSERT_EQ(single["lines"].size(), 1u);
  EXPECT_EQ(single["lines"][0]["rank"], 0);
  const auto errors = slurp(cfg.paths.reports_dir / kAssessErrors);
  EXPECT_NE(errors.find("3000001"), std::string::npos);
  EXPECT_FALSE(fs::exists(cfg.paths.reports_dir / report_name(3'000'001)));
}

// ---------------------------------------------------------------------------
// eval

TEST_F(TrainedWorld, EvalReportsEveryKAndBaselineMatchesOracle) {
  TempDir copy;
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  const auto cfg = load_config(copy / "config.json");
  cmd_eval(cfg);
  const auto m = read_json(cfg.paths.eval_dir / kMetricsFile);
  EXPECT_EQ(m["topk_hit_rate"].size(), 3u);
  double prev = 0;
  for (const char* k : {"1", "3", "5"}) {
    EXPECT_GE(m["topk_hit_rate"][k].get<double>(), prev);
    prev = m["topk_hit_rate"][k].get<double>();
  }
  EXPECT_EQ(m["diff_map"]["buggy_lines"].get<int>() > 0, true);
  EXPECT_EQ(read_json(cfg.paths.eval_dir / kDiffMapFile).size(), 64u);
  ASSERT_FALSE(m["wasserstein_matrix"].is_null());  // c and python groups
  EXPECT_EQ(m["wasserstein_matrix"]["distance"].size(), 2u);

  // Oracle for the baseline block: hand-rolled per-line 1 - mean confidence.
  std::vector<RiskReport> reps;
  std::vector<LineLabelSet> labels;
  const StateIndex index(cfg.paths.assess_store);
  for (const auto& e : read_snippets(cfg.paths.assess_snippets)) {
    std::vector<double> risk;
    for (const auto& line : *e.token_confidences) {
      double s = 0;
      for (double c : line) s += c;
      risk.push_back(1.0 - s / static_cast<double>(line.size()));
    }
    reps.push_back(make_risk_report(e.snippet.snippet_id, risk));
    labels.push_back(label_set(e, *e.error_lines, index.lookup(e).token_counts));
  }
  for (int k : {1, 3, 5})
    EXPECT_EQ(m["uncertainty_baseline"]["topk_hit_rate"][std::to_string(k)].get<double>(),
              mean_hit_rate(reps, labels, static_cast<std::size_t>(k)));
  EXPECT_TRUE(m["uncertainty_baseline"]["snippet_accuracy"].is_number());
}

TEST_F(TrainedWorld, PerfectReportsScoreOne) {
  TempDir copy;
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  const auto cfg = load_config(copy / "config.json");
  for (const auto& e : read_snippets(cfg.paths.assess_snippets)) {
    const auto path = cfg.paths.reports_dir / report_name(e.snippet.snippet_id);
    auto r = read_json(path);
    std::vector<double> risk;
    for (std::uint32_t l = 0; l < e.snippet.lines.size(); ++l)
      risk.push_back(std::ranges::find(*e.error_lines, l) != e.error_lines->end() ? 0.9 : 0.1);
    const auto ranked = make_risk_report(e.snippet.snippet_id, risk);
    for (std::size_t l = 0; l < risk.size(); ++l) {
      r["lines"][l]["risk"] = risk[l];
      r["lines"][l]["rank"] = ranked.lines[l].rank;
    }
    r["snippet_risk"] = e.error_lines->empty() ? 0.1 : 0.9;
    r["threshold"] = 0.5;
    io::write_file_atomic(path, r.dump());
  }
  cmd_eval(cfg);
  const auto m = read_json(cfg.paths.eval_dir / kMetricsFile);
  for (const char* k : {"1", "3", "5"}) EXPECT_EQ(m["topk_hit_rate"][k], 1.0);
  EXPECT_EQ(m["snippet_accuracy"], 1.0);
}

TEST_F(TrainedWorld, EvalNeedsAJoin) {
  TempDir copy;
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  const auto cfg = load_config(copy / "config.json");
  for (const auto& f : fs::directory_iterator(cfg.paths.reports_dir))
    if (f.path().filename().string().starts_with("snippet_")) fs::remove(f.path());
  EXPECT_THROW(cmd_eval(cfg), DataError);
}

// ---------------------------------------------------------------------------
// label log

TEST(LabelLog, LaterRecordsSupersedeAndTornTailIsIgnored) {
  TempDir dir;
  {
    LabelLog log(dir / "labels.jsonl");
    log.append(4, {3, 1, 3});
    log.append(5, {});
    const auto rec = log.append(4, {2});
    EXPECT_EQ(log.latest(4)->error_lines, (std::vector<std::uint32_t>{2}));
    EXPECT_FALSE(rec.stored_at.empty());
    EXPECT_FALSE(log.latest(6).has_value());
  }
  std::ofstream(dir / "labels.jsonl", std::ios::app) << R"({"snippet_id": 5, "error_li)";
  const auto all = read_labels(dir / "labels.jsonl");
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all.at(4).error_lines, (std::vector<std::uint32_t>{2}));
  EXPECT_TRUE(all.at(5).error_lines.empty());
  EXPECT_EQ(LabelLog(dir / "labels.jsonl").latest(4)->error_lines, (std::vector<std::uint32_t>{2}));
  write_text(dir / "bad.jsonl", "{\"snippet_id\": 1, \"error_lines\": [0]}\nnot json\n");
  try {
    read_labels(dir / "bad.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  EXPECT_TRUE(read_labels(dir / "absent.jsonl").empty());
}

}  // namespace
}  // namespace pttrust
