#ifndef PTTRUST_PIPELINE_HPP_
#define PTTRUST_PIPELINE_HPP_

// The five offline commands. Each reads its inputs from the config's paths,
// writes its artifacts atomically, and returns a JSON summary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pttrust/activation_store.hpp"
#include "pttrust/binary_io.hpp"
#include "pttrust/config.hpp"
#include "pttrust/corpus.hpp"
#include "pttrust/errors.hpp"
#include "pttrust/evalkit.hpp"
#include "pttrust/labels.hpp"
#include "pttrust/mutator.hpp"
#include "pttrust/ranker.hpp"
#include "pttrust/sae.hpp"

namespace pttrust {

// Artifact names inside the configured directories.
inline constexpr const char* kPairSpecsFile = "pair_specs.jsonl";
inline constexpr const char* kMutateManifest = "manifest.json";
inline constexpr const char* kSaeFile = "sae.ptsm";
inline constexpr const char* kPretrainLog = "pretrain_log.jsonl";
inline constexpr const char* kPretrainSummary = "pretrain_summary.json";
inline constexpr const char* kRankerFile = "ranker.ptrk";
inline constexpr const char* kClassifierFile = "classifier.ptrk";
inline constexpr const char* kThresholdsFile = "thresholds.json";
inline constexpr const char* kBindLog = "bind_log.jsonl";
inline constexpr const char* kAssessErrors = "assess_errors.jsonl";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kDiffMapFile = "diff_map.json";

inline std::string mutated_corpus_name(int pass) { return "mutated_pass" + std::to_string(pass) + ".jsonl"; }
inline std::string report_name(std::uint32_t id) { return "snippet_" + std::to_string(id) + ".json"; }

namespace detail {

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  io::write_file_atomic(path, j.dump(2) + "\n");
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline nlohmann::json real_or_tag(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline double real_from(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

inline std::string model_id(const fs::path& path) {
  try {
    return io::hex64(io::fnv1a64(io::read_file(path)));
  } catch (const std::runtime_error& e) {
    throw ModelFileError(e.what());
  }
}

inline std::vector<ActivationRecord> read_store_or_throw(const fs::path& path, StoreHeader* header = nullptr) {
  if (!fs::exists(path)) throw DataError("activation store not found: " + path.string());
  return read_store(path, {}, header);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// State lookup shared by bind, assess and eval

struct SnippetStates {
  std::vector<Eigen::VectorXd> lines;
  std::optional<Eigen::VectorXd> final_state;
  std::vector<std::uint32_t> token_counts;
};

/// Store records grouped by snippet. An empty path yields an empty index.
class StateIndex {
 public:
  StateIndex() = default;
  explicit StateIndex(const fs::path& store) {
    if (store.empty()) return;
    for (auto& g : group_by_snippet(detail::read_store_or_throw(store, &header_))) groups_.emplace(g.snippet_id, std::move(g));
  }

  /// States for one snippet: inline states win, then the store. Throws
  /// DataError when any line is missing.
  SnippetStates lookup(const SnippetFileEntry& e) const {
    const auto& s = e.snippet;
    SnippetStates out;
    if (e.line_states) {
      for (const auto& v : *e.line_states) out.lines.push_back(to_eigen(v));
      if (e.final_state) out.final_state = to_eigen(*e.final_state);
      for (const auto& text : s.lines) out.token_counts.push_back(std::max<std::uint32_t>(1, whitespace_token_count(text)));
      return out;
    }
    auto it = groups_.find(s.snippet_id);
    if (it == groups_.end()) throw DataError("no states for snippet " + std::to_string(s.snippet_id));
    std::size_t next = 0;
    for (const auto& rec : it->second.lines) {
      if (rec.is_final_token()) {
        out.final_state = to_eigen(rec.vector);
        continue;
      }
      if (rec.line_index != next)
        throw DataError("snippet " + std::to_string(s.snippet_id) + ": missing state for line " + std::to_string(next));
      out.lines.push_back(to_eigen(rec.vector));
      out.token_counts.push_back(rec.line_token_count);
      ++next;
    }
    if (next != s.lines.size())
      throw DataError("snippet " + std::to_string(s.snippet_id) + ": store has " + std::to_string(next) +
                      " line states for " + std::to_string(s.lines.size()) + " lines");
    return out;
  }

  const StoreHeader& header() const noexcept { return header_; }

 private:
  StoreHeader header_;
  std::map<std::uint32_t, SnippetGroup> groups_;
};

inline std::vector<Eigen::VectorXd> latents_of(const SaeModel& sae, const std::vector<Eigen::VectorXd>& states) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(states.size());
  for (const auto& s : states) {
    if (s.size() != sae.b_pre.size())
      throw DataError("state width " + std::to_string(s.size()) + " does not match SAE input width " +
                      std::to_string(sae.b_pre.size()));
    out.push_back(encode(sae, s).values);
  }
  return out;
}

/// Snippet-classifier input: latent of the final-token state, or of the
/// last line's state when no final-token record exists.
inline Eigen::VectorXd snippet_feature(const SaeModel& sae, const SnippetStates& st) {
  const Eigen::VectorXd& s = st.final_state ? *st.final_state : st.lines.back();
  if (s.size() != sae.b_pre.size()) throw DataError("final state width does not match SAE input width");
  return encode(sae, s).values;
}

inline LineLabelSet label_set(const SnippetFileEntry& e, const std::vector<std::uint32_t>& errors,
                              const std::vector<std::uint32_t>& token_counts) {
  LineLabelSet l;
  l.snippet_id = e.snippet.snippet_id;
  l.error_lines = errors;
  l.line_token_counts = token_counts;
  for (const auto& text : e.snippet.lines) l.line_lengths.push_back(static_cast<std::uint32_t>(text.size()));
  l.validate();
  return l;
}

/// Labels from the snippet file, superseded by the label log when present.
inline std::map<std::uint32_t, std::vector<std::uint32_t>> effective_labels(const std::vector<SnippetFileEntry>& entries,
                                                                            const fs::path& label_log) {
  std::map<std::uint32_t, std::vector<std::uint32_t>> out;
  for (const auto& e : entries)
    if (e.error_lines) out[e.snippet.snippet_id] = *e.error_lines;
  if (!label_log.empty())
    for (auto& [id, rec] : read_labels(label_log)) out[id] = rec.error_lines;
  return out;
}

// ---------------------------------------------------------------------------
// mutate

inline nlohmann::json cmd_mutate(const PipelineConfig& cfg) {
  const auto corpus = read_snippets(cfg.require(cfg.paths.corpus, "corpus"));
  if (corpus.empty()) throw DataError("corpus is empty: " + cfg.paths.corpus.string());
  const auto& out_dir = cfg.require(cfg.paths.mutated_dir, "mutated_dir");
  detail::ensure_dir(out_dir);

  std::uint32_t next_id = 0;
  for (const auto& e : corpus) next_id = std::max(next_id, e.snippet.snippet_id + 1);

  std::vector<PairSpec> specs;
  nlohmann::json passes = nlohmann::json::array();
  for (int p = 0; p < cfg.mutator.passes; ++p) {
    const auto first_id = next_id;
    auto r = run_mutation_pass(corpus, {cfg.mutator.master_seed, static_cast<std::uint32_t>(p), cfg.mutator.same_language},
                               next_id);
    write_snippets(out_dir / mutated_corpus_name(p), r.mutated);
    passes.push_back({{"pass", p},
                      {"file", mutated_corpus_name(p)},
                      {"snippets", r.mutated.size()},
                      {"pair_specs", r.specs.size()},
                      {"first_snippet_id", first_id}});
    specs.insert(specs.end(), r.specs.begin(), r.specs.end());
  }
  io::write_file_atomic(out_dir / kPairSpecsFile, serialize_pair_specs(specs));
  const nlohmann::json manifest = {{"config", cfg.echo()}, {"passes", passes}, {"next_snippet_id", next_id}};
  detail::write_json(out_dir / kMutateManifest, manifest);
  return {{"command", "mutate"}, {"passes", passes}, {"pair_specs", specs.size()}};
}

// ---------------------------------------------------------------------------
// pretrain

inline nlohmann::json cmd_pretrain(const PipelineConfig& cfg) {
  StoreHeader orig_header;
  auto original = detail::read_store_or_throw(cfg.require(cfg.paths.original_store, "original_store"), &orig_header);
  std::erase_if(original, [](const ActivationRecord& r) { return r.is_final_token(); });

  std::vector<ActivationRecord> mutated;
  for (const auto& path : cfg.mutated_store_paths()) {
    StoreHeader h;
    auto recs = detail::read_store_or_throw(path, &h);
    if (h.dim != orig_header.dim)
      throw DataError("dim mismatch: " + path.string() + " has dim " + std::to_string(h.dim) + ", original store has " +
                      std::to_string(orig_header.dim));
    for (auto& r : recs)
      if (!r.is_final_token()) mutated.push_back(std::move(r));
  }

  std::vector<PairSpec> specs;
  if (!cfg.paths.mutated_dir.empty() && fs::exists(cfg.paths.mutated_dir / kPairSpecsFile))
    specs = read_pair_specs(cfg.paths.mutated_dir / kPairSpecsFile);
  const auto pairs = build_contrastive_pairs(specs, original, mutated, cfg.sae.margin);

  std::vector<Eigen::VectorXd> states;
  states.reserve(original.size() + mutated.size());
  for (const auto& r : original) states.push_back(to_eigen(r.vector));
  for (const auto& r : mutated) states.push_back(to_eigen(r.vector));
  if (states.empty()) throw DataError("no line states to train on");

  const auto result = train_sae(states, pairs.pairs, cfg.sae);
  const auto& models = cfg.require(cfg.paths.models_dir, "models_dir");
  detail::ensure_dir(models);
  save_sae(models / kSaeFile, result.model);
  std::string log;
  for (const auto& e : result.log) log += nlohmann::json(e).dump() + "\n";
  io::write_file_atomic(models / kPretrainLog, log);
  const nlohmann::json summary = {{"config", cfg.echo()},
                                  {"states", states.size()},
                                  {"contrastive_pairs", pairs.pairs.size()},
                                  {"unresolved_pair_specs", pairs.skipped.size()},
                                  {"initial_plain", result.initial_plain},
                                  {"final_plain", result.log.back().plain},
                                  {"sae_id", detail::model_id(models / kSaeFile)}};
  detail::write_json(models / kPretrainSummary, summary);
  return {{"command", "pretrain"},
          {"states", states.size()},
          {"contrastive_pairs", pairs.pairs.size()},
          {"initial_plain", result.initial_plain},
          {"final_plain", result.log.back().plain}};
}

// ---------------------------------------------------------------------------
// bind

struct Thresholds {
  YoudenResult youden;
  std::vector<std::uint32_t> snippet_ids;
  std::vector<double> training_scores;
  std::vector<bool> training_labels;  // true = incorrect
};

inline nlohmann::json thresholds_json(const Thresholds& t, const nlohmann::json& config) {
  nlohmann::json scores = nlohmann::json::array();
  for (std::size_t i = 0; i < t.training_scores.size(); ++i)
    scores.push_back({{"snippet_id", t.snippet_ids[i]}, {"score", t.training_scores[i]}, {"incorrect", t.training_labels[i]}});
  return {{"youden_threshold", detail::real_or_tag(t.youden.threshold)},
          {"j", t.youden.j},
          {"sensitivity", t.youden.sensitivity},
          {"specificity", t.youden.specificity},
          {"training_scores", scores},
          {"config", config}};
}

inline Thresholds load_thresholds(const fs::path& path) {
  Thresholds t;
  try {
    const auto j = nlohmann::json::parse(io::read_file(path));
    t.youden.threshold = detail::real_from(j.at("youden_threshold"));
    t.youden.j = j.at("j").get<double>();
    t.youden.sensitivity = j.at("sensitivity").get<double>();
    t.youden.specificity = j.at("specificity").get<double>();
    for (const auto& s : j.at("training_scores")) {
      t.snippet_ids.push_back(s.at("snippet_id").get<std::uint32_t>());
      t.training_scores.push_back(s.at("score").get<double>());
      t.training_labels.push_back(s.at("incorrect").get<bool>());
    }
  } catch (const std::exception& e) {
    throw ModelFileError("thresholds file " + path.string() + ": " + e.what());
  }
  return t;
}

inline nlohmann::json cmd_bind(const PipelineConfig& cfg) {
  const auto& models = cfg.require(cfg.paths.models_dir, "models_dir");
  const SaeModel sae = load_sae(models / kSaeFile);
  const auto entries = read_snippets(cfg.require(cfg.paths.bind_snippets, "bind_snippets"));
  const StateIndex index(cfg.paths.bind_store);
  const auto labels = effective_labels(entries, cfg.paths.labels);

  std::vector<RankingExample> ranking;
  std::vector<Eigen::VectorXd> features;
  std::vector<bool> incorrect;
  std::vector<std::uint32_t> ids;
  std::size_t unlabeled = 0;
  for (const auto& e : entries) {
    auto it = labels.find(e.snippet.snippet_id);
    if (it == labels.end()) {
      ++unlabeled;
      continue;
    }
    for (auto line : it->second)
      if (line >= e.snippet.lines.size())
        throw DataError("label for snippet " + std::to_string(e.snippet.snippet_id) + " names line " +
                        std::to_string(line) + " beyond its end");
    const auto st = index.lookup(e);
    RankingExample ex;
    ex.lines = latents_of(sae, st.lines);
    ex.labels = label_set(e, it->second, st.token_counts);
    features.push_back(snippet_feature(sae, st));
    incorrect.push_back(!it->second.empty());
    ids.push_back(e.snippet.snippet_id);
    ranking.push_back(std::move(ex));
  }
  if (std::ranges::none_of(incorrect, [](bool b) { return b; }))
    throw DataError("no labeled snippet has error lines; every snippet would be excluded from ranking");

  const auto ranker = train_ranker(ranking, cfg.ranker, static_cast<int>(sae.w_enc.rows()));
  const auto clf = train_snippet_classifier(features, incorrect, cfg.classifier, static_cast<int>(sae.w_enc.rows()));

  save_ranker(models / kRankerFile, ranker.params);
  save_ranker(models / kClassifierFile, clf.params);
  const Thresholds th{clf.threshold, ids, clf.training_scores, incorrect};
  detail::write_json(models / kThresholdsFile, thresholds_json(th, cfg.echo()));
  std::string log;
  for (const auto& e : ranker.log) log += nlohmann::json{{"stage", "ranker"}, {"epoch", e.epoch}, {"loss", e.loss}, {"ndcg", e.ndcg}}.dump() + "\n";
  for (std::size_t i = 0; i < clf.epoch_loss.size(); ++i)
    log += nlohmann::json{{"stage", "classifier"}, {"epoch", i}, {"loss", clf.epoch_loss[i]}}.dump() + "\n";
  io::write_file_atomic(models / kBindLog, log);
  return {{"command", "bind"},
          {"labeled_snippets", ids.size()},
          {"unlabeled_snippets", unlabeled},
          {"excluded_from_ranking", ranker.excluded},
          {"final_ndcg", ranker.log.back().ndcg},
          {"youden_threshold", detail::real_or_tag(clf.threshold.threshold)},
          {"youden_j", clf.threshold.j}};
}

// ---------------------------------------------------------------------------
// assess

struct AssessModels {
  SaeModel sae;
  RankerParams ranker;
  RankerParams classifier;
  Thresholds thresholds;
  nlohmann::json ids;

  static AssessModels load(const fs::path& models) {
    AssessModels m{load_sae(models / kSaeFile), load_ranker(models / kRankerFile), load_ranker(models / kClassifierFile),
                   load_thresholds(models / kThresholdsFile), nlohmann::json::object()};
    m.ids = {{"sae", detail::model_id(models / kSaeFile)},
             {"ranker", detail::model_id(models / kRankerFile)},
             {"classifier", detail::model_id(models / kClassifierFile)}};
    const auto m_width = static_cast<int>(m.sae.w_enc.rows());
    if (m.ranker.input_width() != m_width || m.classifier.input_width() != m_width)
      throw ModelFileError("ranker/classifier input width does not match the SAE latent width");
    return m;
  }
};

inline nlohmann::json assess_snippet(const AssessModels& models, const SnippetFileEntry& e, const SnippetStates& st) {
  const auto latents = latents_of(models.sae, st.lines);
  const auto risks = score_lines(models.ranker, latents);
  const auto report = make_risk_report(e.snippet.snippet_id, risks);
  const double snippet_risk = score_lines(models.classifier, std::vector{snippet_feature(models.sae, st)}).front();
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& r : report.lines)
    lines.push_back({{"index", r.line_index}, {"text", e.snippet.lines[r.line_index]}, {"risk", r.risk}, {"rank", r.rank}});
  return {{"snippet_id", e.snippet.snippet_id},
          {"language", e.snippet.language},
          {"task", e.task},
          {"lines", lines},
          {"snippet_risk", snippet_risk},
          {"threshold", detail::real_or_tag(models.thresholds.youden.threshold)},
          {"predicted_incorrect", snippet_risk > models.thresholds.youden.threshold},
          {"model_ids", models.ids}};
}

inline nlohmann::json cmd_assess(const PipelineConfig& cfg) {
  const auto models = AssessModels::load(cfg.require(cfg.paths.models_dir, "models_dir"));
  const auto entries = read_snippets(cfg.require(cfg.paths.assess_snippets, "assess_snippets"));
  const StateIndex index(cfg.paths.assess_store);
  const auto& out = cfg.require(cfg.paths.reports_dir, "reports_dir");
  detail::ensure_dir(out);

  std::string errors;
  std::size_t written = 0, failed = 0;
  for (const auto& e : entries) {
    try {
      const auto report = assess_snippet(models, e, index.lookup(e));
      detail::write_json(out / report_name(e.snippet.snippet_id), report);
      ++written;
    } catch (const DataError& err) {
      errors += nlohmann::json{{"snippet_id", e.snippet.snippet_id}, {"error", err.what()}}.dump() + "\n";
      ++failed;
    }
  }
  io::write_file_atomic(out / kAssessErrors, errors);
  return {{"command", "assess"}, {"reports", written}, {"errors", failed}};
}

// ---------------------------------------------------------------------------
// eval

/// Reports previously written by assess, keyed by snippet id.
inline std::map<std::uint32_t, nlohmann::json> read_reports(const fs::path& dir) {
  std::map<std::uint32_t, nlohmann::json> out;
  if (!fs::is_directory(dir)) throw DataError("reports directory not found: " + dir.string());
  for (const auto& ent : fs::directory_iterator(dir)) {
    const auto name = ent.path().filename().string();
    if (!name.starts_with("snippet_") || ent.path().extension() != ".json") continue;
    try {
      auto j = nlohmann::json::parse(io::read_file(ent.path()));
      const auto id = j.at("snippet_id").get<std::uint32_t>();
      out.emplace(id, std::move(j));
    } catch (const std::exception& e) {
      throw DataError("report " + ent.path().string() + ": " + e.what());
    }
  }
  return out;
}

inline RiskReport risk_report_from_json(const nlohmann::json& j) {
  RiskReport r;
  r.snippet_id = j.at("snippet_id").get<std::uint32_t>();
  for (const auto& l : j.at("lines"))
    r.lines.push_back({l.at("index").get<std::uint32_t>(), l.at("risk").get<double>(), l.at("rank").get<std::uint32_t>()});
  std::ranges::sort(r.lines, {}, &RiskEntry::line_index);
  for (std::size_t i = 0; i < r.lines.size(); ++i)
    if (r.lines[i].line_index != i || r.lines[i].rank >= r.lines.size())
      throw DataError("report for snippet " + std::to_string(r.snippet_id) + " has malformed line entries");
  if (j.contains("snippet_risk") && j["snippet_risk"].is_number()) r.snippet_risk = j["snippet_risk"].get<double>();
  if (j.contains("threshold") && !j["threshold"].is_null()) r.threshold = detail::real_from(j["threshold"]);
  return r;
}

inline nlohmann::json hit_rate_block(const std::vector<RiskReport>& reports, const std::vector<LineLabelSet>& labels,
                                     const std::vector<int>& ks) {
  nlohmann::json out = nlohmann::json::object();
  for (int k : ks) out[std::to_string(k)] = mean_hit_rate(reports, labels, static_cast<std::size_t>(k));
  return out;
}

inline nlohmann::json cmd_eval(const PipelineConfig& cfg) {
  const auto& models_dir = cfg.require(cfg.paths.models_dir, "models_dir");
  const SaeModel sae = load_sae(models_dir / kSaeFile);
  const auto reports = read_reports(cfg.require(cfg.paths.reports_dir, "reports_dir"));
  const auto entries = read_snippets(cfg.require(cfg.paths.assess_snippets, "assess_snippets"));
  const auto truth = effective_labels(entries, cfg.paths.eval_labels);
  const StateIndex index(cfg.paths.assess_store);

  std::vector<RiskReport> joined;
  std::vector<LineLabelSet> labels;
  std::vector<const SnippetFileEntry*> joined_entries;
  std::vector<LabeledLatents> latent_sets;
  std::vector<bool> predicted, actual;
  for (const auto& e : entries) {
    const auto rep = reports.find(e.snippet.snippet_id);
    const auto lab = truth.find(e.snippet.snippet_id);
    if (rep == reports.end() || lab == truth.end()) continue;
    auto report = risk_report_from_json(rep->second);
    if (report.lines.size() != e.snippet.lines.size())
      throw DataError("report for snippet " + std::to_string(e.snippet.snippet_id) + " does not match the snippet");
    const auto st = index.lookup(e);
    auto ls = label_set(e, lab->second, st.token_counts);
    if (report.snippet_risk && report.threshold) {
      predicted.push_back(*report.snippet_risk > *report.threshold);
      actual.push_back(!lab->second.empty());
    }
    latent_sets.push_back({{}, ls});
    for (auto& v : latents_of(sae, st.lines)) latent_sets.back().lines.push_back({std::move(v), {}});
    joined.push_back(std::move(report));
    labels.push_back(std::move(ls));
    joined_entries.push_back(&e);
  }
  if (joined.empty()) throw DataError("no report joins a labeled snippet");

  nlohmann::json metrics;
  metrics["dataset"] = cfg.metrics.dataset;
  metrics["model"] = reports.begin()->second.value("model_ids", nlohmann::json::object());
  metrics["K_values"] = cfg.metrics.k_values;
  const auto included = static_cast<std::size_t>(
      std::ranges::count_if(labels, [](const LineLabelSet& l) { return !l.error_lines.empty(); }));
  metrics["topk_hit_rate"] = included > 0 ? hit_rate_block(joined, labels, cfg.metrics.k_values) : nlohmann::json();
  metrics["evaluated_snippets"] = joined.size();
  metrics["hit_rate_snippets"] = included;
  metrics["snippet_accuracy"] = predicted.empty() ? nlohmann::json() : nlohmann::json(snippet_accuracy(predicted, actual));

  // Token-confidence baseline, when every joined snippet carries confidences.
  const bool have_conf = std::ranges::all_of(joined_entries, [](const SnippetFileEntry* e) { return e->token_confidences.has_value(); });
  if (have_conf) {
    std::vector<RiskReport> base;
    for (const auto* e : joined_entries)
      base.push_back(make_risk_report(e->snippet.snippet_id, uncertainty_line_risk(*e->token_confidences)));
    nlohmann::json block{
        {"topk_hit_rate", included > 0 ? hit_rate_block(base, labels, cfg.metrics.k_values) : nlohmann::json()}};
    // The snippet-level cutoff is fit on the bind snippets, like the classifier's.
    block["snippet_accuracy"] = nullptr;
    block["threshold"] = nullptr;
    if (!cfg.paths.bind_snippets.empty() && fs::exists(cfg.paths.bind_snippets)) {
      const auto bind_entries = read_snippets(cfg.paths.bind_snippets);
      const auto bind_labels = effective_labels(bind_entries, cfg.paths.labels);
      std::vector<double> scores;
      std::vector<bool> positive;
      for (const auto& e : bind_entries) {
        auto it = bind_labels.find(e.snippet.snippet_id);
        if (it == bind_labels.end() || !e.token_confidences) continue;
        scores.push_back(uncertainty_snippet_risk(*e.token_confidences));
        positive.push_back(!it->second.empty());
      }
      if (std::ranges::count(positive, true) > 0 && std::ranges::count(positive, false) > 0) {
        const auto th = youden_threshold(scores, positive);
        std::vector<bool> pred, act;
        for (std::size_t i = 0; i < joined_entries.size(); ++i) {
          pred.push_back(uncertainty_snippet_risk(*joined_entries[i]->token_confidences) > th.threshold);
          act.push_back(!labels[i].error_lines.empty());
        }
        block["snippet_accuracy"] = snippet_accuracy(pred, act);
        block["threshold"] = detail::real_or_tag(th.threshold);
      }
    }
    metrics["uncertainty_baseline"] = block;
  } else {
    metrics["uncertainty_baseline"] = nullptr;
  }

  const auto& out = cfg.require(cfg.paths.eval_dir, "eval_dir");
  detail::ensure_dir(out);

  // Difference map over the joined snippets.
  std::size_t buggy_lines = 0;
  for (const auto& l : labels) buggy_lines += l.error_lines.size();
  std::size_t all_lines = 0;
  for (const auto& l : labels) all_lines += l.line_count();
  if (buggy_lines > 0 && buggy_lines < all_lines) {
    const auto diff = activation_diff_map(latent_sets);
    nlohmann::json values = nlohmann::json::array();
    for (Eigen::Index i = 0; i < diff.values.size(); ++i) values.push_back(diff.values[i]);
    io::write_file_atomic(out / kDiffMapFile, values.dump() + "\n");
    Eigen::Index top = 0;
    diff.values.cwiseAbs().maxCoeff(&top);
    metrics["diff_map_path"] = (out / kDiffMapFile).string();
    metrics["diff_map"] = {{"buggy_lines", diff.buggy_lines}, {"correct_lines", diff.correct_lines}, {"top_latent", top}, {"top_value", diff.values[top]}};
  } else {
    metrics["diff_map_path"] = nullptr;
    metrics["diff_map"] = nullptr;
  }

  // Cross-distribution distances: configured groups, else languages of the
  // assessed snippets.
  std::map<GroupKey, std::vector<Eigen::VectorXd>> groups;
  auto instance = [&](const std::vector<Eigen::VectorXd>& lat) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(sae.w_enc.rows());
    for (const auto& v : lat) mean += v;
    return Eigen::VectorXd(mean / static_cast<double>(lat.size()));
  };
  if (!cfg.metrics.groups.empty()) {
    for (const auto& g : cfg.metrics.groups) {
      const StateIndex gi(g.store);
      auto& bucket = groups[{g.language, g.dataset}];
      for (const auto& e : read_snippets(g.snippets)) bucket.push_back(instance(latents_of(sae, gi.lookup(e).lines)));
    }
  } else {
    for (const auto& ls : latent_sets) {
      std::vector<Eigen::VectorXd> lat;
      for (const auto& l : ls.lines) lat.push_back(l.values);
      const auto* e = joined_entries[static_cast<std::size_t>(&ls - latent_sets.data())];
      groups[{e->snippet.language, cfg.metrics.dataset}].push_back(instance(lat));
    }
  }
  if (groups.size() >= 2) {
    const auto m = cross_distribution_matrix(groups);
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& k : m.groups) keys.push_back({{"language", k.language}, {"dataset", k.dataset}});
    nlohmann::json w{{"groups", keys}, {"distance", matrix_to_json(m.distance)}};
    if (cfg.metrics.layout) {
      std::vector<std::string> langs;
      for (const auto& k : m.groups)
        if (std::ranges::find(langs, k.language) == langs.end()) langs.push_back(k.language);
      w["layout"] = {{"languages", langs},
                     {"lower", cfg.metrics.layout->first},
                     {"upper", cfg.metrics.layout->second},
                     {"matrix", matrix_to_json(language_layout(m, langs, cfg.metrics.layout->first, cfg.metrics.layout->second))}};
    }
    metrics["wasserstein_matrix"] = w;
  } else {
    metrics["wasserstein_matrix"] = nullptr;
  }
  metrics["config"] = cfg.echo();
  detail::write_json(out / kMetricsFile, metrics);

  nlohmann::json summary = {{"command", "eval"}, {"topk_hit_rate", metrics["topk_hit_rate"]},
                            {"snippet_accuracy", metrics["snippet_accuracy"]}};
  return summary;
}

}  // namespace pttrust

#endif  // PTTRUST_PIPELINE_HPP_
