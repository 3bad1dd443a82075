#ifndef PTTRUST_CONFIG_HPP_
#define PTTRUST_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pttrust/errors.hpp"
#include "pttrust/ranker.hpp"
#include "pttrust/sae.hpp"

namespace pttrust {

namespace fs = std::filesystem;

struct PipelinePaths {
  fs::path corpus;           // original snippets (mutate input)
  fs::path mutated_dir;      // mutate output
  fs::path original_store;   // states of the original corpus
  std::vector<fs::path> mutated_stores;  // one per pass; default <mutated_dir>/mutated_pass<p>.ptas
  fs::path bind_snippets;    // generated snippets used for binding
  fs::path bind_store;
  fs::path labels;           // reviewer label log
  fs::path assess_snippets;
  fs::path assess_store;
  fs::path eval_labels;      // optional override of assess_snippets labels
  fs::path models_dir;
  fs::path reports_dir;
  fs::path eval_dir;
};

struct MutatorConfig {
  std::uint64_t master_seed = 0;
  int passes = 1;
  bool same_language = true;
};

struct MetricGroup {
  std::string language;
  std::string dataset;
  fs::path snippets;
  fs::path store;  // optional when snippets carry inline states
};

struct MetricsConfig {
  std::vector<int> k_values{1, 3, 5};
  std::string dataset = "default";
  std::vector<MetricGroup> groups;
  std::optional<std::pair<std::string, std::string>> layout;  // (lower, upper) datasets
};

struct ServeConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
};

struct PipelineConfig {
  fs::path source;  // config file it was loaded from
  PipelinePaths paths;
  SaeTrainConfig sae;
  RankerTrainConfig ranker;
  RankerTrainConfig classifier;
  MutatorConfig mutator;
  MetricsConfig metrics;
  ServeConfig serve;

  void validate() const {
    sae.validate();
    ranker.validate();
    classifier.validate();
    if (mutator.passes < 1) throw ConfigError("mutator.passes must be >= 1");
    if (metrics.k_values.empty()) throw ConfigError("metrics.k_values must not be empty");
    for (int k : metrics.k_values)
      if (k < 1) throw ConfigError("metrics.k_values must be positive");
    if (serve.port < 0 || serve.port > 65535) throw ConfigError("serve.port out of range");
    auto check = [](const fs::path& p, const char* name) {
      if (p.empty()) return;
      const auto parent = p.parent_path();
      if (!parent.empty() && fs::exists(parent) && !fs::is_directory(parent))
        throw ConfigError(std::string("paths.") + name + ": parent is not a directory: " + parent.string());
    };
    check(paths.corpus, "corpus");
    check(paths.original_store, "original_store");
    check(paths.bind_snippets, "bind_snippets");
    check(paths.bind_store, "bind_store");
    check(paths.labels, "labels");
    check(paths.assess_snippets, "assess_snippets");
    check(paths.assess_store, "assess_store");
    for (const auto* dir : {&paths.mutated_dir, &paths.models_dir, &paths.reports_dir, &paths.eval_dir})
      if (!dir->empty() && fs::exists(*dir) && !fs::is_directory(*dir))
        throw ConfigError("not a directory: " + dir->string());
  }

  /// Path that a command cannot run without.
  const fs::path& require(const fs::path& p, const char* name) const {
    if (p.empty()) throw ConfigError(std::string("paths.") + name + " is required for this command");
    return p;
  }

  std::vector<fs::path> mutated_store_paths() const {
    if (!paths.mutated_stores.empty()) return paths.mutated_stores;
    std::vector<fs::path> out;
    for (int p = 0; p < mutator.passes; ++p)
      out.push_back(require(paths.mutated_dir, "mutated_dir") / ("mutated_pass" + std::to_string(p) + ".ptas"));
    return out;
  }

  /// Effective settings, as stamped into artifacts.
  nlohmann::json echo() const {
    nlohmann::json p = {{"corpus", paths.corpus.string()},
                        {"mutated_dir", paths.mutated_dir.string()},
                        {"original_store", paths.original_store.string()},
                        {"bind_snippets", paths.bind_snippets.string()},
                        {"bind_store", paths.bind_store.string()},
                        {"labels", paths.labels.string()},
                        {"assess_snippets", paths.assess_snippets.string()},
                        {"assess_store", paths.assess_store.string()},
                        {"eval_labels", paths.eval_labels.string()},
                        {"models_dir", paths.models_dir.string()},
                        {"reports_dir", paths.reports_dir.string()},
                        {"eval_dir", paths.eval_dir.string()}};
    nlohmann::json stores = nlohmann::json::array();
    for (const auto& s : paths.mutated_stores) stores.push_back(s.string());
    p["mutated_stores"] = stores;
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : metrics.groups)
      groups.push_back({{"language", g.language}, {"dataset", g.dataset}, {"snippets", g.snippets.string()},
                        {"store", g.store.string()}});
    nlohmann::json m = {{"k_values", metrics.k_values}, {"dataset", metrics.dataset}, {"groups", groups}};
    if (metrics.layout) m["layout"] = {{"lower", metrics.layout->first}, {"upper", metrics.layout->second}};
    return {{"paths", p},
            {"sae", sae},
            {"ranker", ranker},
            {"classifier", classifier},
            {"mutator",
             {{"master_seed", mutator.master_seed}, {"passes", mutator.passes},
              {"same_language", mutator.same_language}}},
            {"metrics", m},
            {"serve", {{"bind", serve.bind}, {"port", serve.port}}}};
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
}

inline fs::path resolve(const fs::path& base, const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  fs::path p = j.at(key).get<std::string>();
  if (p.empty()) return {};
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

}  // namespace detail

/// Parses a config document; relative paths resolve against `base`.
inline PipelineConfig parse_config(const nlohmann::json& j, const fs::path& base) {
  using detail::reject_unknown;
  using detail::resolve;
  PipelineConfig c;
  try {
    reject_unknown(j, {"paths", "sae", "ranker", "classifier", "mutator", "metrics", "serve"}, "config");
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown(p,
                     {"corpus", "mutated_dir", "original_store", "mutated_stores", "bind_snippets", "bind_store",
                      "labels", "assess_snippets", "assess_store", "eval_labels", "models_dir", "reports_dir",
                      "eval_dir"},
                     "paths");
      c.paths.corpus = resolve(base, p, "corpus");
      c.paths.mutated_dir = resolve(base, p, "mutated_dir");
      c.paths.original_store = resolve(base, p, "original_store");
      if (p.contains("mutated_stores"))
        for (const auto& s : p["mutated_stores"]) {
          fs::path sp = s.get<std::string>();
          c.paths.mutated_stores.push_back((sp.is_absolute() ? sp : base / sp).lexically_normal());
        }
      c.paths.bind_snippets = resolve(base, p, "bind_snippets");
      c.paths.bind_store = resolve(base, p, "bind_store");
      c.paths.labels = resolve(base, p, "labels");
      c.paths.assess_snippets = resolve(base, p, "assess_snippets");
      c.paths.assess_store = resolve(base, p, "assess_store");
      c.paths.eval_labels = resolve(base, p, "eval_labels");
      c.paths.models_dir = resolve(base, p, "models_dir");
      c.paths.reports_dir = resolve(base, p, "reports_dir");
      c.paths.eval_dir = resolve(base, p, "eval_dir");
    }
    if (j.contains("sae")) {
      reject_unknown(j["sae"], {"latent_dim", "k", "learning_rate", "batch_size", "epochs", "seed", "margin",
                                "contrastive_weight", "optimizer"},
                     "sae");
      c.sae = j["sae"].get<SaeTrainConfig>();
    }
    for (const char* key : {"ranker", "classifier"}) {
      if (!j.contains(key)) continue;
      reject_unknown(j[key], {"temperature", "sinkhorn_iterations", "learning_rate", "epochs", "batch", "seed"}, key);
      (std::string(key) == "ranker" ? c.ranker : c.classifier) = j[key].get<RankerTrainConfig>();
    }
    if (j.contains("mutator")) {
      const auto& m = j["mutator"];
      reject_unknown(m, {"master_seed", "passes", "same_language"}, "mutator");
      c.mutator.master_seed = m.value("master_seed", c.mutator.master_seed);
      c.mutator.passes = m.value("passes", c.mutator.passes);
      c.mutator.same_language = m.value("same_language", c.mutator.same_language);
    }
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      reject_unknown(m, {"k_values", "dataset", "groups", "layout"}, "metrics");
      c.metrics.k_values = m.value("k_values", c.metrics.k_values);
      c.metrics.dataset = m.value("dataset", c.metrics.dataset);
      if (m.contains("groups"))
        for (const auto& g : m["groups"]) {
          reject_unknown(g, {"language", "dataset", "snippets", "store"}, "metrics.groups[]");
          c.metrics.groups.push_back({g.at("language").get<std::string>(), g.at("dataset").get<std::string>(),
                                      resolve(base, g, "snippets"), resolve(base, g, "store")});
          if (c.metrics.groups.back().snippets.empty()) throw ConfigError("metrics.groups[].snippets is required");
        }
      if (m.contains("layout")) {
        reject_unknown(m["layout"], {"lower", "upper"}, "metrics.layout");
        c.metrics.layout.emplace(m["layout"].at("lower").get<std::string>(), m["layout"].at("upper").get<std::string>());
      }
    }
    if (j.contains("serve")) {
      reject_unknown(j["serve"], {"bind", "port"}, "serve");
      c.serve.bind = j["serve"].value("bind", c.serve.bind);
      c.serve.port = j["serve"].value("port", c.serve.port);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto c = parse_config(j, fs::absolute(path).parent_path());
  c.source = path;
  return c;
}

}  // namespace pttrust

#endif  // PTTRUST_CONFIG_HPP_
