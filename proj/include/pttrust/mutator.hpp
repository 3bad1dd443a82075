#ifndef PTTRUST_MUTATOR_HPP_
#define PTTRUST_MUTATOR_HPP_

// Line-level code mutators and contrastive pair construction.
//
// Every mutator is a pure function of (input, seed). A pair whose two sides
// carry the same text is dropped: it gives no contrastive signal.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pttrust/activation_store.hpp"
#include "pttrust/corpus.hpp"
#include "pttrust/errors.hpp"
#include "pttrust/rng.hpp"

namespace pttrust {

class MutationError : public DataError {
 public:
  using DataError::DataError;
};

enum class MutatorTag { switch_inside, switch_outside, delete_line };

NLOHMANN_JSON_SERIALIZE_ENUM(MutatorTag, {{MutatorTag::switch_inside, "switch_inside"},
                                          {MutatorTag::switch_outside, "switch_outside"},
                                          {MutatorTag::delete_line, "delete_line"}})

struct PairSpec {
  std::uint32_t original_snippet_id = 0;
  std::uint32_t mutated_snippet_id = 0;
  std::uint32_t original_line_index = 0;
  std::uint32_t mutated_line_index = 0;
  MutatorTag mutator_tag = MutatorTag::switch_inside;

  bool operator==(const PairSpec&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PairSpec, original_snippet_id, mutated_snippet_id,
                                   original_line_index, mutated_line_index, mutator_tag)

struct Mutation {
  CodeSnippet mutated;
  std::vector<PairSpec> pairs;
};

struct PairMutation {
  CodeSnippet mutated_a;
  CodeSnippet mutated_b;
  std::vector<PairSpec> pairs;
};

namespace detail {

inline void keep_if_distinct(std::vector<PairSpec>& out, const PairSpec& spec,
                             const CodeSnippet& original, const CodeSnippet& mutated) {
  if (original.lines[spec.original_line_index] != mutated.lines[spec.mutated_line_index])
    out.push_back(spec);
}

}  // namespace detail

/// Exchanges the texts of two distinct positions, drawn uniformly.
inline Mutation switch_inside(const CodeSnippet& snippet, std::uint64_t seed,
                              std::optional<std::uint32_t> mutated_id = std::nullopt) {
  const std::size_t n = snippet.lines.size();
  if (n < 2) throw MutationError("switch_inside needs at least 2 lines");
  Rng rng(mix_seed(seed, "switch_inside"));
  std::size_t i = rng.below(n);
  std::size_t j = rng.below(n - 1);
  if (j >= i) ++j;
  if (i > j) std::swap(i, j);

  Mutation m{snippet, {}};
  m.mutated.snippet_id = mutated_id.value_or(snippet.snippet_id);
  std::swap(m.mutated.lines[i], m.mutated.lines[j]);
  for (std::size_t p : {i, j}) {
    const auto pos = static_cast<std::uint32_t>(p);
    detail::keep_if_distinct(m.pairs,
                             {snippet.snippet_id, m.mutated.snippet_id, pos, pos, MutatorTag::switch_inside},
                             snippet, m.mutated);
  }
  return m;
}

/// Exchanges one random line of `a` with one random line of `b`.
inline PairMutation switch_outside(const CodeSnippet& a, const CodeSnippet& b, std::uint64_t seed,
                                   std::optional<std::uint32_t> mutated_a_id = std::nullopt,
                                   std::optional<std::uint32_t> mutated_b_id = std::nullopt) {
  if (a.snippet_id == b.snippet_id) throw MutationError("switch_outside needs two distinct snippets");
  if (a.lines.empty() || b.lines.empty()) throw MutationError("switch_outside needs non-empty snippets");
  Rng rng(mix_seed(seed, "switch_outside"));
  const auto pa = static_cast<std::uint32_t>(rng.below(a.lines.size()));
  const auto pb = static_cast<std::uint32_t>(rng.below(b.lines.size()));

  PairMutation m{a, b, {}};
  m.mutated_a.snippet_id = mutated_a_id.value_or(a.snippet_id);
  m.mutated_b.snippet_id = mutated_b_id.value_or(b.snippet_id);
  m.mutated_a.lines[pa] = b.lines[pb];
  m.mutated_b.lines[pb] = a.lines[pa];
  detail::keep_if_distinct(m.pairs, {a.snippet_id, m.mutated_a.snippet_id, pa, pa, MutatorTag::switch_outside},
                           a, m.mutated_a);
  detail::keep_if_distinct(m.pairs, {b.snippet_id, m.mutated_b.snippet_id, pb, pb, MutatorTag::switch_outside},
                           b, m.mutated_b);
  return m;
}

/// Deletes one line that has a successor. The pair is the deleted (correct)
/// line against the line that moves into its position.
inline Mutation delete_line(const CodeSnippet& snippet, std::uint64_t seed,
                            std::optional<std::uint32_t> mutated_id = std::nullopt) {
  const std::size_t n = snippet.lines.size();
  if (n < 2) throw MutationError("delete_line needs at least 2 lines");
  Rng rng(mix_seed(seed, "delete_line"));
  const auto pos = static_cast<std::uint32_t>(rng.below(n - 1));

  Mutation m{snippet, {}};
  m.mutated.snippet_id = mutated_id.value_or(snippet.snippet_id);
  m.mutated.lines.erase(m.mutated.lines.begin() + pos);
  detail::keep_if_distinct(m.pairs, {snippet.snippet_id, m.mutated.snippet_id, pos, pos, MutatorTag::delete_line},
                           snippet, m.mutated);
  return m;
}

/// Indices refer to the concatenation [original records..., mutated records...].
struct ContrastivePair {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  double margin = 1.0;

  bool operator==(const ContrastivePair&) const = default;
};

struct PairBuildResult {
  std::vector<ContrastivePair> pairs;
  std::vector<PairSpec> skipped;
};

/// Resolves pair specs against two loaded stores, then adds pairs for lines
/// already labeled correct in one store and buggy in the other under the
/// same (snippet_id, line_index).
inline PairBuildResult build_contrastive_pairs(const std::vector<PairSpec>& specs,
                                               const std::vector<ActivationRecord>& original,
                                               const std::vector<ActivationRecord>& mutated,
                                               double margin) {
  if (!(margin > 0.0)) throw ConfigError("contrastive margin must be > 0");
  if (!original.empty() && !mutated.empty() && original.front().vector.size() != mutated.front().vector.size())
    throw DataError("original and mutated stores differ in dim");

  std::unordered_map<std::uint64_t, std::size_t> orig_at;
  std::unordered_map<std::uint64_t, std::size_t> mut_at;
  for (std::size_t i = 0; i < original.size(); ++i)
    orig_at.emplace(record_key(original[i].snippet_id, original[i].line_index), i);
  for (std::size_t i = 0; i < mutated.size(); ++i)
    mut_at.emplace(record_key(mutated[i].snippet_id, mutated[i].line_index), i);
  const std::size_t offset = original.size();

  PairBuildResult out;
  std::set<std::pair<std::size_t, std::size_t>> emitted;
  auto emit = [&](std::size_t a, std::size_t b) {
    if (emitted.emplace(a, b).second) out.pairs.push_back({a, b, margin});
  };

  for (const auto& spec : specs) {
    auto a = orig_at.find(record_key(spec.original_snippet_id, spec.original_line_index));
    auto b = mut_at.find(record_key(spec.mutated_snippet_id, spec.mutated_line_index));
    if (a == orig_at.end() || b == mut_at.end()) {
      out.skipped.push_back(spec);
      continue;
    }
    emit(a->second, offset + b->second);
  }

  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto& rec = original[i];
    if (rec.label == LabelFlag::unknown) continue;
    auto it = mut_at.find(record_key(rec.snippet_id, rec.line_index));
    if (it == mut_at.end()) continue;
    const LabelFlag other = mutated[it->second].label;
    if (rec.label == LabelFlag::correct && other == LabelFlag::buggy)
      emit(i, offset + it->second);
    else if (rec.label == LabelFlag::buggy && other == LabelFlag::correct)
      emit(offset + it->second, i);
  }
  return out;
}

inline std::string serialize_pair_specs(const std::vector<PairSpec>& specs) {
  std::string out;
  for (const auto& s : specs) {
    out += nlohmann::json(s).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<PairSpec> read_pair_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pair-spec file " + path.string());
  std::vector<PairSpec> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<PairSpec>());
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct MutationPassSettings {
  std::uint64_t master_seed = 0;
  std::uint32_t pass = 0;
  bool same_language = true;  // switch_outside partners share a language
};

struct MutationPassResult {
  std::vector<SnippetFileEntry> mutated;
  std::vector<PairSpec> specs;
};

/// Per-snippet sub-seed: master xor snippet_id, shifted by the pass number.
inline std::uint64_t snippet_seed(std::uint64_t master, std::uint32_t snippet_id, std::uint32_t pass) {
  return (master ^ snippet_id) + static_cast<std::uint64_t>(pass) * 0x9e3779b97f4a7c15ull;
}

/// One pass of all three mutators over a corpus. Mutated snippets get fresh
/// ids starting at `next_id`; their mutated positions are recorded as
/// error_lines. Snippets too short for a mutator are skipped.
inline MutationPassResult run_mutation_pass(const std::vector<SnippetFileEntry>& corpus,
                                            const MutationPassSettings& settings,
                                            std::uint32_t& next_id) {
  MutationPassResult out;
  auto add = [&](const SnippetFileEntry& src, CodeSnippet mutated, const std::vector<PairSpec>& pairs) {
    if (pairs.empty()) return;
    SnippetFileEntry e;
    e.snippet = std::move(mutated);
    e.task = src.task;
    std::vector<std::uint32_t> errs;
    for (const auto& p : pairs)
      if (p.mutated_snippet_id == e.snippet.snippet_id) errs.push_back(p.mutated_line_index);
    std::ranges::sort(errs);
    errs.erase(std::unique(errs.begin(), errs.end()), errs.end());
    e.error_lines = std::move(errs);
    out.mutated.push_back(std::move(e));
    out.specs.insert(out.specs.end(), pairs.begin(), pairs.end());
  };

  for (const auto& entry : corpus) {
    const auto& s = entry.snippet;
    if (s.lines.size() < 2) continue;
    const auto seed = snippet_seed(settings.master_seed, s.snippet_id, settings.pass);
    auto in = switch_inside(s, seed, next_id);
    if (!in.pairs.empty()) ++next_id;
    add(entry, std::move(in.mutated), in.pairs);
    auto del = delete_line(s, seed, next_id);
    if (!del.pairs.empty()) ++next_id;
    add(entry, std::move(del.mutated), del.pairs);
  }

  // Random partner assignment, within language unless relaxed.
  std::map<std::string, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    buckets[settings.same_language ? corpus[i].snippet.language : std::string{}].push_back(i);
  for (auto& [language, members] : buckets) {
    Rng rng(mix_seed(settings.master_seed + settings.pass, "pairing:" + language));
    rng.shuffle(members);
    for (std::size_t i = 0; i + 1 < members.size(); i += 2) {
      const auto& ea = corpus[members[i]];
      const auto& eb = corpus[members[i + 1]];
      const auto seed = snippet_seed(settings.master_seed, ea.snippet.snippet_id, settings.pass) ^
                        (static_cast<std::uint64_t>(eb.snippet.snippet_id) << 32);
      auto m = switch_outside(ea.snippet, eb.snippet, seed, next_id, next_id + 1);
      std::vector<PairSpec> pa, pb;
      for (const auto& p : m.pairs) (p.original_snippet_id == ea.snippet.snippet_id ? pa : pb).push_back(p);
      if (!pa.empty()) {
        add(ea, std::move(m.mutated_a), pa);
      }
      if (!pb.empty()) {
        add(eb, std::move(m.mutated_b), pb);
      }
      next_id += 2;
    }
  }
  return out;
}

}  // namespace pttrust

#endif  // PTTRUST_MUTATOR_HPP_
