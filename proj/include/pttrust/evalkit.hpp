#ifndef PTTRUST_EVALKIT_HPP_
#define PTTRUST_EVALKIT_HPP_

// Measurement: Top-K hit rate, snippet accuracy, the token-confidence
// baseline, Wasserstein comparisons of latent activations, and diff maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "pttrust/errors.hpp"
#include "pttrust/ranking.hpp"
#include "pttrust/sae.hpp"

namespace pttrust {

struct RiskEntry {
  std::uint32_t line_index = 0;
  double risk = 0.0;
  std::uint32_t rank = 0;  // 0 = riskiest
};

struct RiskReport {
  std::uint32_t snippet_id = 0;
  std::vector<RiskEntry> lines;  // by line_index
  std::optional<double> snippet_risk;
  std::optional<double> threshold;

  /// Line indices from riskiest to safest.
  std::vector<std::uint32_t> ranked_lines() const {
    std::vector<std::uint32_t> out(lines.size());
    for (const auto& e : lines) out[e.rank] = e.line_index;
    return out;
  }
};

/// Ranks are assigned by descending risk, lower line index first on ties.
inline RiskReport make_risk_report(std::uint32_t snippet_id, std::span<const double> risks) {
  RiskReport r;
  r.snippet_id = snippet_id;
  r.lines.resize(risks.size());
  const auto order = descending_order(risks);
  for (std::size_t i = 0; i < risks.size(); ++i) {
    r.lines[i].line_index = static_cast<std::uint32_t>(i);
    r.lines[i].risk = risks[i];
  }
  for (std::size_t pos = 0; pos < order.size(); ++pos) r.lines[order[pos]].rank = static_cast<std::uint32_t>(pos);
  return r;
}

/// Share of buggy-token mass that falls inside the K riskiest lines.
inline double topk_hit_rate(const RiskReport& report, const LineLabelSet& labels, std::size_t k) {
  if (k == 0) throw std::invalid_argument("topk_hit_rate: K must be positive");
  if (labels.error_lines.empty())
    throw ExcludedError("snippet " + std::to_string(labels.snippet_id) + " has no buggy lines");
  if (report.lines.size() != labels.line_count())
    throw DataError("snippet " + std::to_string(labels.snippet_id) + ": report and labels disagree on line count");
  labels.validate();
  auto tokens = [&](std::uint32_t line) -> double {
    return labels.line_token_counts.empty() ? 1.0 : static_cast<double>(labels.line_token_counts[line]);
  };
  std::vector<std::uint32_t> buggy = labels.error_lines;
  std::ranges::sort(buggy);
  buggy.erase(std::unique(buggy.begin(), buggy.end()), buggy.end());
  double total = 0.0;
  for (auto e : buggy) total += tokens(e);
  if (total <= 0.0)
    throw ExcludedError("snippet " + std::to_string(labels.snippet_id) + " has no buggy tokens");
  const auto ranked = report.ranked_lines();
  double hit = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (std::ranges::binary_search(buggy, ranked[i])) hit += tokens(ranked[i]);
  return hit / total;
}

/// Mean over snippets that have at least one buggy line.
inline double mean_hit_rate(std::span<const RiskReport> reports, std::span<const LineLabelSet> labels, std::size_t k,
                            std::size_t* included = nullptr) {
  if (reports.size() != labels.size()) throw std::invalid_argument("mean_hit_rate: length mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (labels[i].error_lines.empty()) continue;
    sum += topk_hit_rate(reports[i], labels[i], k);
    ++n;
  }
  if (included != nullptr) *included = n;
  if (n == 0) throw DataError("no snippet with buggy lines to evaluate");
  return sum / static_cast<double>(n);
}

inline double uncertainty_risk(std::span<const double> confidences) {
  if (confidences.empty()) throw DataError("line without token confidences");
  double s = 0.0;
  for (double c : confidences) {
    if (!(c >= 0.0 && c <= 1.0)) throw DataError("token confidence outside [0, 1]");
    s += c;
  }
  return std::clamp(1.0 - s / static_cast<double>(confidences.size()), 0.0, 1.0);
}

/// 1 - mean token confidence, per line.
inline std::vector<double> uncertainty_line_risk(const std::vector<std::vector<double>>& confidences) {
  std::vector<double> out;
  out.reserve(confidences.size());
  for (const auto& line : confidences) out.push_back(uncertainty_risk(line));
  return out;
}

/// 1 - mean confidence over every token of the snippet.
inline double uncertainty_snippet_risk(const std::vector<std::vector<double>>& confidences) {
  std::vector<double> flat;
  for (const auto& line : confidences) {
    if (line.empty()) throw DataError("line without token confidences");
    flat.insert(flat.end(), line.begin(), line.end());
  }
  return uncertainty_risk(flat);
}

inline double snippet_accuracy(const std::vector<bool>& predictions, const std::vector<bool>& truths) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("snippet_accuracy: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("snippet_accuracy: no predictions");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) hit += predictions[i] == truths[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truths.size());
}

/// Order-1 Wasserstein distance between two empirical distributions,
/// integrated exactly over the merged quantile breakpoints.
inline double wasserstein_1d(std::span<const double> u, std::span<const double> v) {
  if (u.empty() || v.empty()) throw std::invalid_argument("wasserstein_1d: empty sample");
  std::vector<double> a(u.begin(), u.end()), b(v.begin(), v.end());
  std::ranges::sort(a);
  std::ranges::sort(b);
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Walk quantile levels i/na and j/nb; exact rational comparison via
  // cross-multiplication keeps the breakpoints free of rounding.
  const auto na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double total = 0.0;
  std::size_t prev_num = 0;  // level * na * nb
  while (i < na && j < nb) {
    const std::size_t next_a = (i + 1) * nb, next_b = (j + 1) * na;
    const std::size_t next = std::min(next_a, next_b);
    total += static_cast<double>(next - prev_num) * std::abs(a[i] - b[j]);
    prev_num = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return total / static_cast<double>(na * nb);
}

/// Mean activation vector across instances; its entries form the sample
/// used for cross-group distances.
inline Eigen::VectorXd mean_activation(const std::vector<Eigen::VectorXd>& instances) {
  if (instances.empty()) throw DataError("group with no instances");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(instances.front().size());
  for (const auto& v : instances) {
    if (v.size() != mean.size()) throw DataError("instance vectors differ in width");
    mean += v;
  }
  return mean / static_cast<double>(instances.size());
}

struct GroupKey {
  std::string language;
  std::string dataset;
  auto operator<=>(const GroupKey&) const = default;
};

struct DistanceMatrix {
  std::vector<GroupKey> groups;
  Eigen::MatrixXd distance;  // symmetric, zero diagonal
};

/// Pairwise distances between every (language, dataset) group.
inline DistanceMatrix cross_distribution_matrix(const std::map<GroupKey, std::vector<Eigen::VectorXd>>& groups) {
  if (groups.size() < 2) throw DataError("cross-distribution analysis needs at least two groups");
  DistanceMatrix out;
  std::vector<std::vector<double>> samples;
  for (const auto& [key, instances] : groups) {
    if (instances.empty()) throw DataError("group " + key.language + "/" + key.dataset + " has no instances");
    const Eigen::VectorXd mean = mean_activation(instances);
    out.groups.push_back(key);
    samples.emplace_back(mean.data(), mean.data() + mean.size());
  }
  const auto g = static_cast<Eigen::Index>(samples.size());
  out.distance = Eigen::MatrixXd::Zero(g, g);
  for (Eigen::Index r = 0; r < g; ++r)
    for (Eigen::Index c = r + 1; c < g; ++c)
      out.distance(r, c) = out.distance(c, r) =
          wasserstein_1d(samples[static_cast<std::size_t>(r)], samples[static_cast<std::size_t>(c)]);
  return out;
}

/// Language-by-language view: lower triangle compares languages within
/// `lower`, upper triangle within `upper`, and the diagonal compares the same
/// language across the two datasets. Missing groups are NaN.
inline Eigen::MatrixXd language_layout(const DistanceMatrix& m, const std::vector<std::string>& languages,
                                       const std::string& lower, const std::string& upper) {
  auto find = [&](const std::string& lang, const std::string& ds) -> std::optional<Eigen::Index> {
    for (std::size_t i = 0; i < m.groups.size(); ++i)
      if (m.groups[i].language == lang && m.groups[i].dataset == ds) return static_cast<Eigen::Index>(i);
    return std::nullopt;
  };
  const auto n = static_cast<Eigen::Index>(languages.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& lr = languages[static_cast<std::size_t>(r)];
      const auto& lc = languages[static_cast<std::size_t>(c)];
      std::optional<Eigen::Index> a, b;
      if (r == c) {
        a = find(lr, lower);
        b = find(lr, upper);
      } else {
        const auto& ds = r > c ? lower : upper;
        a = find(lr, ds);
        b = find(lc, ds);
      }
      if (a && b) out(r, c) = m.distance(*a, *b);
    }
  return out;
}

struct DiffMap {
  Eigen::VectorXd values;  // mean over buggy lines - mean over correct lines
  std::size_t buggy_lines = 0;
  std::size_t correct_lines = 0;
};

struct LabeledLatents {
  std::vector<LatentVector> lines;
  LineLabelSet labels;
};

inline DiffMap activation_diff_map(std::span<const LabeledLatents> snippets) {
  Eigen::VectorXd bug_sum, ok_sum;
  DiffMap out;
  for (const auto& s : snippets) {
    if (s.lines.size() != s.labels.line_count())
      throw DataError("snippet " + std::to_string(s.labels.snippet_id) + ": latents and labels disagree on line count");
    for (std::size_t l = 0; l < s.lines.size(); ++l) {
      const auto& v = s.lines[l].values;
      if (bug_sum.size() == 0) {
        bug_sum = Eigen::VectorXd::Zero(v.size());
        ok_sum = Eigen::VectorXd::Zero(v.size());
      }
      if (v.size() != bug_sum.size()) throw DataError("latent vectors differ in width");
      if (s.labels.is_error(static_cast<std::uint32_t>(l))) {
        bug_sum += v;
        ++out.buggy_lines;
      } else {
        ok_sum += v;
        ++out.correct_lines;
      }
    }
  }
  if (out.buggy_lines == 0 || out.correct_lines == 0)
    throw DataError("difference map needs both buggy and correct lines");
  out.values = bug_sum / static_cast<double>(out.buggy_lines) - ok_sum / static_cast<double>(out.correct_lines);
  return out;
}

inline nlohmann::json to_json(const RiskReport& r) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& e : r.lines) lines.push_back({{"index", e.line_index}, {"risk", e.risk}, {"rank", e.rank}});
  nlohmann::json j{{"snippet_id", r.snippet_id}, {"lines", lines}};
  j["snippet_risk"] = r.snippet_risk ? nlohmann::json(*r.snippet_risk) : nlohmann::json();
  j["threshold"] = r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json();
  return j;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(std::isfinite(m(r, c)) ? nlohmann::json(m(r, c)) : nlohmann::json());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pttrust

#endif  // PTTRUST_EVALKIT_HPP_
