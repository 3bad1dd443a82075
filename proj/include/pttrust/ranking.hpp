#ifndef PTTRUST_RANKING_HPP_
#define PTTRUST_RANKING_HPP_

// Listwise ranking math: relevance grading, the NeuralSort-style soft
// permutation with optional Sinkhorn balancing, and the NeuralNDCG loss with
// its exact gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pttrust/errors.hpp"

namespace pttrust {

struct LineLabelSet {
  std::uint32_t snippet_id = 0;
  std::vector<std::uint32_t> error_lines;
  std::vector<std::uint32_t> line_token_counts;
  std::vector<std::uint32_t> line_lengths;  // characters

  std::size_t line_count() const { return line_lengths.size(); }

  bool is_error(std::uint32_t line) const {
    return std::find(error_lines.begin(), error_lines.end(), line) != error_lines.end();
  }

  void validate() const {
    if (!line_token_counts.empty() && line_token_counts.size() != line_lengths.size())
      throw DataError("snippet " + std::to_string(snippet_id) + ": token counts do not align with lines");
    for (auto e : error_lines)
      if (e >= line_lengths.size())
        throw DataError("snippet " + std::to_string(snippet_id) + ": error line " + std::to_string(e) +
                        " out of range");
  }
};

/// 0 for correct lines; buggy lines get 1..B by ascending length. Among
/// equal lengths the lower line index receives the higher grade.
inline std::vector<int> build_relevance(const LineLabelSet& labels) {
  labels.validate();
  std::vector<std::uint32_t> buggy = labels.error_lines;
  std::ranges::sort(buggy);
  buggy.erase(std::unique(buggy.begin(), buggy.end()), buggy.end());
  std::ranges::sort(buggy, [&](std::uint32_t a, std::uint32_t b) {
    const auto la = labels.line_lengths[a], lb = labels.line_lengths[b];
    return la != lb ? la < lb : a > b;
  });
  std::vector<int> rel(labels.line_count(), 0);
  for (std::size_t r = 0; r < buggy.size(); ++r) rel[buggy[r]] = static_cast<int>(r + 1);
  return rel;
}

/// Descending order of scores; ties keep the lower index first.
inline std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

inline double discount(std::size_t position) { return 1.0 / std::log2(static_cast<double>(position) + 2.0); }

inline double gain(int relevance) { return std::exp2(static_cast<double>(relevance)) - 1.0; }

inline double ideal_dcg(std::span<const int> relevance) {
  std::vector<int> sorted(relevance.begin(), relevance.end());
  std::ranges::sort(sorted, std::greater<>{});
  double dcg = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) dcg += gain(sorted[i]) * discount(i);
  return dcg;
}

/// NDCG of the hard descending sort of `scores`.
inline double exact_ndcg(std::span<const double> scores, std::span<const int> relevance) {
  if (scores.size() != relevance.size()) throw std::invalid_argument("exact_ndcg: length mismatch");
  const double ideal = ideal_dcg(relevance);
  if (ideal <= 0.0) throw ExcludedError("NDCG undefined for a list without positives");
  const auto order = descending_order(scores);
  double dcg = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) dcg += gain(relevance[order[i]]) * discount(i);
  return dcg / ideal;
}

/// Intermediates of the soft sort, kept for the backward pass.
struct SoftSortTrace {
  Eigen::MatrixXd softmax;                  // row-softmax of the unimodal logits
  std::vector<Eigen::MatrixXd> col_scaled;  // after each column normalization
  std::vector<Eigen::VectorXd> col_sums;
  std::vector<Eigen::VectorXd> row_sums;
  Eigen::MatrixXd result;                   // row-stochastic output
};

inline SoftSortTrace soft_permutation_trace(std::span<const double> scores, double temperature, int iterations) {
  const auto n = static_cast<Eigen::Index>(scores.size());
  if (n < 1) throw std::invalid_argument("soft_permutation: empty list");
  if (!(temperature > 0.0)) throw std::invalid_argument("soft_permutation: temperature must be > 0");
  if (iterations < 0) throw std::invalid_argument("soft_permutation: iterations must be >= 0");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("soft_permutation: non-finite score");

  Eigen::VectorXd s(n);
  for (Eigen::Index j = 0; j < n; ++j) s[j] = scores[static_cast<std::size_t>(j)];
  Eigen::VectorXd abs_sum(n);
  for (Eigen::Index j = 0; j < n; ++j) abs_sum[j] = (s.array() - s[j]).abs().sum();

  SoftSortTrace t;
  t.softmax.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double coef = static_cast<double>(n - 1 - 2 * i);
    Eigen::VectorXd logits = (coef * s - abs_sum) / temperature;
    const double mx = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - mx).exp();
    t.softmax.row(i) = (e / e.sum()).transpose();
  }
  Eigen::MatrixXd p = t.softmax;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd c = p.colwise().sum().transpose();
    Eigen::MatrixXd x = p * c.cwiseInverse().asDiagonal();
    const Eigen::VectorXd r = x.rowwise().sum();
    p = r.cwiseInverse().asDiagonal() * x;
    t.col_sums.push_back(c);
    t.col_scaled.push_back(std::move(x));
    t.row_sums.push_back(r);
  }
  t.result = std::move(p);
  return t;
}

/// Row-stochastic relaxation of the descending-sort permutation matrix:
/// row i is a distribution over which item lands at rank i.
inline Eigen::MatrixXd soft_permutation(std::span<const double> scores, double temperature, int iterations) {
  return soft_permutation_trace(scores, temperature, iterations).result;
}

/// Gradient of a scalar f(P) w.r.t. the scores, given dF/dP.
inline Eigen::VectorXd soft_permutation_backward(std::span<const double> scores, double temperature,
                                                 const SoftSortTrace& t, Eigen::MatrixXd grad) {
  const auto n = static_cast<Eigen::Index>(scores.size());
  for (auto it = static_cast<int>(t.col_scaled.size()) - 1; it >= 0; --it) {
    const auto u = static_cast<std::size_t>(it);
    // row normalization: y = x / r
    const Eigen::MatrixXd y = t.row_sums[u].cwiseInverse().asDiagonal() * t.col_scaled[u];
    const Eigen::VectorXd row_dot = (grad.cwiseProduct(y)).rowwise().sum();
    Eigen::MatrixXd gx = t.row_sums[u].cwiseInverse().asDiagonal() * (grad.colwise() - row_dot);
    // column normalization: x = p / c
    const Eigen::RowVectorXd col_dot = (gx.cwiseProduct(t.col_scaled[u])).colwise().sum();
    grad = (gx.rowwise() - col_dot) * t.col_sums[u].cwiseInverse().asDiagonal();
  }
  const Eigen::VectorXd soft_dot = (grad.cwiseProduct(t.softmax)).rowwise().sum();
  const Eigen::MatrixXd g_logits = t.softmax.cwiseProduct(grad.colwise() - soft_dot);

  Eigen::VectorXd ds = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd col_total = g_logits.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    double coef_part = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) coef_part += g_logits(i, j) * static_cast<double>(n - 1 - 2 * i);
    ds[j] += coef_part / temperature;
    const double sj = scores[static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < n; ++k) {
      const double sk = scores[static_cast<std::size_t>(k)];
      const double sign = sj > sk ? 1.0 : (sj < sk ? -1.0 : 0.0);
      ds[j] -= col_total[j] * sign / temperature;
      ds[k] += col_total[j] * sign / temperature;
    }
  }
  return ds;
}

struct NdcgLossSettings {
  double temperature = 1.0;
  int sinkhorn_iterations = 3;
};

/// -(soft DCG / ideal DCG); lies in [-1, 0). When `grad` is non-null it
/// receives d loss / d scores.
inline double neural_ndcg_loss(std::span<const double> scores, std::span<const int> relevance,
                               const NdcgLossSettings& cfg, Eigen::VectorXd* grad = nullptr) {
  if (scores.size() != relevance.size()) throw std::invalid_argument("neural_ndcg_loss: length mismatch");
  const double ideal = ideal_dcg(relevance);
  if (ideal <= 0.0) throw ExcludedError("list without positive relevance is excluded from ranking");
  const auto n = static_cast<Eigen::Index>(scores.size());
  Eigen::VectorXd gains(n), discounts(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    gains[j] = gain(relevance[static_cast<std::size_t>(j)]);
    discounts[j] = discount(static_cast<std::size_t>(j));
  }
  const SoftSortTrace t = soft_permutation_trace(scores, cfg.temperature, cfg.sinkhorn_iterations);
  const double loss = -discounts.dot(t.result * gains) / ideal;
  if (grad != nullptr) {
    const Eigen::MatrixXd d_p = -(discounts * gains.transpose()) / ideal;
    *grad = soft_permutation_backward(scores, cfg.temperature, t, d_p);
  }
  return loss;
}

}  // namespace pttrust

#endif  // PTTRUST_RANKING_HPP_
