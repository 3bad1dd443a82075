#ifndef PTTRUST_RANKER_HPP_
#define PTTRUST_RANKER_HPP_

// Semantic binding: a 4-layer MLP (3 hidden ReLU layers of width 32, logistic
// output) that scores lines by risk, trained listwise with NeuralNDCG; the
// same network trained with binary cross-entropy as the snippet classifier;
// Youden-J threshold selection; PTRK parameter files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pttrust/binary_io.hpp"
#include "pttrust/errors.hpp"
#include "pttrust/optim.hpp"
#include "pttrust/ranking.hpp"
#include "pttrust/rng.hpp"

namespace pttrust {

struct RankerParams {
  std::vector<Eigen::MatrixXd> weights;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases;
  std::string kind = "ranker";           // "ranker" | "classifier"
  std::uint64_t seed = 0;
  nlohmann::json config_echo = nlohmann::json::object();

  int input_width() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }

  void validate() const {
    if (weights.empty() || weights.size() != biases.size()) throw std::invalid_argument("ranker: no layers");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != biases[l].size()) throw std::invalid_argument("ranker: bias shape");
      if (l > 0 && weights[l].cols() != weights[l - 1].rows()) throw std::invalid_argument("ranker: layer chain");
    }
    if (weights.back().rows() != 1) throw std::invalid_argument("ranker: output layer must have width 1");
  }
};

inline constexpr int kRankerHidden = 32;
inline constexpr int kRankerLayers = 4;

inline RankerParams init_ranker(int input_width, std::uint64_t seed, int hidden = kRankerHidden) {
  if (input_width < 1) throw std::invalid_argument("ranker input width must be >= 1");
  RankerParams p;
  p.seed = seed;
  Rng rng(mix_seed(seed, "ranker_init"));
  const std::vector<int> widths{input_width, hidden, hidden, hidden, 1};
  for (int l = 0; l < kRankerLayers; ++l) {
    const int in = widths[static_cast<std::size_t>(l)], out = widths[static_cast<std::size_t>(l) + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in));  // He-uniform
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

inline double logistic(double logit) {
  // Clamped so the result stays strictly inside (0, 1) in double precision.
  logit = std::clamp(logit, -36.0, 36.0);
  return 1.0 / (1.0 + std::exp(-logit));
}

/// Forward activations for a batch of column inputs (in x n).
struct MlpTrace {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = input
  Eigen::RowVectorXd logits;
};

inline MlpTrace mlp_forward(const RankerParams& p, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != p.input_width())
    throw std::invalid_argument("ranker: expected input width " + std::to_string(p.input_width()) + ", got " +
                                std::to_string(inputs.rows()));
  MlpTrace t;
  t.activations.push_back(inputs);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Eigen::MatrixXd h = (p.weights[l] * t.activations.back()).colwise() + p.biases[l];
    if (l + 1 < p.weights.size()) {
      t.activations.push_back(h.cwiseMax(0.0));
    } else {
      t.logits = h.row(0);
    }
  }
  return t;
}

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients zeros_like(const RankerParams& p) {
    MlpGradients g;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      g.weights.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
      g.biases.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
    return g;
  }
};

/// Accumulates parameter gradients given d loss / d logits.
inline void mlp_backward(const RankerParams& p, const MlpTrace& t, const Eigen::RowVectorXd& d_logits, MlpGradients& g) {
  Eigen::MatrixXd delta = d_logits;  // 1 x n
  for (std::size_t l = p.weights.size(); l-- > 0;) {
    g.weights[l].noalias() += delta * t.activations[l].transpose();
    g.biases[l] += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = p.weights[l].transpose() * delta;
    delta = back.cwiseProduct((t.activations[l].array() > 0.0).cast<double>().matrix());
  }
}

inline void adam_step(Adam& adam, RankerParams& p, const MlpGradients& g) {
  adam.begin_step();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    adam.update(2 * l, p.weights[l], g.weights[l]);
    adam.update(2 * l + 1, p.biases[l], g.biases[l]);
  }
}

inline void round_to_f32(RankerParams& p) {
  auto r = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  for (auto& w : p.weights) w = w.unaryExpr(r);
  for (auto& b : p.biases) b = b.unaryExpr(r);
}

inline Eigen::MatrixXd stack_columns(std::span<const Eigen::VectorXd> rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.front().size(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.rows()) throw std::invalid_argument("feature widths disagree");
    m.col(static_cast<Eigen::Index>(i)) = rows[i];
  }
  return m;
}

inline std::vector<double> line_logits(const RankerParams& p, std::span<const Eigen::VectorXd> features) {
  if (features.empty()) return {};
  const auto t = mlp_forward(p, stack_columns(features));
  return {t.logits.data(), t.logits.data() + t.logits.size()};
}

/// Risk score per line, strictly inside (0, 1).
inline std::vector<double> score_lines(const RankerParams& p, std::span<const Eigen::VectorXd> features) {
  auto out = line_logits(p, features);
  for (auto& v : out) v = logistic(v);
  return out;
}

// ---------------------------------------------------------------------------
// Listwise training

struct RankerTrainConfig {
  double temperature = 1.0;
  int sinkhorn_iterations = 3;
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch = 8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("ranker.temperature must be > 0");
    if (sinkhorn_iterations < 0) throw ConfigError("ranker.sinkhorn_iterations must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("ranker.learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("ranker.epochs must be >= 1");
    if (batch < 1) throw ConfigError("ranker.batch must be >= 1");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RankerTrainConfig, temperature, sinkhorn_iterations, learning_rate,
                                                epochs, batch, seed)

/// One snippet: per-line features (SAE latents, or raw states for the
/// probing baseline) plus its labels.
struct RankingExample {
  std::vector<Eigen::VectorXd> lines;
  LineLabelSet labels;
};

struct RankerEpochLog {
  int epoch = 0;
  double loss = 0.0;  // mean NeuralNDCG loss over the epoch's snippets
  double ndcg = 0.0;  // mean hard-sort NDCG after the epoch
};

inline void to_json(nlohmann::json& j, const RankerEpochLog& e) {
  j = {{"epoch", e.epoch}, {"loss", e.loss}, {"ndcg", e.ndcg}};
}

struct RankerTrainResult {
  RankerParams params;
  std::vector<RankerEpochLog> log;
  std::size_t excluded = 0;  // snippets without error lines
};

inline RankerTrainResult train_ranker(const std::vector<RankingExample>& dataset, const RankerTrainConfig& cfg,
                                      std::optional<int> expected_width = std::nullopt) {
  cfg.validate();
  struct Item {
    const RankingExample* ex;
    std::vector<int> relevance;
    Eigen::MatrixXd features;
  };
  RankerTrainResult result;
  std::vector<Item> items;
  for (const auto& ex : dataset) {
    if (ex.lines.size() != ex.labels.line_count())
      throw DataError("snippet " + std::to_string(ex.labels.snippet_id) + ": feature/line count mismatch");
    if (ex.labels.error_lines.empty()) {
      ++result.excluded;
      continue;
    }
    items.push_back({&ex, build_relevance(ex.labels), stack_columns(ex.lines)});
  }
  if (items.empty()) throw DataError("train_ranker: no snippet with labeled error lines");
  const int width = static_cast<int>(items.front().features.rows());
  if (expected_width && *expected_width != width)
    throw DataError("train_ranker: expected input width " + std::to_string(*expected_width) + ", got " +
                    std::to_string(width));
  for (const auto& it : items)
    if (it.features.rows() != width) throw DataError("train_ranker: feature widths disagree");

  RankerParams p = init_ranker(width, cfg.seed);
  p.config_echo = cfg;
  Adam adam({cfg.learning_rate});
  Rng rng(mix_seed(cfg.seed, "ranker_train"));
  const NdcgLossSettings loss_cfg{cfg.temperature, cfg.sinkhorn_iterations};
  std::vector<std::size_t> order(items.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    RankerEpochLog entry{epoch, 0.0, 0.0};
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const double scale = 1.0 / static_cast<double>(stop - start);
      MlpGradients g = MlpGradients::zeros_like(p);
      for (std::size_t b = start; b < stop; ++b) {
        const Item& it = items[order[b]];
        const MlpTrace t = mlp_forward(p, it.features);
        const std::vector<double> logits(t.logits.data(), t.logits.data() + t.logits.size());
        Eigen::VectorXd d_scores;
        entry.loss += neural_ndcg_loss(logits, it.relevance, loss_cfg, &d_scores);
        mlp_backward(p, t, scale * d_scores.transpose(), g);
      }
      adam_step(adam, p, g);
    }
    entry.loss /= static_cast<double>(items.size());
    for (const auto& it : items) {
      const auto t = mlp_forward(p, it.features);
      const std::vector<double> logits(t.logits.data(), t.logits.data() + t.logits.size());
      entry.ndcg += exact_ndcg(logits, it.relevance);
    }
    entry.ndcg /= static_cast<double>(items.size());
    result.log.push_back(entry);
  }
  round_to_f32(p);
  result.params = std::move(p);
  return result;
}

// ---------------------------------------------------------------------------
// Snippet classifier and Youden threshold

struct YoudenResult {
  double threshold = 0.0;  // predict "incorrect" when score > threshold
  double j = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Maximizes J = sensitivity + specificity - 1 over cutoffs at -inf, every
/// midpoint between adjacent distinct scores, and +inf. Positives are the
/// `true` labels. The lowest maximizing cutoff wins.
inline YoudenResult youden_threshold(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("youden: length mismatch");
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t neg = positive.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("youden: both classes must be present");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::ranges::sort(idx, [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep cutoffs upward; everything at or below the cutoff is predicted negative.
  YoudenResult best{-std::numeric_limits<double>::infinity(), 0.0, 1.0, 0.0};
  std::size_t fn = 0, tn = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double v = scores[idx[i]];
    for (; i < idx.size() && scores[idx[i]] == v; ++i) (positive[idx[i]] ? fn : tn)++;
    const double sens = static_cast<double>(pos - fn) / static_cast<double>(pos);
    const double spec = static_cast<double>(tn) / static_cast<double>(neg);
    const double j = sens + spec - 1.0;
    if (j > best.j) {
      const double cut = i < idx.size() ? 0.5 * (v + scores[idx[i]]) : std::numeric_limits<double>::infinity();
      best = {cut, j, sens, spec};
    }
  }
  return best;
}

struct ClassifierTrainResult {
  RankerParams params;
  YoudenResult threshold;
  std::vector<double> training_scores;
  std::vector<double> epoch_loss;  // mean binary cross-entropy per epoch
};

/// Same network as the ranker, trained as a probability-of-error scorer
/// with binary cross-entropy; the threshold is chosen on the training set.
inline ClassifierTrainResult train_snippet_classifier(const std::vector<Eigen::VectorXd>& features,
                                                      const std::vector<bool>& incorrect,
                                                      const RankerTrainConfig& cfg,
                                                      std::optional<int> expected_width = std::nullopt) {
  cfg.validate();
  if (features.size() != incorrect.size()) throw DataError("classifier: features/labels length mismatch");
  const auto pos = std::count(incorrect.begin(), incorrect.end(), true);
  if (pos == 0 || static_cast<std::size_t>(pos) == incorrect.size())
    throw DataError("classifier: both correct and incorrect snippets are required");
  const int width = static_cast<int>(features.front().size());
  if (expected_width && *expected_width != width)
    throw DataError("classifier: expected input width " + std::to_string(*expected_width));

  RankerParams p = init_ranker(width, cfg.seed);
  p.kind = "classifier";
  p.config_echo = cfg;
  Adam adam({cfg.learning_rate});
  Rng rng(mix_seed(cfg.seed, "classifier_train"));
  std::vector<std::size_t> order(features.size());
  ClassifierTrainResult result;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      Eigen::MatrixXd x(width, static_cast<Eigen::Index>(stop - start));
      Eigen::RowVectorXd y(x.cols());
      for (std::size_t b = start; b < stop; ++b) {
        x.col(static_cast<Eigen::Index>(b - start)) = features[order[b]];
        y[static_cast<Eigen::Index>(b - start)] = incorrect[order[b]] ? 1.0 : 0.0;
      }
      const MlpTrace t = mlp_forward(p, x);
      Eigen::RowVectorXd d(x.cols());
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double z = t.logits[c];
        // log(1 + e^z) - y z, computed stably
        total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y[c] * z;
        d[c] = (1.0 / (1.0 + std::exp(-z)) - y[c]) / static_cast<double>(x.cols());
      }
      MlpGradients g = MlpGradients::zeros_like(p);
      mlp_backward(p, t, d, g);
      adam_step(adam, p, g);
    }
    result.epoch_loss.push_back(total / static_cast<double>(features.size()));
  }
  round_to_f32(p);
  result.training_scores = score_lines(p, features);
  result.threshold = youden_threshold(result.training_scores, incorrect);
  result.params = std::move(p);
  return result;
}

/// Probing baseline: the identical network and objectives fed raw states
/// (width d) instead of SAE latents.
inline RankerTrainResult probing_baseline_train_ranker(const std::vector<RankingExample>& raw, int state_dim,
                                                       const RankerTrainConfig& cfg) {
  return train_ranker(raw, cfg, state_dim);
}

inline ClassifierTrainResult probing_baseline_train_classifier(const std::vector<Eigen::VectorXd>& raw_states,
                                                               const std::vector<bool>& incorrect, int state_dim,
                                                               const RankerTrainConfig& cfg) {
  return train_snippet_classifier(raw_states, incorrect, cfg, state_dim);
}

// ---------------------------------------------------------------------------
// PTRK parameter file: "PTRK" | version u32 | json_len u32 | JSON header |
// per layer: W (row-major out x in) then b, f32le.

inline constexpr char kRankerMagic[4] = {'P', 'T', 'R', 'K'};
inline constexpr std::uint32_t kRankerFormatVersion = 1;

inline std::string serialize_ranker(const RankerParams& p) {
  p.validate();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& w : p.weights) layers.push_back({w.rows(), w.cols()});
  const nlohmann::json header = {{"kind", p.kind},
                                 {"layers", layers},
                                 {"input_width", p.input_width()},
                                 {"seed", p.seed},
                                 {"config", p.config_echo}};
  const std::string json = header.dump();
  std::string out(kRankerMagic, 4);
  io::put_u32(out, kRankerFormatVersion);
  io::put_u32(out, static_cast<std::uint32_t>(json.size()));
  out += json;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) io::put_f32(out, static_cast<float>(w(r, c)));
    for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) io::put_f32(out, static_cast<float>(p.biases[l][r]));
  }
  return out;
}

inline RankerParams deserialize_ranker(std::string_view bytes) {
  auto u = [&bytes](std::size_t at) { return reinterpret_cast<const unsigned char*>(bytes.data()) + at; };
  if (bytes.size() < 12 || bytes.substr(0, 4) != std::string_view(kRankerMagic, 4))
    throw ModelFileError("not a PTRK parameter file");
  if (io::get_u32(u(4)) != kRankerFormatVersion) throw ModelFileError("unsupported PTRK version");
  const std::size_t json_len = io::get_u32(u(8));
  if (12 + json_len > bytes.size()) throw ModelFileError("truncated PTRK header");
  RankerParams p;
  std::vector<std::pair<int, int>> shapes;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(12, json_len));
    p.kind = header.at("kind").get<std::string>();
    p.seed = header.at("seed").get<std::uint64_t>();
    p.config_echo = header.at("config");
    for (const auto& l : header.at("layers")) shapes.emplace_back(l.at(0).get<int>(), l.at(1).get<int>());
    if (shapes.empty() || header.at("input_width").get<int>() != shapes.front().second)
      throw ModelFileError("PTRK input width disagrees with first layer");
  } catch (const nlohmann::json::exception& e) {
    throw ModelFileError(std::string("malformed PTRK header: ") + e.what());
  }
  std::size_t count = 0;
  for (auto [o, i] : shapes) {
    if (o < 1 || i < 1) throw ModelFileError("invalid PTRK layer shape");
    count += static_cast<std::size_t>(o) * i + o;
  }
  if (bytes.size() != 12 + json_len + 4 * count) throw ModelFileError("PTRK payload size mismatch");
  std::size_t at = 12 + json_len;
  auto get = [&]() {
    const float v = io::get_f32(u(at));
    at += 4;
    if (!std::isfinite(v)) throw ModelFileError("non-finite PTRK parameter");
    return static_cast<double>(v);
  };
  for (auto [o, i] : shapes) {
    Eigen::MatrixXd w(o, i);
    for (int r = 0; r < o; ++r)
      for (int c = 0; c < i; ++c) w(r, c) = get();
    Eigen::VectorXd b(o);
    for (int r = 0; r < o; ++r) b[r] = get();
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ModelFileError(std::string("PTRK: ") + e.what());
  }
  return p;
}

inline void save_ranker(const std::filesystem::path& path, const RankerParams& p) {
  io::write_file_atomic(path, serialize_ranker(p));
}

inline RankerParams load_ranker(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::exception& e) {
    throw ModelFileError(e.what());
  }
  return deserialize_ranker(bytes);
}

}  // namespace pttrust

#endif  // PTTRUST_RANKER_HPP_
