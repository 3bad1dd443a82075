#ifndef PTTRUST_SAE_HPP_
#define PTTRUST_SAE_HPP_

// TopK sparse autoencoder over per-line internal states.
//
//   z     = TopK(W_enc (s - b_pre) + b_enc)
//   s_hat = W_dec z + b_pre
//   loss  = mean ||s - s_hat||^2 + w * mean max(0, eps - ||z_i - z_j||)^2
//
// Parameters are held in double precision; model files store f32, and
// train_sae() rounds its result through f32 so the in-memory model equals
// the one written to disk.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pttrust/activation_store.hpp"
#include "pttrust/binary_io.hpp"
#include "pttrust/errors.hpp"
#include "pttrust/mutator.hpp"
#include "pttrust/optim.hpp"
#include "pttrust/rng.hpp"

namespace pttrust {

struct SaeModel {
  Eigen::MatrixXd w_enc;  // m x d
  Eigen::VectorXd b_pre;  // d
  Eigen::VectorXd b_enc;  // m
  Eigen::MatrixXd w_dec;  // d x m
  int k = 1;
  std::uint64_t seed = 0;
  nlohmann::json config_echo = nlohmann::json::object();

  int dim_d() const { return static_cast<int>(b_pre.size()); }
  int dim_m() const { return static_cast<int>(b_enc.size()); }
};

struct LatentVector {
  Eigen::VectorXd values;  // length m, zero outside `active`
  std::vector<int> active;  // ascending index order
};

/// Indices of the k largest entries by signed value; ties go to the lower
/// index. Returned in ascending index order.
inline std::vector<int> topk_indices(const Eigen::Ref<const Eigen::VectorXd>& v, int k) {
  const int m = static_cast<int>(v.size());
  if (k < 1 || k > m) throw std::invalid_argument("topk: k must lie in [1, " + std::to_string(m) + "]");
  std::vector<int> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  auto before = [&v](int a, int b) { return v[a] > v[b] || (v[a] == v[b] && a < b); };
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), before);
  idx.resize(static_cast<std::size_t>(k));
  std::ranges::sort(idx);
  return idx;
}

inline Eigen::VectorXd topk_activation(const Eigen::Ref<const Eigen::VectorXd>& v, int k) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (int j : topk_indices(v, k)) out[j] = v[j];
  return out;
}

inline void check_model(const SaeModel& model) {
  const auto d = model.b_pre.size();
  const auto m = model.b_enc.size();
  if (d < 1 || m < 1 || model.w_enc.rows() != m || model.w_enc.cols() != d || model.w_dec.rows() != d ||
      model.w_dec.cols() != m)
    throw std::invalid_argument("inconsistent SAE shapes");
  if (model.k < 1 || model.k > m) throw std::invalid_argument("SAE k must lie in [1, m]");
}

inline Eigen::VectorXd pre_activation(const SaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& s) {
  if (s.size() != model.b_pre.size())
    throw std::invalid_argument("encode: expected dim " + std::to_string(model.b_pre.size()) + ", got " +
                                std::to_string(s.size()));
  return model.w_enc * (s - model.b_pre) + model.b_enc;
}

inline LatentVector encode(const SaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& s) {
  const Eigen::VectorXd pre = pre_activation(model, s);
  LatentVector z{Eigen::VectorXd::Zero(pre.size()), topk_indices(pre, model.k)};
  for (int j : z.active) z.values[j] = pre[j];
  return z;
}

/// Cost is proportional to |active|, not m.
inline Eigen::VectorXd decode(const SaeModel& model, const LatentVector& z) {
  if (z.values.size() != model.b_enc.size())
    throw std::invalid_argument("decode: expected latent width " + std::to_string(model.b_enc.size()));
  Eigen::VectorXd out = model.b_pre;
  for (int j : z.active) out.noalias() += z.values[j] * model.w_dec.col(j);
  return out;
}

inline double loss_plain(const Eigen::Ref<const Eigen::VectorXd>& s, const Eigen::Ref<const Eigen::VectorXd>& s_hat) {
  if (s.size() != s_hat.size()) throw std::invalid_argument("loss_plain: length mismatch");
  return (s - s_hat).squaredNorm();
}

inline double loss_contrastive(const Eigen::Ref<const Eigen::VectorXd>& z_i,
                               const Eigen::Ref<const Eigen::VectorXd>& z_j, double margin) {
  if (z_i.size() != z_j.size()) throw std::invalid_argument("loss_contrastive: length mismatch");
  const double gap = margin - (z_i - z_j).norm();
  return gap > 0.0 ? gap * gap : 0.0;
}

struct SaeGradients {
  Eigen::MatrixXd w_enc;
  Eigen::VectorXd b_pre;
  Eigen::VectorXd b_enc;
  Eigen::MatrixXd w_dec;

  static SaeGradients zeros_like(const SaeModel& m) {
    return {Eigen::MatrixXd::Zero(m.w_enc.rows(), m.w_enc.cols()), Eigen::VectorXd::Zero(m.b_pre.size()),
            Eigen::VectorXd::Zero(m.b_enc.size()), Eigen::MatrixXd::Zero(m.w_dec.rows(), m.w_dec.cols())};
  }
};

struct SaeLoss {
  double plain = 0.0;        // mean over the record batch
  double contrastive = 0.0;  // mean over the pair batch
  double total = 0.0;
};

/// A contrastive pair resolved to concrete state vectors.
struct StatePair {
  const Eigen::VectorXd* correct;
  const Eigen::VectorXd* incorrect;
  double margin;
};

namespace detail {

// Backpropagates a latent-space gradient through the encoder; the TopK mask
// is held fixed.
inline void encoder_backward(const SaeModel& model, const Eigen::VectorXd& x_centered, const LatentVector& z,
                             const Eigen::VectorXd& grad_z, SaeGradients& g) {
  for (int j : z.active) {
    const double gj = grad_z[j];
    if (gj == 0.0) continue;
    g.w_enc.row(j).noalias() += gj * x_centered.transpose();
    g.b_enc[j] += gj;
    g.b_pre.noalias() -= gj * model.w_enc.row(j).transpose();
  }
}

}  // namespace detail

/// Loss of one batch, and optionally its exact gradient.
inline SaeLoss sae_loss(const SaeModel& model, std::span<const Eigen::VectorXd* const> batch,
                        std::span<const StatePair> pairs, double contrastive_weight, SaeGradients* grad) {
  SaeLoss loss;
  if (!batch.empty()) {
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const Eigen::VectorXd* s : batch) {
      const Eigen::VectorXd x = *s - model.b_pre;
      const LatentVector z = encode(model, *s);
      const Eigen::VectorXd r = decode(model, z) - *s;
      loss.plain += r.squaredNorm() * scale;
      if (grad == nullptr) continue;
      const Eigen::VectorXd g_out = (2.0 * scale) * r;
      grad->b_pre += g_out;
      Eigen::VectorXd g_z = Eigen::VectorXd::Zero(z.values.size());
      for (int j : z.active) {
        grad->w_dec.col(j).noalias() += z.values[j] * g_out;
        g_z[j] = model.w_dec.col(j).dot(g_out);
      }
      detail::encoder_backward(model, x, z, g_z, *grad);
    }
  }
  if (!pairs.empty()) {
    const double scale = 1.0 / static_cast<double>(pairs.size());
    for (const StatePair& p : pairs) {
      const LatentVector zi = encode(model, *p.correct);
      const LatentVector zj = encode(model, *p.incorrect);
      const Eigen::VectorXd diff = zi.values - zj.values;
      const double dist = diff.norm();
      const double gap = p.margin - dist;
      if (gap <= 0.0) continue;
      loss.contrastive += gap * gap * scale;
      // At zero distance the direction is undefined; the subgradient is 0.
      if (grad == nullptr || dist == 0.0) continue;
      const Eigen::VectorXd g_zi = (-2.0 * gap / dist * scale * contrastive_weight) * diff;
      detail::encoder_backward(model, *p.correct - model.b_pre, zi, g_zi, *grad);
      detail::encoder_backward(model, *p.incorrect - model.b_pre, zj, -g_zi, *grad);
    }
  }
  loss.total = loss.plain + contrastive_weight * loss.contrastive;
  return loss;
}

struct SaeTrainConfig {
  int latent_dim = 1024;
  int k = 32;
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 10;
  std::uint64_t seed = 0;
  double margin = 1.0;
  double contrastive_weight = 1.0;
  std::string optimizer = "adam";

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("sae.learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("sae.batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("sae.epochs must be >= 1");
    if (latent_dim < 1) throw ConfigError("sae.latent_dim must be >= 1");
    if (k < 1 || k > latent_dim) throw ConfigError("sae.k must lie in [1, latent_dim]");
    if (!(margin > 0.0)) throw ConfigError("sae.margin must be > 0");
    if (contrastive_weight < 0.0) throw ConfigError("sae.contrastive_weight must be >= 0");
    if (optimizer != "adam") throw ConfigError("sae.optimizer: only \"adam\" is supported");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SaeTrainConfig, latent_dim, k, learning_rate, batch_size, epochs,
                                                seed, margin, contrastive_weight, optimizer)

inline void normalize_decoder_columns(SaeModel& model) {
  for (Eigen::Index j = 0; j < model.w_dec.cols(); ++j) {
    const double n = model.w_dec.col(j).norm();
    if (n > 0.0) model.w_dec.col(j) /= n;
  }
}

inline void round_to_f32(SaeModel& model) {
  auto r = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  model.w_enc = model.w_enc.unaryExpr(r);
  model.w_dec = model.w_dec.unaryExpr(r);
  model.b_pre = model.b_pre.unaryExpr(r);
  model.b_enc = model.b_enc.unaryExpr(r);
}

/// W_enc ~ U(-1/sqrt(d), 1/sqrt(d)); W_dec = W_enc^T with unit columns;
/// zero biases.
inline SaeModel init_sae(int d, int m, int k, std::uint64_t seed) {
  if (d < 1 || m < 1 || k < 1 || k > m) throw std::invalid_argument("init_sae: bad shape");
  Rng rng(mix_seed(seed, "sae_init"));
  SaeModel model;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  model.w_enc.resize(m, d);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < d; ++c) model.w_enc(i, c) = rng.uniform(-bound, bound);
  model.w_dec = model.w_enc.transpose();
  normalize_decoder_columns(model);
  model.b_pre = Eigen::VectorXd::Zero(d);
  model.b_enc = Eigen::VectorXd::Zero(m);
  model.k = k;
  model.seed = seed;
  return model;
}

struct SaeEpochLog {
  int epoch = 0;
  double plain = 0.0;        // mean over the epoch's batches
  double contrastive = 0.0;  // mean over the epoch's pair batches
  double total = 0.0;
  int dead_latents = 0;      // never active during the epoch
};

inline void to_json(nlohmann::json& j, const SaeEpochLog& e) {
  j = {{"epoch", e.epoch}, {"plain", e.plain}, {"contrastive", e.contrastive}, {"total", e.total},
       {"dead_latents", e.dead_latents}};
}

struct SaeTrainResult {
  SaeModel model;
  std::vector<SaeEpochLog> log;
  double initial_plain = 0.0;  // mean L_plain of the untrained model
  std::size_t skipped_pairs = 0;
};

/// Mini-batch Adam on L_plain + w * L_cont. Each epoch visits every record
/// once and every valid pair once; pairs are spread evenly over the epoch's
/// steps. Decoder columns are renormalized after every step.
inline SaeTrainResult train_sae(const std::vector<Eigen::VectorXd>& states, const std::vector<ContrastivePair>& pairs,
                                const SaeTrainConfig& cfg) {
  cfg.validate();
  if (states.empty()) throw DataError("train_sae: empty store");
  const int d = static_cast<int>(states.front().size());
  for (const auto& s : states)
    if (s.size() != d) throw DataError("train_sae: records disagree in dim");

  SaeTrainResult result;
  std::vector<StatePair> valid;
  for (const auto& p : pairs) {
    if (p.correct >= states.size() || p.incorrect >= states.size()) {
      ++result.skipped_pairs;
      continue;
    }
    valid.push_back({&states[p.correct], &states[p.incorrect], p.margin});
  }

  SaeModel model = init_sae(d, cfg.latent_dim, cfg.k, cfg.seed);
  model.config_echo = cfg;

  {
    std::vector<const Eigen::VectorXd*> all;
    all.reserve(states.size());
    for (const auto& s : states) all.push_back(&s);
    result.initial_plain = sae_loss(model, all, {}, 0.0, nullptr).plain;
  }

  Adam adam({cfg.learning_rate});
  Rng rng(mix_seed(cfg.seed, "sae_train"));
  std::vector<std::size_t> order(states.size());
  std::vector<std::size_t> pair_order(valid.size());
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps = (states.size() + bs - 1) / bs;
  const std::size_t pair_bs = valid.empty() ? 0 : (valid.size() + steps - 1) / steps;

  std::vector<const Eigen::VectorXd*> batch;
  std::vector<StatePair> pair_batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::iota(pair_order.begin(), pair_order.end(), std::size_t{0});
    rng.shuffle(order);
    rng.shuffle(pair_order);
    std::vector<char> fired(static_cast<std::size_t>(cfg.latent_dim), 0);

    SaeEpochLog entry;
    entry.epoch = epoch;
    std::size_t pair_steps = 0;
    for (std::size_t step = 0; step < steps; ++step) {
      batch.clear();
      for (std::size_t i = step * bs; i < std::min(order.size(), (step + 1) * bs); ++i)
        batch.push_back(&states[order[i]]);
      pair_batch.clear();
      for (std::size_t i = step * pair_bs; i < std::min(pair_order.size(), (step + 1) * pair_bs); ++i)
        pair_batch.push_back(valid[pair_order[i]]);

      for (const Eigen::VectorXd* s : batch)
        for (int j : topk_indices(pre_activation(model, *s), model.k)) fired[static_cast<std::size_t>(j)] = 1;

      SaeGradients g = SaeGradients::zeros_like(model);
      const SaeLoss loss = sae_loss(model, batch, pair_batch, cfg.contrastive_weight, &g);
      entry.plain += loss.plain;
      if (!pair_batch.empty()) {
        entry.contrastive += loss.contrastive;
        ++pair_steps;
      }

      adam.begin_step();
      adam.update(0, model.w_enc, g.w_enc);
      adam.update(1, model.b_pre, g.b_pre);
      adam.update(2, model.b_enc, g.b_enc);
      adam.update(3, model.w_dec, g.w_dec);
      normalize_decoder_columns(model);
    }
    entry.plain /= static_cast<double>(steps);
    if (pair_steps > 0) entry.contrastive /= static_cast<double>(pair_steps);
    entry.total = entry.plain + cfg.contrastive_weight * entry.contrastive;
    entry.dead_latents = static_cast<int>(std::count(fired.begin(), fired.end(), 0));
    result.log.push_back(entry);
  }
  round_to_f32(model);
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradientCheckReport {
  double w_enc = 0.0;
  double w_dec = 0.0;
  double b_pre = 0.0;
  double b_enc = 0.0;
  int checked = 0;
  int skipped = 0;  // coordinates too close to a TopK tie or hinge kink

  double max() const { return std::max({w_enc, w_dec, b_pre, b_enc}); }
};

namespace detail {

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// True when every sample keeps the same active set, every TopK boundary is at
// least `clearance` wide and every hinge is at least `clearance` from its kink.
inline bool locally_smooth(const SaeModel& model, std::span<const Eigen::VectorXd* const> batch,
                           std::span<const StatePair> pairs, const std::vector<std::vector<int>>& reference,
                           double clearance) {
  std::size_t at = 0;
  auto check = [&](const Eigen::VectorXd& s) {
    const Eigen::VectorXd pre = pre_activation(model, s);
    const auto active = topk_indices(pre, model.k);
    if (active != reference[at++]) return false;
    if (model.k < pre.size()) {
      double kth = std::numeric_limits<double>::infinity();
      for (int j : active) kth = std::min(kth, pre[j]);
      double next = -std::numeric_limits<double>::infinity();
      std::vector<char> on(static_cast<std::size_t>(pre.size()), 0);
      for (int j : active) on[static_cast<std::size_t>(j)] = 1;
      for (Eigen::Index j = 0; j < pre.size(); ++j)
        if (!on[static_cast<std::size_t>(j)]) next = std::max(next, pre[j]);
      if (kth - next < clearance) return false;
    }
    return true;
  };
  for (const auto* s : batch)
    if (!check(*s)) return false;
  for (const auto& p : pairs) {
    if (!check(*p.correct) || !check(*p.incorrect)) return false;
    const double dist = (encode(model, *p.correct).values - encode(model, *p.incorrect).values).norm();
    if (std::abs(dist - p.margin) < clearance || dist < clearance) return false;
  }
  return true;
}

}  // namespace detail

/// Compares the analytic gradient of the total loss with central differences
/// on up to `samples_per_block` random coordinates of each block, skipping
/// coordinates whose perturbation would cross a TopK tie or the hinge kink.
inline GradientCheckReport gradient_check(const SaeModel& model, std::span<const Eigen::VectorXd* const> batch,
                                          std::span<const StatePair> pairs, double h,
                                          double contrastive_weight = 1.0, int samples_per_block = 40,
                                          std::uint64_t seed = 0) {
  check_model(model);
  SaeGradients analytic = SaeGradients::zeros_like(model);
  sae_loss(model, batch, pairs, contrastive_weight, &analytic);

  std::vector<std::vector<int>> reference;
  for (const auto* s : batch) reference.push_back(topk_indices(pre_activation(model, *s), model.k));
  for (const auto& p : pairs) {
    reference.push_back(topk_indices(pre_activation(model, *p.correct), model.k));
    reference.push_back(topk_indices(pre_activation(model, *p.incorrect), model.k));
  }

  GradientCheckReport report;
  Rng rng(mix_seed(seed, "gradient_check"));
  SaeModel probe = model;
  const double clearance = 10.0 * h;

  auto run_block = [&](auto member, double& worst, const Eigen::MatrixXd& grad) {
    auto& block = probe.*member;
    const auto total = static_cast<std::uint64_t>(block.size());
    for (int t = 0; t < samples_per_block; ++t) {
      const auto flat = static_cast<Eigen::Index>(rng.below(total));
      double& coord = block.data()[flat];
      const double saved = coord;
      coord = saved + h;
      const bool plus_ok = detail::locally_smooth(probe, batch, pairs, reference, clearance);
      const double lp = sae_loss(probe, batch, pairs, contrastive_weight, nullptr).total;
      coord = saved - h;
      const bool minus_ok = detail::locally_smooth(probe, batch, pairs, reference, clearance);
      const double lm = sae_loss(probe, batch, pairs, contrastive_weight, nullptr).total;
      coord = saved;
      if (!plus_ok || !minus_ok) {
        ++report.skipped;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * h);
      worst = std::max(worst, detail::relative_error(grad.data()[flat], numeric));
      ++report.checked;
    }
  };
  if (!detail::locally_smooth(model, batch, pairs, reference, clearance)) {
    report.skipped = 4 * samples_per_block;
    return report;
  }
  run_block(&SaeModel::w_enc, report.w_enc, analytic.w_enc);
  run_block(&SaeModel::w_dec, report.w_dec, analytic.w_dec);
  run_block(&SaeModel::b_pre, report.b_pre, Eigen::MatrixXd(analytic.b_pre));
  run_block(&SaeModel::b_enc, report.b_enc, Eigen::MatrixXd(analytic.b_enc));
  return report;
}

// ---------------------------------------------------------------------------
// PTSM model file: "PTSM" | version u32 | json_len u32 | JSON header |
// b_pre | b_enc | W_enc (row-major m x d) | W_dec (row-major d x m), f32le.

inline constexpr char kSaeMagic[4] = {'P', 'T', 'S', 'M'};
inline constexpr std::uint32_t kSaeFormatVersion = 1;

inline std::string serialize_sae(const SaeModel& model) {
  check_model(model);
  const nlohmann::json header = {{"d", model.dim_d()},
                                 {"m", model.dim_m()},
                                 {"k", model.k},
                                 {"seed", model.seed},
                                 {"config", model.config_echo}};
  const std::string json = header.dump();
  std::string out(kSaeMagic, 4);
  io::put_u32(out, kSaeFormatVersion);
  io::put_u32(out, static_cast<std::uint32_t>(json.size()));
  out += json;
  auto put = [&out](double v) { io::put_f32(out, static_cast<float>(v)); };
  for (Eigen::Index i = 0; i < model.b_pre.size(); ++i) put(model.b_pre[i]);
  for (Eigen::Index i = 0; i < model.b_enc.size(); ++i) put(model.b_enc[i]);
  for (Eigen::Index r = 0; r < model.w_enc.rows(); ++r)
    for (Eigen::Index c = 0; c < model.w_enc.cols(); ++c) put(model.w_enc(r, c));
  for (Eigen::Index r = 0; r < model.w_dec.rows(); ++r)
    for (Eigen::Index c = 0; c < model.w_dec.cols(); ++c) put(model.w_dec(r, c));
  return out;
}

inline SaeModel deserialize_sae(std::string_view bytes) {
  auto u = [&bytes](std::size_t at) { return reinterpret_cast<const unsigned char*>(bytes.data()) + at; };
  if (bytes.size() < 12 || bytes.substr(0, 4) != std::string_view(kSaeMagic, 4))
    throw ModelFileError("not a PTSM model file");
  if (io::get_u32(u(4)) != kSaeFormatVersion) throw ModelFileError("unsupported PTSM version");
  const std::size_t json_len = io::get_u32(u(8));
  if (12 + json_len > bytes.size()) throw ModelFileError("truncated PTSM header");
  SaeModel model;
  int d = 0, m = 0;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(12, json_len));
    d = header.at("d").get<int>();
    m = header.at("m").get<int>();
    model.k = header.at("k").get<int>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.config_echo = header.at("config");
  } catch (const nlohmann::json::exception& e) {
    throw ModelFileError(std::string("malformed PTSM header: ") + e.what());
  }
  if (d < 1 || m < 1 || model.k < 1 || model.k > m) throw ModelFileError("invalid PTSM shape");
  const std::size_t count = static_cast<std::size_t>(d) + m + 2ull * m * d;
  if (bytes.size() != 12 + json_len + 4 * count) throw ModelFileError("PTSM payload size mismatch");
  std::size_t at = 12 + json_len;
  auto get = [&]() {
    const float v = io::get_f32(u(at));
    at += 4;
    if (!std::isfinite(v)) throw ModelFileError("non-finite PTSM parameter");
    return static_cast<double>(v);
  };
  model.b_pre.resize(d);
  model.b_enc.resize(m);
  model.w_enc.resize(m, d);
  model.w_dec.resize(d, m);
  for (int i = 0; i < d; ++i) model.b_pre[i] = get();
  for (int i = 0; i < m; ++i) model.b_enc[i] = get();
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < d; ++c) model.w_enc(r, c) = get();
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < m; ++c) model.w_dec(r, c) = get();
  return model;
}

inline void save_sae(const std::filesystem::path& path, const SaeModel& model) {
  io::write_file_atomic(path, serialize_sae(model));
}

inline SaeModel load_sae(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::exception& e) {
    throw ModelFileError(e.what());
  }
  return deserialize_sae(bytes);
}

inline Eigen::VectorXd to_eigen(std::span<const float> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace pttrust

#endif  // PTTRUST_SAE_HPP_
