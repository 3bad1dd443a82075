// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pttrust/evalkit.hpp"
#include "pttrust/pipeline.hpp"
#include "pttrust/ranker.hpp"
#include "pttrust/ranking.hpp"
#include "pttrust/sae.hpp"
#include "pttrust/server.hpp"
#include "planted_world.hpp"
#include "sae_fixtures.hpp"
#include "test_util.hpp"

#include "httplib.h"

namespace pttrust::acceptance {
namespace {

using testing::TempDir;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// SAE gradient correctness

bool active_sets_equal(const SaeModel& a, const SaeModel& b, const std::vector<Eigen::VectorXd>& xs) {
  for (const auto& x : xs)
    if (topk_indices(pre_activation(a, x), a.k) != topk_indices(pre_activation(b, x), b.k)) return false;
  return true;
}

// Gap between the k-th and (k+1)-th pre-activation, minimized over inputs.
double topk_clearance(const SaeModel& m, const std::vector<Eigen::VectorXd>& xs) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& x : xs) {
    Eigen::VectorXd pre = pre_activation(m, x);
    std::vector<double> v(pre.data(), pre.data() + pre.size());
    std::ranges::sort(v, std::greater<>{});
    worst = std::min(worst, v[static_cast<std::size_t>(m.k) - 1] - v[static_cast<std::size_t>(m.k)]);
  }
  return worst;
}

Outcome gradient_criterion() {
  const auto t0 = Clock::now();
  constexpr double h = 1e-4;
  Rng rng(2024);
  double worst[4] = {0, 0, 0, 0};
  int configs = 0, coords = 0;
  while (configs < 20) {
    const auto model = testing::random_sae(8, 6, 3, rng);
    std::vector<Eigen::VectorXd> states;
    for (int i = 0; i < 6; ++i) states.push_back(testing::random_vector(8, rng));
    if (topk_clearance(model, states) < 1e-2) continue;  // redraw configurations sitting on a TopK tie
    const double d01 = (encode(model, states[0]).values - encode(model, states[1]).values).norm();
    const double d23 = (encode(model, states[2]).values - encode(model, states[3]).values).norm();
    if (d01 < 1e-2 || d23 < 1e-2) continue;
    // One hinge active, one inactive.
    std::vector<StatePair> pairs{{&states[0], &states[1], 1.5 * d01 + 0.1}, {&states[2], &states[3], 0.5 * d23}};
    std::vector<const Eigen::VectorXd*> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(&states[static_cast<std::size_t>(i)]);
    batch.push_back(&states[4]);
    batch.push_back(&states[5]);

    SaeGradients g = SaeGradients::zeros_like(model);
    sae_loss(model, batch, pairs, 1.0, &g);
    const Eigen::MatrixXd* grads[4] = {&g.w_enc, &g.w_dec, nullptr, nullptr};
    const Eigen::MatrixXd gb_pre = g.b_pre, gb_enc = g.b_enc;
    grads[2] = &gb_pre;
    grads[3] = &gb_enc;

    SaeModel probe = model;
    auto check_block = [&](Eigen::Ref<Eigen::MatrixXd> block, const Eigen::MatrixXd& grad, double& w) {
      for (Eigen::Index i = 0; i < block.size(); ++i) {
        double& c = block.data()[i];
        const double saved = c;
        c = saved + h;
        const bool smooth_p = active_sets_equal(model, probe, states);
        const double lp = sae_loss(probe, batch, pairs, 1.0, nullptr).total;
        c = saved - h;
        const bool smooth_m = active_sets_equal(model, probe, states);
        const double lm = sae_loss(probe, batch, pairs, 1.0, nullptr).total;
        c = saved;
        if (!smooth_p || !smooth_m) throw std::logic_error("perturbation crossed a TopK boundary");
        const double numeric = (lp - lm) / (2 * h);
        const double a = grad.data()[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        w = std::max(w, rel);
        ++coords;
      }
    };
    Eigen::Map<Eigen::MatrixXd> b_pre(probe.b_pre.data(), probe.b_pre.size(), 1);
    Eigen::Map<Eigen::MatrixXd> b_enc(probe.b_enc.data(), probe.b_enc.size(), 1);
    check_block(probe.w_enc, *grads[0], worst[0]);
    check_block(probe.w_dec, *grads[1], worst[1]);
    check_block(b_pre, *grads[2], worst[2]);
    check_block(b_enc, *grads[3], worst[3]);
    ++configs;
  }
  const double secs = seconds_since(t0);
  const double max = *std::max_element(worst, worst + 4);
  return {max <= 1e-3 && secs < 10.0,
          fmt("max rel err W_enc %.2e W_dec %.2e b_pre %.2e b_enc %.2e over %d coords in %d configs; %.2fs", worst[0],
              worst[1], worst[2], worst[3], coords, configs, secs)};
}

// ---------------------------------------------------------------------------
// SAE subspace recovery

Outcome subspace_criterion() {
  const auto t0 = Clock::now();
  const auto data = testing::subspace_samples(64, 8, 20000, 99);
  SaeTrainConfig cfg;
  cfg.latent_dim = 64;
  cfg.k = 8;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 64;
  cfg.epochs = 5;
  cfg.seed = 99;
  const auto r = train_sae(data, {}, cfg);
  const double secs = seconds_since(t0);
  const double ratio = r.log.back().plain / r.log.front().plain;
  return {ratio < 0.01 && secs < 60.0,
          fmt("epoch-0 mean L_plain %.4g, epoch-4 %.4g, ratio %.3g; %.2fs", r.log.front().plain, r.log.back().plain,
              ratio, secs)};
}

// ---------------------------------------------------------------------------
// TopK contract

Outcome topk_criterion() {
  Rng rng(77);
  int bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const int m = 1 + static_cast<int>(rng.below(64));
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    Eigen::VectorXd v(m);
    const bool discrete = t % 2 == 0;
    for (int i = 0; i < m; ++i) {
      double x = discrete ? static_cast<double>(1 + rng.below(4)) * (rng.below(2) ? 1.0 : -1.0) : rng.normal();
      if (x == 0.0) x = 1e-3;
      v[i] = x;
    }
    std::vector<int> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] > v[b]; });
    std::vector<int> keep(idx.begin(), idx.begin() + k);
    std::ranges::sort(keep);

    const Eigen::VectorXd out = topk_activation(v, k);
    int nonzero = 0;
    std::vector<int> kept;
    for (int i = 0; i < m; ++i) {
      if (out[i] != 0.0) {
        ++nonzero;
        kept.push_back(i);
        if (out[i] != v[i]) ++bad;
      }
    }
    if (nonzero != k || kept != keep) ++bad;
  }
  return {bad == 0, fmt("10000 vectors (half with ties), %d violations", bad)};
}

// ---------------------------------------------------------------------------
// NeuralNDCG against exact NDCG

double hard_ndcg_oracle(const std::vector<double>& scores, const std::vector<int>& rel) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> ideal = rel;
  std::ranges::sort(ideal, std::greater<>{});
  double dcg = 0, idcg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double disc = 1.0 / std::log2(static_cast<double>(i) + 2.0);
    dcg += (std::pow(2.0, rel[order[i]]) - 1.0) * disc;
    idcg += (std::pow(2.0, ideal[i]) - 1.0) * disc;
  }
  return dcg / idcg;
}

Outcome ndcg_criterion() {
  const auto t0 = Clock::now();
  NdcgLossSettings cfg;
  cfg.temperature = 0.01;
  cfg.sinkhorn_iterations = 3;
  double worst = 0;
  long cases = 0;
  int excluded_ok = 0, excluded_total = 0;
  for (int n = 1; n <= 6; ++n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    int total_rel = 1;
    for (int i = 0; i < n; ++i) total_rel *= 3;
    for (int code = 0; code < total_rel; ++code) {
      std::vector<int> rel(static_cast<std::size_t>(n));
      int c = code;
      for (auto& r : rel) {
        r = c % 3;
        c /= 3;
      }
      std::iota(perm.begin(), perm.end(), 0);
      if (std::ranges::all_of(rel, [](int r) { return r == 0; })) {
        ++excluded_total;
        try {
          neural_ndcg_loss(std::vector<double>(static_cast<std::size_t>(n), 0.0), rel, cfg);
        } catch (const ExcludedError&) {
          ++excluded_ok;
        }
        continue;
      }
      do {
        std::vector<double> scores(perm.begin(), perm.end());
        const double loss = neural_ndcg_loss(scores, rel, cfg);
        worst = std::max(worst, std::abs(loss + hard_ndcg_oracle(scores, rel)));
        ++cases;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-3 && excluded_ok == excluded_total && secs < 120.0,
          fmt("%ld (relevance, ordering) cases, max |loss + NDCG| %.2e, all-zero lists excluded %d/%d; %.2fs", cases,
              worst, excluded_ok, excluded_total, secs)};
}

// ---------------------------------------------------------------------------
// Planted-signal end to end

struct PlantedResult {
  double top1 = 0;
  double accuracy = 0;
  double cosine = 0;
  double seconds = 0;
  std::size_t evaluated = 0;
};

PlantedResult run_planted(const testing::PlantedSpec& spec) {
  const auto t0 = Clock::now();
  TempDir dir;
  const Eigen::VectorXd u = testing::write_planted_world(dir.path(), spec);
  const auto cfg = load_config(dir / "config.json");
  cmd_mutate(cfg);
  testing::extract_mutation_states(dir.path(), spec);
  cmd_pretrain(cfg);
  cmd_bind(cfg);
  cmd_assess(cfg);
  cmd_eval(cfg);
  const auto metrics = nlohmann::json::parse(io::read_file(cfg.paths.eval_dir / kMetricsFile));
  const auto sae = load_sae(cfg.paths.models_dir / kSaeFile);
  PlantedResult r;
  r.top1 = metrics["topk_hit_rate"]["1"].get<double>();
  r.accuracy = metrics["snippet_accuracy"].get<double>();
  r.evaluated = metrics["hit_rate_snippets"].get<std::size_t>();
  const int top = metrics["diff_map"]["top_latent"].get<int>();
  const double sign = metrics["diff_map"]["top_value"].get<double>() >= 0 ? 1.0 : -1.0;
  r.cosine = sign * sae.w_dec.col(top).normalized().dot(u);
  r.seconds = seconds_since(t0);
  return r;
}

Outcome planted_criterion() {
  testing::PlantedSpec spec;
  spec.dim = 64;
  spec.noise = 1.0;  // correct lines ~ N(0, I)
  spec.shift = 2.0;
  spec.bind = 100;
  spec.assess = 200;
  spec.sae_k = 32;
  spec.sae_epochs = 40;
  spec.ranker_epochs = 300;
  spec.classifier_epochs = 300;
  const auto r = run_planted(spec);
  return {r.top1 >= 0.90 && r.accuracy >= 0.85 && r.cosine >= 0.5 && r.seconds < 300.0,
          fmt("noise sd 1.0: Top-1 %.3f (need 0.90) over %zu snippets, accuracy %.3f (need 0.85), decoder cosine "
              "%.3f (need 0.5); %.1fs",
              r.top1, r.evaluated, r.accuracy, r.cosine, r.seconds)};
}

// Best achievable Top-1 for the generator above, by Monte Carlo with the
// planted direction known: the buggy line wins iff its projection is the
// largest.
double bayes_top1(double noise, double shift, std::uint64_t seed) {
  Rng rng(seed);
  int hits = 0;
  constexpr int kTrials = 200000;
  for (int t = 0; t < kTrials; ++t) {
    const auto n = 3 + rng.below(6);
    const double bug = shift + noise * rng.normal();
    bool win = true;
    for (std::uint64_t l = 1; l < n; ++l) win = win && noise * rng.normal() < bug;
    hits += win;
  }
  return static_cast<double>(hits) / kTrials;
}

// ---------------------------------------------------------------------------
// Metric oracles

double hit_rate_oracle(const std::vector<double>& risk, const std::vector<bool>& buggy,
                       const std::vector<std::uint32_t>& tokens, std::size_t k) {
  const std::size_t n = risk.size();
  k = std::min(k, n);
  std::vector<std::uint32_t> chosen;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
    bool ok = true;
    for (std::uint32_t in = 0; in < n && ok; ++in)
      for (std::uint32_t out = 0; out < n && ok; ++out)
        if ((mask >> in & 1u) && !(mask >> out & 1u) &&
            (risk[out] > risk[in] || (risk[out] == risk[in] && out < in)))
          ok = false;
    if (ok) {
      chosen.clear();
      for (std::uint32_t i = 0; i < n; ++i)
        if (mask >> i & 1u) chosen.push_back(i);
    }
  }
  double hit = 0, total = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!buggy[i]) continue;
    total += tokens[i];
    if (std::ranges::find(chosen, i) != chosen.end()) hit += tokens[i];
  }
  return hit / total;
}

Outcome metric_criterion() {
  Rng rng(5150);
  int mismatches = 0, nonmonotone = 0, snippets = 0;
  while (snippets < 1000) {
    const auto n = static_cast<std::size_t>(1 + rng.below(10));
    std::vector<double> risk(n);
    std::vector<bool> buggy(n);
    LineLabelSet labels;
    labels.snippet_id = static_cast<std::uint32_t>(snippets);
    for (std::size_t i = 0; i < n; ++i) {
      risk[i] = static_cast<double>(rng.below(5)) / 4.0;  // frequent ties
      buggy[i] = rng.uniform() < 0.3;
      labels.line_token_counts.push_back(static_cast<std::uint32_t>(1 + rng.below(9)));
      labels.line_lengths.push_back(10);
      if (buggy[i]) labels.error_lines.push_back(static_cast<std::uint32_t>(i));
    }
    if (labels.error_lines.empty()) continue;
    ++snippets;
    const auto report = make_risk_report(labels.snippet_id, risk);
    double prev = -1;
    for (std::size_t k = 1; k <= n + 1; ++k) {
      const double got = topk_hit_rate(report, labels, k);
      if (got != hit_rate_oracle(risk, buggy, labels.line_token_counts, k)) ++mismatches;
      if (got < prev) ++nonmonotone;
      prev = got;
    }
  }

  double worst_w = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<std::size_t>(1 + rng.below(50));
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = 3.0 * rng.normal() + 1.0;
    const double got = wasserstein_1d(a, b);
    std::ranges::sort(a);
    std::ranges::sort(b);
    double expect = 0;
    for (std::size_t i = 0; i < n; ++i) expect += std::abs(a[i] - b[i]);
    expect /= static_cast<double>(n);
    worst_w = std::max(worst_w, std::abs(got - expect));
  }
  return {mismatches == 0 && nonmonotone == 0 && worst_w <= 1e-9,
          fmt("1000 snippets: %d hit-rate mismatches vs subset enumeration, %d monotonicity violations; "
              "Wasserstein max deviation %.2e on 1000 equal-size pairs",
              mismatches, nonmonotone, worst_w)};
}

// ---------------------------------------------------------------------------
// Determinism, format round trips and the review API share one small world.

testing::PlantedSpec small_world() {
  testing::PlantedSpec spec;
  spec.dim = 16;
  spec.corpus = 40;
  spec.bind = 40;
  spec.assess = 30;
  spec.seed = 13;
  spec.sae_epochs = 3;
  spec.ranker_epochs = 5;
  spec.classifier_epochs = 5;
  return spec;
}

std::map<std::string, std::string> artifacts(const PipelineConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& root : {cfg.paths.mutated_dir, cfg.paths.models_dir, cfg.paths.reports_dir}) {
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) out[fs::relative(e.path(), root.parent_path()).string()] = io::read_file(e.path());
  }
  for (const auto& s : cfg.mutated_store_paths()) out[s.filename().string()] = io::read_file(s);
  return out;
}

void run_commands(const fs::path& root, const testing::PlantedSpec& spec) {
  const auto cfg = load_config(root / "config.json");
  cmd_mutate(cfg);
  testing::extract_mutation_states(root, spec);
  cmd_pretrain(cfg);
  cmd_bind(cfg);
  cmd_assess(cfg);
}

Outcome determinism_criterion(const fs::path& root) {
  const auto spec = small_world();
  testing::write_planted_world(root, spec);
  const auto cfg = load_config(root / "config.json");
  run_commands(root, spec);
  const auto first = artifacts(cfg);
  for (const auto& d : {cfg.paths.mutated_dir, cfg.paths.models_dir, cfg.paths.reports_dir}) fs::remove_all(d);
  for (const auto& s : cfg.mutated_store_paths()) fs::remove(s);
  run_commands(root, spec);
  const auto second = artifacts(cfg);
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != bytes) differing.push_back(name);
  }
  const bool same_set = first.size() == second.size();
  std::string detail = fmt("mutate, pretrain, bind, assess rerun: %zu artifacts compared, %zu differ", first.size(),
                           differing.size());
  for (const auto& d : differing) detail += " " + d;
  return {same_set && differing.empty() && first.size() > 10, detail};
}

Outcome roundtrip_criterion(const fs::path& root, const fs::path& scratch) {
  const auto cfg = load_config(root / "config.json");
  std::vector<std::string> broken;

  StoreHeader h;
  const auto records = read_store(cfg.paths.bind_store, {}, &h);
  write_store(scratch / "a.ptas", h, records);
  StoreHeader h2;
  const auto again = read_store(scratch / "a.ptas", {}, &h2);
  write_store(scratch / "b.ptas", h2, again);
  if (io::read_file(scratch / "a.ptas") != io::read_file(scratch / "b.ptas")) broken.emplace_back("PTAS");

  const auto sae = load_sae(cfg.paths.models_dir / kSaeFile);
  save_sae(scratch / "a.ptsm", sae);
  save_sae(scratch / "b.ptsm", load_sae(scratch / "a.ptsm"));
  if (io::read_file(scratch / "a.ptsm") != io::read_file(scratch / "b.ptsm") ||
      io::read_file(scratch / "a.ptsm") != io::read_file(cfg.paths.models_dir / kSaeFile))
    broken.emplace_back("PTSM");

  for (const char* name : {kRankerFile, kClassifierFile}) {
    const auto p = load_ranker(cfg.paths.models_dir / name);
    save_ranker(scratch / "a.ptrk", p);
    save_ranker(scratch / "b.ptrk", load_ranker(scratch / "a.ptrk"));
    if (io::read_file(scratch / "a.ptrk") != io::read_file(scratch / "b.ptrk") ||
        io::read_file(scratch / "a.ptrk") != io::read_file(cfg.paths.models_dir / name))
      broken.emplace_back(name);
  }
  std::string detail = fmt("PTAS (%zu records), PTSM, PTRK ranker and classifier", records.size());
  for (const auto& b : broken) detail += "; differs: " + b;
  return {broken.empty(), detail};
}

Outcome api_criterion(const fs::path& root) {
  const auto cfg = load_config(root / "config.json");
  const auto labels_path = root / "review_labels.jsonl";
  ReviewServer server(cfg.paths.reports_dir, labels_path);
  const int port = server.start("127.0.0.1", 0);
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  httplib::Client client("127.0.0.1", port);

  auto list_res = client.Get("/api/snippets");
  expect(list_res && list_res->status == 200, "list status");
  const auto list = list_res ? nlohmann::json::parse(list_res->body) : nlohmann::json::array();
  expect(list.size() == 30, "list size");
  std::vector<std::uint32_t> ids;
  for (const auto& s : list) ids.push_back(s["snippet_id"].get<std::uint32_t>());
  if (ids.size() < 3) {
    server.stop();
    return {false, "fewer than three reports listed"};
  }

  const auto id = ids[0];
  auto detail = client.Get("/api/snippets/" + std::to_string(id));
  expect(detail && detail->status == 200, "detail status");
  const auto report = detail ? nlohmann::json::parse(detail->body) : nlohmann::json::object();
  const auto n_lines = report.value("lines", nlohmann::json::array()).size();
  expect(n_lines > 0 && report["labels"]["error_lines"].is_null(), "detail body");

  const nlohmann::json post{{"error_lines", {0}}};
  auto posted = client.Post("/api/snippets/" + std::to_string(id) + "/labels", post.dump(), "application/json");
  expect(posted && posted->status == 200, "label post");
  auto reread = client.Get("/api/snippets/" + std::to_string(id));
  expect(reread && nlohmann::json::parse(reread->body)["labels"]["error_lines"] == nlohmann::json{0},
         "read-your-writes");

  auto bad = client.Post("/api/snippets/" + std::to_string(id) + "/labels",
                         nlohmann::json{{"error_lines", {n_lines}}}.dump(), "application/json");
  expect(bad && bad->status == 400, "out-of-range index rejected");
  auto missing = client.Get("/api/snippets/4294967295");
  expect(missing && missing->status == 404, "unknown snippet 404");

  constexpr int kThreads = 8, kPosts = 20;
  std::atomic<int> acked{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port);
      const auto target = ids[static_cast<std::size_t>(t) % ids.size()];
      for (int i = 0; i < kPosts; ++i) {
        auto r = c.Post("/api/snippets/" + std::to_string(target) + "/labels",
                        nlohmann::json{{"error_lines", nlohmann::json::array()}}.dump(), "application/json");
        if (r && r->status == 200) ++acked;
      }
    });
  }
  for (auto& t : threads) t.join();
  server.stop();

  std::size_t lines = 0;
  bool parsed = true;
  std::istringstream in(io::read_file(labels_path));
  for (std::string line; std::getline(in, line); ++lines) parsed = parsed && nlohmann::json::accept(line);
  expect(acked == kThreads * kPosts, "all concurrent posts acknowledged");
  expect(parsed && lines == static_cast<std::size_t>(1 + kThreads * kPosts), "label log holds every post intact");

  std::string msg = fmt("list %zu, detail, post, reread, 400/404, %d concurrent posts acknowledged, %zu log lines",
                        list.size(), acked.load(), lines);
  for (const auto& f : failures) msg += "; failed: " + f;
  return {failures.empty(), msg};
}

int run() {
  int failed = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-32s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };

  report("sae_gradient_correctness", gradient_criterion);
  report("sae_subspace_recovery", subspace_criterion);
  report("topk_contract", topk_criterion);
  report("neural_ndcg_vs_exact_ndcg", ndcg_criterion);
  report("planted_signal_end_to_end", planted_criterion);
  report("metric_oracles", metric_criterion);

  TempDir world;
  TempDir scratch;
  report("determinism", [&] { return determinism_criterion(world.path()); });
  report("format_round_trips", [&] { return roundtrip_criterion(world.path(), scratch.path()); });
  report("api_contract", [&] { return api_criterion(world.path()); });

  // Context for the planted criterion; not criteria.
  std::printf("INFO  best achievable Top-1 for the planted generator: %.3f at noise sd 1.0, %.3f at 0.35\n",
              bayes_top1(1.0, 2.0, 1), bayes_top1(0.35, 2.0, 1));
  try {
    const auto r = run_planted(testing::PlantedSpec{});
    std::printf("INFO  planted run at noise sd 0.35: Top-1 %.3f, accuracy %.3f, decoder cosine %.3f; %.1fs\n", r.top1,
                r.accuracy, r.cosine, r.seconds);
  } catch (const std::exception& e) {
    std::printf("INFO  planted run at noise sd 0.35 threw: %s\n", e.what());
  }

  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace pttrust::acceptance

int main() { return pttrust::acceptance::run(); }
