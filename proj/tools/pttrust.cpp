// pttrust: command-line driver for the mutate / pretrain / bind / assess /
// eval / serve stages.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pttrust/config.hpp"
#include "pttrust/errors.hpp"
#include "pttrust/pipeline.hpp"
#include "pttrust/server.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kModelFileError = 4 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<int> latent_dim;
  std::optional<int> epochs;
  std::optional<std::string> out;
};

pttrust::PipelineConfig resolve_config(const std::string& command, const Overrides& o) {
  std::string path = o.config;
  if (path.empty()) {
    const char* env = std::getenv("PTTRUST_CONFIG");
    if (env == nullptr || *env == '\0') throw pttrust::ConfigError("no --config given and PTTRUST_CONFIG is unset");
    path = env;
  }
  auto cfg = pttrust::load_config(path);
  if (o.seed) {
    cfg.mutator.master_seed = *o.seed;
    cfg.sae.seed = *o.seed;
    cfg.ranker.seed = *o.seed;
    cfg.classifier.seed = *o.seed;
  }
  if (o.k) cfg.sae.k = *o.k;
  if (o.latent_dim) cfg.sae.latent_dim = *o.latent_dim;
  if (o.epochs) {
    if (command == "pretrain") cfg.sae.epochs = *o.epochs;
    if (command == "bind") {
      cfg.ranker.epochs = *o.epochs;
      cfg.classifier.epochs = *o.epochs;
    }
  }
  if (o.out) {
    const pttrust::fs::path out = pttrust::fs::absolute(*o.out).lexically_normal();
    if (command == "mutate") cfg.paths.mutated_dir = out;
    if (command == "pretrain" || command == "bind") cfg.paths.models_dir = out;
    if (command == "assess") cfg.paths.reports_dir = out;
    if (command == "eval") cfg.paths.eval_dir = out;
  }
  cfg.validate();
  return cfg;
}

pttrust::ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int run(const std::string& command, const Overrides& o) {
  const auto cfg = resolve_config(command, o);
  if (command == "serve") {
    pttrust::ReviewServer server(cfg.require(cfg.paths.reports_dir, "reports_dir"),
                                 cfg.require(cfg.paths.labels, "labels"));
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving " << cfg.paths.reports_dir.string() << " on " << cfg.serve.bind << ":" << cfg.serve.port << "\n";
    server.run(cfg.serve.bind, cfg.serve.port);
    g_server = nullptr;
    return kOk;
  }
  nlohmann::json summary;
  if (command == "mutate") summary = pttrust::cmd_mutate(cfg);
  if (command == "pretrain") summary = pttrust::cmd_pretrain(cfg);
  if (command == "bind") summary = pttrust::cmd_bind(cfg);
  if (command == "assess") summary = pttrust::cmd_assess(cfg);
  if (command == "eval") summary = pttrust::cmd_eval(cfg);
  std::cout << summary.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pttrust: line-level risk assessment from language-model internal states"};
  app.require_subcommand(1, 1);
  Overrides o;
  const char* commands[][2] = {
      {"mutate", "write mutated corpora and pair specs"},
      {"pretrain", "train the sparse autoencoder on original and mutated states"},
      {"bind", "train the line ranker and snippet classifier on labeled generations"},
      {"assess", "write a risk report per snippet"},
      {"eval", "compute hit rates, accuracy, distances and the difference map"},
      {"serve", "serve reports and collect labels over HTTP"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "pipeline config (JSON); falls back to $PTTRUST_CONFIG");
    sub->add_option("--seed", o.seed, "override every seed");
    sub->add_option("--k", o.k, "override sae.k");
    sub->add_option("--latent-dim", o.latent_dim, "override sae.latent_dim");
    sub->add_option("--epochs", o.epochs, "override epochs for this stage");
    sub->add_option("--out", o.out, "override this stage's output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const pttrust::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const pttrust::ModelFileError& e) {
    std::cerr << "model file error: " << e.what() << "\n";
    return kModelFileError;
  } catch (const pttrust::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
