// Test helper for the CLI tests.
//   make_planted_world world <dir>    corpus, generated snippets, stores, config.json
//   make_planted_world extract <dir>  stores for the original and mutated corpora

#include <cstdio>
#include <exception>
#include <string>

#include "planted_world.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s world|extract <dir>\n", argv[0]);
    return 2;
  }
  const std::string mode = argv[1];
  const pttrust::fs::path dir = argv[2];
  pttrust::testing::PlantedSpec spec;
  spec.dim = 16;
  spec.corpus = 40;
  spec.bind = 40;
  spec.assess = 30;
  spec.seed = 5;
  spec.sae_epochs = 3;
  spec.ranker_epochs = 5;
  spec.classifier_epochs = 5;
  try {
    if (mode == "world") {
      pttrust::testing::write_planted_world(dir, spec);
    } else if (mode == "extract") {
      pttrust::testing::extract_mutation_states(dir, spec);
    } else {
      std::fprintf(stderr, "unknown mode %s\n", mode.c_str());
      return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
  return 0;
}
