#pragma once

#include <set>
#include <string>
#include <vector>

#include "vrgen/corpus.hpp"
#include "vrgen/embedding.hpp"
#include "vrgen/linalg.hpp"

// Embedding with random unit-scale rows for the given words (plus <unk>).
inline vrgen::EmbeddingModel random_embedding(const std::vector<std::string>& words, std::size_t dim,
                                              std::uint64_t seed) {
  std::vector<std::string> vocab = {"<unk>"};
  std::set<std::string> seen;
  for (const auto& w : words)
    if (seen.insert(w).second) vocab.push_back(w);
  vrgen::EmbeddingModel m;
  m.vocab = vrgen::Vocabulary(vocab, 1.0);
  m.input = vrgen::Matrix(vocab.size(), dim);
  m.output = vrgen::Matrix(vocab.size(), dim);
  vrgen::Rng rng(seed);
  for (double& v : m.input.data) v = rng.uniform(-1.0, 1.0);
  m.config.dim = dim;
  return m;
}

inline std::vector<std::string> all_norms(const std::vector<vrgen::LabeledSentence>& data) {
  std::vector<std::string> out;
  for (const auto& s : data)
    for (const auto& t : s.tokens) out.push_back(t.norm);
  return out;
}
