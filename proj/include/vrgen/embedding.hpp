#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vrgen/corpus.hpp"
#include "vrgen/linalg.hpp"

namespace vrgen {

enum class EmbeddingVariant { Cbow, SkipGram };

std::string_view variant_name(EmbeddingVariant v);
EmbeddingVariant parse_variant(std::string_view name);

struct EmbeddingConfig {
  EmbeddingVariant variant = EmbeddingVariant::Cbow;
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t epochs = 300;
  double learning_rate = 0.0001;
  std::size_t max_vocab = 10000;
  std::uint64_t seed = 1;

  void validate() const;
};

// Shallow word2vec network with a full softmax output layer. `input` holds the
// word embeddings (|V| x D). `output` holds the softmax weights, stored one row
// per output word (|V| x D), i.e. the transpose of the D x |V| layer matrix.
struct EmbeddingModel {
  Vocabulary vocab;
  Matrix input;
  Matrix output;
  EmbeddingConfig config;

  std::size_t dim() const { return input.cols; }
};

// One training example: context word ids predicting a target id. CBOW uses the
// whole window as context; skip-gram uses a single center word.
struct TrainingPair {
  std::vector<std::size_t> context;
  std::size_t target = 0;
};

std::vector<TrainingPair> make_training_pairs(const std::vector<std::vector<std::size_t>>& sentences,
                                              EmbeddingVariant variant, std::size_t window);

struct EmbeddingGradient {
  Matrix input;
  Matrix output;
};

// Cross-entropy of the full softmax for one pair. The hidden layer is the mean
// of the context embeddings. When grad is non-null the per-pair gradient is
// accumulated into it (shapes must match the model).
double pair_loss(const EmbeddingModel& model, const TrainingPair& pair, EmbeddingGradient* grad = nullptr);

// Output distribution over the vocabulary for a context.
Vector predict_distribution(const EmbeddingModel& model, std::span<const std::size_t> context);

// Mean hidden vector for a context (the CBOW projection).
Vector context_vector(const EmbeddingModel& model, std::span<const std::size_t> context);

struct EmbeddingTrainingLog {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean loss over all pairs after each epoch
};

// Deterministic for a fixed seed. Pairs are shuffled once per epoch with the
// seeded generator and updated by plain SGD.
EmbeddingModel train_embedding(const std::vector<std::vector<std::string>>& sentences,
                               const EmbeddingConfig& config, EmbeddingTrainingLog* log = nullptr);

double mean_loss(const EmbeddingModel& model, const std::vector<TrainingPair>& pairs);

std::vector<std::vector<std::size_t>> to_ids(const Vocabulary& vocab,
                                             const std::vector<std::vector<std::string>>& sentences);

// Vocabulary id of a word, trying its normalized form when the surface is
// absent; nullopt for out-of-vocabulary words.
std::optional<std::size_t> lookup_word(const EmbeddingModel& model, std::string_view word);

// Row of the input layer; out-of-vocabulary words share the <unk> row.
std::span<const double> embed_word(const EmbeddingModel& model, std::string_view word);

using Neighbor = std::pair<std::string, double>;

// Exhaustive cosine scan. Excludes the query word and the OOV marker; ties
// keep the lower vocabulary id first.
std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, std::string_view word, std::size_t k);

// Writes `path` (input embeddings) and `path.out` (softmax weights).
void save_embedding(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_embedding(const std::filesystem::path& path);

std::filesystem::path output_weights_path(const std::filesystem::path& path);

}  // namespace vrgen
