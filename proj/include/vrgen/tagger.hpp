#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrgen/corpus.hpp"
#include "vrgen/embedding.hpp"
#include "vrgen/entities.hpp"
#include "vrgen/linalg.hpp"
#include "vrgen/tags.hpp"

namespace vrgen {

struct BlstmConfig {
  std::size_t max_len = 150;  // N
  std::size_t dim = 100;      // D, must match the embedding model
  std::size_t hidden = 0;     // H; 0 means "same as dim"
  std::size_t classes = kTagCount;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double clip_norm = 0.0;  // 0 disables gradient-norm clipping
  std::uint64_t seed = 1;

  std::size_t hidden_size() const { return hidden == 0 ? dim : hidden; }
  void validate() const;
};

// One direction of an LSTM layer. Gate blocks are stacked in the order
// input, forget, candidate, output (rows [0,H), [H,2H), [2H,3H), [3H,4H)).
struct LstmParams {
  Matrix wx;  // 4H x D
  Matrix wh;  // 4H x H
  Vector b;   // 4H

  bool operator==(const LstmParams&) const = default;
};

struct BlstmParams {
  LstmParams forward;
  LstmParams backward;
  Matrix dense;      // O x 2H, acting on [h_forward; h_backward]
  Vector dense_bias; // O

  static BlstmParams zeros(std::size_t dim, std::size_t hidden, std::size_t classes);
  static BlstmParams random(std::size_t dim, std::size_t hidden, std::size_t classes, std::uint64_t seed);

  std::size_t dim() const { return forward.wx.cols; }
  std::size_t hidden() const { return forward.wh.cols; }
  std::size_t classes() const { return dense.rows; }

  // Flat views over every parameter, in a fixed order, for optimizers and
  // finite-difference checks.
  std::vector<double*> parameters();
  std::size_t parameter_count() const;

  bool operator==(const BlstmParams&) const = default;
};

// A sequence padded to `inputs.rows` positions; rows at or beyond `length`
// are padding and never read.
struct PaddedSequence {
  Matrix inputs;                 // rows >= length, cols = D
  std::size_t length = 0;
  std::vector<std::size_t> gold;  // class index per position (padding ignored)
};

// Per-position class distributions for the real positions of a sequence.
std::vector<Vector> blstm_predict(const BlstmParams& params, const Matrix& inputs, std::size_t length);

// Weighted cross-entropy summed over real positions:
//   L = -sum_t w[y_t] * log p_t[y_t]
// When grad is non-null the BPTT gradient is accumulated into it.
double blstm_sequence_loss(const BlstmParams& params, const PaddedSequence& seq, const Vector& class_weights,
                           BlstmParams* grad = nullptr);

// Sum of per-sequence losses; gradient accumulated as a sum (callers divide).
double blstm_batch_loss(const BlstmParams& params, const std::vector<PaddedSequence>& batch,
                        const Vector& class_weights, BlstmParams* grad = nullptr);

Vector tag_loss_weights();

struct BlstmModel {
  BlstmConfig config;
  BlstmParams params;
};

struct NerTrainingLog {
  std::vector<double> epoch_loss;  // mean per-sentence loss seen during each epoch
};

// Sentences longer than max_len are split into consecutive chunks of at most
// max_len tokens. Each mini-batch step applies the mean of the per-sentence
// gradients with plain SGD.
BlstmModel train_ner(const std::vector<LabeledSentence>& data, const EmbeddingModel& emb, const BlstmConfig& config,
                     NerTrainingLog* log = nullptr);

Matrix embed_tokens(const EmbeddingModel& emb, const std::vector<Token>& tokens);

struct TagPrediction {
  EntityTag tag = EntityTag::O;
  Vector probabilities;  // kTagCount entries
};

std::vector<TagPrediction> tag(const BlstmModel& model, const EmbeddingModel& emb, const std::vector<Token>& sentence);

// Maximal runs of one non-O tag become one value (space-joined norms).
EntitySet extract_entities(const std::vector<Token>& tokens, const std::vector<EntityTag>& tags,
                           const std::string& cve_id);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t support = 0;  // gold tokens of the class
};

struct F1Report {
  std::array<ClassScores, kEntityTagCount> per_class;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;  // unweighted mean over entity classes with support > 0
};

// Token-level one-vs-all scores over the ten entity classes.
F1Report evaluate_f1(const std::vector<std::vector<EntityTag>>& predictions,
                     const std::vector<std::vector<EntityTag>>& golds);

void save_blstm(const BlstmModel& model, const std::filesystem::path& path);
BlstmModel load_blstm(const std::filesystem::path& path);

}  // namespace vrgen
