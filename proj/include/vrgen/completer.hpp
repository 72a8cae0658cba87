#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vrgen/embedding.hpp"
#include "vrgen/entities.hpp"
#include "vrgen/linalg.hpp"
#include "vrgen/tags.hpp"

namespace vrgen {

struct SuccinctVector {
  Vector values;
  std::size_t count = 0;  // contributing (non-zero) word vectors
};

// Mean of the unit-normalized embeddings of `words`. Out-of-vocabulary words
// use the OOV row; words whose embedding is exactly zero are skipped, and no
// contributing words yields the zero vector.
SuccinctVector succinct_vector(const std::vector<std::string>& words, const EmbeddingModel& emb);

// Nine succinct-vector blocks in kFeatureTags order.
struct FeatureVector {
  Vector values;
  std::size_t dim = 0;

  std::span<double> block(std::size_t index) { return {values.data() + index * dim, dim}; }
  std::span<const double> block(std::size_t index) const { return {values.data() + index * dim, dim}; }
};

FeatureVector build_feature_vector(const EntitySet& entities, const EmbeddingModel& emb);
// Zeroes the block of `tag` (no-op for tags without a feature block).
void mask_block(FeatureVector& features, EntityTag tag);

// Words of the first value of an entity type; the value that stands for the
// entity in discretization labels and rule structure.
std::vector<std::string> primary_value_words(const EntitySet& set, EntityTag tag);

struct KMeansResult {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> sse_history;  // within-cluster SSE after each assignment step
  std::size_t iterations = 0;
};

// Seeded k-means++ initialization followed by Lloyd iterations until the
// assignment stops changing or max_iterations is reached. Ties go to the lower
// centroid index. Empty clusters keep their previous centroid.
KMeansResult kmeans(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 300);

double within_cluster_sse(const std::vector<Vector>& points, const Matrix& centroids,
                          const std::vector<std::size_t>& assignment);

// Mean silhouette coefficient (Euclidean); 0 when k < 2.
double silhouette_score(const std::vector<Vector>& points, const std::vector<std::size_t>& assignment, std::size_t k);

std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> point);

inline constexpr std::string_view kUnmappedLabel = "unmapped";

struct DiscretizationModel {
  EntityTag entity = EntityTag::Vector;
  std::size_t k_clusters = 0;
  Matrix centroids;                 // k x D
  std::vector<std::string> labels;  // one per cluster; kUnmappedLabel when unlabeled
  std::uint64_t seed = 0;
};

// Each training value is a list of words; one point per value.
DiscretizationModel fit_discretization(EntityTag entity, const std::vector<std::vector<std::string>>& values,
                                       const EmbeddingModel& emb, std::size_t k_clusters, std::uint64_t seed);

std::pair<std::size_t, std::string> map_to_cluster(const DiscretizationModel& model,
                                                   const std::vector<std::string>& words, const EmbeddingModel& emb);

// Labels clusters from exemplar phrases: each cluster takes the label most of
// its exemplars map to (ties to the lexicographically smaller label); clusters
// without exemplars stay unmapped.
void label_clusters(DiscretizationModel& model, const std::multimap<std::string, std::string>& exemplars,
                    const EmbeddingModel& emb);

struct CompletionModel {
  EntityTag entity = EntityTag::Vector;
  Matrix weights;                     // K x F
  Vector bias;                        // K
  std::vector<std::size_t> clusters;  // class index -> cluster id
  std::vector<std::string> labels;    // class index -> label
  double lambda = 0.01;
  std::size_t iterations = 70;
  double initial_loss = 0.0;
  double final_loss = 0.0;

  std::size_t classes() const { return weights.rows; }
};

// L2-regularized multinomial cross-entropy:
//   mean_n -log softmax(W x_n + b)[y_n] + (lambda / 2) * ||W||^2
// Parameters are packed as [W row-major, b]. Writes the gradient when grad is non-null.
double logistic_objective(std::span<const double> packed, std::size_t classes, const std::vector<Vector>& features,
                          const std::vector<std::size_t>& labels, double lambda, Vector* grad);

struct LogisticFit {
  Matrix weights;
  Vector bias;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t iterations = 0;
};

LogisticFit fit_logistic(const std::vector<Vector>& features, const std::vector<std::size_t>& labels,
                         std::size_t classes, double lambda, std::size_t iterations);

// Builds masked feature vectors (target block zeroed) and cluster labels from
// entity sets that contain the target entity, then fits the logistic model.
CompletionModel train_completion(const std::vector<EntitySet>& dataset, const EmbeddingModel& emb,
                                 const DiscretizationModel& disc, EntityTag entity, double lambda = 0.01,
                                 std::size_t iterations = 70);

struct RankedLabel {
  std::size_t cluster = 0;
  std::string label;
  double probability = 0.0;
};

// softmax(W x + b) with the target block of x zeroed first; descending.
std::vector<RankedLabel> predict_missing(const CompletionModel& model, const FeatureVector& features,
                                         std::size_t top_k);

using LabeledFeature = std::pair<Vector, std::string>;

// Exact Euclidean k-NN. k = 1 returns the nearest training value; larger k
// takes a majority vote over the k nearest (ties to the nearer value). Equal
// distances prefer the lower training index.
std::string knn_complete(const std::vector<LabeledFeature>& train, std::span<const double> query, std::size_t k = 1);

// Distinct values of the training points ordered by distance to the query.
std::vector<std::string> knn_rank(const std::vector<LabeledFeature>& train, std::span<const double> query,
                                  std::size_t top_k);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

PrecisionRecall precision_recall_at_k(const std::vector<std::string>& ranked, const std::string& gold, std::size_t k);
PrecisionRecall mean_precision_recall_at_k(const std::vector<std::vector<std::string>>& ranked,
                                           const std::vector<std::string>& golds, std::size_t k);

void save_discretization(const DiscretizationModel& model, const std::filesystem::path& path);
DiscretizationModel load_discretization(const std::filesystem::path& path);
void save_completion(const CompletionModel& model, const std::filesystem::path& path);
CompletionModel load_completion(const std::filesystem::path& path);

}  // namespace vrgen
