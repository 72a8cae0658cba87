#include "vrgen/completer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "vrgen/error.hpp"
#include "vrgen/optim.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

SuccinctVector succinct_vector(const std::vector<std::string>& words, const EmbeddingModel& emb) {
  SuccinctVector sv{Vector(emb.dim(), 0.0), 0};
  for (const auto& w : words) {
    auto v = embed_word(emb, w);
    const double n = norm2(v);
    if (n == 0.0) continue;
    axpy(1.0 / n, v, sv.values);
    ++sv.count;
  }
  if (sv.count > 0) {
    const double inv = 1.0 / static_cast<double>(sv.count);
    for (double& x : sv.values) x *= inv;
  }
  return sv;
}

FeatureVector build_feature_vector(const EntitySet& entities, const EmbeddingModel& emb) {
  FeatureVector fv{Vector(kFeatureBlockCount * emb.dim(), 0.0), emb.dim()};
  for (std::size_t b = 0; b < kFeatureBlockCount; ++b) {
    auto words = entity_words(entities, kFeatureTags[b]);
    if (words.empty()) continue;
    auto sv = succinct_vector(words, emb);
    std::copy(sv.values.begin(), sv.values.end(), fv.block(b).begin());
  }
  return fv;
}

void mask_block(FeatureVector& features, EntityTag tag) {
  if (auto b = feature_block(tag)) {
    auto blk = features.block(*b);
    std::fill(blk.begin(), blk.end(), 0.0);
  }
}

std::vector<std::string> primary_value_words(const EntitySet& set, EntityTag tag) {
  if (set[tag].empty()) return {};
  return split_whitespace(set[tag].front());
}

std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> point) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_distance(centroids.row(c), point);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double within_cluster_sse(const std::vector<Vector>& points, const Matrix& centroids,
                          const std::vector<std::size_t>& assignment) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) sse += squared_distance(points[i], centroids.row(assignment[i]));
  return sse;
}

KMeansResult kmeans(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (points.size() < k) throw Error(ErrorCode::TooFewPoints, std::to_string(points.size()) + " points for k=" +
                                                                 std::to_string(k));
  const std::size_t dim = points.front().size();
  Rng rng(seed);
  KMeansResult res;
  res.centroids = Matrix(k, dim);

  // k-means++ seeding.
  std::size_t first = rng.below(points.size());
  std::copy(points[first].begin(), points[first].end(), res.centroids.row(0).begin());
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], res.centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cumulative = 0.0;
      pick = points.size();
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (d2[i] == 0.0) continue;
        cumulative += d2[i];
        pick = i;
        if (r < cumulative) break;
      }
    } else {
      pick = rng.below(points.size());
    }
    std::copy(points[pick].begin(), points[pick].end(), res.centroids.row(c).begin());
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], res.centroids.row(c)));
    }
  }

  res.assignment.assign(points.size(), 0);
  bool first_pass = true;
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t c = nearest_centroid(res.centroids, points[i]);
      if (c != res.assignment[i]) changed = true;
      res.assignment[i] = c;
    }
    res.sse_history.push_back(within_cluster_sse(points, res.centroids, res.assignment));
    res.iterations = iter + 1;
    if (!changed && !first_pass) break;
    first_pass = false;

    Matrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      axpy(1.0, points[i], sums.row(res.assignment[i]));
      ++counts[res.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) res.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
  }
  return res;
}

double silhouette_score(const std::vector<Vector>& points, const std::vector<std::size_t>& assignment, std::size_t k) {
  if (k < 2 || points.size() < 2) return 0.0;
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignment) ++sizes[a];
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<double> sum(k, 0.0);
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i != j) sum[assignment[j]] += std::sqrt(squared_distance(points[i], points[j]));
    }
    const std::size_t own = assignment[i];
    if (sizes[own] <= 1) continue;  // silhouette of a singleton is 0
    const double a = sum[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, sum[c] / static_cast<double>(sizes[c]));
    }
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(points.size());
}

DiscretizationModel fit_discretization(EntityTag entity, const std::vector<std::vector<std::string>>& values,
                                       const EmbeddingModel& emb, std::size_t k_clusters, std::uint64_t seed) {
  std::vector<Vector> points;
  std::set<Vector> distinct;
  for (const auto& words : values) {
    if (words.empty()) continue;
    points.push_back(succinct_vector(words, emb).values);
    distinct.insert(points.back());
  }
  if (k_clusters == 0 || distinct.size() < k_clusters) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(distinct.size()) + " distinct values for k=" +
                                             std::to_string(k_clusters));
  }
  auto res = kmeans(points, k_clusters, seed);
  DiscretizationModel model;
  model.entity = entity;
  model.k_clusters = k_clusters;
  model.centroids = std::move(res.centroids);
  model.labels.assign(k_clusters, std::string(kUnmappedLabel));
  model.seed = seed;
  return model;
}

std::pair<std::size_t, std::string> map_to_cluster(const DiscretizationModel& model,
                                                   const std::vector<std::string>& words, const EmbeddingModel& emb) {
  if (words.empty()) throw Error(ErrorCode::EmptyValue, "no words to map");
  auto sv = succinct_vector(words, emb);
  const std::size_t c = nearest_centroid(model.centroids, sv.values);
  return {c, model.labels.at(c)};
}

void label_clusters(DiscretizationModel& model, const std::multimap<std::string, std::string>& exemplars,
                    const EmbeddingModel& emb) {
  std::vector<std::map<std::string, std::size_t>> votes(model.k_clusters);
  for (const auto& [label, phrase] : exemplars) {
    auto words = split_whitespace(phrase);
    if (words.empty()) continue;
    ++votes[map_to_cluster(model, words, emb).first][label];
  }
  for (std::size_t c = 0; c < model.k_clusters; ++c) {
    std::string best(kUnmappedLabel);
    std::size_t best_count = 0;
    for (const auto& [label, count] : votes[c]) {  // map order: lexicographic tie-break
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    model.labels[c] = best;
  }
}

double logistic_objective(std::span<const double> packed, std::size_t classes, const std::vector<Vector>& features,
                          const std::vector<std::size_t>& labels, double lambda, Vector* grad) {
  const std::size_t n = features.size();
  const std::size_t f = n == 0 ? 0 : features.front().size();
  const std::size_t wsize = classes * f;
  if (grad) grad->assign(packed.size(), 0.0);
  double loss = 0.0;
  Vector logits(classes);
  const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < classes; ++c) {
      logits[c] = dot(packed.subspan(c * f, f), features[s]) + packed[wsize + c];
    }
    const double lse = log_sum_exp(logits);
    loss += (lse - logits[labels[s]]) * inv_n;
    if (grad) {
      for (std::size_t c = 0; c < classes; ++c) {
        double d = std::exp(logits[c] - lse) - (c == labels[s] ? 1.0 : 0.0);
        d *= inv_n;
        axpy(d, features[s], std::span<double>(grad->data() + c * f, f));
        (*grad)[wsize + c] += d;
      }
    }
  }
  double reg = 0.0;
  for (std::size_t i = 0; i < wsize; ++i) {
    reg += packed[i] * packed[i];
    if (grad) (*grad)[i] += lambda * packed[i];
  }
  return loss + 0.5 * lambda * reg;
}

LogisticFit fit_logistic(const std::vector<Vector>& features, const std::vector<std::size_t>& labels,
                         std::size_t classes, double lambda, std::size_t iterations) {
  if (features.empty()) throw Error(ErrorCode::EmptyDataset, "no training rows");
  if (classes < 2) throw Error(ErrorCode::SingleClass, "need at least two classes");
  const std::size_t f = features.front().size();
  Objective obj = [&](const Vector& x, Vector& g) {
    return logistic_objective(x, classes, features, labels, lambda, &g);
  };
  LbfgsOptions opts;
  opts.max_iterations = iterations;
  auto res = minimize_lbfgs(obj, Vector(classes * f + classes, 0.0), opts);
  LogisticFit fit;
  fit.weights = Matrix(classes, f);
  std::copy(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(classes * f), fit.weights.data.begin());
  fit.bias.assign(res.x.begin() + static_cast<std::ptrdiff_t>(classes * f), res.x.end());
  fit.initial_loss = res.initial_value;
  fit.final_loss = res.value;
  fit.iterations = res.iterations;
  return fit;
}

CompletionModel train_completion(const std::vector<EntitySet>& dataset, const EmbeddingModel& emb,
                                 const DiscretizationModel& disc, EntityTag entity, double lambda,
                                 std::size_t iterations) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no entity sets");
  std::vector<Vector> features;
  std::vector<std::size_t> cluster_of;
  for (const auto& set : dataset) {
    auto words = primary_value_words(set, entity);
    if (words.empty()) continue;
    cluster_of.push_back(map_to_cluster(disc, words, emb).first);
    FeatureVector fv = build_feature_vector(set, emb);
    mask_block(fv, entity);
    features.push_back(std::move(fv.values));
  }
  if (features.empty()) throw Error(ErrorCode::EmptyDataset, "no entity set contains the target entity");

  CompletionModel model;
  model.entity = entity;
  model.lambda = lambda;
  model.iterations = iterations;
  std::set<std::size_t> present(cluster_of.begin(), cluster_of.end());
  model.clusters.assign(present.begin(), present.end());
  if (model.clusters.size() < 2) throw Error(ErrorCode::SingleClass, "target entity maps to a single cluster");
  for (std::size_t c : model.clusters) model.labels.push_back(disc.labels.at(c));
  std::vector<std::size_t> labels;
  labels.reserve(cluster_of.size());
  for (std::size_t c : cluster_of) {
    labels.push_back(static_cast<std::size_t>(
        std::lower_bound(model.clusters.begin(), model.clusters.end(), c) - model.clusters.begin()));
  }
  auto fit = fit_logistic(features, labels, model.clusters.size(), lambda, iterations);
  model.weights = std::move(fit.weights);
  model.bias = std::move(fit.bias);
  model.initial_loss = fit.initial_loss;
  model.final_loss = fit.final_loss;
  return model;
}

std::vector<RankedLabel> predict_missing(const CompletionModel& model, const FeatureVector& features,
                                         std::size_t top_k) {
  if (features.values.size() != model.weights.cols) {
    throw Error(ErrorCode::DimensionMismatch, "feature length differs from model");
  }
  FeatureVector masked = features;
  mask_block(masked, model.entity);
  Vector logits(model.classes());
  matvec(model.weights, masked.values, logits);
  axpy(1.0, model.bias, logits);
  Vector probs = softmax(logits);
  std::vector<RankedLabel> ranked;
  for (std::size_t c = 0; c < model.classes(); ++c) ranked.push_back({model.clusters[c], model.labels[c], probs[c]});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedLabel& a, const RankedLabel& b) { return a.probability > b.probability; });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

namespace {

std::vector<std::pair<double, std::size_t>> by_distance(const std::vector<LabeledFeature>& train,
                                                        std::span<const double> query) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training points");
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) d.emplace_back(squared_distance(train[i].first, query), i);
  std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return d;
}

}  // namespace

std::string knn_complete(const std::vector<LabeledFeature>& train, std::span<const double> query, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  auto d = by_distance(train, query);
  const std::size_t take = std::min(k, d.size());
  std::map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < take; ++i) ++votes[train[d[i].second].second];
  std::string best;
  std::size_t best_votes = 0;
  for (std::size_t i = 0; i < take; ++i) {  // nearer value wins ties
    const auto& v = train[d[i].second].second;
    if (votes[v] > best_votes) {
      best = v;
      best_votes = votes[v];
    }
  }
  return best;
}

std::vector<std::string> knn_rank(const std::vector<LabeledFeature>& train, std::span<const double> query,
                                  std::size_t top_k) {
  auto d = by_distance(train, query);
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& [dist, idx] : d) {
    if (out.size() >= top_k) break;
    if (seen.insert(train[idx].second).second) out.push_back(train[idx].second);
  }
  return out;
}

PrecisionRecall precision_recall_at_k(const std::vector<std::string>& ranked, const std::string& gold, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const std::size_t take = std::min(k, ranked.size());
  const bool hit = std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), gold) !=
                   ranked.begin() + static_cast<std::ptrdiff_t>(take);
  return {hit ? 1.0 / static_cast<double>(k) : 0.0, hit ? 1.0 : 0.0};
}

PrecisionRecall mean_precision_recall_at_k(const std::vector<std::vector<std::string>>& ranked,
                                           const std::vector<std::string>& golds, std::size_t k) {
  if (ranked.size() != golds.size()) throw Error(ErrorCode::LengthMismatch, "ranked and gold counts differ");
  PrecisionRecall mean;
  if (golds.empty()) return mean;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    auto pr = precision_recall_at_k(ranked[i], golds[i], k);
    mean.precision += pr.precision;
    mean.recall += pr.recall;
  }
  mean.precision /= static_cast<double>(golds.size());
  mean.recall /= static_cast<double>(golds.size());
  return mean;
}

void save_discretization(const DiscretizationModel& model, const std::filesystem::path& path) {
  ModelWriter w("discretization", 1);
  w.header("entity", tag_name(model.entity));
  w.header("k_clusters", std::to_string(model.k_clusters));
  w.header("seed", std::to_string(model.seed));
  w.strings("labels", model.labels);
  w.matrix("centroids", model.centroids);
  w.save(path);
}

DiscretizationModel load_discretization(const std::filesystem::path& path) {
  auto r = ModelReader::load(path, "discretization", 1);
  DiscretizationModel m;
  auto entity = parse_tag(r.header().get("entity"));
  if (!entity) throw Error(ErrorCode::MalformedRecord, "unknown entity in discretization model");
  m.entity = *entity;
  m.k_clusters = static_cast<std::size_t>(r.header().get_int("k_clusters"));
  m.seed = static_cast<std::uint64_t>(r.header().get_int("seed"));
  m.labels = r.strings("labels");
  m.centroids = r.matrix("centroids");
  if (m.labels.size() != m.k_clusters || m.centroids.rows != m.k_clusters) {
    throw Error(ErrorCode::MalformedRecord, "discretization shapes disagree");
  }
  return m;
}

void save_completion(const CompletionModel& model, const std::filesystem::path& path) {
  ModelWriter w("completion", 1);
  w.header("entity", tag_name(model.entity));
  w.header("lambda", format_double(model.lambda));
  w.header("iterations", std::to_string(model.iterations));
  w.header("initial_loss", format_double(model.initial_loss));
  w.header("final_loss", format_double(model.final_loss));
  std::vector<std::string> clusters;
  for (auto c : model.clusters) clusters.push_back(std::to_string(c));
  w.strings("clusters", clusters);
  w.strings("labels", model.labels);
  w.matrix("weights", model.weights);
  w.vector("bias", model.bias);
  w.save(path);
}

CompletionModel load_completion(const std::filesystem::path& path) {
  auto r = ModelReader::load(path, "completion", 1);
  CompletionModel m;
  auto entity = parse_tag(r.header().get("entity"));
  if (!entity) throw Error(ErrorCode::MalformedRecord, "unknown entity in completion model");
  m.entity = *entity;
  m.lambda = r.header().get_double("lambda");
  m.iterations = static_cast<std::size_t>(r.header().get_int("iterations"));
  m.initial_loss = r.header().get_double("initial_loss");
  m.final_loss = r.header().get_double("final_loss");
  for (const auto& c : r.strings("clusters")) m.clusters.push_back(static_cast<std::size_t>(parse_int(c)));
  m.labels = r.strings("labels");
  m.weights = r.matrix("weights");
  m.bias = r.vector("bias");
  if (m.clusters.size() != m.weights.rows || m.labels.size() != m.weights.rows || m.bias.size() != m.weights.rows) {
    throw Error(ErrorCode::MalformedRecord, "completion shapes disagree");
  }
  return m;
}

}  // namespace vrgen
