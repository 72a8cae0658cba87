#include "vrgen/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

std::string_view variant_name(EmbeddingVariant v) { return v == EmbeddingVariant::Cbow ? "cbow" : "sg"; }

EmbeddingVariant parse_variant(std::string_view name) {
  if (name == "cbow" || name == "CBOW") return EmbeddingVariant::Cbow;
  if (name == "sg" || name == "SG" || name == "skipgram") return EmbeddingVariant::SkipGram;
  throw Error(ErrorCode::ConfigError, "unknown embedding variant '" + std::string(name) + "'");
}

void EmbeddingConfig::validate() const {
  if (dim < 1) throw Error(ErrorCode::ConfigError, "embedding dim must be >= 1");
  if (window < 1) throw Error(ErrorCode::ConfigError, "window must be >= 1");
  if (epochs < 1) throw Error(ErrorCode::ConfigError, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be > 0");
  if (max_vocab < 1) throw Error(ErrorCode::ConfigError, "max_vocab must be >= 1");
}

std::vector<TrainingPair> make_training_pairs(const std::vector<std::vector<std::size_t>>& sentences,
                                              EmbeddingVariant variant, std::size_t window) {
  std::vector<TrainingPair> pairs;
  for (const auto& s : sentences) {
    const std::size_t n = s.size();
    for (std::size_t t = 0; t < n; ++t) {
      std::size_t lo = t >= window ? t - window : 0;
      std::size_t hi = std::min(n - 1, t + window);
      if (variant == EmbeddingVariant::Cbow) {
        TrainingPair p;
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c != t) p.context.push_back(s[c]);
        }
        if (p.context.empty()) continue;
        p.target = s[t];
        pairs.push_back(std::move(p));
      } else {
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c != t) pairs.push_back(TrainingPair{{s[t]}, s[c]});
        }
      }
    }
  }
  return pairs;
}

Vector context_vector(const EmbeddingModel& model, std::span<const std::size_t> context) {
  Vector h(model.dim(), 0.0);
  for (std::size_t id : context) axpy(1.0, model.input.row(id), h);
  const double inv = 1.0 / static_cast<double>(context.size());
  for (double& v : h) v *= inv;
  return h;
}

Vector predict_distribution(const EmbeddingModel& model, std::span<const std::size_t> context) {
  Vector h = context_vector(model, context);
  Vector z(model.output.rows);
  matvec(model.output, h, z);
  softmax(z, z);
  return z;
}

namespace {

// Shared forward/backward for one pair. Returns the loss and leaves
// dz = p - onehot(target) and dh = output^T dz in the scratch buffers.
double forward_backward(const EmbeddingModel& model, const TrainingPair& pair, Vector& h, Vector& z, Vector& dh) {
  h = context_vector(model, pair.context);
  z.assign(model.output.rows, 0.0);
  matvec(model.output, h, z);
  const double lse = log_sum_exp(z);
  const double loss = lse - z[pair.target];
  for (double& v : z) v = std::exp(v - lse);
  z[pair.target] -= 1.0;
  dh.assign(model.dim(), 0.0);
  matvec_transpose_add(model.output, z, dh);
  return loss;
}

}  // namespace

double pair_loss(const EmbeddingModel& model, const TrainingPair& pair, EmbeddingGradient* grad) {
  Vector h, dz, dh;
  double loss = forward_backward(model, pair, h, dz, dh);
  if (grad) {
    for (std::size_t v = 0; v < model.output.rows; ++v) axpy(dz[v], h, grad->output.row(v));
    const double inv = 1.0 / static_cast<double>(pair.context.size());
    for (std::size_t id : pair.context) axpy(inv, dh, grad->input.row(id));
  }
  return loss;
}

double mean_loss(const EmbeddingModel& model, const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) total += pair_loss(model, p);
  return total / static_cast<double>(pairs.size());
}

std::vector<std::vector<std::size_t>> to_ids(const Vocabulary& vocab,
                                             const std::vector<std::vector<std::string>>& sentences) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    std::vector<std::size_t> ids;
    ids.reserve(s.size());
    for (const auto& w : s) ids.push_back(vocab.id(w));
    out.push_back(std::move(ids));
  }
  return out;
}

EmbeddingModel train_embedding(const std::vector<std::vector<std::string>>& sentences,
                               const EmbeddingConfig& config, EmbeddingTrainingLog* log) {
  config.validate();
  if (sentences.empty()) throw Error(ErrorCode::DegenerateCorpus, "empty corpus");
  EmbeddingModel model;
  model.config = config;
  model.vocab = build_vocabulary(sentences, config.max_vocab);
  const std::size_t vsize = model.vocab.size();
  const std::size_t dim = config.dim;

  auto pairs = make_training_pairs(to_ids(model.vocab, sentences), config.variant, config.window);
  if (pairs.empty()) throw Error(ErrorCode::DegenerateCorpus, "no (context, target) pairs");

  Rng rng(config.seed);
  model.input = Matrix(vsize, dim);
  const double bound = 0.5 / static_cast<double>(dim);
  for (double& v : model.input.data) v = rng.uniform(-bound, bound);
  model.output = Matrix(vsize, dim, 0.0);

  if (log) {
    log->initial_loss = mean_loss(model, pairs);
    log->epoch_loss.clear();
  }

  std::vector<std::size_t> order(pairs.size());
  Vector h, dz, dh;
  const double lr = config.learning_rate;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const TrainingPair& p = pairs[idx];
      forward_backward(model, p, h, dz, dh);
      for (std::size_t v = 0; v < vsize; ++v) {
        if (dz[v] != 0.0) axpy(-lr * dz[v], h, model.output.row(v));
      }
      const double scale = -lr / static_cast<double>(p.context.size());
      for (std::size_t id : p.context) axpy(scale, dh, model.input.row(id));
    }
    if (log) log->epoch_loss.push_back(mean_loss(model, pairs));
  }
  return model;
}

std::optional<std::size_t> lookup_word(const EmbeddingModel& model, std::string_view word) {
  if (model.vocab.contains(word)) return model.vocab.id(word);
  auto norm = normalize_word(word);
  if (model.vocab.contains(norm)) return model.vocab.id(norm);
  return std::nullopt;
}

std::span<const double> embed_word(const EmbeddingModel& model, std::string_view word) {
  return model.input.row(lookup_word(model, word).value_or(Vocabulary::kOovId));
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, std::string_view word, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const std::size_t query_id = model.vocab.id(word);
  auto query = model.input.row(query_id);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t id = 0; id < model.vocab.size(); ++id) {
    if (id == query_id || id == Vocabulary::kOovId) continue;
    scored.emplace_back(cosine(query, model.input.row(id)), id);
  }
  auto by_score = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), by_score);
  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.emplace_back(model.vocab.word(scored[i].second), scored[i].first);
  return out;
}

std::filesystem::path output_weights_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".out";
  return p;
}

namespace {

constexpr std::string_view kFormatLine = "vrgen-embedding 1";

std::string format_layer(const EmbeddingModel& model, const Matrix& m, const std::string& header) {
  std::string out = header;
  out += std::to_string(m.rows) + ' ' + std::to_string(m.cols) + '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    out += model.vocab.word(r);
    for (double v : m.row(r)) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

struct ParsedLayer {
  KeyValues header;
  std::vector<std::string> words;
  Matrix values;
};

ParsedLayer parse_layer(std::string_view text) {
  ParsedLayer layer;
  auto lines = split(text, '\n');
  std::size_t i = 0;
  bool seen_format = false;
  for (; i < lines.size() && !lines[i].empty() && lines[i][0] == '#'; ++i) {
    std::string_view body = trim(std::string_view(lines[i]).substr(1));
    auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (key == "format") {
      if (value != kFormatLine) throw Error(ErrorCode::FormatVersionMismatch, "found " + value);
      seen_format = true;
    } else {
      layer.header.set(key, value);
    }
  }
  if (!seen_format) throw Error(ErrorCode::FormatVersionMismatch, "missing format line");
  if (i >= lines.size()) throw Error(ErrorCode::MalformedRecord, "missing size line");
  auto dims = split_whitespace(lines[i++]);
  if (dims.size() != 2) throw Error(ErrorCode::MalformedRecord, "size line must be '<vocab_size> <dim>'");
  auto rows = static_cast<std::size_t>(parse_int(dims[0]));
  auto cols = static_cast<std::size_t>(parse_int(dims[1]));
  layer.values = Matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r, ++i) {
    if (i >= lines.size()) throw Error(ErrorCode::MalformedRecord, "truncated at row " + std::to_string(r));
    auto fields = split_whitespace(lines[i]);
    if (fields.size() != cols + 1) {
      throw Error(ErrorCode::MalformedRecord, "row " + std::to_string(r) + " has " +
                                                  std::to_string(fields.size()) + " fields");
    }
    layer.words.push_back(fields[0]);
    for (std::size_t c = 0; c < cols; ++c) layer.values(r, c) = parse_double(fields[c + 1]);
  }
  return layer;
}

}  // namespace

void save_embedding(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::string header = "# format = " + std::string(kFormatLine) + '\n';
  header += "# variant = " + std::string(variant_name(model.config.variant)) + '\n';
  header += "# dim = " + std::to_string(model.config.dim) + '\n';
  header += "# window = " + std::to_string(model.config.window) + '\n';
  header += "# epochs = " + std::to_string(model.config.epochs) + '\n';
  header += "# learning_rate = " + format_double(model.config.learning_rate) + '\n';
  header += "# max_vocab = " + std::to_string(model.config.max_vocab) + '\n';
  header += "# seed = " + std::to_string(model.config.seed) + '\n';
  header += "# coverage = " + format_double(model.vocab.coverage()) + '\n';
  write_file(path, format_layer(model, model.input, header));
  write_file(output_weights_path(path), format_layer(model, model.output, header));
}

EmbeddingModel load_embedding(const std::filesystem::path& path) {
  ParsedLayer in = parse_layer(read_file(path));
  ParsedLayer out = parse_layer(read_file(output_weights_path(path)));
  if (in.words != out.words || in.values.cols != out.values.cols) {
    throw Error(ErrorCode::MalformedRecord, "input and output layers disagree");
  }
  EmbeddingModel model;
  try {
    model.config.variant = parse_variant(in.header.get("variant"));
    model.config.dim = static_cast<std::size_t>(in.header.get_int("dim"));
    model.config.window = static_cast<std::size_t>(in.header.get_int("window"));
    model.config.epochs = static_cast<std::size_t>(in.header.get_int("epochs"));
    model.config.learning_rate = in.header.get_double("learning_rate");
    model.config.max_vocab = static_cast<std::size_t>(in.header.get_int("max_vocab"));
    model.config.seed = static_cast<std::uint64_t>(in.header.get_int("seed"));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("config header: ") + e.what());
  }
  if (model.config.dim != in.values.cols) throw Error(ErrorCode::MalformedRecord, "dim header disagrees with rows");
  model.vocab = Vocabulary(in.words, in.header.contains("coverage") ? in.header.get_double("coverage") : 0.0);
  model.input = std::move(in.values);
  model.output = std::move(out.values);
  return model;
}

}  // namespace vrgen
