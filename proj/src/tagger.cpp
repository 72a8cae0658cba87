#include "vrgen/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

void BlstmConfig::validate() const {
  if (max_len < 1) throw Error(ErrorCode::ConfigError, "max_len must be >= 1");
  if (dim < 1) throw Error(ErrorCode::ConfigError, "dim must be >= 1");
  if (classes != kTagCount) throw Error(ErrorCode::ConfigError, "classes must equal the tag set size (11)");
  if (epochs < 1 || batch_size < 1) throw Error(ErrorCode::ConfigError, "epochs and batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be > 0");
}

namespace {

LstmParams lstm_zeros(std::size_t dim, std::size_t hidden) {
  return LstmParams{Matrix(4 * hidden, dim), Matrix(4 * hidden, hidden), Vector(4 * hidden, 0.0)};
}

void fill_uniform(std::vector<double>& values, Rng& rng, double bound) {
  for (double& v : values) v = rng.uniform(-bound, bound);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmTrace {
  std::vector<Vector> i, f, g, o, c, tanh_c, h;
};

// Runs one direction over inputs in `order` (a permutation of the real positions).
LstmTrace run_lstm(const LstmParams& p, const Matrix& inputs, const std::vector<std::size_t>& order) {
  const std::size_t hsize = p.wh.cols;
  LstmTrace tr;
  Vector h_prev(hsize, 0.0), c_prev(hsize, 0.0), z(4 * hsize);
  for (std::size_t t : order) {
    matvec(p.wx, inputs.row(t), z);
    for (std::size_t r = 0; r < 4 * hsize; ++r) z[r] += dot(p.wh.row(r), h_prev) + p.b[r];
    Vector i(hsize), f(hsize), g(hsize), o(hsize), c(hsize), tc(hsize), h(hsize);
    for (std::size_t k = 0; k < hsize; ++k) {
      i[k] = sigmoid(z[k]);
      f[k] = sigmoid(z[hsize + k]);
      g[k] = std::tanh(z[2 * hsize + k]);
      o[k] = sigmoid(z[3 * hsize + k]);
      c[k] = f[k] * c_prev[k] + i[k] * g[k];
      tc[k] = std::tanh(c[k]);
      h[k] = o[k] * tc[k];
    }
    h_prev = h;
    c_prev = c;
    tr.i.push_back(std::move(i));
    tr.f.push_back(std::move(f));
    tr.g.push_back(std::move(g));
    tr.o.push_back(std::move(o));
    tr.c.push_back(std::move(c));
    tr.tanh_c.push_back(std::move(tc));
    tr.h.push_back(std::move(h));
  }
  return tr;
}

// dh[k] is the loss gradient w.r.t. the hidden output at step k of `order`.
void backprop_lstm(const LstmParams& p, const Matrix& inputs, const std::vector<std::size_t>& order,
                   const LstmTrace& tr, const std::vector<Vector>& dh, LstmParams& grad) {
  const std::size_t hsize = p.wh.cols;
  const std::size_t steps = order.size();
  Vector dh_next(hsize, 0.0), dc_next(hsize, 0.0), dz(4 * hsize);
  const Vector zeros(hsize, 0.0);
  for (std::size_t k = steps; k-- > 0;) {
    const Vector& c_prev = k > 0 ? tr.c[k - 1] : zeros;
    const Vector& h_prev = k > 0 ? tr.h[k - 1] : zeros;
    Vector dc(hsize);
    for (std::size_t j = 0; j < hsize; ++j) {
      const double dhj = dh[k][j] + dh_next[j];
      const double o = tr.o[k][j], i = tr.i[k][j], f = tr.f[k][j], g = tr.g[k][j], tc = tr.tanh_c[k][j];
      dc[j] = dhj * o * (1.0 - tc * tc) + dc_next[j];
      dz[j] = dc[j] * g * i * (1.0 - i);
      dz[hsize + j] = dc[j] * c_prev[j] * f * (1.0 - f);
      dz[2 * hsize + j] = dc[j] * i * (1.0 - g * g);
      dz[3 * hsize + j] = dhj * tc * o * (1.0 - o);
      dc_next[j] = dc[j] * f;
    }
    auto x = inputs.row(order[k]);
    for (std::size_t r = 0; r < 4 * hsize; ++r) {
      if (dz[r] == 0.0) continue;
      axpy(dz[r], x, grad.wx.row(r));
      axpy(dz[r], h_prev, grad.wh.row(r));
      grad.b[r] += dz[r];
    }
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    matvec_transpose_add(p.wh, dz, dh_next);
  }
}

struct BlstmTrace {
  std::vector<std::size_t> fwd_order, bwd_order;
  LstmTrace fwd, bwd;
  std::vector<Vector> concat, probs;
};

BlstmTrace run_blstm(const BlstmParams& params, const Matrix& inputs, std::size_t length) {
  BlstmTrace tr;
  tr.fwd_order.resize(length);
  std::iota(tr.fwd_order.begin(), tr.fwd_order.end(), std::size_t{0});
  tr.bwd_order.assign(tr.fwd_order.rbegin(), tr.fwd_order.rend());
  tr.fwd = run_lstm(params.forward, inputs, tr.fwd_order);
  tr.bwd = run_lstm(params.backward, inputs, tr.bwd_order);
  const std::size_t hsize = params.hidden();
  for (std::size_t t = 0; t < length; ++t) {
    Vector cat(2 * hsize);
    std::copy(tr.fwd.h[t].begin(), tr.fwd.h[t].end(), cat.begin());
    const auto& hb = tr.bwd.h[length - 1 - t];
    std::copy(hb.begin(), hb.end(), cat.begin() + static_cast<std::ptrdiff_t>(hsize));
    Vector logits(params.classes());
    matvec(params.dense, cat, logits);
    axpy(1.0, params.dense_bias, logits);
    tr.probs.push_back(softmax(logits));
    tr.concat.push_back(std::move(cat));
  }
  return tr;
}

void check_shapes(const BlstmParams& params, const Matrix& inputs, std::size_t length) {
  if (inputs.cols != params.dim()) throw Error(ErrorCode::DimensionMismatch, "input width differs from D");
  if (length > inputs.rows) throw Error(ErrorCode::LengthMismatch, "length exceeds padded rows");
}

}  // namespace

BlstmParams BlstmParams::zeros(std::size_t dim, std::size_t hidden, std::size_t classes) {
  return BlstmParams{lstm_zeros(dim, hidden), lstm_zeros(dim, hidden), Matrix(classes, 2 * hidden),
                     Vector(classes, 0.0)};
}

BlstmParams BlstmParams::random(std::size_t dim, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  BlstmParams p = zeros(dim, hidden, classes);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (LstmParams* l : {&p.forward, &p.backward}) {
    fill_uniform(l->wx.data, rng, bound);
    fill_uniform(l->wh.data, rng, bound);
    fill_uniform(l->b, rng, bound);
  }
  fill_uniform(p.dense.data, rng, 1.0 / std::sqrt(static_cast<double>(2 * hidden)));
  return p;
}

std::vector<double*> BlstmParams::parameters() {
  std::vector<double*> out;
  out.reserve(parameter_count());
  auto add = [&](std::vector<double>& v) {
    for (double& x : v) out.push_back(&x);
  };
  for (LstmParams* l : {&forward, &backward}) {
    add(l->wx.data);
    add(l->wh.data);
    add(l->b);
  }
  add(dense.data);
  add(dense_bias);
  return out;
}

std::size_t BlstmParams::parameter_count() const {
  auto lstm = [](const LstmParams& l) { return l.wx.data.size() + l.wh.data.size() + l.b.size(); };
  return lstm(forward) + lstm(backward) + dense.data.size() + dense_bias.size();
}

std::vector<Vector> blstm_predict(const BlstmParams& params, const Matrix& inputs, std::size_t length) {
  check_shapes(params, inputs, length);
  return run_blstm(params, inputs, length).probs;
}

double blstm_sequence_loss(const BlstmParams& params, const PaddedSequence& seq, const Vector& class_weights,
                           BlstmParams* grad) {
  check_shapes(params, seq.inputs, seq.length);
  if (seq.gold.size() < seq.length) throw Error(ErrorCode::LengthMismatch, "gold shorter than length");
  const std::size_t n = seq.length;
  if (n == 0) return 0.0;
  BlstmTrace tr = run_blstm(params, seq.inputs, n);
  const std::size_t hsize = params.hidden();
  double loss = 0.0;
  for (std::size_t t = 0; t < n; ++t) loss -= class_weights[seq.gold[t]] * std::log(tr.probs[t][seq.gold[t]]);
  if (!grad) return loss;

  std::vector<Vector> dh_fwd(n, Vector(hsize, 0.0)), dh_bwd(n, Vector(hsize, 0.0));
  Vector dcat(2 * hsize);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t y = seq.gold[t];
    Vector dlogits = tr.probs[t];
    dlogits[y] -= 1.0;
    for (double& v : dlogits) v *= class_weights[y];
    for (std::size_t r = 0; r < params.classes(); ++r) {
      axpy(dlogits[r], tr.concat[t], grad->dense.row(r));
      grad->dense_bias[r] += dlogits[r];
    }
    std::fill(dcat.begin(), dcat.end(), 0.0);
    matvec_transpose_add(params.dense, dlogits, dcat);
    std::copy(dcat.begin(), dcat.begin() + static_cast<std::ptrdiff_t>(hsize), dh_fwd[t].begin());
    std::copy(dcat.begin() + static_cast<std::ptrdiff_t>(hsize), dcat.end(), dh_bwd[n - 1 - t].begin());
  }
  backprop_lstm(params.forward, seq.inputs, tr.fwd_order, tr.fwd, dh_fwd, grad->forward);
  backprop_lstm(params.backward, seq.inputs, tr.bwd_order, tr.bwd, dh_bwd, grad->backward);
  return loss;
}

double blstm_batch_loss(const BlstmParams& params, const std::vector<PaddedSequence>& batch,
                        const Vector& class_weights, BlstmParams* grad) {
  double total = 0.0;
  for (const auto& seq : batch) total += blstm_sequence_loss(params, seq, class_weights, grad);
  return total;
}

Vector tag_loss_weights() {
  Vector w(kTagCount);
  for (std::size_t i = 0; i < kTagCount; ++i) w[i] = loss_weight(tag_at(i));
  return w;
}

Matrix embed_tokens(const EmbeddingModel& emb, const std::vector<Token>& tokens) {
  Matrix m(tokens.size(), emb.dim());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto v = embed_word(emb, tokens[t].norm);
    std::copy(v.begin(), v.end(), m.row(t).begin());
  }
  return m;
}

namespace {

std::vector<PaddedSequence> make_sequences(const std::vector<LabeledSentence>& data, const EmbeddingModel& emb,
                                           std::size_t max_len) {
  std::vector<PaddedSequence> out;
  for (const auto& s : data) {
    if (s.tokens.size() != s.tags.size()) throw Error(ErrorCode::LengthMismatch, "tokens and tags differ in length");
    Matrix all = embed_tokens(emb, s.tokens);
    for (std::size_t start = 0; start < s.tokens.size(); start += max_len) {
      std::size_t len = std::min(max_len, s.tokens.size() - start);
      PaddedSequence seq;
      seq.inputs = Matrix(len, emb.dim());
      std::copy(all.data.begin() + static_cast<std::ptrdiff_t>(start * emb.dim()),
                all.data.begin() + static_cast<std::ptrdiff_t>((start + len) * emb.dim()), seq.inputs.data.begin());
      seq.length = len;
      for (std::size_t t = start; t < start + len; ++t) seq.gold.push_back(index_of(s.tags[t]));
      out.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace

BlstmModel train_ner(const std::vector<LabeledSentence>& data, const EmbeddingModel& emb, const BlstmConfig& config,
                     NerTrainingLog* log) {
  config.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no labeled sentences");
  if (emb.dim() != config.dim) {
    throw Error(ErrorCode::DimensionMismatch, "embedding dim " + std::to_string(emb.dim()) + " != config dim " +
                                                  std::to_string(config.dim));
  }
  auto sequences = make_sequences(data, emb, config.max_len);
  BlstmModel model{config, BlstmParams::random(config.dim, config.hidden_size(), config.classes, config.seed)};
  const Vector weights = tag_loss_weights();
  Rng rng(config.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto params = model.params.parameters();
  BlstmParams grad = BlstmParams::zeros(config.dim, config.hidden_size(), config.classes);
  auto grad_values = grad.parameters();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (double* g : grad_values) *g = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        epoch_loss += blstm_sequence_loss(model.params, sequences[order[k]], weights, &grad);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      double norm_sq = 0.0;
      for (double* g : grad_values) {
        *g *= scale;
        norm_sq += *g * *g;
      }
      double step = config.learning_rate;
      if (config.clip_norm > 0.0 && norm_sq > config.clip_norm * config.clip_norm) {
        step *= config.clip_norm / std::sqrt(norm_sq);
      }
      for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= step * *grad_values[i];
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(sequences.size()));
  }
  return model;
}

std::vector<TagPrediction> tag(const BlstmModel& model, const EmbeddingModel& emb, const std::vector<Token>& sentence) {
  if (sentence.empty()) throw Error(ErrorCode::EmptySentence, "cannot tag an empty sentence");
  if (emb.dim() != model.params.dim()) throw Error(ErrorCode::DimensionMismatch, "embedding dim differs from model");
  std::vector<TagPrediction> out;
  out.reserve(sentence.size());
  const std::size_t max_len = model.config.max_len;
  for (std::size_t start = 0; start < sentence.size(); start += max_len) {
    std::size_t len = std::min(max_len, sentence.size() - start);
    std::vector<Token> chunk(sentence.begin() + static_cast<std::ptrdiff_t>(start),
                             sentence.begin() + static_cast<std::ptrdiff_t>(start + len));
    for (auto& probs : blstm_predict(model.params, embed_tokens(emb, chunk), len)) {
      auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      out.push_back(TagPrediction{tag_at(best), std::move(probs)});
    }
  }
  return out;
}

EntitySet extract_entities(const std::vector<Token>& tokens, const std::vector<EntityTag>& tags,
                           const std::string& cve_id) {
  if (tokens.size() != tags.size()) throw Error(ErrorCode::LengthMismatch, "tokens and tags differ in length");
  EntitySet set;
  set.cve_id = cve_id;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i] == EntityTag::O) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string value;
    while (j < tags.size() && tags[j] == tags[i]) {
      if (!value.empty()) value += ' ';
      value += tokens[j].norm;
      ++j;
    }
    set[tags[i]].push_back(std::move(value));
    i = j;
  }
  return set;
}

F1Report evaluate_f1(const std::vector<std::vector<EntityTag>>& predictions,
                     const std::vector<std::vector<EntityTag>>& golds) {
  if (predictions.size() != golds.size()) throw Error(ErrorCode::LengthMismatch, "sentence counts differ");
  F1Report report;
  for (std::size_t s = 0; s < golds.size(); ++s) {
    if (predictions[s].size() != golds[s].size()) {
      throw Error(ErrorCode::LengthMismatch, "sentence " + std::to_string(s) + " lengths differ");
    }
    for (std::size_t t = 0; t < golds[s].size(); ++t) {
      const EntityTag p = predictions[s][t];
      const EntityTag g = golds[s][t];
      if (g != EntityTag::O) ++report.per_class[index_of(g)].support;
      if (p == g) {
        if (g != EntityTag::O) ++report.per_class[index_of(g)].tp;
      } else {
        if (p != EntityTag::O) ++report.per_class[index_of(p)].fp;
        if (g != EntityTag::O) ++report.per_class[index_of(g)].fn;
      }
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; };
  std::size_t tp = 0, fp = 0, fn = 0, supported = 0;
  double macro = 0.0;
  for (auto& c : report.per_class) {
    c.precision = ratio(c.tp, c.tp + c.fp);
    c.recall = ratio(c.tp, c.tp + c.fn);
    c.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    if (c.support > 0) {
      macro += c.f1;
      ++supported;
    }
  }
  report.micro_f1 = ratio(2 * tp, 2 * tp + fp + fn);
  report.macro_f1 = supported == 0 ? 0.0 : macro / static_cast<double>(supported);
  return report;
}

void save_blstm(const BlstmModel& model, const std::filesystem::path& path) {
  ModelWriter w("blstm", 1);
  const auto& c = model.config;
  w.header("max_len", std::to_string(c.max_len));
  w.header("dim", std::to_string(c.dim));
  w.header("hidden", std::to_string(c.hidden_size()));
  w.header("classes", std::to_string(c.classes));
  w.header("epochs", std::to_string(c.epochs));
  w.header("batch_size", std::to_string(c.batch_size));
  w.header("learning_rate", format_double(c.learning_rate));
  w.header("clip_norm", format_double(c.clip_norm));
  w.header("seed", std::to_string(c.seed));
  std::vector<std::string> tags;
  for (EntityTag t : kAllTags) tags.emplace_back(tag_name(t));
  w.strings("tags", tags);
  const auto& p = model.params;
  w.matrix("forward.wx", p.forward.wx);
  w.matrix("forward.wh", p.forward.wh);
  w.vector("forward.b", p.forward.b);
  w.matrix("backward.wx", p.backward.wx);
  w.matrix("backward.wh", p.backward.wh);
  w.vector("backward.b", p.backward.b);
  w.matrix("dense.w", p.dense);
  w.vector("dense.b", p.dense_bias);
  w.save(path);
}

BlstmModel load_blstm(const std::filesystem::path& path) {
  auto r = ModelReader::load(path, "blstm", 1);
  BlstmModel model;
  try {
    auto& c = model.config;
    const auto& h = r.header();
    c.max_len = static_cast<std::size_t>(h.get_int("max_len"));
    c.dim = static_cast<std::size_t>(h.get_int("dim"));
    c.hidden = static_cast<std::size_t>(h.get_int("hidden"));
    c.classes = static_cast<std::size_t>(h.get_int("classes"));
    c.epochs = static_cast<std::size_t>(h.get_int("epochs"));
    c.batch_size = static_cast<std::size_t>(h.get_int("batch_size"));
    c.learning_rate = h.get_double("learning_rate");
    c.clip_norm = h.get_double("clip_norm");
    c.seed = static_cast<std::uint64_t>(h.get_int("seed"));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("blstm header: ") + e.what());
  }
  const auto& tags = r.strings("tags");
  for (std::size_t i = 0; i < kTagCount; ++i) {
    if (i >= tags.size() || tags[i] != tag_name(tag_at(i))) {
      throw Error(ErrorCode::FormatVersionMismatch, "tag set differs from this build");
    }
  }
  auto& p = model.params;
  p.forward = {r.matrix("forward.wx"), r.matrix("forward.wh"), r.vector("forward.b")};
  p.backward = {r.matrix("backward.wx"), r.matrix("backward.wh"), r.vector("backward.b")};
  p.dense = r.matrix("dense.w");
  p.dense_bias = r.vector("dense.b");
  const std::size_t hsize = model.config.hidden_size();
  if (p.forward.wx.rows != 4 * hsize || p.forward.wx.cols != model.config.dim || p.dense.rows != kTagCount ||
      p.dense.cols != 2 * hsize) {
    throw Error(ErrorCode::MalformedRecord, "blstm weight shapes disagree with config");
  }
  return model;
}

}  // namespace vrgen
