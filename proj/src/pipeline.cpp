#include "vrgen/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <set>
#include <sstream>

#include "vrgen/error.hpp"
#include "vrgen/linalg.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class StageTimer {
 public:
  StageTimer(RunReport& report, std::string name)
      : report_(report), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    report_.timings.emplace_back(name_, d.count());
  }

 private:
  RunReport& report_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

std::string lower_tag(EntityTag tag) {
  std::string s(tag_name(tag));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

long long config_int(const std::string& key, const std::string& value) {
  try {
    return parse_int(value);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigError, key + ": expected an integer, got '" + value + "'");
  }
}

std::size_t config_size(const std::string& key, const std::string& value) {
  long long v = config_int(key, value);
  if (v < 0) throw Error(ErrorCode::ConfigError, key + ": must be non-negative");
  return static_cast<std::size_t>(v);
}

double config_double(const std::string& key, const std::string& value) {
  try {
    return parse_double(value);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigError, key + ": expected a number, got '" + value + "'");
  }
}

std::vector<std::string> config_list(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& part : split(value, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

template <typename T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& idx) {
  std::vector<bool> in(n, false);
  for (auto i : idx) in[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in[i]) out.push_back(i);
  }
  return out;
}

void require_artifact(const fs::path& path, std::string_view stage) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::MissingArtifact, std::string(stage) + ": " + path.string() + " not found");
  }
}

}  // namespace

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  embedding.seed = s;
  ner.seed = s;
}

PipelineConfig default_config(const fs::path& data_dir) {
  PipelineConfig c;
  c.corpus = data_dir / "demo" / "nvd_demo.tsv";
  c.labeled = data_dir / "demo" / "labeled.tsv";
  c.entities = data_dir / "demo" / "entities.jsonl";
  c.rules = {data_dir / "rules" / "mulval_default.P", data_dir / "rules" / "extended_rules.P"};
  c.lexicon = data_dir / "lexicon" / "predicates.txt";
  c.mapping = data_dir / "lexicon" / "mapping.txt";
  return c;
}

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir, PipelineConfig c) {
  KeyValues kv;
  try {
    kv = parse_key_values(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (auto s = kv.find("seed")) c.set_seed(static_cast<std::uint64_t>(config_int("seed", *s)));
  for (const auto& [key, value] : kv.items()) {
    if (key == "seed") continue;
    if (key == "corpus") c.corpus = resolve(base_dir, value);
    else if (key == "labeled") c.labeled = resolve(base_dir, value);
    else if (key == "entities") c.entities = resolve(base_dir, value);
    else if (key == "rules") {
      c.rules.clear();
      for (const auto& p : config_list(value)) c.rules.push_back(resolve(base_dir, p));
    } else if (key == "lexicon") c.lexicon = resolve(base_dir, value);
    else if (key == "mapping") c.mapping = resolve(base_dir, value);
    else if (key == "model_dir") c.model_dir = resolve(base_dir, value);
    else if (key == "embedding.variant") {
      try {
        c.embedding.variant = parse_variant(value);
      } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, key + ": " + e.what());
      }
    } else if (key == "embedding.dim") c.embedding.dim = config_size(key, value);
    else if (key == "embedding.window") c.embedding.window = config_size(key, value);
    else if (key == "embedding.epochs") c.embedding.epochs = config_size(key, value);
    else if (key == "embedding.learning_rate") c.embedding.learning_rate = config_double(key, value);
    else if (key == "embedding.max_vocab") c.embedding.max_vocab = config_size(key, value);
    else if (key == "ner.max_len") c.ner.max_len = config_size(key, value);
    else if (key == "ner.hidden") c.ner.hidden = config_size(key, value);
    else if (key == "ner.epochs") c.ner.epochs = config_size(key, value);
    else if (key == "ner.batch_size") c.ner.batch_size = config_size(key, value);
    else if (key == "ner.learning_rate") c.ner.learning_rate = config_double(key, value);
    else if (key == "ner.clip_norm") c.ner.clip_norm = config_double(key, value);
    else if (key == "completer.lambda") c.completer_lambda = config_double(key, value);
    else if (key == "completer.iterations") c.completer_iterations = config_size(key, value);
    else if (key == "completer.min_confidence") c.min_confidence = config_double(key, value);
    else if (key == "wiring.k") c.wiring_k = config_size(key, value);
    else if (key == "wiring.threshold") c.threshold = config_double(key, value);
    else if (key == "wiring.folds") c.folds = config_size(key, value);
    else if (key == "eval.holdout") c.holdout_fraction = config_double(key, value);
    else if (key == "eval.limit") c.eval_limit = config_size(key, value);
    else if (key == "eval.top_k") {
      c.top_k.clear();
      for (const auto& k : config_list(value)) c.top_k.push_back(config_size(key, k));
    } else if (key == "eval.probes") c.probe_words = config_list(value);
    else throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
  }
  c.ner.dim = c.embedding.dim;
  try {
    c.embedding.validate();
    c.ner.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (c.holdout_fraction < 0.0 || c.holdout_fraction >= 1.0) {
    throw Error(ErrorCode::ConfigError, "eval.holdout must be in [0, 1)");
  }
  if (c.wiring_k == 0) throw Error(ErrorCode::ConfigError, "wiring.k must be positive");
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return parse_config(text, path.parent_path());
}

void validate_inputs(const PipelineConfig& c, bool need_corpus, bool need_labeled, bool need_entities,
                     bool need_rules) {
  auto check = [](const fs::path& p, std::string_view what) {
    if (p.empty() || !fs::exists(p)) {
      throw Error(ErrorCode::ConfigError, std::string(what) + " not found: '" + p.string() + "'");
    }
  };
  check(c.lexicon, "lexicon");
  check(c.mapping, "mapping table");
  if (need_corpus) check(c.corpus, "corpus");
  if (need_labeled) check(c.labeled, "labeled data");
  if (need_entities) check(c.entities, "entity sets");
  if (need_rules) {
    if (c.rules.empty()) throw Error(ErrorCode::ConfigError, "no rule files configured");
    for (const auto& r : c.rules) check(r, "rule file");
  }
}

namespace artifacts {
fs::path embedding(const fs::path& dir) { return dir / "embedding.v1.txt"; }
fs::path ner(const fs::path& dir) { return dir / "ner.v1.txt"; }
fs::path discretization(const fs::path& dir, EntityTag tag) {
  return dir / ("discretization." + lower_tag(tag) + ".v1.txt");
}
fs::path completion(const fs::path& dir, EntityTag tag) { return dir / ("completion." + lower_tag(tag) + ".v1.txt"); }
fs::path wiring(const fs::path& dir) { return dir / "wiring.v1.csv"; }
}  // namespace artifacts

// ---- report ----------------------------------------------------------------

void RunReport::record(GenerationOutcome outcome) {
  if (outcome.failure) ++failures[std::string(failure_name(*outcome.failure))];
  outcomes.push_back(std::move(outcome));
}

std::size_t RunReport::generated() const {
  return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.ok(); }));
}

std::optional<double> RunReport::success_ratio() const {
  if (outcomes.empty()) return std::nullopt;
  return static_cast<double>(generated()) / static_cast<double>(outcomes.size());
}

namespace {

ordered_json deterministic_part(const RunReport& r) {
  ordered_json j;
  j["counts"] = r.counts;
  j["metrics"] = r.metrics;
  j["attempted"] = r.attempted();
  j["generated"] = r.generated();
  auto ratio = r.success_ratio();
  j["success_ratio"] = ratio ? ordered_json(*ratio) : ordered_json("N/A");
  j["failures"] = r.failures;
  return j;
}

}  // namespace

ordered_json RunReport::to_json() const {
  ordered_json j = deterministic_part(*this);
  ordered_json t = ordered_json::object();
  for (const auto& [stage, secs] : timings) t[stage] = secs;
  j["timings"] = t;
  return j;
}

std::string RunReport::metrics_json() const { return deterministic_part(*this).dump(2) + "\n"; }

std::string RunReport::to_text() const {
  std::ostringstream os;
  auto ratio = success_ratio();
  os << "attempted: " << attempted() << "\n";
  os << "generated: " << generated() << "\n";
  os << "success ratio: " << (ratio ? format_double(*ratio) : std::string("N/A")) << "\n";
  if (!failures.empty()) {
    os << "failures:\n";
    for (const auto& [name, n] : failures) os << "  " << name << ": " << n << "\n";
  }
  if (!counts.empty()) {
    os << "counts:\n";
    for (const auto& [name, n] : counts) os << "  " << name << ": " << n << "\n";
  }
  for (const auto& [section, value] : metrics.items()) {
    os << "[" << section << "]\n" << value.dump(2) << "\n";
  }
  if (!timings.empty()) {
    os << "timings (s):\n";
    for (const auto& [stage, secs] : timings) os << "  " << stage << ": " << format_double(secs) << "\n";
  }
  return os.str();
}

ordered_json outcome_to_json(const GenerationOutcome& o) {
  ordered_json j;
  j["cve"] = o.cve_id;
  j["status"] = o.ok() ? "rule" : "failure";
  if (o.failure) {
    j["failure"] = std::string(failure_name(*o.failure));
    j["detail"] = o.detail;
  }
  ordered_json labels = ordered_json::object();
  for (EntityTag tag : kCoreEntities) {
    if (o.labels[tag]) labels[std::string(tag_name(tag))] = *o.labels[tag];
  }
  j["labels"] = labels;
  if (o.rule) {
    j["rule"] = emit_rule(*o.rule);
    j["trace"] = o.rule->trace;
  }
  return j;
}

std::vector<std::size_t> holdout_indices(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed ^ 0x686f6c646f7574ULL);
  rng.shuffle(idx);
  auto take = static_cast<std::size_t>(fraction * static_cast<double>(n));
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---- stages ----------------------------------------------------------------

std::vector<std::vector<std::string>> corpus_sentences(const std::vector<RawVulnerability>& records) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : records) {
    for (auto& s : sentence_norms(r.description)) out.push_back(std::move(s));
  }
  return out;
}

EmbeddingModel train_embedding_stage(const PipelineConfig& config, RunReport& report) {
  validate_inputs(config, true, false, false, false);
  StageTimer timer(report, "train-embedding");
  auto feed = load_nvd_feed(config.corpus);
  report.counts["records"] = feed.records.size();
  report.counts["records_skipped"] = feed.skipped_blank + feed.malformed.size();
  EmbeddingTrainingLog log;
  auto model = train_embedding(corpus_sentences(feed.records), config.embedding, &log);
  report.counts["vocabulary"] = model.vocab.size();
  report.metrics["embedding"] = {{"variant", std::string(variant_name(config.embedding.variant))},
                                 {"initial_loss", log.initial_loss},
                                 {"final_loss", log.epoch_loss.empty() ? log.initial_loss : log.epoch_loss.back()},
                                 {"coverage", model.vocab.coverage()}};
  save_embedding(model, artifacts::embedding(config.model_dir));
  return model;
}

BlstmModel train_ner_stage(const PipelineConfig& config, const EmbeddingModel& emb, RunReport& report) {
  validate_inputs(config, false, true, false, false);
  StageTimer timer(report, "train-ner");
  auto data = load_labeled_dataset(config.labeled);
  auto train = select(data, complement(data.size(), holdout_indices(data.size(), config.holdout_fraction, config.seed)));
  report.counts["ner_train_sentences"] = train.size();
  BlstmConfig cfg = config.ner;
  cfg.dim = emb.dim();
  NerTrainingLog log;
  auto model = train_ner(train, emb, cfg, &log);
  report.metrics["ner_training"] = {{"epochs", log.epoch_loss.size()},
                                    {"final_loss", log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back()}};
  save_blstm(model, artifacts::ner(config.model_dir));
  return model;
}

CompleterBundle train_completers(const std::vector<EntitySet>& sets, const EmbeddingModel& emb,
                                 const MappingTable& mapping, double lambda, std::size_t iterations,
                                 std::uint64_t seed) {
  static const std::map<EntityTag, std::size_t> kDefaultK = {
      {EntityTag::Vector, 4}, {EntityTag::Impact, 6}, {EntityTag::Means, 8}};
  CompleterBundle bundle;
  for (EntityTag tag : kCoreEntities) {
    std::vector<std::vector<std::string>> values;
    for (const auto& s : sets) {
      auto words = primary_value_words(s, tag);
      if (!words.empty()) values.push_back(std::move(words));
    }
    auto kit = mapping.k_clusters.find(tag);
    std::size_t k = kit == mapping.k_clusters.end() ? kDefaultK.at(tag) : kit->second;
    auto disc = fit_discretization(tag, values, emb, k, seed + index_of(tag));
    if (auto ex = mapping.exemplars.find(tag); ex != mapping.exemplars.end()) label_clusters(disc, ex->second, emb);
    bundle.completion[tag] = train_completion(sets, emb, disc, tag, lambda, iterations);
    bundle.discretization[tag] = std::move(disc);
  }
  return bundle;
}

CompleterBundle train_completer_stage(const PipelineConfig& config, const EmbeddingModel& emb, RunReport& report) {
  validate_inputs(config, false, false, true, false);
  StageTimer timer(report, "train-completer");
  auto sets = load_entity_sets(config.entities);
  auto train = select(sets, complement(sets.size(), holdout_indices(sets.size(), config.holdout_fraction, config.seed)));
  report.counts["completer_train_sets"] = train.size();
  auto mapping = load_mapping_table(config.mapping);
  auto bundle = train_completers(train, emb, mapping, config.completer_lambda, config.completer_iterations,
                                 config.seed);
  ordered_json j = ordered_json::object();
  for (EntityTag tag : kCoreEntities) {
    const auto& disc = bundle.discretization.at(tag);
    const auto& comp = bundle.completion.at(tag);
    j[std::string(tag_name(tag))] = {{"clusters", disc.labels},
                                     {"initial_loss", comp.initial_loss},
                                     {"final_loss", comp.final_loss}};
    save_discretization(disc, artifacts::discretization(config.model_dir, tag));
    save_completion(comp, artifacts::completion(config.model_dir, tag));
  }
  report.metrics["completer_training"] = j;
  return bundle;
}

std::vector<InteractionRule> load_rule_corpus(const std::vector<fs::path>& paths) {
  std::vector<InteractionRule> out;
  for (const auto& p : paths) {
    auto rules = parse_rule_file(read_file(p));
    out.insert(out.end(), std::make_move_iterator(rules.begin()), std::make_move_iterator(rules.end()));
  }
  return out;
}

std::set<Slot> mapping_slots(const MappingTable& mapping) {
  std::set<Slot> out;
  for (const auto& [tag, entries] : mapping.entries) {
    for (const auto& [label, entry] : entries) {
      for (const auto& p : entry.predicates) {
        for (std::size_t i = 0; i < p.arity(); ++i) out.insert({p.signature(), i});
      }
    }
  }
  return out;
}

WiringMatrix learn_wiring(const std::vector<InteractionRule>& rules, const MappingTable& mapping, std::size_t k) {
  return impute_matrix(estimate_wiring_matrix(rules, mapping_slots(mapping)), k);
}

WiringMatrix learn_wiring_stage(const PipelineConfig& config, RunReport& report) {
  validate_inputs(config, false, false, false, true);
  StageTimer timer(report, "learn-wiring");
  auto rules = load_rule_corpus(config.rules);
  report.counts["wiring_rules"] = rules.size();
  auto m = learn_wiring(rules, load_mapping_table(config.mapping), config.wiring_k);
  report.counts["wiring_slots"] = m.size();
  write_file(artifacts::wiring(config.model_dir), wiring_to_csv(m));
  return m;
}

GenerationModels load_models(const PipelineConfig& config, bool need_ner) {
  validate_inputs(config, false, false, false, false);
  GenerationModels m;
  require_artifact(artifacts::embedding(config.model_dir), "train-embedding");
  m.embedding = load_embedding(artifacts::embedding(config.model_dir));
  if (fs::exists(artifacts::ner(config.model_dir))) {
    m.ner = load_blstm(artifacts::ner(config.model_dir));
  } else if (need_ner) {
    require_artifact(artifacts::ner(config.model_dir), "train-ner");
  }
  for (EntityTag tag : kCoreEntities) {
    require_artifact(artifacts::discretization(config.model_dir, tag), "train-completer");
    require_artifact(artifacts::completion(config.model_dir, tag), "train-completer");
    m.discretization[tag] = load_discretization(artifacts::discretization(config.model_dir, tag));
    m.completion[tag] = load_completion(artifacts::completion(config.model_dir, tag));
  }
  require_artifact(artifacts::wiring(config.model_dir), "learn-wiring");
  m.wiring = wiring_from_csv(read_file(artifacts::wiring(config.model_dir)));
  m.lexicon = load_lexicon(config.lexicon);
  m.mapping = load_mapping_table(config.mapping);
  std::vector<InteractionRule> rules;
  bool have_rules = !config.rules.empty() &&
                    std::all_of(config.rules.begin(), config.rules.end(), [](const auto& p) { return fs::exists(p); });
  if (have_rules) rules = load_rule_corpus(config.rules);
  m.sorts = SortOracle(m.lexicon, rules);
  return m;
}

RunReport run_pipeline(const PipelineConfig& config, const GenerationModels& models,
                       const std::vector<RawVulnerability>& inputs, const std::map<std::string, EntitySet>& gold) {
  RunReport report;
  {
    StageTimer timer(report, "generate");
    GenerationOptions opts{config.threshold, config.min_confidence};
    for (const auto& in : inputs) {
      std::optional<EntitySet> g;
      if (auto it = gold.find(in.id); it != gold.end()) g = it->second;
      report.record(generate(in.id, in.description, models, g, opts));
    }
  }
  report.counts["inputs"] = inputs.size();
  return report;
}

// ---- wiring cross-validation -----------------------------------------------

WiringCvResult crossvalidate_wiring(const std::vector<InteractionRule>& rules, std::size_t folds, std::size_t k,
                                    double threshold, const SortOracle& sorts, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
  if (rules.size() < folds) {
    throw Error(ErrorCode::TooFewRules,
                std::to_string(rules.size()) + " rules for " + std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> order(rules.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  WiringCvResult result;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<InteractionRule> train;
    std::vector<const InteractionRule*> test;
    for (std::size_t p = 0; p < order.size(); ++p) {
      if (p % folds == f) {
        test.push_back(&rules[order[p]]);
      } else {
        train.push_back(rules[order[p]]);
      }
    }
    std::set<Slot> test_slots;
    for (const auto* r : test) {
      auto s = slots_of(*r);
      test_slots.insert(s.begin(), s.end());
    }
    auto m = impute_matrix(estimate_wiring_matrix(train, test_slots), k);

    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto* r : test) {
      auto occs = slot_occurrences(*r);
      auto classes = wiring_classes(unwire(*r), m, threshold, sorts);
      for (std::size_t a = 0; a < occs.size(); ++a) {
        if (!occs[a].term->is_variable()) continue;
        for (std::size_t b = a + 1; b < occs.size(); ++b) {
          if (!occs[b].term->is_variable()) continue;
          bool truth = occs[a].term->text == occs[b].term->text;
          bool predicted = classes[a] == classes[b];
          if (truth && predicted) ++tp;
          else if (predicted) ++fp;
          else if (truth) ++fn;
          else ++tn;
        }
      }
    }
    const std::size_t pairs = tp + fp + fn + tn;
    result.fold_f1.push_back(tp + fp + fn == 0 ? 1.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn));
    result.fold_accuracy.push_back(pairs == 0 ? 1.0 : static_cast<double>(tp + tn) / static_cast<double>(pairs));
  }
  result.mean_f1 = std::accumulate(result.fold_f1.begin(), result.fold_f1.end(), 0.0) / static_cast<double>(folds);
  result.mean_accuracy =
      std::accumulate(result.fold_accuracy.begin(), result.fold_accuracy.end(), 0.0) / static_cast<double>(folds);
  return result;
}

// ---- evaluation ------------------------------------------------------------

void evaluate_ner_stage(const PipelineConfig& config, const EmbeddingModel& emb, const BlstmModel& ner,
                        RunReport& report) {
  validate_inputs(config, false, true, false, false);
  StageTimer timer(report, "ner-eval");
  auto data = load_labeled_dataset(config.labeled);
  auto held = select(data, holdout_indices(data.size(), config.holdout_fraction, config.seed));
  if (held.empty()) held = data;
  std::vector<std::vector<EntityTag>> preds, golds;
  for (const auto& s : held) {
    if (s.tokens.empty()) continue;
    std::vector<EntityTag> p;
    for (const auto& t : tag(ner, emb, s.tokens)) p.push_back(t.tag);
    preds.push_back(std::move(p));
    golds.push_back(s.tags);
  }
  auto f1 = evaluate_f1(preds, golds);
  ordered_json per = ordered_json::object();
  for (std::size_t c = 0; c < kEntityTagCount; ++c) {
    const auto& s = f1.per_class[c];
    per[std::string(tag_name(tag_at(c)))] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  report.counts["ner_eval_sentences"] = held.size();
  report.metrics["ner_f1"] = {{"micro", f1.micro_f1}, {"macro", f1.macro_f1}, {"per_class", per}};
}

RunReport eval_suite(const PipelineConfig& config) {
  validate_inputs(config, true, true, true, true);
  GenerationModels models = load_models(config, true);
  RunReport report;

  auto feed = load_nvd_feed(config.corpus);
  report.counts["records"] = feed.records.size();
  report.counts["records_skipped"] = feed.skipped_blank + feed.malformed.size();
  {
    StageTimer timer(report, "frequency");
    ordered_json freq = ordered_json::array();
    for (const auto& [word, count] : word_frequency_report(feed.records, 10, true)) {
      freq.push_back({{"word", word}, {"count", count}});
    }
    report.metrics["frequency"] = {
        {"top_words", freq},
        {"vocabulary_coverage", build_vocabulary(feed.records, config.embedding.max_vocab).coverage()}};
  }
  {
    StageTimer timer(report, "neighbours");
    ordered_json probes = ordered_json::object();
    for (const auto& w : config.probe_words) {
      if (!models.embedding.vocab.contains(w)) continue;
      ordered_json list = ordered_json::array();
      for (const auto& [word, sim] : nearest_neighbors(models.embedding, w, 5)) {
        list.push_back({{"word", word}, {"cosine", sim}});
      }
      probes[w] = list;
    }
    report.metrics["nearest_neighbors"] = probes;
  }
  evaluate_ner_stage(config, models.embedding, *models.ner, report);
  {
    StageTimer timer(report, "completion-eval");
    auto sets = load_entity_sets(config.entities);
    auto held_idx = holdout_indices(sets.size(), config.holdout_fraction, config.seed);
    auto held = select(sets, held_idx);
    auto train = select(sets, complement(sets.size(), held_idx));
    const std::size_t max_k = config.top_k.empty() ? 1 : *std::max_element(config.top_k.begin(), config.top_k.end());
    ordered_json comp = ordered_json::object();
    for (EntityTag tag : kCoreEntities) {
      const auto& disc = models.discretization.at(tag);
      const auto& model = models.completion.at(tag);
      std::vector<LabeledFeature> knn_train;
      for (const auto& s : train) {
        auto words = primary_value_words(s, tag);
        if (words.empty() || succinct_vector(words, models.embedding).count == 0) continue;
        auto fv = build_feature_vector(s, models.embedding);
        mask_block(fv, tag);
        knn_train.emplace_back(std::move(fv.values), map_to_cluster(disc, words, models.embedding).second);
      }
      std::vector<std::vector<std::string>> lr_ranked, knn_ranked;
      std::vector<std::string> gold;
      for (const auto& s : held) {
        auto words = primary_value_words(s, tag);
        if (words.empty() || succinct_vector(words, models.embedding).count == 0) continue;
        gold.push_back(map_to_cluster(disc, words, models.embedding).second);
        auto fv = build_feature_vector(s, models.embedding);
        std::vector<std::string> labels;
        for (const auto& r : predict_missing(model, fv, model.classes())) {
          if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
        }
        lr_ranked.push_back(std::move(labels));
        mask_block(fv, tag);
        knn_ranked.push_back(knn_train.empty() ? std::vector<std::string>{}
                                               : knn_rank(knn_train, fv.values, max_k));
      }
      ordered_json rows = ordered_json::array();
      for (std::size_t k : config.top_k) {
        auto lr = mean_precision_recall_at_k(lr_ranked, gold, k);
        auto nn = mean_precision_recall_at_k(knn_ranked, gold, k);
        rows.push_back({{"k", k},
                        {"logistic_precision", lr.precision},
                        {"logistic_recall", lr.recall},
                        {"knn_precision", nn.precision},
                        {"knn_recall", nn.recall}});
      }
      comp[std::string(tag_name(tag))] = {{"evaluated", gold.size()}, {"at_k", rows}};
    }
    report.metrics["completion"] = comp;
  }
  {
    StageTimer timer(report, "wiring-cv");
    auto rules = load_rule_corpus(config.rules);
    auto cv = crossvalidate_wiring(rules, config.folds, config.wiring_k, config.threshold, models.sorts, config.seed);
    report.metrics["wiring_cv"] = {{"rules", rules.size()},
                                   {"folds", config.folds},
                                   {"mean_f1", cv.mean_f1},
                                   {"mean_accuracy", cv.mean_accuracy},
                                   {"fold_f1", cv.fold_f1}};
  }
  {
    StageTimer timer(report, "generate");
    std::vector<RawVulnerability> inputs(feed.records.begin(),
                                         feed.records.begin() + std::min(feed.records.size(), config.eval_limit));
    GenerationOptions opts{config.threshold, config.min_confidence};
    for (const auto& in : inputs) report.record(generate(in.id, in.description, models, std::nullopt, opts));
  }
  return report;
}

}  // namespace vrgen
