// vrgen: vulnerability description -> MulVAL interaction rule pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vrgen/corpus.hpp"
#include "vrgen/error.hpp"
#include "vrgen/pipeline.hpp"
#include "vrgen/synthetic.hpp"
#include "vrgen/textio.hpp"

namespace fs = std::filesystem;
using namespace vrgen;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string model_dir;
  std::optional<double> threshold;
  std::optional<std::size_t> top_k;
};

PipelineConfig make_config(const GlobalOptions& g) {
  PipelineConfig c = g.config.empty() ? default_config() : load_config(g.config);
  if (g.seed) c.set_seed(*g.seed);
  if (!g.model_dir.empty()) c.model_dir = g.model_dir;
  if (g.threshold) c.threshold = *g.threshold;
  if (g.top_k) {
    c.top_k.clear();
    for (std::size_t k = 1; k <= *g.top_k; ++k) c.top_k.push_back(k);
  }
  return c;
}

std::vector<RawVulnerability> read_inputs(const std::string& input, const std::string& text) {
  if (!text.empty()) return {RawVulnerability{"", text, std::nullopt}};
  auto feed = load_nvd_feed(input);
  for (const auto& m : feed.malformed) {
    std::cerr << "skipped record at " << m.location << ": " << m.reason << "\n";
  }
  return feed.records;
}

std::map<std::string, EntitySet> read_gold(const std::string& path) {
  std::map<std::string, EntitySet> out;
  if (path.empty()) return out;
  for (auto& s : load_entity_sets(path)) out[s.cve_id] = std::move(s);
  return out;
}

void write_outcomes(const RunReport& report, const std::string& rules_out, const std::string& outcomes_out) {
  std::string rules;
  std::string jsonl;
  for (const auto& o : report.outcomes) {
    jsonl += outcome_to_json(o).dump() + "\n";
    if (o.rule) rules += (rules.empty() ? "" : "\n") + emit_rule(*o.rule);
  }
  if (rules_out.empty() || rules_out == "-") {
    std::cout << rules;
  } else {
    write_file(rules_out, rules);
  }
  if (!outcomes_out.empty()) write_file(outcomes_out, jsonl);
}

void finish(const RunReport& report, const std::string& report_path) {
  std::cerr << report.to_text();
  if (!report_path.empty()) write_file(report_path, report.to_json().dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vrgen: derive MulVAL interaction rules from vulnerability descriptions"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global random seed");
  app.add_option("--model-dir", g.model_dir, "directory for model artifacts");
  app.add_option("--threshold", g.threshold, "wiring probability threshold");
  app.add_option("--top-k", g.top_k, "evaluate precision/recall at k = 1..K");

  std::string report_path;
  auto add_report = [&](CLI::App* cmd) { cmd->add_option("--report", report_path, "write the JSON run report"); };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "load an NVD feed and report corpus statistics");
  std::string ingest_out;
  std::size_t ingest_top = 10;
  ingest->add_option("--out", ingest_out, "write normalized sentences, one per line");
  ingest->add_option("--top", ingest_top, "frequent words to list");

  auto* train_emb = app.add_subcommand("train-embedding", "train the word embedding");
  auto* train_ner_cmd = app.add_subcommand("train-ner", "train the entity tagger");
  auto* train_comp = app.add_subcommand("train-completer", "fit clusters and completion models");
  auto* learn_wire = app.add_subcommand("learn-wiring", "estimate and impute the wiring matrix");
  auto* train_all = app.add_subcommand("train", "run every training stage");
  for (auto* c : {train_emb, train_ner_cmd, train_comp, learn_wire, train_all}) add_report(c);

  // tag
  auto* tag_cmd = app.add_subcommand("tag", "extract attack entities as JSON lines");
  std::string tag_input, tag_text, tag_out;
  tag_cmd->add_option("--input", tag_input, "NVD feed or id<TAB>description file");
  tag_cmd->add_option("--text", tag_text, "a single description");
  tag_cmd->add_option("--out", tag_out, "output JSONL (default stdout)");

  // complete
  auto* complete_cmd = app.add_subcommand("complete", "rank labels for missing core entities");
  std::string complete_input, complete_out;
  complete_cmd->add_option("--entities", complete_input, "entity-set JSONL")->required();
  complete_cmd->add_option("--out", complete_out, "output JSONL (default stdout)");

  // genrule / pipeline
  auto* genrule = app.add_subcommand("genrule", "generate rules with trained models");
  auto* pipeline = app.add_subcommand("pipeline", "train missing stages, then generate rules");
  std::string gen_input, gen_text, gen_gold, gen_rules_out, gen_outcomes;
  bool retrain = false;
  for (auto* c : {genrule, pipeline}) {
    c->add_option("--input", gen_input, "NVD feed or id<TAB>description file");
    c->add_option("--text", gen_text, "a single description");
    c->add_option("--gold", gen_gold, "gold entity-set JSONL; bypasses tagging for listed CVEs");
    c->add_option("--out", gen_rules_out, "rule file (default stdout)");
    c->add_option("--outcomes", gen_outcomes, "per-input outcome JSONL");
    add_report(c);
  }
  pipeline->add_flag("--train", retrain, "retrain every stage even when artifacts exist");

  auto* eval_ner = app.add_subcommand("eval-ner", "score the tagger on held-out labeled sentences");
  add_report(eval_ner);

  auto* eval_cmd = app.add_subcommand("eval", "run the evaluation suite");
  std::string eval_metrics;
  eval_cmd->add_option("--metrics", eval_metrics, "write the deterministic metrics JSON");
  add_report(eval_cmd);

  auto* xval = app.add_subcommand("xval-wiring", "cross-validate variable wiring on the rule corpus");
  std::optional<std::size_t> xval_folds;
  xval->add_option("--folds", xval_folds, "number of folds");

  auto* synth = app.add_subcommand("synth", "write synthetic demo data");
  std::string synth_dir;
  SyntheticOptions synth_opts;
  synth->add_option("--out-dir", synth_dir, "output directory")->required();
  synth->add_option("--count", synth_opts.count, "number of descriptions");
  synth->add_option("--unspecified-rate", synth_opts.unspecified_rate, "share of unspecified-vulnerability means");

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig config = make_config(g);
    RunReport report;

    if (*ingest) {
      validate_inputs(config, true, false, false, false);
      auto feed = load_nvd_feed(config.corpus);
      for (const auto& m : feed.malformed) std::cerr << "malformed record at " << m.location << ": " << m.reason << "\n";
      std::cout << "records: " << feed.records.size() << "\nskipped blank: " << feed.skipped_blank
                << "\nmalformed: " << feed.malformed.size() << "\n";
      auto vocab = build_vocabulary(feed.records, config.embedding.max_vocab);
      std::cout << "vocabulary: " << vocab.size() << "\ncoverage: " << format_double(vocab.coverage()) << "\n";
      std::cout << "top words:\n";
      for (const auto& [w, n] : word_frequency_report(feed.records, ingest_top, true)) {
        std::cout << "  " << w << "\t" << n << "\n";
      }
      if (!ingest_out.empty()) {
        std::string out;
        for (const auto& s : corpus_sentences(feed.records)) {
          for (std::size_t i = 0; i < s.size(); ++i) out += (i ? " " : "") + s[i];
          out += "\n";
        }
        write_file(ingest_out, out);
      }
    } else if (*train_emb) {
      train_embedding_stage(config, report);
      finish(report, report_path);
    } else if (*train_ner_cmd || *train_comp) {
      if (!fs::exists(artifacts::embedding(config.model_dir))) {
        throw Error(ErrorCode::MissingArtifact, "train-embedding: run `vrgen train-embedding` first");
      }
      auto emb = load_embedding(artifacts::embedding(config.model_dir));
      if (*train_ner_cmd) train_ner_stage(config, emb, report);
      if (*train_comp) train_completer_stage(config, emb, report);
      finish(report, report_path);
    } else if (*learn_wire) {
      learn_wiring_stage(config, report);
      finish(report, report_path);
    } else if (*train_all) {
      auto emb = train_embedding_stage(config, report);
      train_ner_stage(config, emb, report);
      train_completer_stage(config, emb, report);
      learn_wiring_stage(config, report);
      finish(report, report_path);
    } else if (*tag_cmd) {
      auto models = load_models(config, true);
      std::string out;
      for (const auto& in : read_inputs(tag_input, tag_text)) {
        auto tokens = tokenize(in.description);
        EntitySet set;
        set.cve_id = in.id;
        if (!tokens.empty()) {
          std::vector<EntityTag> tags;
          for (const auto& p : tag(*models.ner, models.embedding, tokens)) tags.push_back(p.tag);
          set = extract_entities(tokens, tags, in.id);
        }
        out += entity_set_to_json(set) + "\n";
      }
      if (tag_out.empty()) std::cout << out;
      else write_file(tag_out, out);
    } else if (*complete_cmd) {
      auto models = load_models(config, false);
      const std::size_t k = config.top_k.empty() ? 3 : config.top_k.back();
      std::string out;
      for (const auto& set : load_entity_sets(complete_input)) {
        nlohmann::ordered_json j;
        j["cve"] = set.cve_id;
        auto fv = build_feature_vector(set, models.embedding);
        for (EntityTag t : kCoreEntities) {
          if (set.has(t)) continue;
          nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
          for (const auto& r : predict_missing(models.completion.at(t), fv, k)) {
            ranked.push_back({{"label", r.label}, {"cluster", r.cluster}, {"probability", r.probability}});
          }
          j[std::string(tag_name(t))] = ranked;
        }
        out += j.dump() + "\n";
      }
      if (complete_out.empty()) std::cout << out;
      else write_file(complete_out, out);
    } else if (*genrule || *pipeline) {
      if (gen_input.empty() && gen_text.empty()) throw Error(ErrorCode::ConfigError, "give --input or --text");
      if (*pipeline) {
        bool need = retrain || !fs::exists(artifacts::embedding(config.model_dir));
        std::optional<EmbeddingModel> emb;
        if (need) emb = train_embedding_stage(config, report);
        else emb = load_embedding(artifacts::embedding(config.model_dir));
        if (retrain || !fs::exists(artifacts::ner(config.model_dir))) train_ner_stage(config, *emb, report);
        if (retrain || !fs::exists(artifacts::completion(config.model_dir, EntityTag::Means))) {
          train_completer_stage(config, *emb, report);
        }
        if (retrain || !fs::exists(artifacts::wiring(config.model_dir))) learn_wiring_stage(config, report);
      }
      auto models = load_models(config, gen_gold.empty());
      auto run = run_pipeline(config, models, read_inputs(gen_input, gen_text), read_gold(gen_gold));
      run.timings.insert(run.timings.begin(), report.timings.begin(), report.timings.end());
      run.counts.insert(report.counts.begin(), report.counts.end());
      for (const auto& [k, v] : report.metrics.items()) run.metrics[k] = v;
      write_outcomes(run, gen_rules_out, gen_outcomes);
      finish(run, report_path);
    } else if (*eval_ner) {
      for (const auto& [path, stage] : {std::pair{artifacts::embedding(config.model_dir), "train-embedding"},
                                        std::pair{artifacts::ner(config.model_dir), "train-ner"}}) {
        if (!fs::exists(path)) throw Error(ErrorCode::MissingArtifact, std::string(stage) + ": " + path.string() + " not found");
      }
      auto emb = load_embedding(artifacts::embedding(config.model_dir));
      evaluate_ner_stage(config, emb, load_blstm(artifacts::ner(config.model_dir)), report);
      std::cout << report.metrics["ner_f1"].dump(2) << "\n";
      finish(report, report_path);
    } else if (*eval_cmd) {
      auto run = eval_suite(config);
      if (!eval_metrics.empty()) write_file(eval_metrics, run.metrics_json());
      finish(run, report_path);
    } else if (*xval) {
      validate_inputs(config, false, false, false, true);
      auto rules = load_rule_corpus(config.rules);
      auto lexicon = load_lexicon(config.lexicon);
      auto cv = crossvalidate_wiring(rules, xval_folds.value_or(config.folds), config.wiring_k, config.threshold,
                                     SortOracle(lexicon, rules), config.seed);
      std::cout << "rules: " << rules.size() << "\nmean F1: " << format_double(cv.mean_f1)
                << "\nmean accuracy: " << format_double(cv.mean_accuracy) << "\n";
      for (std::size_t f = 0; f < cv.fold_f1.size(); ++f) {
        std::cout << "  fold " << f << ": F1 " << format_double(cv.fold_f1[f]) << ", accuracy "
                  << format_double(cv.fold_accuracy[f]) << "\n";
      }
    } else if (*synth) {
      synth_opts.seed = config.seed;
      auto records = synthetic_records(synth_opts);
      std::string tsv, jsonl;
      std::vector<LabeledSentence> labeled;
      for (const auto& r : records) {
        tsv += r.raw.id + "\t" + r.raw.description + "\n";
        jsonl += entity_set_to_json(r.entities) + "\n";
        labeled.push_back(r.labeled);
      }
      fs::path dir(synth_dir);
      write_file(dir / "nvd_demo.tsv", tsv);
      write_file(dir / "entities.jsonl", jsonl);
      write_file(dir / "labeled.tsv", format_labeled_dataset(labeled));
      std::cout << "wrote " << records.size() << " records to " << dir.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
