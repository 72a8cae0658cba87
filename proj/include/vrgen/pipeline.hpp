#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vrgen/completer.hpp"
#include "vrgen/corpus.hpp"
#include "vrgen/embedding.hpp"
#include "vrgen/rulegen.hpp"
#include "vrgen/tagger.hpp"
#include "vrgen/wiring.hpp"

namespace vrgen {

struct PipelineConfig {
  std::filesystem::path corpus;    // NVD feed (JSON or TSV)
  std::filesystem::path labeled;   // token<TAB>TAG sentences
  std::filesystem::path entities;  // entity-set JSONL for the completer
  std::vector<std::filesystem::path> rules;
  std::filesystem::path lexicon;
  std::filesystem::path mapping;
  std::filesystem::path model_dir = "models";

  EmbeddingConfig embedding;
  BlstmConfig ner;
  double completer_lambda = 0.01;
  std::size_t completer_iterations = 70;
  double min_confidence = 0.0;
  std::size_t wiring_k = 5;
  double threshold = 0.5;
  std::size_t folds = 10;
  double holdout_fraction = 0.2;
  std::size_t eval_limit = 1000;
  std::vector<std::size_t> top_k = {1, 2, 3};
  std::vector<std::string> probe_words = {"overflow", "remote", "code", "injection", "privileges"};
  std::uint64_t seed = 1;

  // Sets the global seed and every per-stage seed derived from it.
  void set_seed(std::uint64_t s);
};

// Packaged defaults: demo corpus, labeled sentences, entity sets, default and
// extended rule sets, lexicon and mapping table from the data directory.
PipelineConfig default_config(const std::filesystem::path& data_dir = VRGEN_DATA_DIR);

// `key = value` lines over the defaults. Relative paths resolve against
// base_dir. Unknown keys and bad values throw ConfigError.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                            PipelineConfig base = default_config());
PipelineConfig load_config(const std::filesystem::path& path);

// ConfigError naming the first referenced input that does not exist.
void validate_inputs(const PipelineConfig& config, bool need_corpus, bool need_labeled, bool need_entities,
                     bool need_rules);

// Versioned artifact names inside the model directory.
namespace artifacts {
std::filesystem::path embedding(const std::filesystem::path& dir);
std::filesystem::path ner(const std::filesystem::path& dir);
std::filesystem::path discretization(const std::filesystem::path& dir, EntityTag tag);
std::filesystem::path completion(const std::filesystem::path& dir, EntityTag tag);
std::filesystem::path wiring(const std::filesystem::path& dir);
}  // namespace artifacts

struct RunReport {
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  std::map<std::string, std::size_t> counts;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  std::map<std::string, std::size_t> failures;
  std::vector<GenerationOutcome> outcomes;

  void record(GenerationOutcome outcome);
  std::size_t attempted() const { return outcomes.size(); }
  std::size_t generated() const;
  // generated / attempted; nullopt for no inputs.
  std::optional<double> success_ratio() const;

  nlohmann::ordered_json to_json() const;
  std::string metrics_json() const;  // deterministic: no timings
  std::string to_text() const;
};

nlohmann::ordered_json outcome_to_json(const GenerationOutcome& outcome);

// Deterministic train/holdout split of n items: indices of the holdout part.
std::vector<std::size_t> holdout_indices(std::size_t n, double fraction, std::uint64_t seed);

// ---- stages ----------------------------------------------------------------

std::vector<std::vector<std::string>> corpus_sentences(const std::vector<RawVulnerability>& records);

EmbeddingModel train_embedding_stage(const PipelineConfig& config, RunReport& report);
BlstmModel train_ner_stage(const PipelineConfig& config, const EmbeddingModel& emb, RunReport& report);

struct CompleterBundle {
  std::map<EntityTag, DiscretizationModel> discretization;
  std::map<EntityTag, CompletionModel> completion;
};

// Discretization (k-means + exemplar labels) and completion models for the
// three core entities, trained on `sets`.
CompleterBundle train_completers(const std::vector<EntitySet>& sets, const EmbeddingModel& emb,
                                 const MappingTable& mapping, double lambda, std::size_t iterations,
                                 std::uint64_t seed);
CompleterBundle train_completer_stage(const PipelineConfig& config, const EmbeddingModel& emb, RunReport& report);

std::vector<InteractionRule> load_rule_corpus(const std::vector<std::filesystem::path>& paths);

// Slots of every predicate the mapping table can place in a rule.
std::set<Slot> mapping_slots(const MappingTable& mapping);

WiringMatrix learn_wiring(const std::vector<InteractionRule>& rules, const MappingTable& mapping, std::size_t k);
WiringMatrix learn_wiring_stage(const PipelineConfig& config, RunReport& report);

// Loads every artifact; MissingArtifact names the stage whose file is absent.
GenerationModels load_models(const PipelineConfig& config, bool need_ner);

// One outcome per input. Gold entity sets, keyed by CVE id, bypass tagging.
RunReport run_pipeline(const PipelineConfig& config, const GenerationModels& models,
                       const std::vector<RawVulnerability>& inputs,
                       const std::map<std::string, EntitySet>& gold = {});

struct WiringCvResult {
  std::vector<double> fold_f1;
  std::vector<double> fold_accuracy;
  double mean_f1 = 0.0;
  double mean_accuracy = 0.0;
};

// Per fold: estimate and impute M on the training rules (test slots included as
// unknown rows), re-wire each test rule from fresh variables, and score every
// pair of variable occurrences as wired or not against the original rule.
WiringCvResult crossvalidate_wiring(const std::vector<InteractionRule>& rules, std::size_t folds, std::size_t k,
                                    double threshold, const SortOracle& sorts = {}, std::uint64_t seed = 1);

// Token-level F1 of the tagger on the held-out labeled sentences, recorded
// under metrics["ner_f1"].
void evaluate_ner_stage(const PipelineConfig& config, const EmbeddingModel& emb, const BlstmModel& ner,
                        RunReport& report);

// Frequency report, neighbour probes, NER F1, completion precision/recall@k,
// wiring cross-validation and success ratio over the corpus.
RunReport eval_suite(const PipelineConfig& config);

}  // namespace vrgen
