#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrgen/completer.hpp"
#include "vrgen/datalog.hpp"
#include "vrgen/embedding.hpp"
#include "vrgen/entities.hpp"
#include "vrgen/tagger.hpp"
#include "vrgen/wiring.hpp"

namespace vrgen {

// One row of the mapping table: predicates contributed by a cluster label and
// attribute constants (range, consequence) it implies.
struct MappingEntry {
  std::vector<Predicate> predicates;
  std::map<std::string, std::string> attributes;
};

// Cluster label -> predicates, per core entity (IMPACT, VECTOR, MEANS).
//
//   format = vrgen-mapping 1
//   k.VECTOR = 4
//   impact codeExec = execCode(_, _) ; consequence = privEscalation
//   vector remote = networkServiceInfo(_, _, _, _, _), attackerLocated(_) ; range = remoteExploit
//
// `_` marks an open slot: a fresh variable, or a constant slot filled from
// entities when the lexicon marks it so. Other constants are kept literally.
struct MappingTable {
  std::map<EntityTag, std::map<std::string, MappingEntry>> entries;
  std::map<EntityTag, std::size_t> k_clusters;
  // Exemplar phrases per entity used to name clusters (label -> phrase).
  std::map<EntityTag, std::multimap<std::string, std::string>> exemplars;

  const MappingEntry* find(EntityTag entity, std::string_view label) const;
  std::vector<std::string> labels(EntityTag entity) const;
};

MappingTable parse_mapping_table(std::string_view text);
MappingTable load_mapping_table(const std::filesystem::path& path);

inline constexpr std::array<EntityTag, 3> kCoreEntities = {EntityTag::Impact, EntityTag::Vector, EntityTag::Means};

struct CoreLabels {
  std::optional<std::string> impact;
  std::optional<std::string> vector;
  std::optional<std::string> means;

  std::optional<std::string>& operator[](EntityTag tag);
  const std::optional<std::string>& operator[](EntityTag tag) const;
};

struct RuleSkeleton {
  InteractionRule rule;
  std::map<std::string, std::string> attributes;  // sort -> constant implied by labels
};

// Head from the impact entry (its first predicate; any others join the body),
// body from the means entry followed by the vector entry, duplicates by
// signature dropped. Open variable slots receive fresh names V0, V1, ...
// Throws MissingCoreEntity for an absent label and UnmappableCluster for a
// label the table does not know.
RuleSkeleton create_structure(const CoreLabels& labels, const MappingTable& mapping, const Lexicon& lexicon);

// Fills open constant slots by sort: vulID <- cve_id, product <- PLATFORM,
// protocol <- PROTOCOL, port <- PORT, os <- OS, version <- VERSION, and
// range/consequence from the label attributes. Unfillable slots stay `_`.
// Each decision is appended to rule.trace.
RuleSkeleton assign_constants(RuleSkeleton skeleton, const EntitySet& entities, const std::string& cve_id,
                              const Lexicon& lexicon);

enum class FailureReason { MissingCoreEntity, UnspecifiedVulnerability, UnmappableCluster, WiringFailed };

std::string_view failure_name(FailureReason reason);

struct GenerationModels {
  EmbeddingModel embedding;
  std::optional<BlstmModel> ner;
  std::map<EntityTag, DiscretizationModel> discretization;
  std::map<EntityTag, CompletionModel> completion;
  WiringMatrix wiring;  // fully known
  Lexicon lexicon;
  SortOracle sorts;
  MappingTable mapping;
};

struct GenerationOptions {
  double threshold = 0.5;
  double min_confidence = 0.0;  // completion top-1 probability floor
};

struct GenerationOutcome {
  std::string cve_id;
  std::optional<InteractionRule> rule;
  std::optional<FailureReason> failure;
  std::string detail;
  EntitySet entities;
  CoreLabels labels;

  bool ok() const { return rule.has_value(); }
};

// True when a means value reads "unspecified vulnerability".
bool is_unspecified_means(const EntitySet& entities);

// tag -> extract entities -> complete missing core entities -> map to clusters
// -> create_structure -> assign_constants -> wire_variables. Gold entities,
// when given, replace tagging. Failures are reported, never thrown.
GenerationOutcome generate(const std::string& cve_id, std::string_view description, const GenerationModels& models,
                           const std::optional<EntitySet>& gold_entities = std::nullopt,
                           const GenerationOptions& options = {});

}  // namespace vrgen
