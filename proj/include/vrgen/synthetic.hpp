#pragma once

// Deterministic synthetic data for demos and tests: template-built
// vulnerability descriptions with gold tags, entity sets and core labels, and
// rule corpora drawn from fixed wiring templates.

#include <cstdint>
#include <string>
#include <vector>

#include "vrgen/corpus.hpp"
#include "vrgen/datalog.hpp"
#include "vrgen/entities.hpp"
#include "vrgen/rulegen.hpp"

namespace vrgen {

struct SyntheticRecord {
  RawVulnerability raw;
  LabeledSentence labeled;
  EntitySet entities;
  CoreLabels labels;  // labels the core entity phrases were drawn from
};

struct SyntheticOptions {
  std::size_t count = 200;
  std::uint64_t seed = 1;
  double vector_missing_rate = 0.3;
  double unspecified_rate = 0.0;  // means replaced by "unspecified vulnerability"
  double optional_field_rate = 0.5;
};

std::vector<SyntheticRecord> synthetic_records(const SyntheticOptions& options);

// Phrases the generator draws for one core label.
const std::vector<std::string>& synthetic_phrases(EntityTag entity, const std::string& label);

// Six fixed wiring templates over the default predicate vocabulary.
std::vector<InteractionRule> wiring_templates();

// `count` rules cycling through `templates`, with per-rule fresh variable
// names and varied constants. With probability `noise` one body variable
// occurrence is renamed to a fresh variable, breaking one wire.
std::vector<InteractionRule> synthetic_rule_corpus(const std::vector<InteractionRule>& templates, std::size_t count,
                                                   double noise, std::uint64_t seed);

// Random well-formed rules for round-trip testing.
std::vector<InteractionRule> random_rules(std::size_t count, std::uint64_t seed);

}  // namespace vrgen
