#include "vrgen/rulegen.hpp"

#include <algorithm>
#include <cctype>

#include "vrgen/corpus.hpp"
#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

namespace {

std::vector<std::string> split_top_level(std::string_view text, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  bool quoted = false;
  char quote = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == quote) quoted = false;
      continue;
    }
    if (c == '\'' || c == '"') {
      quoted = true;
      quote = c;
    } else if (c == '(') {
      ++depth;
    } else if (c == ')') {
      --depth;
    } else if (c == sep && depth == 0) {
      out.emplace_back(trim(text.substr(start, i - start)));
      start = i + 1;
    }
  }
  auto last = trim(text.substr(start));
  if (!last.empty()) out.emplace_back(last);
  return out;
}

EntityTag core_tag(std::string_view word, std::size_t line_no) {
  std::string upper(word);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  auto parsed = parse_tag(upper);
  if (!parsed) {
    throw Error(ErrorCode::MalformedLine, "mapping line " + std::to_string(line_no) + ": unknown entity '" +
                                              std::string(word) + "'");
  }
  EntityTag tag = *parsed;
  if (std::find(kCoreEntities.begin(), kCoreEntities.end(), tag) == kCoreEntities.end()) {
    throw Error(ErrorCode::MalformedLine, "mapping line " + std::to_string(line_no) + ": not a core entity");
  }
  return tag;
}

bool is_constant_slot(const Lexicon& lexicon, const std::string& signature, std::size_t pos) {
  const auto* schema = lexicon.find(signature);
  return schema && schema->constant_slots.contains(pos);
}

bool is_bare_atom(std::string_view text) {
  if (text.empty() || !std::islower(static_cast<unsigned char>(text[0]))) return false;
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Term port_term(const std::string& value) {
  std::string digits;
  for (char c : value) {
    if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
  }
  if (!digits.empty() && digits.size() <= 5) return Term::constant(digits);
  return Term::constant(to_atom(value));
}

}  // namespace

const MappingEntry* MappingTable::find(EntityTag entity, std::string_view label) const {
  auto it = entries.find(entity);
  if (it == entries.end()) return nullptr;
  auto e = it->second.find(std::string(label));
  return e == it->second.end() ? nullptr : &e->second;
}

std::vector<std::string> MappingTable::labels(EntityTag entity) const {
  std::vector<std::string> out;
  if (auto it = entries.find(entity); it != entries.end()) {
    for (const auto& [label, entry] : it->second) out.push_back(label);
  }
  return out;
}

MappingTable parse_mapping_table(std::string_view text) {
  MappingTable table;
  bool versioned = false;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == '%') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::MalformedLine, "mapping line " + std::to_string(line_no) + ": missing '='");
    }
    auto lhs = trim(line.substr(0, eq));
    auto rhs = trim(line.substr(eq + 1));
    if (lhs == "format") {
      if (rhs != "vrgen-mapping 1") throw Error(ErrorCode::FormatVersionMismatch, "expected vrgen-mapping 1");
      versioned = true;
      continue;
    }
    if (lhs.starts_with("k.")) {
      table.k_clusters[core_tag(lhs.substr(2), line_no)] = static_cast<std::size_t>(parse_int(rhs));
      continue;
    }
    auto words = split_whitespace(lhs);
    if (words.size() == 3 && words[0] == "exemplar") {
      table.exemplars[core_tag(words[1], line_no)].emplace(words[2], std::string(rhs));
      continue;
    }
    if (words.size() != 2) {
      throw Error(ErrorCode::MalformedLine, "mapping line " + std::to_string(line_no) + ": expected '<entity> <label>'");
    }
    EntityTag tag = core_tag(words[0], line_no);
    MappingEntry entry;
    auto sections = split_top_level(rhs, ';');
    if (sections.empty()) throw Error(ErrorCode::MalformedLine, "mapping line " + std::to_string(line_no));
    for (const auto& p : split_top_level(sections[0], ',')) {
      try {
        entry.predicates.push_back(parse_predicate(p));
      } catch (const ParseError& e) {
        throw Error(ErrorCode::MalformedLine, "mapping line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    for (std::size_t s = 1; s < sections.size(); ++s) {
      auto kv = sections[s].find('=');
      if (kv == std::string::npos) {
        throw Error(ErrorCode::MalformedLine, "mapping line " + std::to_string(line_no) + ": bad attribute");
      }
      entry.attributes[std::string(trim(std::string_view(sections[s]).substr(0, kv)))] =
          std::string(trim(std::string_view(sections[s]).substr(kv + 1)));
    }
    table.entries[tag][words[1]] = std::move(entry);
  }
  if (!versioned) throw Error(ErrorCode::FormatVersionMismatch, "mapping table has no format line");
  return table;
}

MappingTable load_mapping_table(const std::filesystem::path& path) { return parse_mapping_table(read_file(path)); }

std::optional<std::string>& CoreLabels::operator[](EntityTag tag) {
  switch (tag) {
    case EntityTag::Impact: return impact;
    case EntityTag::Vector: return vector;
    case EntityTag::Means: return means;
    default: throw Error(ErrorCode::InvalidArgument, "not a core entity");
  }
}

const std::optional<std::string>& CoreLabels::operator[](EntityTag tag) const {
  return const_cast<CoreLabels&>(*this)[tag];
}

RuleSkeleton create_structure(const CoreLabels& labels, const MappingTable& mapping, const Lexicon& lexicon) {
  std::vector<const MappingEntry*> parts;
  for (EntityTag tag : {EntityTag::Impact, EntityTag::Means, EntityTag::Vector}) {
    const auto& label = labels[tag];
    if (!label || label->empty()) throw Error(ErrorCode::MissingCoreEntity, std::string(tag_name(tag)));
    const auto* entry = mapping.find(tag, *label);
    if (!entry || entry->predicates.empty()) {
      throw Error(ErrorCode::UnmappableCluster, std::string(tag_name(tag)) + " label '" + *label + "'");
    }
    parts.push_back(entry);
  }

  RuleSkeleton sk;
  std::size_t fresh = 0;
  auto open = [&](Predicate p) {
    auto sig = p.signature();
    for (std::size_t i = 0; i < p.args.size(); ++i) {
      auto& t = p.args[i];
      if (t.kind != Term::Kind::Wildcard && t.kind != Term::Kind::Variable) continue;
      t = is_constant_slot(lexicon, sig, i) ? Term::wildcard() : Term::variable("V" + std::to_string(fresh++));
    }
    return p;
  };

  std::set<std::string> seen;
  sk.rule.head = open(parts[0]->predicates.front());
  seen.insert(sk.rule.head.signature());
  auto add_body = [&](const Predicate& p) {
    if (seen.insert(p.signature()).second) sk.rule.body.push_back(open(p));
  };
  for (std::size_t i = 1; i < parts[0]->predicates.size(); ++i) add_body(parts[0]->predicates[i]);
  for (std::size_t part = 1; part < parts.size(); ++part) {
    for (const auto& p : parts[part]->predicates) add_body(p);
  }
  for (const auto* part : parts) {
    for (const auto& [k, v] : part->attributes) sk.attributes[k] = v;
  }
  sk.rule.description = "impact=" + *labels.impact + ", means=" + *labels.means + ", vector=" + *labels.vector;
  return sk;
}

RuleSkeleton assign_constants(RuleSkeleton skeleton, const EntitySet& entities, const std::string& cve_id,
                              const Lexicon& lexicon) {
  auto first = [&](EntityTag tag) -> std::optional<std::string> {
    if (!entities.has(tag)) return std::nullopt;
    return entities[tag].front();
  };
  auto fill = [&](Predicate& p) {
    auto sig = p.signature();
    const auto* schema = lexicon.find(sig);
    if (!schema) return;
    for (std::size_t i = 0; i < p.args.size(); ++i) {
      if (p.args[i].kind != Term::Kind::Wildcard || !schema->constant_slots.contains(i)) continue;
      const std::string& sort = schema->arg_sorts[i];
      std::string where = Slot{sig, i}.label();
      std::optional<Term> value;
      std::string source;
      if (auto attr = skeleton.attributes.find(sort); attr != skeleton.attributes.end()) {
        value = Term::constant(is_bare_atom(attr->second) ? attr->second : to_atom(attr->second));
        source = "label attribute " + sort;
      } else if (sort == "vulID") {
        if (!cve_id.empty()) {
          value = Term::constant(quote_atom(cve_id));
          source = "cve id";
        }
      } else {
        static const std::map<std::string, EntityTag, std::less<>> kSortEntity = {
            {"product", EntityTag::Platform}, {"protocol", EntityTag::Protocol}, {"port", EntityTag::Port},
            {"os", EntityTag::Os},            {"version", EntityTag::Version},   {"privilege", EntityTag::Privilege},
        };
        if (auto it = kSortEntity.find(sort); it != kSortEntity.end()) {
          if (auto v = first(it->second)) {
            value = sort == "port" ? port_term(*v) : Term::constant(to_atom(*v));
            source = std::string(tag_name(it->second)) + " '" + *v + "'";
          }
        }
      }
      if (value) {
        p.args[i] = *value;
        skeleton.rule.trace.push_back(where + " <- " + source);
      } else {
        skeleton.rule.trace.push_back(where + " <- _ (no value for " + sort + ")");
      }
    }
  };
  fill(skeleton.rule.head);
  for (auto& p : skeleton.rule.body) fill(p);
  return skeleton;
}

std::string_view failure_name(FailureReason reason) {
  switch (reason) {
    case FailureReason::MissingCoreEntity: return "MissingCoreEntity";
    case FailureReason::UnspecifiedVulnerability: return "UnspecifiedVulnerability";
    case FailureReason::UnmappableCluster: return "UnmappableCluster";
    case FailureReason::WiringFailed: return "WiringFailed";
  }
  return "Unknown";
}

bool is_unspecified_means(const EntitySet& entities) {
  for (const auto& v : entities[EntityTag::Means]) {
    if (lowercase(v).find("unspecified vulnerability") != std::string::npos) return true;
  }
  return false;
}

GenerationOutcome generate(const std::string& cve_id, std::string_view description, const GenerationModels& models,
                           const std::optional<EntitySet>& gold_entities, const GenerationOptions& options) {
  GenerationOutcome out;
  out.cve_id = cve_id;
  auto fail = [&](FailureReason reason, std::string detail) {
    out.failure = reason;
    out.detail = std::move(detail);
    return out;
  };

  if (gold_entities) {
    out.entities = *gold_entities;
  } else {
    auto tokens = tokenize(description);
    if (tokens.empty()) return fail(FailureReason::MissingCoreEntity, "empty description");
    if (!models.ner) return fail(FailureReason::MissingCoreEntity, "no tagger model");
    std::vector<EntityTag> tags;
    for (const auto& p : tag(*models.ner, models.embedding, tokens)) tags.push_back(p.tag);
    out.entities = extract_entities(tokens, tags, cve_id);
  }
  out.entities.cve_id = cve_id;

  if (is_unspecified_means(out.entities)) {
    return fail(FailureReason::UnspecifiedVulnerability, "means is an unspecified vulnerability");
  }

  const FeatureVector features = build_feature_vector(out.entities, models.embedding);
  const bool no_features =
      std::all_of(features.values.begin(), features.values.end(), [](double v) { return v == 0.0; });
  std::vector<std::string> trace;

  for (EntityTag tag : kCoreEntities) {
    const std::string name(tag_name(tag));
    auto words = primary_value_words(out.entities, tag);
    auto disc = models.discretization.find(tag);
    if (disc == models.discretization.end()) return fail(FailureReason::UnmappableCluster, "no clusters for " + name);
    if (!words.empty() && succinct_vector(words, models.embedding).count > 0) {
      auto [cluster, label] = map_to_cluster(disc->second, words, models.embedding);
      out.labels[tag] = label;
      trace.push_back(name + " '" + out.entities[tag].front() + "' -> cluster " + std::to_string(cluster) + " (" +
                      label + ")");
      continue;
    }
    auto model = models.completion.find(tag);
    if (no_features || model == models.completion.end()) {
      return fail(FailureReason::MissingCoreEntity, name + " absent and cannot be completed");
    }
    auto ranked = predict_missing(model->second, features, 1);
    if (ranked.empty() || ranked.front().probability < options.min_confidence) {
      return fail(FailureReason::MissingCoreEntity, name + " completion below confidence");
    }
    out.labels[tag] = ranked.front().label;
    trace.push_back(name + " completed -> cluster " + std::to_string(ranked.front().cluster) + " (" +
                    ranked.front().label + ", p=" + format_double(ranked.front().probability) + ")");
  }

  for (EntityTag tag : kCoreEntities) {
    if (*out.labels[tag] == kUnmappedLabel || !models.mapping.find(tag, *out.labels[tag])) {
      return fail(FailureReason::UnmappableCluster, std::string(tag_name(tag)) + " cluster has no predicate mapping");
    }
  }

  RuleSkeleton skeleton = create_structure(out.labels, models.mapping, models.lexicon);
  skeleton = assign_constants(std::move(skeleton), out.entities, cve_id, models.lexicon);
  skeleton.rule.description = cve_id.empty() ? skeleton.rule.description : cve_id + ": " + skeleton.rule.description;
  try {
    InteractionRule rule = wire_variables(skeleton.rule, models.wiring, options.threshold, models.sorts);
    rule.trace.insert(rule.trace.begin(), trace.begin(), trace.end());
    out.rule = std::move(rule);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RangeRestrictionViolation) throw;
    return fail(FailureReason::WiringFailed, e.what());
  }
  return out;
}

}  // namespace vrgen
