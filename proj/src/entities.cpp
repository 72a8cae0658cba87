#include "vrgen/entities.hpp"

#include "json.hpp"
#include "vrgen/corpus.hpp"
#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

std::size_t EntitySet::entity_type_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.empty() ? 0 : 1;
  return n;
}

std::string entity_set_to_json(const EntitySet& set) {
  nlohmann::ordered_json entities = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kEntityTagCount; ++i) {
    if (!set.values[i].empty()) entities[std::string(tag_name(tag_at(i)))] = set.values[i];
  }
  nlohmann::ordered_json doc;
  doc["cve"] = set.cve_id;
  doc["entities"] = entities;
  return doc.dump();
}

EntitySet entity_set_from_json(std::string_view line) {
  EntitySet set;
  try {
    auto doc = nlohmann::json::parse(line);
    set.cve_id = doc.value("cve", "");
    if (doc.contains("entities")) {
      for (const auto& [key, vals] : doc["entities"].items()) {
        auto tag = parse_tag(key);
        if (!tag || *tag == EntityTag::O) throw Error(ErrorCode::UnknownTag, "entity type '" + key + "'");
        for (const auto& v : vals) set[*tag].push_back(v.get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  }
  return set;
}

std::vector<EntitySet> parse_entity_sets(std::string_view jsonl) {
  std::vector<EntitySet> out;
  std::size_t lineno = 0;
  for (const auto& line : split(jsonl, '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(entity_set_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EntitySet> load_entity_sets(const std::filesystem::path& path) {
  return parse_entity_sets(read_file(path));
}

std::string format_entity_sets(const std::vector<EntitySet>& sets) {
  std::string out;
  for (const auto& s : sets) {
    out += entity_set_to_json(s);
    out += '\n';
  }
  return out;
}

std::vector<std::string> entity_words(const EntitySet& set, EntityTag tag) {
  std::vector<std::string> words;
  for (const auto& value : set[tag]) {
    for (auto& w : split_whitespace(value)) words.push_back(std::move(w));
  }
  return words;
}

}  // namespace vrgen
