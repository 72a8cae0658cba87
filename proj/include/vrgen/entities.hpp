#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vrgen/tags.hpp"

namespace vrgen {

// Extracted free-text values per entity type for one vulnerability.
struct EntitySet {
  std::string cve_id;
  std::array<std::vector<std::string>, kEntityTagCount> values;

  std::vector<std::string>& operator[](EntityTag tag) { return values.at(index_of(tag)); }
  const std::vector<std::string>& operator[](EntityTag tag) const { return values.at(index_of(tag)); }
  bool has(EntityTag tag) const { return !(*this)[tag].empty(); }
  std::size_t entity_type_count() const;

  bool operator==(const EntitySet&) const = default;
};

// JSON-lines record: {"cve": "...", "entities": {"MEANS": ["..."], ...}}
std::string entity_set_to_json(const EntitySet& set);
EntitySet entity_set_from_json(std::string_view line);

std::vector<EntitySet> parse_entity_sets(std::string_view jsonl);
std::vector<EntitySet> load_entity_sets(const std::filesystem::path& path);
std::string format_entity_sets(const std::vector<EntitySet>& sets);

// Words of all values of one entity type, in value order.
std::vector<std::string> entity_words(const EntitySet& set, EntityTag tag);

}  // namespace vrgen
