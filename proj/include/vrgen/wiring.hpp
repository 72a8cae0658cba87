#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vrgen/datalog.hpp"
#include "vrgen/linalg.hpp"

namespace vrgen {

// A variable position: (predicate name/arity, argument index).
struct Slot {
  std::string signature;
  std::size_t position = 0;

  std::string label() const;  // "netAccess/4#0"
  static Slot parse(std::string_view label);
  auto operator<=>(const Slot&) const = default;
};

// Argument sorts and role names for known predicates.
struct PredicateSchema {
  std::string name;
  std::vector<std::string> arg_sorts;
  std::vector<std::string> roles;  // variable-name hint per argument
  std::set<std::size_t> constant_slots;

  std::size_t arity() const { return arg_sorts.size(); }
  std::string signature() const { return name + "/" + std::to_string(arity()); }
};

class Lexicon {
 public:
  void add(PredicateSchema schema);
  const PredicateSchema* find(std::string_view signature) const;
  std::optional<std::string> sort_of(const Slot& slot) const;
  std::optional<std::string> role_of(const Slot& slot) const;
  const std::map<std::string, PredicateSchema, std::less<>>& schemas() const { return schemas_; }

 private:
  std::map<std::string, PredicateSchema, std::less<>> schemas_;
};

// Lines of the form `name(sort[:Role][!], ...)`; '!' marks a slot filled from
// entities. Requires a `format = vrgen-lexicon 1` line.
Lexicon parse_lexicon(std::string_view text);
Lexicon load_lexicon(const std::filesystem::path& path);

// Default variable name for a sort ("host" -> "Host").
std::string default_role(std::string_view sort);

inline constexpr double kUnknown = std::numeric_limits<double>::quiet_NaN();
inline bool is_unknown(double v) { return std::isnan(v); }

struct WiringMatrix {
  std::vector<Slot> slots;  // sorted
  Matrix probability;       // NaN marks Unknown; diagonal Unknown until imputed
  Matrix cooccur;           // rules where both slots' predicates are present
  Matrix wired;             // rules where both slots hold the same variable

  std::size_t size() const { return slots.size(); }
  std::optional<std::size_t> index_of(const Slot& slot) const;
  bool fully_known() const;
};

// Slot occurrences of a rule in head-then-body order; each entry pairs the
// slot with the term found there.
struct SlotOccurrence {
  Slot slot;
  const Term* term = nullptr;
  std::size_t predicate_index = 0;  // 0 = head, i = body[i-1]
};
std::vector<SlotOccurrence> slot_occurrences(const InteractionRule& rule);
std::set<Slot> slots_of(const InteractionRule& rule);

// P[i,j] = wired / cooccur for slot pairs whose predicates share a rule;
// Unknown otherwise. `extra_slots` are added as all-Unknown rows.
WiringMatrix estimate_wiring_matrix(const std::vector<InteractionRule>& rules,
                                    const std::set<Slot>& extra_slots = {});

// k-NN imputation of Unknown entries. Row distance is the Euclidean distance
// over mutually known coordinates scaled by sqrt(n / overlap). Each Unknown
// P[i,j] becomes the mean of P[i',j] over the K nearest rows that know column
// j; rows without any usable neighbour take the global mean of known entries.
// The result is symmetrized and the diagonal set to 1.
WiringMatrix impute_matrix(const WiringMatrix& m, std::size_t k = 5);

std::string wiring_to_csv(const WiringMatrix& m);
WiringMatrix wiring_from_csv(std::string_view csv);

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n);
  std::size_t find(std::size_t x);
  bool unite(std::size_t a, std::size_t b);
  bool same(std::size_t a, std::size_t b) { return find(a) == find(b); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

// Sort lookup for wiring decisions: lexicon sorts first, then sorts inferred
// from slots co-wired in training rules. Slots with no known sort are
// compatible with everything.
class SortOracle {
 public:
  SortOracle() = default;
  SortOracle(const Lexicon& lexicon, const std::vector<InteractionRule>& training_rules);
  std::optional<std::string> sort_of(const Slot& slot) const;
  bool compatible(const Slot& a, const Slot& b) const;
  std::optional<std::string> role_of(const Slot& slot) const;

 private:
  Lexicon lexicon_;
  std::map<Slot, std::string> inferred_;
};

// Variable-occurrence classes decided by the wiring rule: two variable slots
// merge when P >= threshold and their sorts agree. Returns one class id per
// occurrence in slot_occurrences order (non-variables get no class).
std::vector<std::optional<std::size_t>> wiring_classes(const InteractionRule& skeleton, const WiringMatrix& m,
                                                       double threshold, const SortOracle& sorts);

// Applies wiring_classes and renames each class with a sort-derived variable
// name. Throws RangeRestrictionViolation when a head variable stays unbound.
InteractionRule wire_variables(const InteractionRule& skeleton, const WiringMatrix& m, double threshold,
                               const SortOracle& sorts);

// Partition of variable slots induced by variable names.
std::set<std::set<std::string>> wiring_partition(const InteractionRule& rule);

// Copy of `rule` with every variable occurrence renamed to a fresh unique name.
InteractionRule unwire(const InteractionRule& rule);

}  // namespace vrgen
