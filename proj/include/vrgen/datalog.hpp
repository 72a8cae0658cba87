#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vrgen {

// Datalog term. Constants keep their source spelling, so quoted atoms retain
// their quotes ('CVE-2010-2212') and integers their digits. Variables start
// with an uppercase letter or '_' (the bare '_' is a Wildcard). Compound
// terms only occur nested inside predicate arguments.
struct Term {
  enum class Kind { Constant, Variable, Wildcard, Compound };

  Kind kind = Kind::Constant;
  std::string text;
  std::vector<Term> args;

  static Term constant(std::string text) { return {Kind::Constant, std::move(text), {}}; }
  static Term variable(std::string text) { return {Kind::Variable, std::move(text), {}}; }
  static Term wildcard() { return {Kind::Wildcard, "_", {}}; }

  bool is_variable() const { return kind == Kind::Variable; }
  bool operator==(const Term&) const = default;
};

struct Predicate {
  std::string name;
  std::vector<Term> args;

  std::size_t arity() const { return args.size(); }
  // name/arity, e.g. "netAccess/4"
  std::string signature() const;
  bool operator==(const Predicate&) const = default;
};

struct InteractionRule {
  Predicate head;
  std::vector<Predicate> body;
  std::string description;
  double score = 1.0;
  // Provenance notes (which entity, completion, or default filled each part).
  // Not part of the rule text and ignored by equality.
  std::vector<std::string> trace;

  bool operator==(const InteractionRule& other) const {
    return head == other.head && body == other.body && description == other.description && score == other.score;
  }
};

// Variables (recursively) occurring in a predicate.
std::set<std::string> variables_of(const Predicate& p);
// Head variables that never occur in the body. Named don't-care variables
// (`_Port`) are exempt, as in Prolog.
std::set<std::string> unrestricted_variables(const InteractionRule& rule);
bool is_range_restricted(const InteractionRule& rule);

struct RuleFile {
  std::vector<InteractionRule> rules;
  std::size_t other_clauses = 0;  // facts, declarations and directives that are not interaction rules
};

// Parses MulVAL-style Datalog: `interaction_rule((Head :- Body), rule_desc(Desc, Score)).`
// clauses, `%` line and `/* */` block comments, quoted atoms, strings, integers
// and nested terms. Other clauses and `:-` directives are syntax-checked and counted.
// Throws ParseError (SyntaxError / UnbalancedParens) with line and column.
RuleFile parse_rule_file_full(std::string_view text);
std::vector<InteractionRule> parse_rule_file(std::string_view text);

// Parses a single predicate such as "vulExists(dbServer, VulID, oracleDB)".
Predicate parse_predicate(std::string_view text);

// Canonical text: one body predicate per line, terminating period. Throws
// RangeRestrictionViolation when a head variable is missing from the body.
std::string emit_rule(const InteractionRule& rule);
std::string emit_rules(const std::vector<InteractionRule>& rules);
std::string emit_term(const Term& term);
std::string emit_predicate(const Predicate& p);

// Lowercase underscore atom for free text ("Mac OS X" -> mac_os_x); quoted
// when the result would not be a bare atom.
std::string to_atom(std::string_view text);
std::string quote_atom(std::string_view text);

}  // namespace vrgen
