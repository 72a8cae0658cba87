#include "vrgen/wiring.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

std::string Slot::label() const { return signature + "#" + std::to_string(position); }

Slot Slot::parse(std::string_view label) {
  auto hash = label.rfind('#');
  if (hash == std::string_view::npos || hash == 0) {
    throw Error(ErrorCode::MalformedRecord, "bad slot label '" + std::string(label) + "'");
  }
  long long pos = parse_int(label.substr(hash + 1));
  if (pos < 0) throw Error(ErrorCode::MalformedRecord, "negative slot position");
  return {std::string(label.substr(0, hash)), static_cast<std::size_t>(pos)};
}

// ---- lexicon ---------------------------------------------------------------

void Lexicon::add(PredicateSchema schema) {
  auto sig = schema.signature();
  schemas_[sig] = std::move(schema);
}

const PredicateSchema* Lexicon::find(std::string_view signature) const {
  auto it = schemas_.find(signature);
  return it == schemas_.end() ? nullptr : &it->second;
}

std::optional<std::string> Lexicon::sort_of(const Slot& slot) const {
  const auto* s = find(slot.signature);
  if (!s || slot.position >= s->arity()) return std::nullopt;
  return s->arg_sorts[slot.position];
}

std::optional<std::string> Lexicon::role_of(const Slot& slot) const {
  const auto* s = find(slot.signature);
  if (!s || slot.position >= s->arity()) return std::nullopt;
  return s->roles[slot.position];
}

std::string default_role(std::string_view sort) {
  static const std::map<std::string, std::string, std::less<>> kRoles = {
      {"host", "Host"},         {"permission", "Perm"},   {"principal", "Principal"},
      {"protocol", "Protocol"}, {"port", "Port"},         {"product", "Software"},
      {"vulID", "VulID"},       {"range", "Range"},       {"consequence", "Consequence"},
      {"file", "Path"},         {"account", "Account"},   {"data", "Data"},
  };
  if (auto it = kRoles.find(sort); it != kRoles.end()) return it->second;
  if (sort.empty()) return "X";
  std::string out(sort);
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

Lexicon parse_lexicon(std::string_view text) {
  Lexicon lex;
  bool versioned = false;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == '%') continue;
    if (line.starts_with("format")) {
      auto eq = line.find('=');
      if (eq == std::string_view::npos || trim(line.substr(eq + 1)) != "vrgen-lexicon 1") {
        throw Error(ErrorCode::FormatVersionMismatch, "expected vrgen-lexicon 1");
      }
      versioned = true;
      continue;
    }
    auto open = line.find('(');
    auto close = line.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open || open == 0) {
      throw Error(ErrorCode::MalformedLine, "lexicon line " + std::to_string(line_no));
    }
    PredicateSchema schema;
    schema.name = std::string(trim(line.substr(0, open)));
    auto inner = trim(line.substr(open + 1, close - open - 1));
    if (!inner.empty()) {
      for (const auto& part : split(inner, ',')) {
        std::string arg(trim(part));
        bool constant = false;
        if (!arg.empty() && arg.back() == '!') {
          constant = true;
          arg.pop_back();
        }
        std::string sort = arg;
        std::string role;
        if (auto colon = arg.find(':'); colon != std::string::npos) {
          sort = std::string(trim(std::string_view(arg).substr(0, colon)));
          role = std::string(trim(std::string_view(arg).substr(colon + 1)));
        }
        if (sort.empty()) throw Error(ErrorCode::MalformedLine, "lexicon line " + std::to_string(line_no));
        if (constant) schema.constant_slots.insert(schema.arg_sorts.size());
        schema.roles.push_back(role.empty() ? default_role(sort) : role);
        schema.arg_sorts.push_back(std::move(sort));
      }
    }
    lex.add(std::move(schema));
  }
  if (!versioned) throw Error(ErrorCode::FormatVersionMismatch, "lexicon has no format line");
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) { return parse_lexicon(read_file(path)); }

// ---- matrix estimation -----------------------------------------------------

std::optional<std::size_t> WiringMatrix::index_of(const Slot& slot) const {
  auto it = std::lower_bound(slots.begin(), slots.end(), slot);
  if (it == slots.end() || *it != slot) return std::nullopt;
  return static_cast<std::size_t>(it - slots.begin());
}

bool WiringMatrix::fully_known() const {
  return std::none_of(probability.data.begin(), probability.data.end(), [](double v) { return is_unknown(v); });
}

std::vector<SlotOccurrence> slot_occurrences(const InteractionRule& rule) {
  std::vector<SlotOccurrence> out;
  auto add = [&](const Predicate& p, std::size_t index) {
    auto sig = p.signature();
    for (std::size_t i = 0; i < p.args.size(); ++i) out.push_back({{sig, i}, &p.args[i], index});
  };
  add(rule.head, 0);
  for (std::size_t b = 0; b < rule.body.size(); ++b) add(rule.body[b], b + 1);
  return out;
}

std::set<Slot> slots_of(const InteractionRule& rule) {
  std::set<Slot> out;
  for (const auto& occ : slot_occurrences(rule)) out.insert(occ.slot);
  return out;
}

WiringMatrix estimate_wiring_matrix(const std::vector<InteractionRule>& rules, const std::set<Slot>& extra_slots) {
  std::set<Slot> all = extra_slots;
  for (const auto& r : rules) {
    auto s = slots_of(r);
    all.insert(s.begin(), s.end());
  }
  WiringMatrix m;
  m.slots.assign(all.begin(), all.end());
  const std::size_t n = m.slots.size();
  m.cooccur = Matrix(n, n);
  m.wired = Matrix(n, n);

  for (const auto& r : rules) {
    auto occs = slot_occurrences(r);
    std::vector<std::size_t> present;
    for (const auto& s : slots_of(r)) present.push_back(*m.index_of(s));
    for (std::size_t a = 0; a < present.size(); ++a) {
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        m.cooccur(present[a], present[b]) += 1.0;
        m.cooccur(present[b], present[a]) += 1.0;
      }
    }
    std::set<std::pair<std::size_t, std::size_t>> wired_pairs;
    for (std::size_t a = 0; a < occs.size(); ++a) {
      if (!occs[a].term->is_variable()) continue;
      for (std::size_t b = a + 1; b < occs.size(); ++b) {
        if (!occs[b].term->is_variable() || occs[a].term->text != occs[b].term->text) continue;
        if (occs[a].slot == occs[b].slot) continue;
        auto i = *m.index_of(occs[a].slot);
        auto j = *m.index_of(occs[b].slot);
        wired_pairs.insert({std::min(i, j), std::max(i, j)});
      }
    }
    for (auto [i, j] : wired_pairs) {
      m.wired(i, j) += 1.0;
      m.wired(j, i) += 1.0;
    }
  }

  m.probability = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m.probability(i, j) = (i == j || m.cooccur(i, j) == 0.0) ? kUnknown : m.wired(i, j) / m.cooccur(i, j);
    }
  }
  return m;
}

WiringMatrix impute_matrix(const WiringMatrix& m, std::size_t k) {
  const std::size_t n = m.size();
  if (n == 0) throw Error(ErrorCode::EmptyMatrix, "wiring matrix has no slots");
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "K must be positive");
  const Matrix& p = m.probability;

  double known_sum = 0.0;
  std::size_t known_count = 0;
  for (double v : p.data) {
    if (!is_unknown(v)) {
      known_sum += v;
      ++known_count;
    }
  }
  WiringMatrix out = m;
  if (known_count == p.data.size()) return out;
  if (known_count == 0) throw Error(ErrorCode::EmptyMatrix, "wiring matrix has no known entries");
  const double global_mean = known_sum / static_cast<double>(known_count);

  // Pairwise row distances over mutually known coordinates.
  Matrix dist(n, n, kUnknown);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      double sq = 0.0;
      std::size_t overlap = 0;
      for (std::size_t c = 0; c < n; ++c) {
        double x = p(a, c);
        double y = p(b, c);
        if (is_unknown(x) || is_unknown(y)) continue;
        sq += (x - y) * (x - y);
        ++overlap;
      }
      if (overlap == 0) continue;
      double d = std::sqrt(sq * static_cast<double>(n) / static_cast<double>(overlap));
      dist(a, b) = d;
      dist(b, a) = d;
    }
  }

  Matrix filled = p;
  std::vector<std::pair<double, std::size_t>> donors;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !is_unknown(p(i, j))) continue;
      donors.clear();
      for (std::size_t r = 0; r < n; ++r) {
        if (r == i || is_unknown(p(r, j)) || is_unknown(dist(i, r))) continue;
        donors.emplace_back(dist(i, r), r);
      }
      if (donors.empty()) {
        filled(i, j) = global_mean;
        continue;
      }
      std::sort(donors.begin(), donors.end());
      std::size_t take = std::min(k, donors.size());
      double s = 0.0;
      for (std::size_t t = 0; t < take; ++t) s += p(donors[t].second, j);
      filled(i, j) = s / static_cast<double>(take);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (is_unknown(filled(i, i))) filled(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double avg = 0.5 * (filled(i, j) + filled(j, i));
      filled(i, j) = avg;
      filled(j, i) = avg;
    }
  }
  out.probability = std::move(filled);
  return out;
}

std::string wiring_to_csv(const WiringMatrix& m) {
  std::string out = "slot";
  for (const auto& s : m.slots) out += "," + s.label();
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.slots[i].label();
    for (std::size_t j = 0; j < m.size(); ++j) {
      double v = m.probability(i, j);
      out += ",";
      out += is_unknown(v) ? "?" : format_double(v);
    }
    out += "\n";
  }
  return out;
}

WiringMatrix wiring_from_csv(std::string_view csv) {
  std::vector<std::string> lines;
  for (auto& l : split(csv, '\n')) {
    if (!trim(l).empty()) lines.push_back(std::string(trim(l)));
  }
  if (lines.empty()) throw Error(ErrorCode::MalformedRecord, "empty wiring CSV");
  auto header = split(lines[0], ',');
  if (header.empty() || header[0] != "slot") throw Error(ErrorCode::MalformedRecord, "wiring CSV header");
  WiringMatrix m;
  for (std::size_t i = 1; i < header.size(); ++i) m.slots.push_back(Slot::parse(header[i]));
  const std::size_t n = m.slots.size();
  if (lines.size() != n + 1) throw Error(ErrorCode::MalformedRecord, "wiring CSV row count");
  if (!std::is_sorted(m.slots.begin(), m.slots.end())) {
    throw Error(ErrorCode::MalformedRecord, "wiring CSV slots not sorted");
  }
  m.probability = Matrix(n, n);
  m.cooccur = Matrix(n, n);
  m.wired = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto cells = split(lines[i + 1], ',');
    if (cells.size() != n + 1 || cells[0] != header[i + 1]) {
      throw Error(ErrorCode::MalformedRecord, "wiring CSV row " + std::to_string(i + 1));
    }
    for (std::size_t j = 0; j < n; ++j) {
      m.probability(i, j) = cells[j + 1] == "?" ? kUnknown : parse_double(cells[j + 1]);
    }
  }
  return m;
}

// ---- union-find ------------------------------------------------------------

DisjointSets::DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t DisjointSets::find(std::size_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool DisjointSets::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  return true;
}

// ---- sorts -----------------------------------------------------------------

SortOracle::SortOracle(const Lexicon& lexicon, const std::vector<InteractionRule>& training_rules)
    : lexicon_(lexicon) {
  // Slots co-wired with each unknown slot, over all training rules.
  std::map<Slot, std::map<Slot, std::size_t>> neighbours;
  for (const auto& r : training_rules) {
    auto occs = slot_occurrences(r);
    for (std::size_t a = 0; a < occs.size(); ++a) {
      if (!occs[a].term->is_variable()) continue;
      for (std::size_t b = 0; b < occs.size(); ++b) {
        if (a == b || !occs[b].term->is_variable() || occs[a].term->text != occs[b].term->text) continue;
        if (!lexicon.sort_of(occs[a].slot)) ++neighbours[occs[a].slot][occs[b].slot];
      }
    }
  }
  // Propagate majority sorts until nothing changes.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [slot, adj] : neighbours) {
      if (inferred_.contains(slot)) continue;
      std::map<std::string, std::size_t> votes;
      for (const auto& [other, count] : adj) {
        if (auto s = sort_of(other)) votes[*s] += count;
      }
      if (votes.empty()) continue;
      auto best = std::max_element(votes.begin(), votes.end(),
                                   [](const auto& x, const auto& y) { return x.second < y.second; });
      inferred_[slot] = best->first;
      changed = true;
    }
  }
}

std::optional<std::string> SortOracle::sort_of(const Slot& slot) const {
  if (auto s = lexicon_.sort_of(slot)) return s;
  if (auto it = inferred_.find(slot); it != inferred_.end()) return it->second;
  return std::nullopt;
}

bool SortOracle::compatible(const Slot& a, const Slot& b) const {
  auto sa = sort_of(a);
  auto sb = sort_of(b);
  return !sa || !sb || *sa == *sb;
}

std::optional<std::string> SortOracle::role_of(const Slot& slot) const {
  if (auto r = lexicon_.role_of(slot)) return r;
  if (auto s = sort_of(slot)) return default_role(*s);
  return std::nullopt;
}

// ---- wiring ----------------------------------------------------------------

std::vector<std::optional<std::size_t>> wiring_classes(const InteractionRule& skeleton, const WiringMatrix& m,
                                                       double threshold, const SortOracle& sorts) {
  auto occs = slot_occurrences(skeleton);
  DisjointSets sets(occs.size());
  for (std::size_t a = 0; a < occs.size(); ++a) {
    if (!occs[a].term->is_variable()) continue;
    auto ia = m.index_of(occs[a].slot);
    for (std::size_t b = a + 1; b < occs.size(); ++b) {
      if (!occs[b].term->is_variable()) continue;
      if (occs[a].term->text == occs[b].term->text) {
        sets.unite(a, b);
        continue;
      }
      if (occs[a].slot == occs[b].slot || !ia) continue;
      auto ib = m.index_of(occs[b].slot);
      if (!ib) continue;
      double prob = m.probability(*ia, *ib);
      if (is_unknown(prob) || prob < threshold) continue;
      if (!sorts.compatible(occs[a].slot, occs[b].slot)) continue;
      sets.unite(a, b);
    }
  }
  std::vector<std::optional<std::size_t>> out(occs.size());
  std::map<std::size_t, std::size_t> root_to_class;
  for (std::size_t a = 0; a < occs.size(); ++a) {
    if (!occs[a].term->is_variable()) continue;
    auto root = sets.find(a);
    auto [it, inserted] = root_to_class.emplace(root, root_to_class.size());
    out[a] = it->second;
  }
  return out;
}

InteractionRule wire_variables(const InteractionRule& skeleton, const WiringMatrix& m, double threshold,
                               const SortOracle& sorts) {
  auto occs = slot_occurrences(skeleton);
  auto classes = wiring_classes(skeleton, m, threshold, sorts);
  std::size_t class_count = 0;
  for (const auto& c : classes) {
    if (c) class_count = std::max(class_count, *c + 1);
  }

  std::vector<std::map<std::string, std::size_t>> votes(class_count);
  for (std::size_t a = 0; a < occs.size(); ++a) {
    if (!classes[a]) continue;
    votes[*classes[a]][sorts.role_of(occs[a].slot).value_or("V")] += 1;
  }
  std::vector<std::string> names(class_count);
  std::map<std::string, std::size_t> used;
  for (std::size_t c = 0; c < class_count; ++c) {
    auto best = std::max_element(votes[c].begin(), votes[c].end(),
                                 [](const auto& x, const auto& y) { return x.second < y.second; });
    std::string base = best->first;
    std::size_t n = ++used[base];
    names[c] = n == 1 ? base : base + std::to_string(n);
  }

  InteractionRule out = skeleton;
  std::size_t a = 0;
  auto rename = [&](Predicate& p) {
    for (auto& t : p.args) {
      if (classes[a]) t = Term::variable(names[*classes[a]]);
      ++a;
    }
  };
  rename(out.head);
  for (auto& p : out.body) rename(p);
  if (!is_range_restricted(out)) {
    std::string missing;
    for (const auto& v : unrestricted_variables(out)) missing += (missing.empty() ? "" : ", ") + v;
    throw Error(ErrorCode::RangeRestrictionViolation, "unwired head variables: " + missing);
  }
  return out;
}

std::set<std::set<std::string>> wiring_partition(const InteractionRule& rule) {
  std::map<std::string, std::size_t> seen;
  std::map<std::string, std::set<std::string>> groups;
  std::string last_key;
  std::size_t last_pred = static_cast<std::size_t>(-1);
  std::map<std::size_t, std::string> suffix;
  for (const auto& occ : slot_occurrences(rule)) {
    if (occ.predicate_index != last_pred) {
      last_pred = occ.predicate_index;
      std::size_t k = seen[occ.slot.signature]++;
      suffix[last_pred] = k == 0 ? "" : "@" + std::to_string(k);
    }
    if (!occ.term->is_variable()) continue;
    groups[occ.term->text].insert(occ.slot.label() + suffix[last_pred]);
  }
  std::set<std::set<std::string>> out;
  for (auto& [name, members] : groups) out.insert(std::move(members));
  return out;
}

namespace {

void rename_fresh(Term& t, std::size_t& counter) {
  if (t.kind == Term::Kind::Variable) {
    t.text = "V" + std::to_string(counter++);
  } else if (t.kind == Term::Kind::Compound) {
    for (auto& a : t.args) rename_fresh(a, counter);
  }
}

}  // namespace

InteractionRule unwire(const InteractionRule& rule) {
  InteractionRule out = rule;
  std::size_t counter = 0;
  for (auto& t : out.head.args) rename_fresh(t, counter);
  for (auto& p : out.body) {
    for (auto& t : p.args) rename_fresh(t, counter);
  }
  return out;
}

}  // namespace vrgen
