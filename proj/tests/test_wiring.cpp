#include <doctest.h>

#include <cmath>
#include <map>

#include "vrgen/datalog.hpp"
#include "vrgen/error.hpp"
#include "vrgen/linalg.hpp"
#include "vrgen/textio.hpp"
#include "vrgen/wiring.hpp"

using namespace vrgen;

namespace {

InteractionRule rule(const std::string& head, const std::vector<std::string>& body) {
  InteractionRule r;
  r.head = parse_predicate(head);
  for (const auto& b : body) r.body.push_back(parse_predicate(b));
  return r;
}

double at(const WiringMatrix& m, const std::string& a, const std::string& b) {
  return m.probability(*m.index_of(Slot::parse(a)), *m.index_of(Slot::parse(b)));
}

WiringMatrix toy(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& rows) {
  WiringMatrix m;
  for (const auto& l : labels) m.slots.push_back(Slot::parse(l));
  const std::size_t n = labels.size();
  m.probability = Matrix(n, n);
  m.cooccur = Matrix(n, n);
  m.wired = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.probability(i, j) = rows[i][j];
  return m;
}

const double U = kUnknown;

}  // namespace

TEST_CASE("slot labels") {
  Slot s{"netAccess/4", 2};
  CHECK(s.label() == "netAccess/4#2");
  CHECK(Slot::parse("netAccess/4#2") == s);
  CHECK_THROWS_AS(Slot::parse("nohash"), Error);
}

TEST_CASE("single-rule counts") {
  auto m = estimate_wiring_matrix({rule("execCode(H, P)", {"attackerLocated(A)", "netAccess(A, H, Pr, Po)"})});
  CHECK(at(m, "attackerLocated/1#0", "netAccess/4#0") == 1.0);
  CHECK(at(m, "execCode/2#0", "netAccess/4#1") == 1.0);
  CHECK(at(m, "execCode/2#0", "netAccess/4#0") == 0.0);
  CHECK(is_unknown(at(m, "execCode/2#0", "execCode/2#0")));
}

TEST_CASE("five-rule counts match hand tallies") {
  std::vector<InteractionRule> corpus = {
      rule("a(X, Y)", {"b(X)", "c(X, Y)"}),
      rule("a(X, Y)", {"b(Y)", "c(X, Y)"}),
      rule("a(X, Y)", {"b(X)", "d(Y)"}),
      rule("a(X, X)", {"c(X, Z)"}),
      rule("b(X)", {"c(Z, X)", "d(X)", "e(Z)"}),
  };
  auto m = estimate_wiring_matrix(corpus);
  CHECK(m.size() == 7);
  const std::map<std::pair<std::string, std::string>, std::pair<int, int>> expected = {
      {{"a/2#0", "a/2#1"}, {1, 4}}, {{"a/2#0", "b/1#0"}, {2, 3}}, {{"a/2#0", "c/2#0"}, {3, 3}},
      {{"a/2#0", "c/2#1"}, {0, 3}}, {{"a/2#0", "d/1#0"}, {0, 1}}, {{"a/2#1", "b/1#0"}, {1, 3}},
      {{"a/2#1", "c/2#0"}, {1, 3}}, {{"a/2#1", "c/2#1"}, {2, 3}}, {{"a/2#1", "d/1#0"}, {1, 1}},
      {{"b/1#0", "c/2#0"}, {1, 3}}, {{"b/1#0", "c/2#1"}, {2, 3}}, {{"b/1#0", "d/1#0"}, {1, 2}},
      {{"c/2#0", "c/2#1"}, {0, 4}}, {{"c/2#0", "d/1#0"}, {0, 1}}, {{"c/2#1", "d/1#0"}, {1, 1}},
      {{"b/1#0", "e/1#0"}, {0, 1}}, {{"c/2#0", "e/1#0"}, {1, 1}}, {{"c/2#1", "e/1#0"}, {0, 1}},
      {{"d/1#0", "e/1#0"}, {0, 1}},
  };
  for (const auto& [pair, count] : expected) {
    INFO(pair.first << " ~ " << pair.second);
    auto i = *m.index_of(Slot::parse(pair.first));
    auto j = *m.index_of(Slot::parse(pair.second));
    CHECK(m.wired(i, j) == count.first);
    CHECK(m.cooccur(i, j) == count.second);
    CHECK(m.probability(i, j) == static_cast<double>(count.first) / count.second);
    CHECK(m.probability(j, i) == m.probability(i, j));
  }
  CHECK(is_unknown(at(m, "a/2#0", "e/1#0")));
  CHECK(is_unknown(at(m, "a/2#1", "e/1#0")));
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(is_unknown(m.probability(i, i)));
}

TEST_CASE("extra slots are unknown rows") {
  auto m = estimate_wiring_matrix({rule("a(X)", {"b(X)"})}, {Slot{"z/1", 0}});
  auto z = *m.index_of(Slot{"z/1", 0});
  for (std::size_t j = 0; j < m.size(); ++j) CHECK(is_unknown(m.probability(z, j)));
}

TEST_CASE("imputation: nearest row fills the gap") {
  auto m = toy({"p/1#0", "q/1#0", "r/1#0", "s/1#0"}, {{U, 0.9, 0.1, U}, {0.9, U, 0.2, 0.7}, {0.1, 0.2, U, 0.3}, {U, 0.7, 0.3, U}});
  auto k1 = impute_matrix(m, 1);
  // (0,3) <- row 1 (distance 0.2 vs 1.4) = 0.7; (3,0) <- row 1 (0.2 vs 1.0) = 0.9; symmetrized.
  CHECK(std::abs(k1.probability(0, 3) - 0.8) <= 1e-12);
  CHECK(std::abs(k1.probability(3, 0) - 0.8) <= 1e-12);
  CHECK(k1.probability(0, 1) == 0.9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(k1.probability(i, i) == 1.0);
  auto k2 = impute_matrix(m, 2);
  CHECK(std::abs(k2.probability(0, 3) - 0.5) <= 1e-12);
  CHECK(k2.fully_known());
}

TEST_CASE("imputation: rows without overlap take the global mean") {
  auto m = toy({"p/1#0", "q/1#0", "r/1#0"}, {{U, 0.2, U}, {0.6, U, U}, {U, U, U}});
  auto out = impute_matrix(m, 5);
  for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 2}, {1, 2}, {2, 0}, {2, 1}, {0, 1}})
    CHECK(std::abs(out.probability(i, j) - 0.4) <= 1e-12);
}

TEST_CASE("imputation: identity and errors") {
  auto full = toy({"p/1#0", "q/1#0"}, {{1, 0.3}, {0.3, 1}});
  CHECK(impute_matrix(full, 3).probability == full.probability);
  CHECK_THROWS_AS(impute_matrix(WiringMatrix{}, 3), Error);
  CHECK_THROWS_AS(impute_matrix(toy({"p/1#0"}, {{U}}), 3), Error);
}

TEST_CASE("csv round-trip") {
  auto m = estimate_wiring_matrix({rule("a(X, Y)", {"b(X)", "c(Y, Z)"}), rule("d(X)", {"e(X)"})});
  auto back = wiring_from_csv(wiring_to_csv(m));
  CHECK(back.slots == m.slots);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) {
      double a = m.probability(i, j), b = back.probability(i, j);
      CHECK((is_unknown(a) ? is_unknown(b) : a == b));
    }
  CHECK(wiring_to_csv(m).find('?') != std::string::npos);
  CHECK_THROWS_AS(wiring_from_csv("nope\n"), Error);
}

TEST_CASE("union-find merges transitively") {
  auto m = toy({"a/1#0", "b/1#0", "c/1#0"}, {{1, 0.9, 0.9}, {0.9, 1, 0.9}, {0.9, 0.9, 1}});
  auto r = rule("a(X)", {"b(Y)", "c(Z)"});
  auto classes = wiring_classes(r, m, 0.5, {});
  CHECK(classes[0] == classes[1]);
  CHECK(classes[1] == classes[2]);
  auto chain = toy({"a/1#0", "b/1#0", "c/1#0"}, {{1, 0.9, 0.1}, {0.9, 1, 0.9}, {0.1, 0.9, 1}});
  classes = wiring_classes(r, chain, 0.5, {});
  CHECK(classes[0] == classes[2]);
}

TEST_CASE("merge relation is an equivalence on random instances") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> labels;
    std::size_t n = 2 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) labels.push_back("p" + std::to_string(i) + "/1#0");
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) rows[i][j] = rows[j][i] = rng.uniform();
    auto m = toy(labels, rows);
    InteractionRule r;
    r.head = parse_predicate("p0(V0)");
    for (std::size_t i = 1; i < n; ++i) r.body.push_back(parse_predicate("p" + std::to_string(i) + "(V" + std::to_string(i) + ")"));
    auto classes = wiring_classes(r, m, 0.5, {});
    // Reference closure: transitive closure of the thresholded adjacency.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) reach[i][j] = i == j || rows[i][j] >= 0.5;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) CHECK((classes[i] == classes[j]) == reach[i][j]);
  }
}

TEST_CASE("sorts gate merges") {
  auto lex = parse_lexicon("format = vrgen-lexicon 1\nhost(host)\nport(port)\nsvc(host, port)\n");
  SortOracle sorts(lex, {});
  auto m = toy({"host/1#0", "port/1#0"}, {{1, 0.95}, {0.95, 1}});
  auto r = rule("host(H)", {"port(P)"});
  auto classes = wiring_classes(r, m, 0.5, sorts);
  CHECK(classes[0] != classes[1]);
  CHECK(wiring_classes(r, m, 0.5, SortOracle{})[0] == wiring_classes(r, m, 0.5, SortOracle{})[1]);
  CHECK(sorts.compatible(Slot{"svc/2", 0}, Slot{"host/1", 0}));
  CHECK_FALSE(sorts.compatible(Slot{"svc/2", 1}, Slot{"host/1", 0}));
  CHECK(sorts.compatible(Slot{"unknown/1", 0}, Slot{"host/1", 0}));
}

TEST_CASE("sorts are inferred from co-wired slots") {
  auto lex = parse_lexicon("format = vrgen-lexicon 1\nhost(host)\n");
  SortOracle sorts(lex, {rule("mystery(X, P)", {"host(X)", "other(P)"}), rule("deeper(Y)", {"mystery(Y, Q)"})});
  CHECK(sorts.sort_of(Slot{"mystery/2", 0}) == "host");
  CHECK(sorts.sort_of(Slot{"deeper/1", 0}) == "host");
  CHECK_FALSE(sorts.sort_of(Slot{"mystery/2", 1}).has_value());
}

TEST_CASE("lexicon parsing") {
  auto lex = parse_lexicon(
      "format = vrgen-lexicon 1\n# comment\nnetAccess(host:AttackerHost, host, protocol!, port!)\n");
  auto* s = lex.find("netAccess/4");
  REQUIRE(s != nullptr);
  CHECK(s->arg_sorts == std::vector<std::string>{"host", "host", "protocol", "port"});
  CHECK(s->constant_slots == std::set<std::size_t>{2, 3});
  CHECK(lex.role_of(Slot{"netAccess/4", 0}) == "AttackerHost");
  CHECK(lex.role_of(Slot{"netAccess/4", 1}) == "Host");
  CHECK_THROWS_AS(parse_lexicon("p(host)\n"), Error);
  auto packaged = load_lexicon(std::filesystem::path(VRGEN_DATA_DIR) / "lexicon" / "predicates.txt");
  CHECK(packaged.find("execCode/2") != nullptr);
  CHECK(default_role("host") == "Host");
}

TEST_CASE("wiring names classes by role") {
  auto lex = parse_lexicon(
      "format = vrgen-lexicon 1\nattackerLocated(host:AttackerHost)\n"
      "netAccess(host:AttackerHost, host, protocol!, port!)\nexecCode(host, permission:Perm)\n"
      "svc(host, permission:Perm)\n");
  SortOracle sorts(lex, {});
  auto skeleton = rule("execCode(V0, V1)", {"svc(V2, V3)", "attackerLocated(V4)", "netAccess(V5, V6, _, _)"});
  auto m = estimate_wiring_matrix({rule("execCode(H, P)", {"svc(H, P)", "attackerLocated(A)", "netAccess(A, H, X, Y)"})});
  auto wired = wire_variables(skeleton, impute_matrix(m, 5), 0.5, sorts);
  CHECK(emit_predicate(wired.head) == "execCode(Host, Perm)");
  CHECK(emit_predicate(wired.body[2]) == "netAccess(AttackerHost, Host, _, _)");
  CHECK(wiring_partition(wired) ==
        std::set<std::set<std::string>>{{"execCode/2#0", "svc/2#0", "netAccess/4#1"},
                                        {"execCode/2#1", "svc/2#1"},
                                        {"attackerLocated/1#0", "netAccess/4#0"}});
  try {
    wire_variables(skeleton, impute_matrix(m, 5), 1.1, sorts);
    FAIL("expected RangeRestrictionViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RangeRestrictionViolation);
  }
}

TEST_CASE("re-wiring reproduces a consistent corpus") {
  std::vector<InteractionRule> corpus = {
      rule("execCode(H, P)", {"svc(H, P)", "attackerLocated(A)", "netAccess(A, H, X, Y)"}),
      rule("execCode(H, P)", {"local(H, P)"}),
      rule("canAccess(H)", {"execCode(H, P)", "svc(H, P)"}),
  };
  auto m = impute_matrix(estimate_wiring_matrix(corpus), 5);
  for (const auto& r : corpus) {
    auto rewired = wire_variables(unwire(r), m, 0.5, {});
    CHECK(wiring_partition(rewired) == wiring_partition(r));
  }
}

TEST_CASE("unwire and partitions") {
  auto r = rule("a(X, Y)", {"b(X)", "b(Y)", "c(f(Z), Z)"});
  auto u = unwire(r);
  CHECK(emit_predicate(u.head) == "a(V0, V1)");
  CHECK(variables_of(u.body[2]).size() == 2);
  auto parts = wiring_partition(r);
  CHECK(parts.count({"a/2#0", "b/1#0"}) == 1);
  CHECK(parts.count({"a/2#1", "b/1#0@1"}) == 1);
}
