#include "vrgen/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "vrgen/error.hpp"
#include "vrgen/linalg.hpp"

namespace vrgen {

namespace {

using PhraseTable = std::map<std::string, std::vector<std::string>>;

const PhraseTable& means_phrases() {
  static const PhraseTable t = {
      {"bufferOverflow", {"buffer overflow", "heap-based buffer overflow", "stack-based buffer overflow"}},
      {"sqlInjection", {"sql injection", "sql injection vulnerability"}},
      {"xss", {"cross-site scripting", "cross-site scripting vulnerability"}},
      {"pathTraversal", {"directory traversal", "directory traversal vulnerability"}},
      {"csrf", {"cross-site request forgery", "cross-site request forgery vulnerability"}},
      {"useAfterFree", {"use-after-free", "use-after-free vulnerability"}},
      {"inputValidation", {"improper input validation", "input validation error"}},
      {"integerOverflow", {"integer overflow", "integer overflow error"}},
  };
  return t;
}

const PhraseTable& impact_phrases() {
  static const PhraseTable t = {
      {"codeExec", {"execute arbitrary code", "execute arbitrary commands", "run arbitrary code"}},
      {"privEscalation", {"gain privileges", "gain root privileges", "obtain elevated privileges"}},
      {"dos", {"cause a denial of service", "crash the application", "cause a denial of service via crash"}},
      {"infoDisclosure", {"obtain sensitive information", "read arbitrary files", "obtain sensitive memory contents"}},
      {"dataModification", {"modify data", "overwrite arbitrary files", "modify arbitrary database records"}},
      {"bypass", {"bypass authentication", "bypass intended access restrictions"}},
  };
  return t;
}

const PhraseTable& vector_phrases() {
  static const PhraseTable t = {
      {"remote", {"remote attackers", "remote authenticated users"}},
      {"local", {"local users", "local attackers"}},
      {"physical", {"physically proximate attackers"}},
      {"adjacentNetwork", {"adjacent network attackers"}},
  };
  return t;
}

const std::vector<std::string> kPlatforms = {
    "Adobe Reader", "Apache HTTP Server", "OpenSSL", "MySQL",   "Samba",   "Linux kernel",
    "Internet Explorer", "WordPress", "PHP",       "OpenSSH", "Firefox", "Cisco IOS",
};
const std::vector<std::string> kVersions = {
    "9.x before 9.3.3", "before 2.4.10", "1.0.1 through 1.0.1f", "5.5.x before 5.5.40",
    "3.x before 3.6.25", "before 4.9.2", "2.0 and earlier",      "8.x before 8.2.3",
};
const std::vector<std::string> kOses = {"Windows", "Mac OS X", "Linux", "FreeBSD", "Solaris"};
const std::vector<std::string> kTechniques = {
    "a crafted PDF file", "a long URI",          "a crafted HTTP request", "a malformed packet",
    "a crafted web page", "a long string",       "a crafted SQL statement", "a crafted file",
};
const std::vector<std::pair<std::string, std::string>> kServices = {
    {"HTTP", "80"}, {"HTTPS", "443"}, {"SMB", "445"}, {"DNS", "53"}, {"SSH", "22"},
};
const std::vector<std::string> kPrivileges = {"root", "administrator", "SYSTEM"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.below(items.size())];
}

std::string pick_weighted(Rng& rng, const std::vector<std::pair<std::string, double>>& weights) {
  double total = 0.0;
  for (const auto& [label, w] : weights) total += w;
  double u = rng.uniform() * total;
  for (const auto& [label, w] : weights) {
    if (u < w) return label;
    u -= w;
  }
  return weights.back().first;
}

std::string impact_for(Rng& rng, const std::string& means) {
  static const std::map<std::string, std::vector<std::pair<std::string, double>>> kTable = {
      {"bufferOverflow", {{"codeExec", 0.5}, {"dos", 0.4}, {"privEscalation", 0.1}}},
      {"sqlInjection", {{"infoDisclosure", 0.5}, {"dataModification", 0.3}, {"codeExec", 0.2}}},
      {"xss", {{"infoDisclosure", 0.4}, {"bypass", 0.3}, {"dataModification", 0.3}}},
      {"pathTraversal", {{"infoDisclosure", 0.6}, {"dataModification", 0.4}}},
      {"csrf", {{"dataModification", 0.5}, {"bypass", 0.5}}},
      {"useAfterFree", {{"codeExec", 0.6}, {"dos", 0.4}}},
      {"inputValidation", {{"dos", 0.4}, {"bypass", 0.3}, {"privEscalation", 0.3}}},
      {"integerOverflow", {{"dos", 0.5}, {"codeExec", 0.3}, {"privEscalation", 0.2}}},
  };
  return pick_weighted(rng, kTable.at(means));
}

std::string vector_for(Rng& rng, const std::string& means, const std::string& impact) {
  if (impact == "privEscalation") {
    return pick_weighted(rng, {{"local", 0.75}, {"physical", 0.15}, {"remote", 0.1}});
  }
  if (impact == "bypass" && means == "inputValidation") {
    return pick_weighted(rng, {{"physical", 0.5}, {"adjacentNetwork", 0.3}, {"local", 0.2}});
  }
  if (impact == "codeExec" || means == "bufferOverflow" || means == "sqlInjection" || means == "xss" ||
      means == "csrf" || means == "useAfterFree" || means == "pathTraversal") {
    return pick_weighted(rng, {{"remote", 0.9}, {"adjacentNetwork", 0.07}, {"local", 0.03}});
  }
  return pick_weighted(rng, {{"remote", 0.5}, {"local", 0.3}, {"adjacentNetwork", 0.1}, {"physical", 0.1}});
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

struct Segment {
  std::string text;
  EntityTag tag;
};

std::vector<std::string> keys(const PhraseTable& t) {
  std::vector<std::string> out;
  for (const auto& [k, v] : t) out.push_back(k);
  return out;
}

}  // namespace

const std::vector<std::string>& synthetic_phrases(EntityTag entity, const std::string& label) {
  switch (entity) {
    case EntityTag::Means: return means_phrases().at(label);
    case EntityTag::Impact: return impact_phrases().at(label);
    case EntityTag::Vector: return vector_phrases().at(label);
    default: throw Error(ErrorCode::InvalidArgument, "not a core entity");
  }
}

std::vector<SyntheticRecord> synthetic_records(const SyntheticOptions& options) {
  Rng rng(options.seed);
  const auto means_labels = keys(means_phrases());
  std::vector<SyntheticRecord> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    SyntheticRecord rec;
    const std::string means = pick(rng, means_labels);
    const std::string impact = impact_for(rng, means);
    const std::string vector = vector_for(rng, means, impact);
    const bool unspecified = rng.uniform() < options.unspecified_rate;
    const bool has_vector = rng.uniform() >= options.vector_missing_rate;
    const bool has_version = rng.uniform() < options.optional_field_rate;
    const bool has_os = rng.uniform() < options.optional_field_rate;
    const bool two_os = rng.uniform() < 0.3;
    const bool has_technique = rng.uniform() < 0.8;
    const bool has_service = rng.uniform() < options.optional_field_rate * 0.6;
    const bool has_privilege = impact == "codeExec" && rng.uniform() < 0.3;
    const bool inverted = rng.uniform() < 0.35;

    std::string means_text = unspecified ? "unspecified vulnerability" : pick(rng, means_phrases().at(means));
    const std::string platform = pick(rng, kPlatforms);
    const std::string version = pick(rng, kVersions);
    const std::string os1 = pick(rng, kOses);
    std::string os2 = pick(rng, kOses);
    if (os2 == os1) os2 = kOses[(std::find(kOses.begin(), kOses.end(), os1) - kOses.begin() + 1) % kOses.size()];
    const auto& service = pick(rng, kServices);

    std::vector<Segment> segs;
    auto o = [&](std::string t) { segs.push_back({std::move(t), EntityTag::O}); };
    auto e = [&](std::string t, EntityTag tag) { segs.push_back({std::move(t), tag}); };
    auto platform_part = [&] {
      e(platform, EntityTag::Platform);
      if (has_version) e(version, EntityTag::Version);
      if (has_os) {
        o("on");
        e(os1, EntityTag::Os);
        if (two_os) {
          o("and");
          e(os2, EntityTag::Os);
        }
      }
    };
    auto tail = [&] {
      o("allows");
      if (has_vector) {
        e(pick(rng, vector_phrases().at(vector)), EntityTag::Vector);
      } else {
        o("attackers");
      }
      o("to");
      e(pick(rng, impact_phrases().at(impact)), EntityTag::Impact);
      if (has_privilege) {
        o("with");
        e(pick(rng, kPrivileges), EntityTag::Privilege);
        o("privileges");
      }
      if (has_technique) {
        o("via");
        e(pick(rng, kTechniques), EntityTag::Technique);
      }
      if (has_service) {
        o("over");
        e(service.first, EntityTag::Protocol);
        o("on port");
        e(service.second, EntityTag::Port);
      }
      o(".");
    };
    if (inverted) {
      platform_part();
      o("contains a");
      e(means_text, EntityTag::Means);
      o("that");
      tail();
    } else {
      e(capitalize(means_text), EntityTag::Means);
      o("in");
      platform_part();
      tail();
    }

    // Join with single spaces, except before the final period.
    std::string text;
    std::vector<std::pair<std::size_t, EntityTag>> starts;
    for (const auto& s : segs) {
      if (!text.empty() && s.text != ".") text += ' ';
      starts.emplace_back(text.size(), s.tag);
      text += s.text;
    }
    rec.raw.id = "CVE-" + std::to_string(2005 + rng.below(16)) + "-" + std::to_string(10000 + i);
    rec.raw.description = text;
    rec.labeled.tokens = tokenize(text);
    for (const auto& tok : rec.labeled.tokens) {
      auto it = std::upper_bound(starts.begin(), starts.end(), tok.start,
                                 [](std::size_t pos, const auto& s) { return pos < s.first; });
      rec.labeled.tags.push_back(std::prev(it)->second);
    }
    rec.entities.cve_id = rec.raw.id;
    for (const auto& s : segs) {
      if (s.tag != EntityTag::O) rec.entities[s.tag].push_back(s.text);
    }
    rec.labels.impact = impact;
    rec.labels.vector = vector;
    rec.labels.means = unspecified ? std::optional<std::string>("unspecified") : means;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<InteractionRule> wiring_templates() {
  return parse_rule_file(R"(
interaction_rule(
  (execCode(H, Perm) :-
    vulExists(H, Id, Sw, remoteExploit, privEscalation),
    networkServiceInfo(H, Sw, Protocol, Port, Perm),
    netAccess(H, Protocol, Port)),
  rule_desc("remote exploit of a server program", 1.0)).
interaction_rule(
  (execCode(H, root) :-
    execCode(H, Perm),
    vulExists(H, Id, Sw, localExploit, privEscalation),
    setuidProgramInfo(H, Sw, root)),
  rule_desc("local exploit", 1.0)).
interaction_rule(
  (netAccess(H, Protocol, Port) :-
    attackerLocated(Zone),
    hacl(Zone, H, Protocol, Port)),
  rule_desc("direct network access", 1.0)).
interaction_rule(
  (principalCompromised(Victim) :-
    hasAccount(Victim, H, User),
    execCode(H, User)),
  rule_desc("password sniffing", 0.8)).
interaction_rule(
  (accessFile(H, Access, Path) :-
    execCode(H, User),
    canAccessFile(H, User, Access, Path)),
  rule_desc("execCode implies file access", 1.0)).
interaction_rule(
  (canAccessHost(H) :-
    logInService(H, Protocol, Port),
    netAccess(H, Protocol, Port)),
  rule_desc("access a host through a log-in service", 1.0)).
)");
}

namespace {

void rename_all(Predicate& p, const std::string& suffix) {
  for (auto& t : p.args) {
    if (t.kind == Term::Kind::Variable) t.text += suffix;
  }
}

}  // namespace

std::vector<InteractionRule> synthetic_rule_corpus(const std::vector<InteractionRule>& templates, std::size_t count,
                                                   double noise, std::uint64_t seed) {
  if (templates.empty()) throw Error(ErrorCode::InvalidArgument, "no templates");
  Rng rng(seed);
  std::vector<InteractionRule> out;
  for (std::size_t i = 0; i < count; ++i) {
    InteractionRule r = templates[i % templates.size()];
    const std::string suffix = "_" + std::to_string(i);
    rename_all(r.head, suffix);
    for (auto& p : r.body) rename_all(p, suffix);
    r.description += " #" + std::to_string(i);
    if (rng.uniform() < noise) {
      // Candidate body occurrences whose rename keeps the rule range restricted
      // and actually breaks a wire.
      std::vector<std::pair<std::size_t, std::size_t>> candidates;
      for (std::size_t b = 0; b < r.body.size(); ++b) {
        for (std::size_t a = 0; a < r.body[b].args.size(); ++a) {
          const auto& t = r.body[b].args[a];
          if (!t.is_variable()) continue;
          InteractionRule trial = r;
          trial.body[b].args[a].text = "Noise" + suffix;
          std::size_t uses = 0;
          for (const auto& occ : slot_occurrences(r)) uses += occ.term->is_variable() && occ.term->text == t.text;
          if (uses >= 2 && is_range_restricted(trial)) candidates.emplace_back(b, a);
        }
      }
      if (!candidates.empty()) {
        auto [b, a] = candidates[rng.below(candidates.size())];
        r.body[b].args[a].text = "Noise" + suffix;
        r.trace.push_back("noise");
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<InteractionRule> random_rules(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  static const std::vector<std::string> kNames = {"execCode", "vulExists", "netAccess", "hacl", "attackerLocated",
                                                  "hasAccount", "networkServiceInfo", "accessFile", "p", "q_2"};
  static const std::vector<std::string> kAtoms = {"root", "remoteExploit", "adobe_reader", "tcp", "http", "x1",
                                                  "'CVE-2010-2212'", "'Mac OS X'", "'it''s'", "80", "-3", "0"};
  static const std::vector<std::string> kDescs = {"remote exploit", "", "say \"hi\"", "back\\slash",
                                                  "multi word description", "x"};
  std::vector<InteractionRule> out;
  for (std::size_t i = 0; i < count; ++i) {
    InteractionRule r;
    std::vector<std::string> body_vars;
    auto random_term = [&](int depth, auto& self) -> Term {
      double u = rng.uniform();
      if (u < 0.4) {
        std::string v = "V" + std::to_string(rng.below(6));
        body_vars.push_back(v);
        return Term::variable(v);
      }
      if (u < 0.5) return Term::wildcard();
      if (u < 0.58 && depth < 2) {
        Term t{Term::Kind::Compound, "f" + std::to_string(rng.below(3)), {}};
        std::size_t n = 1 + rng.below(2);
        for (std::size_t k = 0; k < n; ++k) t.args.push_back(self(depth + 1, self));
        return t;
      }
      return Term::constant(pick(rng, kAtoms));
    };
    std::size_t body_len = 1 + rng.below(4);
    for (std::size_t b = 0; b < body_len; ++b) {
      Predicate p{pick(rng, kNames), {}};
      std::size_t arity = rng.below(5);
      for (std::size_t a = 0; a < arity; ++a) p.args.push_back(random_term(0, random_term));
      r.body.push_back(std::move(p));
    }
    r.head.name = pick(rng, kNames);
    std::size_t head_arity = rng.below(4);
    for (std::size_t a = 0; a < head_arity; ++a) {
      if (!body_vars.empty() && rng.uniform() < 0.6) {
        r.head.args.push_back(Term::variable(pick(rng, body_vars)));
      } else {
        r.head.args.push_back(Term::constant(pick(rng, kAtoms)));
      }
    }
    r.description = pick(rng, kDescs);
    r.score = static_cast<double>(rng.below(1000)) / 997.0;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vrgen
