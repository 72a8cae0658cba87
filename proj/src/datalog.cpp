#include "vrgen/datalog.hpp"

#include <cctype>
#include <functional>

#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

std::string Predicate::signature() const { return name + "/" + std::to_string(args.size()); }

namespace {

void collect_variables(const Term& t, std::set<std::string>& out) {
  if (t.kind == Term::Kind::Variable) out.insert(t.text);
  for (const auto& a : t.args) collect_variables(a, out);
}

enum class TokType { Atom, QuotedAtom, Var, Number, String, LParen, RParen, Comma, Neck, End, Symbol, Eof };

struct Tok {
  TokType type = TokType::Eof;
  std::string text;
  std::size_t line = 1;
  std::size_t col = 1;
};

bool is_symbol_char(char c) {
  static constexpr std::string_view kSymbols = "+-*/\\^<>=~:.?@#&$";
  return kSymbols.find(c) != std::string_view::npos;
}

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Tok next() {
    skip_layout();
    Tok t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= text_.size()) return t;
    const char c = text_[pos_];
    if (std::islower(static_cast<unsigned char>(c))) {
      t.type = TokType::Atom;
      t.text = take_while(is_ident_char);
    } else if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
      t.type = TokType::Var;
      t.text = take_while(is_ident_char);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      t.type = TokType::Number;
      t.text = take_number();
    } else if (c == '\'') {
      t.type = TokType::QuotedAtom;
      t.text = take_quoted('\'', t);
    } else if (c == '"') {
      t.type = TokType::String;
      t.text = take_quoted('"', t);
    } else if (c == '(') {
      t.type = TokType::LParen;
      t.text = std::string(1, advance());
    } else if (c == ')') {
      t.type = TokType::RParen;
      t.text = std::string(1, advance());
    } else if (c == ',') {
      t.type = TokType::Comma;
      t.text = std::string(1, advance());
    } else if (c == '.' && (pos_ + 1 >= text_.size() || std::isspace(static_cast<unsigned char>(text_[pos_ + 1])) ||
                            text_[pos_ + 1] == '%')) {
      t.type = TokType::End;
      t.text = std::string(1, advance());
    } else if (is_symbol_char(c)) {
      t.text = take_while(is_symbol_char);
      t.type = t.text == ":-" ? TokType::Neck : TokType::Symbol;
    } else {
      throw ParseError(ErrorCode::SyntaxError, line_, col_, "a term (found '" + std::string(1, c) + "')");
    }
    return t;
  }

 private:
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_layout() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        const std::size_t line = line_, col = col_;
        advance();
        advance();
        while (pos_ + 1 < text_.size() && !(text_[pos_] == '*' && text_[pos_ + 1] == '/')) advance();
        if (pos_ + 1 >= text_.size()) throw ParseError(ErrorCode::SyntaxError, line, col, "end of block comment");
        advance();
        advance();
      } else {
        break;
      }
    }
  }

  template <typename Pred>
  std::string take_while(Pred pred) {
    std::string out;
    while (pos_ < text_.size() && pred(text_[pos_])) out += advance();
    return out;
  }

  std::string take_number() {
    auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
    std::string out = take_while(digit);
    if (pos_ + 1 < text_.size() && text_[pos_] == '.' && digit(text_[pos_ + 1])) {
      out += advance();
      out += take_while(digit);
    }
    return out;
  }

  // Returns the literal including its quotes; escapes are kept verbatim.
  std::string take_quoted(char quote, const Tok& start) {
    std::string out(1, advance());
    while (true) {
      if (pos_ >= text_.size()) throw ParseError(ErrorCode::SyntaxError, start.line, start.col, "closing quote");
      char c = advance();
      out += c;
      if (c == '\\' && pos_ < text_.size()) {
        out += advance();
      } else if (c == quote) {
        if (pos_ < text_.size() && text_[pos_] == quote) {
          out += advance();
        } else {
          break;
        }
      }
    }
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

struct Node {
  enum class Kind { Atom, QuotedAtom, Var, Number, String, Compound, Clause };
  Kind kind = Kind::Atom;
  std::string text;
  std::vector<Node> args;  // Clause: args[0] is the head, the rest the body
  std::size_t line = 1;
  std::size_t col = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lex_(text) { tok_ = lex_.next(); }

  RuleFile parse_file() {
    RuleFile file;
    while (tok_.type != TokType::Eof) {
      if (tok_.type == TokType::Neck) {
        skip_directive();
        ++file.other_clauses;
        continue;
      }
      Node clause = parse_term();
      if (tok_.type == TokType::Neck) {
        // Plain Horn clause outside interaction_rule: syntax-check the body.
        advance();
        parse_term();
        while (tok_.type == TokType::Comma) {
          advance();
          parse_term();
        }
        expect(TokType::End, "'.'");
        ++file.other_clauses;
        continue;
      }
      expect(TokType::End, "'.'");
      if (clause.kind == Node::Kind::Compound && clause.text == "interaction_rule" && clause.args.size() == 2) {
        file.rules.push_back(to_rule(clause));
      } else {
        ++file.other_clauses;
      }
    }
    return file;
  }

  Node parse_single_term() {
    Node n = parse_term();
    if (tok_.type == TokType::End) advance();
    if (tok_.type != TokType::Eof) fail("end of input");
    return n;
  }

  static Predicate to_predicate(const Node& n) {
    if (n.kind == Node::Kind::Atom) return Predicate{n.text, {}};
    if (n.kind == Node::Kind::Compound) {
      Predicate p{n.text, {}};
      for (const auto& a : n.args) p.args.push_back(to_term(a));
      return p;
    }
    throw ParseError(ErrorCode::SyntaxError, n.line, n.col, "a predicate");
  }

 private:
  [[noreturn]] void fail(const std::string& expected) {
    if (tok_.type == TokType::Eof && depth_ > 0) {
      throw ParseError(ErrorCode::UnbalancedParens, tok_.line, tok_.col, "')' before end of input");
    }
    if (tok_.type == TokType::RParen && depth_ == 0) {
      throw ParseError(ErrorCode::UnbalancedParens, tok_.line, tok_.col, "no unmatched ')'");
    }
    if (tok_.type == TokType::End && depth_ > 0) {
      throw ParseError(ErrorCode::UnbalancedParens, tok_.line, tok_.col, "')' before '.'");
    }
    throw ParseError(ErrorCode::SyntaxError, tok_.line, tok_.col, expected);
  }

  void advance() { tok_ = lex_.next(); }

  void expect(TokType type, const std::string& what) {
    if (tok_.type != type) fail(what);
    if (type == TokType::RParen) --depth_;
    advance();
  }

  void open() {
    ++depth_;
    advance();
  }

  void skip_directive() {
    const std::size_t start_depth = depth_;
    advance();
    while (!(tok_.type == TokType::End && depth_ == start_depth)) {
      if (tok_.type == TokType::Eof) fail("'.'");
      if (tok_.type == TokType::LParen) ++depth_;
      if (tok_.type == TokType::RParen) {
        if (depth_ == start_depth) fail("'.'");
        --depth_;
      }
      advance();
    }
    advance();
  }

  Node parse_term() {
    Node n;
    n.line = tok_.line;
    n.col = tok_.col;
    switch (tok_.type) {
      case TokType::Atom:
      case TokType::QuotedAtom: {
        n.kind = tok_.type == TokType::Atom ? Node::Kind::Atom : Node::Kind::QuotedAtom;
        n.text = tok_.text;
        advance();
        if (tok_.type == TokType::LParen) {
          if (n.kind == Node::Kind::QuotedAtom) fail("a bare functor name");
          n.kind = Node::Kind::Compound;
          open();
          n.args.push_back(parse_term());
          while (tok_.type == TokType::Comma) {
            advance();
            n.args.push_back(parse_term());
          }
          expect(TokType::RParen, "',' or ')'");
        }
        return n;
      }
      case TokType::Var:
        n.kind = Node::Kind::Var;
        n.text = tok_.text;
        advance();
        return n;
      case TokType::Number:
        n.kind = Node::Kind::Number;
        n.text = tok_.text;
        advance();
        return n;
      case TokType::String:
        n.kind = Node::Kind::String;
        n.text = tok_.text;
        advance();
        return n;
      case TokType::Symbol:
        if (tok_.text == "-") {
          advance();
          if (tok_.type != TokType::Number) fail("a number after '-'");
          n.kind = Node::Kind::Number;
          n.text = "-" + tok_.text;
          advance();
          return n;
        }
        fail("a term");
      case TokType::LParen: {
        open();
        Node inner = parse_term();
        if (tok_.type == TokType::Neck) {
          advance();
          Node clause;
          clause.kind = Node::Kind::Clause;
          clause.line = n.line;
          clause.col = n.col;
          clause.args.push_back(std::move(inner));
          clause.args.push_back(parse_term());
          while (tok_.type == TokType::Comma) {
            advance();
            clause.args.push_back(parse_term());
          }
          expect(TokType::RParen, "',' or ')'");
          return clause;
        }
        expect(TokType::RParen, "')'");
        return inner;
      }
      default:
        fail("a term");
    }
  }

  static Term to_term(const Node& n) {
    switch (n.kind) {
      case Node::Kind::Atom:
      case Node::Kind::QuotedAtom:
      case Node::Kind::Number:
      case Node::Kind::String:
        return Term::constant(n.text);
      case Node::Kind::Var:
        return n.text == "_" ? Term::wildcard() : Term::variable(n.text);
      case Node::Kind::Compound: {
        Term t{Term::Kind::Compound, n.text, {}};
        for (const auto& a : n.args) t.args.push_back(to_term(a));
        return t;
      }
      case Node::Kind::Clause:
        break;
    }
    throw ParseError(ErrorCode::SyntaxError, n.line, n.col, "a term, not a clause");
  }

  static std::string unquote(const Node& n) {
    if (n.kind == Node::Kind::Atom) return n.text;
    if (n.kind != Node::Kind::QuotedAtom && n.kind != Node::Kind::String) {
      throw ParseError(ErrorCode::SyntaxError, n.line, n.col, "a quoted description");
    }
    const char quote = n.text.front();
    std::string out;
    for (std::size_t i = 1; i + 1 < n.text.size(); ++i) {
      char c = n.text[i];
      if (c == '\\' && i + 2 < n.text.size()) {
        char e = n.text[++i];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else if (c == quote && i + 2 < n.text.size() && n.text[i + 1] == quote) {
        out += c;
        ++i;
      } else {
        out += c;
      }
    }
    return out;
  }

  static InteractionRule to_rule(const Node& n) {
    const Node& clause = n.args[0];
    if (clause.kind != Node::Kind::Clause) {
      throw ParseError(ErrorCode::SyntaxError, clause.line, clause.col, "(Head :- Body)");
    }
    InteractionRule rule;
    rule.head = to_predicate(clause.args[0]);
    for (std::size_t i = 1; i < clause.args.size(); ++i) rule.body.push_back(to_predicate(clause.args[i]));
    const Node& desc = n.args[1];
    if (desc.kind != Node::Kind::Compound || desc.text != "rule_desc" || desc.args.size() != 2) {
      throw ParseError(ErrorCode::SyntaxError, desc.line, desc.col, "rule_desc(Description, Score)");
    }
    rule.description = unquote(desc.args[0]);
    if (desc.args[1].kind != Node::Kind::Number) {
      throw ParseError(ErrorCode::SyntaxError, desc.args[1].line, desc.args[1].col, "a numeric score");
    }
    rule.score = parse_double(desc.args[1].text);
    return rule;
  }

  Lexer lex_;
  Tok tok_;
  std::size_t depth_ = 0;
};

std::string format_score(double score) {
  std::string s = format_double(score);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote_string(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
  return out;
}

void validate_term(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Constant:
      if (t.text.empty()) throw Error(ErrorCode::InvalidArgument, "empty constant");
      break;
    case Term::Kind::Variable:
      if (t.text.empty() || !(std::isupper(static_cast<unsigned char>(t.text[0])) || t.text[0] == '_') ||
          t.text == "_") {
        throw Error(ErrorCode::InvalidArgument, "bad variable name '" + t.text + "'");
      }
      break;
    case Term::Kind::Wildcard:
      break;
    case Term::Kind::Compound:
      for (const auto& a : t.args) validate_term(a);
      break;
  }
}

}  // namespace

std::set<std::string> variables_of(const Predicate& p) {
  std::set<std::string> out;
  for (const auto& a : p.args) collect_variables(a, out);
  return out;
}

std::set<std::string> unrestricted_variables(const InteractionRule& rule) {
  std::set<std::string> body;
  for (const auto& p : rule.body) {
    auto v = variables_of(p);
    body.insert(v.begin(), v.end());
  }
  std::set<std::string> missing;
  for (const auto& v : variables_of(rule.head)) {
    if (v.front() == '_') continue;  // named don't-care
    if (!body.count(v)) missing.insert(v);
  }
  return missing;
}

bool is_range_restricted(const InteractionRule& rule) { return unrestricted_variables(rule).empty(); }

RuleFile parse_rule_file_full(std::string_view text) { return Parser(text).parse_file(); }

std::vector<InteractionRule> parse_rule_file(std::string_view text) { return parse_rule_file_full(text).rules; }

Predicate parse_predicate(std::string_view text) {
  Parser parser(text);
  return Parser::to_predicate(parser.parse_single_term());
}

std::string emit_term(const Term& term) {
  if (term.kind == Term::Kind::Wildcard) return "_";
  if (term.kind != Term::Kind::Compound) return term.text;
  std::string out = term.text + "(";
  for (std::size_t i = 0; i < term.args.size(); ++i) {
    if (i) out += ", ";
    out += emit_term(term.args[i]);
  }
  return out + ")";
}

std::string emit_predicate(const Predicate& p) {
  if (p.args.empty()) return p.name;
  std::string out = p.name + "(";
  for (std::size_t i = 0; i < p.args.size(); ++i) {
    if (i) out += ", ";
    out += emit_term(p.args[i]);
  }
  return out + ")";
}

std::string emit_rule(const InteractionRule& rule) {
  if (rule.body.empty()) throw Error(ErrorCode::InvalidArgument, "interaction rule needs a non-empty body");
  auto missing = unrestricted_variables(rule);
  if (!missing.empty()) {
    std::string names;
    for (const auto& v : missing) names += (names.empty() ? "" : ", ") + v;
    throw Error(ErrorCode::RangeRestrictionViolation, "head variables not bound in body: " + names);
  }
  for (const auto& a : rule.head.args) validate_term(a);
  for (const auto& p : rule.body) {
    for (const auto& a : p.args) validate_term(a);
  }
  std::string out = "interaction_rule(\n  (" + emit_predicate(rule.head) + " :-\n";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    out += "    " + emit_predicate(rule.body[i]);
    out += i + 1 < rule.body.size() ? ",\n" : "),\n";
  }
  out += "  rule_desc(" + quote_string(rule.description) + ", " + format_score(rule.score) + ")).\n";
  return out;
}

std::string emit_rules(const std::vector<InteractionRule>& rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (i) out += '\n';
    out += emit_rule(rules[i]);
  }
  return out;
}

std::string quote_atom(std::string_view text) {
  std::string out = "'";
  for (char c : text) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

std::string to_atom(std::string_view text) {
  std::string out;
  bool pending_sep = false;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      if (pending_sep && !out.empty()) out += '_';
      pending_sep = false;
      out += static_cast<char>(std::tolower(u));
    } else {
      pending_sep = true;
    }
  }
  if (out.empty()) return "''";
  if (!std::islower(static_cast<unsigned char>(out[0]))) return quote_atom(out);
  return out;
}

}  // namespace vrgen
