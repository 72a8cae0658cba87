#include "vrgen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "json.hpp"
#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

namespace vrgen {

namespace {

constexpr std::array<std::string_view, kTagCount> kTagNames = {
    "VECTOR", "TECHNIQUE", "IMPACT", "MEANS", "PLATFORM", "OS", "VERSION", "PROTOCOL", "PORT", "PRIVILEGE", "O",
};

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }
bool is_joiner(unsigned char c) { return c == '.' || c == '-' || c == '/'; }

// English function words; the frequency report only needs a fixed, documented list.
const std::vector<std::string> kStopwords = {
    "a",       "about",   "above",  "after",   "again",  "against", "all",    "am",     "an",     "and",
    "any",     "are",     "as",     "at",      "be",     "because", "been",   "before", "being",  "below",
    "between", "both",    "but",    "by",      "can",    "could",   "did",    "do",     "does",   "doing",
    "down",    "during",  "each",   "few",     "for",    "from",    "further", "had",   "has",    "have",
    "having",  "he",      "her",    "here",    "hers",   "herself", "him",    "himself", "his",   "how",
    "i",       "if",      "in",     "into",    "is",     "it",      "its",    "itself", "just",   "me",
    "more",    "most",    "my",     "myself",  "no",     "nor",     "not",    "now",    "of",     "off",
    "on",      "once",    "only",   "or",      "other",  "our",     "ours",   "ourselves", "out", "over",
    "own",     "same",    "she",    "should",  "so",     "some",    "such",   "than",   "that",   "the",
    "their",   "theirs",  "them",   "themselves", "then", "there",  "these",  "they",   "this",   "those",
    "through", "to",      "too",    "under",   "until",  "up",      "very",   "was",    "we",     "were",
    "what",    "when",    "where",  "which",   "while",  "who",     "whom",   "why",    "will",   "with",
    "would",   "you",     "your",   "yours",   "yourself", "yourselves",
};

}  // namespace

std::string_view tag_name(EntityTag tag) { return kTagNames[index_of(tag)]; }

std::optional<EntityTag> parse_tag(std::string_view name) {
  for (std::size_t i = 0; i < kTagCount; ++i) {
    if (kTagNames[i] == name) return tag_at(i);
  }
  return std::nullopt;
}

std::optional<std::size_t> feature_block(EntityTag tag) {
  for (std::size_t i = 0; i < kFeatureTags.size(); ++i) {
    if (kFeatureTags[i] == tag) return i;
  }
  return std::nullopt;
}

bool is_valid_cve_id(std::string_view id) {
  if (id.size() < 13 || id.substr(0, 4) != "CVE-") return false;
  for (std::size_t i = 4; i < 8; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
  }
  if (id[8] != '-') return false;
  for (std::size_t i = 9; i < id.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
  }
  return id.size() - 9 >= 4;
}

std::string normalize_word(std::string_view surface) {
  bool has_digit = std::any_of(surface.begin(), surface.end(),
                               [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  std::string out(surface);
  if (!has_digit) {
    for (char& c : out) {
      auto u = static_cast<unsigned char>(c);
      if (u < 0x80) c = static_cast<char>(std::tolower(u));
    }
  }
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (is_word_char(c)) {
      while (i < n) {
        auto d = static_cast<unsigned char>(text[i]);
        if (is_word_char(d)) {
          ++i;
        } else if (is_joiner(d) && i + 1 < n && is_word_char(static_cast<unsigned char>(text[i + 1]))) {
          ++i;
        } else {
          break;
        }
      }
      std::string surface(text.substr(start, i - start));
      tokens.push_back(Token{surface, normalize_word(surface), start, i, false});
    } else {
      ++i;
      std::string surface(text.substr(start, 1));
      tokens.push_back(Token{surface, surface, start, i, true});
    }
  }
  return tokens;
}

std::vector<std::string> norms(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!t.punct) out.push_back(t.norm);
  }
  return out;
}

std::vector<std::vector<std::string>> sentence_norms(std::string_view text) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  std::size_t prev_end = 0;
  auto flush = [&] {
    if (!current.empty()) sentences.push_back(std::move(current));
    current.clear();
  };
  for (const auto& t : tokenize(text)) {
    if (text.substr(prev_end, t.start - prev_end).find('\n') != std::string_view::npos) flush();
    prev_end = t.end;
    if (t.punct) {
      if (t.surface == "." || t.surface == "!" || t.surface == "?") flush();
      continue;
    }
    current.push_back(t.norm);
  }
  flush();
  return sentences;
}

Vocabulary::Vocabulary() : Vocabulary({std::string(kOovWord)}, 0.0) {}

Vocabulary::Vocabulary(std::vector<std::string> words, double coverage)
    : words_(std::move(words)), coverage_(coverage) {
  if (words_.empty() || words_[0] != kOovWord) {
    throw Error(ErrorCode::InvalidArgument, "vocabulary must start with the OOV marker");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) index_of_.emplace(words_[i], i);
}

std::size_t Vocabulary::id(std::string_view word) const {
  auto it = index_of_.find(std::string(word));
  return it == index_of_.end() ? kOovId : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return word != kOovWord && index_of_.count(std::string(word)) > 0;
}

namespace {

std::vector<WordCount> ranked_counts(const std::map<std::string, std::size_t>& counts) {
  std::vector<WordCount> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const WordCount& a, const WordCount& b) { return a.second > b.second; });
  return ranked;
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& sentences, std::size_t max_size) {
  if (sentences.empty()) throw Error(ErrorCode::EmptyCorpus, "no sentences");
  if (max_size == 0) throw Error(ErrorCode::InvalidArgument, "max_size must be positive");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      ++counts[w];
      ++total;
    }
  }
  // std::map iteration is lexicographic, so the stable sort breaks ties lexicographically.
  auto ranked = ranked_counts(counts);
  std::vector<std::string> words{std::string(Vocabulary::kOovWord)};
  std::size_t covered = 0;
  for (std::size_t i = 0; i < ranked.size() && i < max_size; ++i) {
    words.push_back(ranked[i].first);
    covered += ranked[i].second;
  }
  double coverage = total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
  return Vocabulary(std::move(words), coverage);
}

Vocabulary build_vocabulary(const std::vector<RawVulnerability>& corpus, std::size_t max_size) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no records");
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(corpus.size());
  for (const auto& r : corpus) sentences.push_back(norms(tokenize(r.description)));
  return build_vocabulary(sentences, max_size);
}

const std::vector<std::string>& stopwords() { return kStopwords; }

bool is_stopword(std::string_view norm) {
  static const std::set<std::string, std::less<>> lookup(kStopwords.begin(), kStopwords.end());
  return lookup.find(norm) != lookup.end();
}

std::vector<WordCount> word_frequency_report(const std::vector<RawVulnerability>& corpus, std::size_t top_k,
                                             bool drop_stopwords) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no records");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : corpus) {
    for (const auto& w : norms(tokenize(r.description))) {
      if (drop_stopwords && is_stopword(w)) continue;
      ++counts[w];
    }
  }
  auto ranked = ranked_counts(counts);
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

namespace {

std::optional<int> year_prefix(const std::string& date) {
  if (date.size() < 4) return std::nullopt;
  try {
    return static_cast<int>(parse_int(std::string_view(date).substr(0, 4)));
  } catch (const Error&) {
    return std::nullopt;
  }
}

FeedLoadResult parse_nvd_tsv(std::string_view text) {
  FeedLoadResult result;
  std::size_t attempted = 0;
  std::size_t lineno = 0;
  for (std::string line : split(text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++attempted;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      result.malformed.push_back({lineno, "missing tab separator"});
      continue;
    }
    std::string id(trim(std::string_view(line).substr(0, tab)));
    if (!is_valid_cve_id(id)) {
      result.malformed.push_back({lineno, "invalid CVE id '" + id + "'"});
      continue;
    }
    std::string description(trim(std::string_view(line).substr(tab + 1)));
    if (description.empty()) {
      ++result.skipped_blank;
      continue;
    }
    result.records.push_back({std::move(id), std::move(description), std::nullopt});
  }
  if (attempted > 0 && result.malformed.size() == attempted) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(result.malformed.front().location) + ": " +
                                                result.malformed.front().reason);
  }
  return result;
}

// Handles both the 1.1 feed ("CVE_Items") and the 2.0 API ("vulnerabilities") layouts.
FeedLoadResult parse_nvd_json(std::string_view text) {
  using nlohmann::json;
  FeedLoadResult result;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("offset ") + e.what());
  }
  const json* items = nullptr;
  bool v2 = false;
  if (doc.is_object() && doc.contains("CVE_Items")) {
    items = &doc["CVE_Items"];
  } else if (doc.is_object() && doc.contains("vulnerabilities")) {
    items = &doc["vulnerabilities"];
    v2 = true;
  } else if (doc.is_array()) {
    items = &doc;
  } else {
    throw Error(ErrorCode::MalformedRecord, "no CVE_Items or vulnerabilities array");
  }
  if (!items->is_array()) throw Error(ErrorCode::MalformedRecord, "record list is not an array");

  std::size_t index = 0;
  for (const auto& item : *items) {
    std::size_t at = index++;
    try {
      const json& cve = item.at("cve");
      std::string id;
      std::string description;
      std::optional<int> year;
      if (v2 || cve.contains("id")) {
        id = cve.at("id").get<std::string>();
        for (const auto& d : cve.at("descriptions")) {
          if (d.value("lang", "") == "en") {
            description = d.at("value").get<std::string>();
            break;
          }
        }
        if (cve.contains("published")) year = year_prefix(cve["published"].get<std::string>());
      } else {
        id = cve.at("CVE_data_meta").at("ID").get<std::string>();
        for (const auto& d : cve.at("description").at("description_data")) {
          if (d.value("lang", "") == "en") {
            description = d.at("value").get<std::string>();
            break;
          }
        }
        if (item.contains("publishedDate")) year = year_prefix(item["publishedDate"].get<std::string>());
      }
      if (!is_valid_cve_id(id)) {
        result.malformed.push_back({at, "invalid CVE id '" + id + "'"});
        continue;
      }
      std::string trimmed(trim(description));
      if (trimmed.empty()) {
        ++result.skipped_blank;
        continue;
      }
      result.records.push_back({std::move(id), std::move(trimmed), year});
    } catch (const json::exception& e) {
      result.malformed.push_back({at, e.what()});
    }
  }
  if (index > 0 && result.malformed.size() == index) {
    throw Error(ErrorCode::MalformedRecord, "record " + std::to_string(result.malformed.front().location) + ": " +
                                                result.malformed.front().reason);
  }
  return result;
}

}  // namespace

FeedLoadResult parse_nvd_feed(std::string_view text) {
  std::string_view body = trim(text);
  if (body.empty()) return {};
  if (body.front() == '{' || body.front() == '[') return parse_nvd_json(body);
  return parse_nvd_tsv(text);
}

FeedLoadResult load_nvd_feed(const std::filesystem::path& path) { return parse_nvd_feed(read_file(path)); }

std::vector<Token> tokens_from_surfaces(const std::vector<std::string>& surfaces) {
  std::vector<Token> tokens;
  tokens.reserve(surfaces.size());
  std::size_t offset = 0;
  for (const auto& s : surfaces) {
    bool punct = std::none_of(s.begin(), s.end(), [](char c) { return is_word_char(static_cast<unsigned char>(c)); });
    tokens.push_back(Token{s, punct ? s : normalize_word(s), offset, offset + s.size(), punct});
    offset += s.size() + 1;
  }
  return tokens;
}

std::vector<LabeledSentence> parse_labeled_dataset(std::string_view text) {
  std::vector<LabeledSentence> out;
  std::vector<std::string> surfaces;
  std::vector<EntityTag> tags;
  auto flush = [&] {
    if (!surfaces.empty()) out.push_back({tokens_from_surfaces(surfaces), tags});
    surfaces.clear();
    tags.clear();
  };
  std::size_t lineno = 0;
  auto lines = split(text, '\n');
  for (std::string line : lines) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      flush();
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(lineno) + ": expected token<TAB>TAG");
    }
    std::string token = line.substr(0, tab);
    std::string tag_text(trim(std::string_view(line).substr(tab + 1)));
    auto tag = parse_tag(tag_text);
    if (!tag) {
      throw Error(ErrorCode::UnknownTag, "tag '" + tag_text + "' at line " + std::to_string(lineno));
    }
    surfaces.push_back(std::move(token));
    tags.push_back(*tag);
  }
  flush();
  return out;
}

std::vector<LabeledSentence> load_labeled_dataset(const std::filesystem::path& path) {
  return parse_labeled_dataset(read_file(path));
}

std::string format_labeled_dataset(const std::vector<LabeledSentence>& data) {
  std::string out;
  for (const auto& s : data) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i].surface;
      out += '\t';
      out += tag_name(s.tags[i]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace vrgen
