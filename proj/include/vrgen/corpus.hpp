#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vrgen/tags.hpp"

namespace vrgen {

struct RawVulnerability {
  std::string id;
  std::string description;
  std::optional<int> published_year;
};

// CVE-\d{4}-\d{4,}
bool is_valid_cve_id(std::string_view id);

struct Token {
  std::string surface;
  std::string norm;
  std::size_t start = 0;  // byte offsets into the source text
  std::size_t end = 0;
  bool punct = false;

  bool operator==(const Token&) const = default;
};

// Word tokens are runs of word characters (ASCII alphanumerics, '_', or any
// non-ASCII byte) optionally joined by '.', '-' or '/' when another word
// character follows, so "9.3.3", "9.x", "CVE-2010-2212" and "cross-site" are
// single tokens. Every other non-space character becomes a punctuation token.
// Norms are lowercase unless the token contains a digit.
std::vector<Token> tokenize(std::string_view text);

std::string normalize_word(std::string_view surface);

// Norms of the non-punctuation tokens.
std::vector<std::string> norms(const std::vector<Token>& tokens);

// Splits on newlines and sentence-final periods; returns norm streams,
// dropping empty sentences.
std::vector<std::vector<std::string>> sentence_norms(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::size_t kOovId = 0;
  static constexpr std::string_view kOovWord = "<unk>";

  Vocabulary();
  // words[0] must be the OOV marker.
  Vocabulary(std::vector<std::string> words, double coverage);

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t id(std::string_view word) const;  // kOovId when absent
  bool contains(std::string_view word) const;
  double coverage() const { return coverage_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_of_;
  double coverage_ = 0.0;
};

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& sentences, std::size_t max_size);
Vocabulary build_vocabulary(const std::vector<RawVulnerability>& corpus, std::size_t max_size);

using WordCount = std::pair<std::string, std::size_t>;

// Descending count, ties lexicographic.
std::vector<WordCount> word_frequency_report(const std::vector<RawVulnerability>& corpus, std::size_t top_k,
                                             bool drop_stopwords);
const std::vector<std::string>& stopwords();
bool is_stopword(std::string_view norm);

struct MalformedRecordInfo {
  std::size_t location = 0;  // 1-based line for TSV, 0-based record index for JSON
  std::string reason;
};

struct FeedLoadResult {
  std::vector<RawVulnerability> records;
  std::size_t skipped_blank = 0;
  std::vector<MalformedRecordInfo> malformed;
};

// Detects JSON (leading '{' or '[') versus TSV. Malformed records are
// reported; MalformedRecord is thrown only when every record fails.
FeedLoadResult parse_nvd_feed(std::string_view text);
FeedLoadResult load_nvd_feed(const std::filesystem::path& path);

struct LabeledSentence {
  std::vector<Token> tokens;
  std::vector<EntityTag> tags;
};

// CoNLL-like `token<TAB>TAG` lines, blank line between sentences.
std::vector<LabeledSentence> parse_labeled_dataset(std::string_view text);
std::vector<LabeledSentence> load_labeled_dataset(const std::filesystem::path& path);
std::string format_labeled_dataset(const std::vector<LabeledSentence>& data);

// Builds tokens with spans as if the surfaces were joined by single spaces.
std::vector<Token> tokens_from_surfaces(const std::vector<std::string>& surfaces);

}  // namespace vrgen
