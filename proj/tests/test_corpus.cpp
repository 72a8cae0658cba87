#include <doctest.h>

#include <algorithm>
#include <map>

#include "vrgen/corpus.hpp"
#include "vrgen/entities.hpp"
#include "vrgen/error.hpp"
#include "vrgen/linalg.hpp"

using namespace vrgen;

static std::vector<RawVulnerability> docs(std::initializer_list<const char*> texts) {
  std::vector<RawVulnerability> out;
  int i = 0;
  for (const char* t : texts) out.push_back({"CVE-2020-" + std::to_string(1000 + i++), t, std::nullopt});
  return out;
}

TEST_CASE("cve id pattern") {
  CHECK(is_valid_cve_id("CVE-2010-2212"));
  CHECK(is_valid_cve_id("CVE-2021-123456"));
  CHECK_FALSE(is_valid_cve_id("CVE-10-2212"));
  CHECK_FALSE(is_valid_cve_id("CVE-2010-221"));
  CHECK_FALSE(is_valid_cve_id("cve-2010-2212"));
}

TEST_CASE("tokenize") {
  CHECK(tokenize("").empty());
  CHECK(norms(tokenize("buffer overflow in Adobe Reader")) ==
        std::vector<std::string>{"buffer", "overflow", "in", "adobe", "reader"});
  CHECK(norms(tokenize("9.x before 9.3.3")) == std::vector<std::string>{"9.x", "before", "9.3.3"});
  auto toks = tokenize("Cross-site scripting (XSS), via port 8080.");
  CHECK(norms(toks) == std::vector<std::string>{"cross-site", "scripting", "xss", "via", "port", "8080"});
  CHECK(std::count_if(toks.begin(), toks.end(), [](const Token& t) { return t.punct; }) == 4);
  CHECK(norms(tokenize("CVE-2010-2212")) == std::vector<std::string>{"CVE-2010-2212"});
}

TEST_CASE("token spans index the source text") {
  Rng rng(5);
  const std::string alphabet = "aB9 .,-/x()'\"Z";
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    std::size_t n = rng.below(40);
    for (std::size_t i = 0; i < n; ++i) text += alphabet[rng.below(alphabet.size())];
    std::size_t last = 0;
    for (const auto& t : tokenize(text)) {
      REQUIRE(t.start < t.end);
      REQUIRE(t.end <= text.size());
      CHECK(t.start >= last);
      CHECK(text.substr(t.start, t.end - t.start) == t.surface);
      last = t.end;
    }
  }
}

TEST_CASE("tokenization is idempotent on the norm stream") {
  for (const char* text : {"Multiple buffer overflows in Adobe Reader 9.x before 9.3.3 allow remote attackers.",
                           "SQL injection in login.php via the id parameter, port 443/tcp",
                           "use-after-free in Mac OS X 10.6"}) {
    auto first = norms(tokenize(text));
    std::string joined;
    for (const auto& w : first) joined += w + " ";
    CHECK(norms(tokenize(joined)) == first);
  }
}

TEST_CASE("vocabulary ranking and coverage") {
  auto v = build_vocabulary(docs({"a b a", "b c"}), 2);
  CHECK(v.words() == std::vector<std::string>{"<unk>", "a", "b"});
  CHECK(v.coverage() == doctest::Approx(4.0 / 5.0).epsilon(1e-15));
  auto single = build_vocabulary(docs({"a"}), 10);
  CHECK(single.words() == std::vector<std::string>{"<unk>", "a"});
  CHECK(single.coverage() == 1.0);
  CHECK(v.id("zzz") == Vocabulary::kOovId);
  CHECK_THROWS_AS(build_vocabulary(std::vector<RawVulnerability>{}, 3), Error);
}

TEST_CASE("vocabulary ids are dense and coverage matches a recount") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawVulnerability> corpus;
    for (int d = 0; d < 6; ++d) {
      std::string text;
      for (std::size_t i = 0, n = 1 + rng.below(12); i < n; ++i) text += std::string(1, char('a' + rng.below(9))) + " ";
      corpus.push_back({"CVE-2020-1000" + std::to_string(d), text, std::nullopt});
    }
    std::size_t max = 1 + rng.below(6);
    auto v = build_vocabulary(corpus, max);
    CHECK(v.size() <= max + 1);
    for (std::size_t id = 0; id < v.size(); ++id) CHECK(v.id(v.word(id)) == id);
    std::size_t covered = 0, total = 0;
    std::map<std::string, std::size_t> counts;
    for (const auto& r : corpus)
      for (const auto& w : norms(tokenize(r.description))) {
        ++total;
        ++counts[w];
        if (v.contains(w) && w != "<unk>") ++covered;
      }
    CHECK(v.coverage() == static_cast<double>(covered) / static_cast<double>(total));
    for (std::size_t id = 2; id < v.size(); ++id) {
      auto a = counts[v.word(id - 1)], b = counts[v.word(id)];
      CHECK((a > b || (a == b && v.word(id - 1) < v.word(id))));
    }
  }
}

TEST_CASE("frequency report") {
  auto r = word_frequency_report(docs({"x x y"}), 10, false);
  CHECK(r == std::vector<WordCount>{{"x", 2}, {"y", 1}});
  CHECK(word_frequency_report(docs({"the the a"}), 10, true).empty());
  auto c = docs({"p q q r", "r r s", "q p"});
  auto forward = word_frequency_report(c, 3, true);
  std::reverse(c.begin(), c.end());
  CHECK(word_frequency_report(c, 3, true) == forward);
  CHECK(is_stopword("the"));
  CHECK_FALSE(is_stopword("overflow"));
}

TEST_CASE("nvd feed: tsv") {
  CHECK(parse_nvd_feed("").records.empty());
  auto r = parse_nvd_feed("CVE-2010-2212\tMultiple buffer overflows in Adobe Reader...\n");
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].id == "CVE-2010-2212");
  auto blank = parse_nvd_feed("CVE-2010-2212\t   \nCVE-2010-2213\tok\n");
  CHECK(blank.records.size() == 1);
  CHECK(blank.skipped_blank == 1);
  auto bad = parse_nvd_feed("garbage line\nCVE-2010-2213\tok\n");
  CHECK(bad.records.size() == 1);
  REQUIRE(bad.malformed.size() == 1);
  CHECK(bad.malformed[0].location == 1);
  CHECK_THROWS_AS(parse_nvd_feed("garbage\nmore garbage\n"), Error);
}

TEST_CASE("nvd feed: json") {
  const char* feed = R"({"CVE_Items": [
    {"cve": {"CVE_data_meta": {"ID": "CVE-2010-2212"},
             "description": {"description_data": [{"lang": "fr", "value": "non"}, {"lang": "en", "value": "Buffer overflow."}]}},
     "publishedDate": "2010-06-30T18:30Z"},
    {"cve": {"CVE_data_meta": {"ID": "CVE-2010-0001"}, "description": {"description_data": []}}}
  ]})";
  auto r = parse_nvd_feed(feed);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].description == "Buffer overflow.");
  CHECK(r.records[0].published_year == 2010);
  CHECK(r.skipped_blank == 1);
}

TEST_CASE("labeled dataset") {
  auto s = parse_labeled_dataset("buffer\tMEANS\noverflow\tMEANS\n\n");
  REQUIRE(s.size() == 1);
  CHECK(s[0].tags == std::vector<EntityTag>{EntityTag::Means, EntityTag::Means});
  CHECK(parse_labeled_dataset("").empty());
  try {
    parse_labeled_dataset("x\tFOO\n");
    FAIL("expected UnknownTag");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownTag);
  }
  try {
    parse_labeled_dataset("a\tO\nno-tab-here\n");
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedLine);
  }
  auto two = parse_labeled_dataset("a\tO\nb\tPORT\n\nc\tVECTOR\n");
  CHECK(parse_labeled_dataset(format_labeled_dataset(two)).size() == 2);
  CHECK(format_labeled_dataset(parse_labeled_dataset(format_labeled_dataset(two))) == format_labeled_dataset(two));
}

TEST_CASE("tags") {
  CHECK(kAllTags.back() == EntityTag::O);
  CHECK(loss_weight(EntityTag::O) == 1.0);
  CHECK(loss_weight(EntityTag::Means) == 10.0);
  for (EntityTag t : kAllTags) CHECK(parse_tag(tag_name(t)) == t);
  CHECK_FALSE(parse_tag("FOO").has_value());
  CHECK_FALSE(feature_block(EntityTag::Privilege).has_value());
  CHECK(feature_block(EntityTag::Port) == 8u);
}

TEST_CASE("entity set json round-trip") {
  EntitySet s;
  s.cve_id = "CVE-2010-2212";
  s[EntityTag::Os] = {"Windows", "Mac OS X"};
  s[EntityTag::Means] = {"buffer \"overflow\""};
  auto back = entity_set_from_json(entity_set_to_json(s));
  CHECK(back == s);
  CHECK(s.entity_type_count() == 2);
  CHECK(entity_words(s, EntityTag::Os) == std::vector<std::string>{"Windows", "Mac", "OS", "X"});
}
