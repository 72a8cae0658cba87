#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "gradcheck.hpp"
#include "vrgen/embedding.hpp"
#include "vrgen/error.hpp"
#include "vrgen/textio.hpp"

using namespace vrgen;

namespace {

EmbeddingModel toy_model(std::size_t vsize, std::size_t dim, std::uint64_t seed) {
  std::vector<std::string> words = {"<unk>"};
  for (std::size_t i = 1; i < vsize; ++i) words.push_back(std::string("w") + char('a' + i));
  EmbeddingModel m;
  m.vocab = Vocabulary(words, 1.0);
  m.input = Matrix(vsize, dim);
  m.output = Matrix(vsize, dim);
  Rng rng(seed);
  for (double& v : m.input.data) v = rng.uniform(-1, 1);
  for (double& v : m.output.data) v = rng.uniform(-1, 1);
  m.config.dim = dim;
  return m;
}

double max_gradient_error(EmbeddingModel& m, const TrainingPair& pair) {
  EmbeddingGradient g{Matrix(m.input.rows, m.input.cols), Matrix(m.output.rows, m.output.cols)};
  pair_loss(m, pair, &g);
  auto f = [&] { return pair_loss(m, pair); };
  double worst = 0.0;
  for (std::size_t i = 0; i < m.input.data.size(); ++i)
    worst = std::max(worst, central_difference_error(&m.input.data[i], g.input.data[i], f));
  for (std::size_t i = 0; i < m.output.data.size(); ++i)
    worst = std::max(worst, central_difference_error(&m.output.data[i], g.output.data[i], f));
  return worst;
}

std::vector<std::vector<std::string>> repeated(std::vector<std::string> unit, std::size_t times) {
  std::vector<std::string> s;
  for (std::size_t i = 0; i < times; ++i) s.insert(s.end(), unit.begin(), unit.end());
  return {s};
}

}  // namespace

TEST_CASE("default configuration") {
  EmbeddingConfig c;
  CHECK(c.dim == 100);
  CHECK(c.window == 5);
  CHECK(c.epochs == 300);
  CHECK(c.learning_rate == 0.0001);
  CHECK(c.variant == EmbeddingVariant::Cbow);
  c.window = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("cbow gradient matches central differences") {
  auto m = toy_model(5, 4, 1);
  CHECK(max_gradient_error(m, {{1, 2, 4, 2}, 3}) < 1e-4);
  CHECK(max_gradient_error(m, {{0}, 1}) < 1e-4);
}

TEST_CASE("skip-gram gradient matches central differences") {
  auto m = toy_model(5, 4, 2);
  CHECK(max_gradient_error(m, {{2}, 4}) < 1e-4);
  CHECK(max_gradient_error(m, {{4}, 4}) < 1e-4);
}

TEST_CASE("training pairs") {
  std::vector<std::vector<std::size_t>> s = {{1, 2, 3}};
  auto cbow = make_training_pairs(s, EmbeddingVariant::Cbow, 1);
  REQUIRE(cbow.size() == 3);
  CHECK(cbow[0].context == std::vector<std::size_t>{2});
  CHECK(cbow[1].context == std::vector<std::size_t>{1, 3});
  CHECK(cbow[1].target == 2);
  auto sg = make_training_pairs(s, EmbeddingVariant::SkipGram, 1);
  CHECK(sg.size() == 4);
  for (const auto& p : sg) CHECK(p.context.size() == 1);
  CHECK(make_training_pairs({{7}}, EmbeddingVariant::Cbow, 5).empty());
}

TEST_CASE("softmax distribution sums to one") {
  auto m = toy_model(6, 3, 4);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    std::vector<std::size_t> ctx = {rng.below(6), rng.below(6)};
    auto p = predict_distribution(m, ctx);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("repeated context averages to the word embedding") {
  auto m = toy_model(5, 4, 6);
  std::vector<std::size_t> ctx = {3, 3, 3};
  auto h = context_vector(m, ctx);
  auto row = m.input.row(3);
  for (std::size_t i = 0; i < 4; ++i) CHECK(h[i] == doctest::Approx(row[i]).epsilon(1e-15));
}

TEST_CASE("two-word corpus puts the partner first") {
  EmbeddingConfig c;
  c.dim = 8;
  c.window = 1;
  c.epochs = 20;
  c.learning_rate = 0.05;
  auto corpus = repeated({"a", "b"}, 200);
  auto m = train_embedding(corpus, c);
  auto nn = nearest_neighbors(m, "a", 1);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].first == "b");
}

TEST_CASE("training is deterministic and lowers the loss") {
  EmbeddingConfig c;
  c.dim = 6;
  c.window = 2;
  c.epochs = 5;
  c.learning_rate = 0.05;
  std::vector<std::vector<std::string>> corpus = {{"remote", "attackers", "execute", "arbitrary", "code"},
                                                  {"local", "users", "gain", "privileges", "via", "code"}};
  EmbeddingTrainingLog log;
  auto a = train_embedding(corpus, c, &log);
  auto b = train_embedding(corpus, c);
  CHECK(a.input == b.input);
  CHECK(a.output == b.output);
  CHECK(log.epoch_loss.back() < log.initial_loss);
  CHECK(all_finite(a.input.data));
}

TEST_CASE("loss is non-increasing with a small learning rate") {
  EmbeddingConfig c;
  c.dim = 4;
  c.window = 2;
  c.epochs = 30;
  c.learning_rate = 0.005;
  c.variant = EmbeddingVariant::SkipGram;
  std::vector<std::vector<std::string>> corpus = {{"a", "b", "c", "d"}, {"d", "c", "b", "a", "e"}};
  EmbeddingTrainingLog log;
  train_embedding(corpus, c, &log);
  double prev = log.initial_loss;
  for (double l : log.epoch_loss) {
    CHECK(l <= prev + 1e-12);
    prev = l;
  }
}

TEST_CASE("degenerate corpus") {
  EmbeddingConfig c;
  c.dim = 2;
  c.epochs = 1;
  CHECK_THROWS_AS(train_embedding({{"lonely"}}, c), Error);
  CHECK_THROWS_AS(train_embedding({}, c), Error);
}

TEST_CASE("embed_word and lookup") {
  auto m = toy_model(4, 3, 9);
  auto row = embed_word(m, "wc");
  CHECK(std::vector<double>(row.begin(), row.end()) ==
        std::vector<double>(m.input.row(2).begin(), m.input.row(2).end()));
  auto oov = embed_word(m, "zzzz");
  CHECK(oov.data() == m.input.row(Vocabulary::kOovId).data());
  CHECK(lookup_word(m, "WC") == 2u);
  CHECK_FALSE(lookup_word(m, "zzzz").has_value());
}

TEST_CASE("nearest neighbours match a brute-force scan") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = toy_model(12, 3, 100 + trial);
    std::string q = std::string("w") + char('a' + 1 + rng.below(11));
    std::size_t k = 1 + rng.below(12);
    auto got = nearest_neighbors(m, q, k);
    std::vector<Neighbor> all;
    const std::size_t qid = m.vocab.id(q);
    for (std::size_t id = 1; id < 12; ++id) {
      if (id == qid) continue;
      auto a = m.input.row(qid), b = m.input.row(id);
      double d = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < 3; ++i) d += a[i] * b[i], na += a[i] * a[i], nb += b[i] * b[i];
      all.emplace_back(m.vocab.word(id), d / std::sqrt(na * nb));
    }
    std::stable_sort(all.begin(), all.end(), [](auto& x, auto& y) { return x.second > y.second; });
    all.resize(std::min(k, all.size()));
    REQUIRE(got.size() == all.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].first == all[i].first);
      CHECK(got[i].second == doctest::Approx(all[i].second).epsilon(1e-12));
      CHECK(got[i].first != q);
    }
  }
}

TEST_CASE("save and load round-trip") {
  EmbeddingConfig c;
  c.dim = 5;
  c.window = 2;
  c.epochs = 2;
  c.learning_rate = 0.1;
  auto m = train_embedding({{"x", "y", "z", "x", "y"}}, c);
  auto path = std::filesystem::temp_directory_path() / "vrgen_emb_test.txt";
  save_embedding(m, path);
  auto back = load_embedding(path);
  CHECK(back.vocab.words() == m.vocab.words());
  CHECK(back.input == m.input);
  CHECK(back.output == m.output);
  CHECK(back.config.dim == 5);
  CHECK(nearest_neighbors(back, "x", 3) == nearest_neighbors(m, "x", 3));

  auto text = read_file(path);
  auto size_line = std::to_string(m.vocab.size()) + " 5\n";
  CHECK(text.find(size_line) != std::string::npos);
  write_file(path, text.substr(0, text.size() - 20));
  try {
    load_embedding(path);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::MalformedRecord || e.code() == ErrorCode::FormatVersionMismatch));
  }
  std::filesystem::remove(path);
  std::filesystem::remove(output_weights_path(path));
  CHECK_THROWS_AS(load_embedding(path), Error);
}
