#include <gtest/gtest.h>

#include <random>

#include "fullbrain/bench.hpp"
#include "fullbrain/text_index.hpp"
#include "oracle.hpp"

using namespace fullbrain;

namespace {

Entity make(std::string id, EntityKind kind, std::string name, std::string description = "",
            std::map<std::string, std::string> fields = {}) {
  Entity e;
  e.id = std::move(id);
  e.kind = kind;
  e.name = std::move(name);
  e.description = std::move(description);
  e.fields = std::move(fields);
  return e;
}

std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "aB3 ,.!-_\t\xc3\xa9Zq";
  std::string s;
  const auto len = rng() % 20;
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
  return s;
}

}  // namespace

TEST(Normalize, Rules) {
  EXPECT_EQ(normalize("Vittoria  Castellani!"), "vittoria castellani");
  EXPECT_EQ(normalize(""), "");
  EXPECT_EQ(normalize("  --PCA--  "), "pca");
  EXPECT_EQ(normalize("caf\xc3\xa9"), "caf\xc3\xa9");
}

TEST(Normalize, IdempotentAndMatchesOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto x = random_text(rng);
    EXPECT_EQ(normalize(normalize(x)), normalize(x));
    EXPECT_EQ(normalize(x), oracle::norm(x));
  }
}

TEST(QGrams, HandEnumerated) {
  EXPECT_EQ(qgrams("ab"), (QGramSet{"^^a", "^ab", "ab$", "b$$"}));
  EXPECT_TRUE(qgrams("").empty());
  const auto pca = qgrams("pca");
  EXPECT_EQ(pca.size(), 5u);
  EXPECT_EQ(pca, (QGramSet{"^^p", "^pc", "a$$", "ca$", "pca"}));
}

TEST(PartialSimilarity, Examples) {
  EXPECT_EQ(partial_similarity("pca", "pca"), 1.0);
  EXPECT_EQ(partial_similarity("ab", "cd"), 0.0);
  const double typo = partial_similarity("vittoria kastellani", "vittoria castellani");
  const auto a = oracle::grams("vittoria kastellani");
  const auto b = oracle::grams("vittoria castellani");
  EXPECT_EQ(typo, oracle::jaccard(a, b));
  EXPECT_GT(typo, 0.6);
  EXPECT_EQ(partial_similarity("", ""), 0.0);
}

TEST(PartialSimilarity, PropertiesOnRandomText) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 2000; ++i) {
    const auto x = oracle::phrase(rng, 0, 3);
    const auto y = oracle::phrase(rng, 0, 3);
    const double s = partial_similarity(x, y);
    EXPECT_EQ(s, partial_similarity(y, x));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(s == 1.0, !qgrams(x).empty() && qgrams(x) == qgrams(y));
    EXPECT_EQ(s, oracle::jaccard(oracle::grams(x), oracle::grams(y)));
  }
}

TEST(TextIndex, SingleEntityZeroIdf) {
  Graph g;
  g.add_entity(make("a", EntityKind::Concept, "PCA"));
  const auto idx = TextIndex::build(g.snapshot());
  EXPECT_EQ(idx.idf("pca"), std::optional<double>(0.0));
  EXPECT_TRUE(idx.vector(0).empty());
  EXPECT_EQ(idx.exact_similarity("pca", "a"), 0.0);
}

TEST(TextIndex, UniqueTermWeight) {
  Graph g;
  g.add_entity(make("a", EntityKind::Concept, "PCA"));
  g.add_entity(make("b", EntityKind::Concept, "Regression"));
  const auto idx = TextIndex::build(g.snapshot());
  EXPECT_GT(idx.weight(0, "pca"), 0.0);
  EXPECT_EQ(idx.weight(1, "pca"), 0.0);
  EXPECT_EQ(*idx.idf("pca"), std::log(2.0));
}

TEST(TextIndex, ExactMatchOfFullFieldUnion) {
  Graph g;
  g.add_entity(make("a", EntityKind::Concept, "principal component", "analysis"));
  g.add_entity(make("b", EntityKind::Concept, "linear regression", "statistics"));
  g.add_entity(make("c", EntityKind::Post, "deep learning"));
  const auto idx = TextIndex::build(g.snapshot());
  // Name weight 3 vs description weight 1: repeat name terms to match tf.
  EXPECT_NEAR(idx.exact_similarity("principal principal principal component component component analysis", "a"),
              1.0, 1e-12);
  EXPECT_EQ(idx.exact_similarity("zebra unicorn", "a"), 0.0);
}

TEST(TextIndex, MatchesNonNameField) {
  Graph g;
  g.add_entity(make("u1", EntityKind::User, "Vittoria Castellani", "", {{"affiliation", "DTU Compute"}}));
  g.add_entity(make("u2", EntityKind::User, "Someone Else", "", {{"affiliation", "KU"}}));
  g.add_entity(make("c1", EntityKind::Concept, "PCA"));
  const auto idx = TextIndex::build(g.snapshot());
  EXPECT_EQ(partial_similarity("dtu", "Vittoria Castellani"), 0.0);
  EXPECT_GT(idx.exact_similarity("dtu", "u1"), 0.0);
  EXPECT_EQ(idx.exact_similarity("dtu", "u2"), 0.0);
}

TEST(TextIndex, TagsWeighTwiceOtherFields) {
  Graph g;
  g.add_entity(make("a", EntityKind::Source, "alpha", "", {{"tags", "x"}, {"note", "y"}}));
  g.add_entity(make("b", EntityKind::Source, "beta"));
  const auto idx = TextIndex::build(g.snapshot());
  EXPECT_NEAR(idx.weight(0, "x"), 2.0 * idx.weight(0, "y"), 1e-15);
  EXPECT_NEAR(idx.weight(0, "alpha"), 3.0 * idx.weight(0, "y"), 1e-15);
}

TEST(TextIndex, FullScaleBuild) {
  std::stringstream buf;
  bench::generate_dataset(1, 5724, 21512, buf);
  Graph g;
  g.ingest(buf);
  EXPECT_NO_THROW(TextIndex::build(g.snapshot()));
}

TEST(TextIndexProperty, ScoresMatchOracleAndCandidatesComplete) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 12; ++round) {
    auto g = oracle::random_corpus(rng, 50 + rng() % 400);
    const auto snap = g.snapshot();
    const auto idx = TextIndex::build(snap);
    const auto ref = oracle::corpus(*snap);
    for (int qi = 0; qi < 10; ++qi) {
      std::string q = oracle::phrase(rng, 1, 3);
      if (qi % 3 == 0) q = q.substr(0, 1 + rng() % q.size());
      const auto grams = idx.resolve_grams(q);
      const auto vec = idx.vectorize(q);
      const auto qv = oracle::query_vector(ref, q);
      const auto qg = oracle::grams(q);
      const auto cand = idx.candidates(q);
      const auto gram_cand = idx.gram_candidates(grams);
      for (NodeIndex n = 0; n < snap->entity_count(); ++n) {
        const double partial = idx.partial_similarity(grams, n);
        const double exact = idx.exact_similarity(vec, n);
        ASSERT_EQ(partial, oracle::jaccard(qg, ref.name_grams[n]));
        ASSERT_EQ(exact, oracle::cosine(qv, ref.vectors[n]));
        ASSERT_GE(exact, 0.0);
        ASSERT_LE(exact, 1.0);
        bool shares_gram = false;
        for (const auto& x : qg) shares_gram = shares_gram || ref.name_grams[n].count(x) > 0;
        bool shares_term = false;
        for (const auto& w : oracle::words(q)) {
          for (const auto& f : {snap->entity(n).name, snap->entity(n).description}) {
            for (const auto& t : oracle::words(f)) shares_term = shares_term || t == w;
          }
          for (const auto& [label, f] : snap->entity(n).fields) {
            for (const auto& t : oracle::words(f)) shares_term = shares_term || t == w;
          }
        }
        const bool in_cand = std::binary_search(cand.begin(), cand.end(), n);
        ASSERT_EQ(in_cand, shares_gram || shares_term) << q << " / " << snap->entity(n).id;
        ASSERT_EQ(std::binary_search(gram_cand.begin(), gram_cand.end(), n), shares_gram);
      }
    }
  }
}

TEST(TextIndexProperty, CosineScaleInvariant) {
  Graph g;
  g.add_entity(make("a", EntityKind::Concept, "graph search", "social network ranking"));
  g.add_entity(make("b", EntityKind::Concept, "deep learning"));
  g.add_entity(make("c", EntityKind::Concept, "graph neural network"));
  const auto idx = TextIndex::build(g.snapshot());
  // Repeating every query word scales the query vector before normalization.
  const double once = idx.exact_similarity("graph network", "a");
  const double thrice = idx.exact_similarity("graph graph graph network network network", "a");
  EXPECT_NEAR(once, thrice, 1e-12);
  EXPECT_GT(once, 0.0);
}
