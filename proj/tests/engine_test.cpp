#include <gtest/gtest.h>

#include <random>

#include "fullbrain/engine.hpp"
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

// Small FullBrain-like fixture: two users, the PCA concept, posts and sources.
Graph fixture() {
  Graph g;
  g.add_entity(make("u1", EntityKind::User, "Vittoria Castellani", "", {{"affiliation", "DTU Compute"}}));
  g.add_entity(make("u2", EntityKind::User, "Anna Jensen", "", {{"affiliation", "KU"}}));
  g.add_entity(make("c1", EntityKind::Concept, "PCA", "principal component analysis"));
  g.add_entity(make("c2", EntityKind::Concept, "Linear Regression", "statistics"));
  g.add_entity(make("k1", EntityKind::Course, "Machine Learning", "introductory course"));
  g.add_entity(make("s1", EntityKind::Source, "PCA tutorial video", "", {{"tags", "pca"}}));
  g.add_entity(make("s2", EntityKind::Source, "Vittoria lecture notes"));
  g.add_entity(make("p1", EntityKind::Post, "Question about PCA", "how many components"));
  g.add_entity(make("p2", EntityKind::Post, "Regression homework"));
  g.add_entity(make("o1", EntityKind::Origin, "PCA origin"));
  g.add_edge({"u1", "k1", "includes", 0});
  g.add_edge({"k1", "c1", "includes", 0});
  g.add_edge({"c1", "s1", "includes", 0});
  g.add_edge({"c1", "p1", "includes", 0});
  g.add_edge({"u2", "c2", "includes", 0});
  g.add_edge({"c2", "p2", "includes", 0});
  return g;
}

bool contains(const std::vector<ScoredResult>& rs, const std::string& id) {
  return std::any_of(rs.begin(), rs.end(), [&](const ScoredResult& r) { return r.id == id; });
}

void expect_matches_oracle(const std::vector<ScoredResult>& got, const std::vector<oracle::Scored>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].id, want[i].id) << "position " << i;
    EXPECT_EQ(got[i].overall, want[i].overall);
    EXPECT_EQ(got[i].topical, want[i].topical);
    EXPECT_EQ(got[i].social, want[i].social);
  }
}

}  // namespace

TEST(OverallSimilarity, Examples) {
  EXPECT_EQ(overall_similarity({1, 1}, 1.0, 1.0), 1.0);
  EXPECT_NEAR(overall_similarity({1, 1}, 0.6, 0.2), 0.4, 1e-15);
  EXPECT_NEAR(overall_similarity({2, 1}, 0.9, 0.0), 0.6, 1e-15);
  EXPECT_THROW(overall_similarity({0, 1}, 0.5, 0.5), Error);
  EXPECT_THROW(overall_similarity({1, 1}, 1.5, 0.5), Error);
  EXPECT_THROW(overall_similarity({1, 1}, 0.5, -0.1), Error);
}

TEST(Search, PcaFindsConceptPostsAndSources) {
  auto g = fixture();
  const auto engine = SearchEngine::build(g.snapshot());
  const auto rs = engine.search("u1", "pca");
  ASSERT_FALSE(rs.empty());
  EXPECT_EQ(rs.front().id, "c1");
  EXPECT_TRUE(contains(rs, "s1"));
  EXPECT_TRUE(contains(rs, "p1"));
  EXPECT_FALSE(contains(rs, "o1"));  // origins are not searchable
}

TEST(Search, TypoStillRetrievesUser) {
  auto g = fixture();
  const auto engine = SearchEngine::build(g.snapshot());
  const auto rs = engine.search("u2", "Vittoria Kastellani");
  ASSERT_FALSE(rs.empty());
  EXPECT_EQ(rs.front().id, "u1");
}

TEST(Search, CloserEntityRanksFirst) {
  Graph g;
  g.add_entity(make("me", EntityKind::User, "Searcher"));
  g.add_entity(make("near", EntityKind::Concept, "Graph Theory"));
  g.add_entity(make("far", EntityKind::Concept, "Graph Theory"));
  g.add_entity(make("x", EntityKind::Concept, "Unrelated"));
  g.add_entity(make("y", EntityKind::Concept, "Misc"));
  g.add_edge({"me", "near", "includes", 0});
  g.add_edge({"x", "y", "includes", 0});
  const auto snap = g.snapshot();
  const auto engine = SearchEngine::build(snap);
  const auto rs = engine.search("me", "graph theory");
  const auto want = oracle::rank(*snap, oracle::corpus(*snap), oracle::landmarks(*snap, oracle::default_k(5)), "me",
                                 "graph theory", oracle::Mode::Search, 25);
  expect_matches_oracle(rs, want);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0].id, "near");
  EXPECT_EQ(rs[1].id, "far");
  EXPECT_EQ(rs[0].social, 0.75);
  EXPECT_EQ(rs[1].social, 0.0);
}

TEST(Autocomplete, PrefixFindsUser) {
  auto g = fixture();
  const auto engine = SearchEngine::build(g.snapshot());
  const auto rs = engine.autocomplete("u2", "vitto");
  EXPECT_TRUE(contains(rs, "u1"));
  EXPECT_FALSE(contains(rs, "s2"));  // the source shares the prefix but is not a QAC kind
  for (const auto& r : rs) {
    EXPECT_TRUE(r.kind == EntityKind::User || r.kind == EntityKind::Concept || r.kind == EntityKind::Course);
  }
}

TEST(Autocomplete, SourceOnlyMatchExcluded) {
  Graph g;
  g.add_entity(make("u", EntityKind::User, "Reader"));
  g.add_entity(make("s", EntityKind::Source, "Zyxwv handbook"));
  const auto engine = SearchEngine::build(g.snapshot());
  EXPECT_TRUE(engine.autocomplete("u", "zyxw").empty());
  EXPECT_FALSE(engine.search("u", "zyxw").empty());
}

TEST(Autocomplete, TenEntityOracle) {
  Graph g;
  const std::vector<std::pair<std::string, std::string>> users = {
      {"u0", "Vittoria Castellani"}, {"u1", "Victor Hugo"}, {"u2", "Vita Nova"}, {"u3", "Anna Vitt"}};
  for (const auto& [id, name] : users) g.add_entity(make(id, EntityKind::User, name));
  g.add_entity(make("c0", EntityKind::Concept, "Vitamins"));
  g.add_entity(make("c1", EntityKind::Concept, "Victory conditions"));
  g.add_entity(make("k0", EntityKind::Course, "Vital statistics"));
  g.add_entity(make("k1", EntityKind::Course, "Visual analytics"));
  g.add_entity(make("s0", EntityKind::Source, "Vitto source"));
  g.add_entity(make("p0", EntityKind::Post, "Vittoria post"));
  g.add_edge({"u0", "c0", "includes", 0});
  g.add_edge({"c0", "k0", "includes", 0});
  g.add_edge({"u0", "u3", "follows", 0});
  g.add_edge({"u3", "k1", "includes", 0});
  g.add_edge({"k1", "c1", "includes", 0});
  const auto snap = g.snapshot();
  const auto engine = SearchEngine::build(snap);
  const auto ref = oracle::corpus(*snap);
  const auto lm = oracle::landmarks(*snap, oracle::default_k(10));
  for (const std::string prefix : {"vit", "vitto", "vi", "v", "visual", "an"}) {
    for (const std::string user : {"u0", "u1", "u3"}) {
      expect_matches_oracle(engine.autocomplete(user, prefix),
                            oracle::rank(*snap, ref, lm, user, prefix, oracle::Mode::Autocomplete, 10));
    }
  }
}

TEST(Engine, ErrorsAndLimits) {
  auto g = fixture();
  const auto engine = SearchEngine::build(g.snapshot());
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code([&] { engine.search("nobody", "pca"); }), ErrorCode::UnknownUser);
  EXPECT_EQ(code([&] { engine.search("c1", "pca"); }), ErrorCode::UnknownUser);
  EXPECT_EQ(code([&] { engine.search("u1", " !! "); }), ErrorCode::EmptyQuery);
  EXPECT_EQ(code([&] { engine.autocomplete("u1", ""); }), ErrorCode::EmptyQuery);
  EXPECT_EQ(code([&] { engine.search("u1", "pca", 0); }), ErrorCode::OutOfRangeInput);
  const std::array<EntityKind, 1> tags = {EntityKind::Tag};
  EXPECT_EQ(code([&] { engine.search("u1", "pca", 5, tags); }), ErrorCode::OutOfRangeInput);
  EXPECT_EQ(engine.search("u1", "pca", 1).size(), 1u);
  const std::array<EntityKind, 1> posts = {EntityKind::Post};
  for (const auto& r : engine.search("u1", "pca", 25, posts)) EXPECT_EQ(r.kind, EntityKind::Post);
}

TEST(Engine, ExplainAgreesWithSearch) {
  auto g = fixture();
  const auto engine = SearchEngine::build(g.snapshot());
  for (const auto& r : engine.search("u1", "pca component")) {
    const auto b = engine.explain("u1", "pca component", r.id);
    EXPECT_EQ(b.topical, r.topical);
    EXPECT_EQ(b.social, r.social);
    EXPECT_EQ(b.overall, r.overall);
    EXPECT_EQ(b.topical, (b.partial + b.exact) / 2.0);
  }
}

TEST(EngineProperty, OracleEquivalenceOnRandomCorpora) {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 8; ++round) {
    auto g = oracle::random_corpus(rng, 40 + rng() % 300);
    const auto snap = g.snapshot();
    const auto engine = SearchEngine::build(snap);
    const auto ref = oracle::corpus(*snap);
    const auto lm = oracle::landmarks(*snap, oracle::default_k(snap->entity_count()));
    for (int qi = 0; qi < 8; ++qi) {
      const std::string user = "e" + std::to_string(rng() % 4);
      std::string q = oracle::phrase(rng, 1, 2);
      expect_matches_oracle(engine.search(user, q), oracle::rank(*snap, ref, lm, user, q, oracle::Mode::Search, 25));
      q = q.substr(0, 1 + rng() % q.size());
      if (normalize(q).empty()) continue;
      expect_matches_oracle(engine.autocomplete(user, q),
                            oracle::rank(*snap, ref, lm, user, q, oracle::Mode::Autocomplete, 10));
    }
  }
}

TEST(EngineProperty, BoundsKindsAndReconstruction) {
  std::mt19937_64 rng(5);
  auto g = oracle::random_corpus(rng, 400);
  const auto engine = SearchEngine::build(g.snapshot());
  for (int qi = 0; qi < 30; ++qi) {
    const auto q = oracle::phrase(rng, 1, 3);
    for (const auto& r : engine.search("e0", q, 100)) {
      EXPECT_GE(r.overall, 0.0);
      EXPECT_LE(r.overall, 1.0);
      EXPECT_GT(r.topical, 0.0);
      EXPECT_LE(r.topical, 1.0);
      EXPECT_TRUE(r.social == 0.0 || r.social == 0.25 || r.social == 0.5 || r.social == 0.75 || r.social == 1.0);
      EXPECT_LE(std::abs(r.overall - (r.topical + r.social) / 2.0), 1e-12);
      EXPECT_LT(kind_order(r.kind), 5);
    }
    for (const auto& r : engine.autocomplete("e1", q.substr(0, 3))) EXPECT_LT(kind_order(r.kind), 3);
  }
}

TEST(EngineProperty, WeightScalingKeepsOrderAndScores) {
  std::mt19937_64 rng(17);
  auto g = oracle::random_corpus(rng, 300);
  const auto snap = g.snapshot();
  const auto a = SearchEngine::build(snap, 0, {2.0, 1.0});
  const auto b = SearchEngine::build(snap, 0, {8.0, 4.0});
  for (int qi = 0; qi < 20; ++qi) {
    const auto q = oracle::phrase(rng, 1, 2);
    const auto ra = a.search("e2", q);
    const auto rb = b.search("e2", q);
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
      EXPECT_EQ(ra[i].id, rb[i].id);
      EXPECT_NEAR(ra[i].overall, rb[i].overall, 1e-15);
    }
  }
}

TEST(EngineProperty, SearcherOnlyChangesSocial) {
  std::mt19937_64 rng(23);
  auto g = oracle::random_corpus(rng, 300);
  const auto engine = SearchEngine::build(g.snapshot());
  for (int qi = 0; qi < 20; ++qi) {
    const auto q = oracle::phrase(rng, 1, 2);
    for (const auto& r : engine.search("e0", q, 50)) {
      const auto other = engine.explain("e3", q, r.id);
      EXPECT_EQ(other.topical, r.topical);
    }
  }
}
