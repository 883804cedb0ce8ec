#include <gtest/gtest.h>

#include <sstream>

#include "fullbrain/bench.hpp"
#include "fullbrain/service.hpp"
#include "oracle.hpp"

using namespace fullbrain;

TEST(DatasetGen, DeterministicBytes) {
  std::stringstream a, b, c;
  bench::generate_dataset(1, 600, 2000, a);
  bench::generate_dataset(1, 600, 2000, b);
  bench::generate_dataset(2, 600, 2000, c);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(DatasetGen, InfeasibleCounts) {
  std::stringstream out;
  EXPECT_EQ(bench::max_simple_edges(10), 45u);
  try {
    bench::generate_dataset(1, 10, 100, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleCounts);
  }
  EXPECT_TRUE(out.str().empty());
}

TEST(DatasetGen, SimpleGraphWithExactCounts) {
  for (auto [n, m] : std::vector<std::pair<std::size_t, std::size_t>>{{10, 45}, {50, 300}, {1000, 3000}, {7, 0}}) {
    std::stringstream out;
    bench::generate_dataset(3, n, m, out);
    Graph g;
    EXPECT_EQ(g.ingest(out), (IngestCounts{n, m}));
    const auto snap = g.snapshot();
    EXPECT_TRUE(snap->audit());
    // Simple: no two edges share an unordered pair.
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& e : snap->edges()) {
      EXPECT_TRUE(pairs.insert(std::minmax(e.src, e.dst)).second);
    }
  }
}

TEST(DatasetGen, KindMixAndHubs) {
  const auto mix = bench::kind_mix(5724);
  EXPECT_EQ(mix.total(), 5724u);
  EXPECT_NEAR(static_cast<double>(mix.users) / 5724.0, 0.40, 0.01);
  EXPECT_NEAR(static_cast<double>(mix.posts) / 5724.0, 0.20, 0.01);
  EXPECT_NEAR(static_cast<double>(mix.sources) / 5724.0, 0.15, 0.01);
  EXPECT_NEAR(static_cast<double>(mix.concepts) / 5724.0, 0.15, 0.01);
  EXPECT_NEAR(static_cast<double>(mix.courses) / 5724.0, 0.08, 0.01);
  std::stringstream out;
  bench::generate_dataset(1, 5724, 21512, out);
  Graph g;
  g.ingest(out);
  const auto snap = g.snapshot();
  std::size_t max_degree = 0;
  for (NodeIndex n = 0; n < snap->entity_count(); ++n) max_degree = std::max(max_degree, snap->degree(n));
  const double mean = 2.0 * 21512.0 / 5724.0;
  EXPECT_GT(static_cast<double>(max_degree), 10.0 * mean);  // preferential attachment leaves hubs
}

TEST(QueryCorpus, PrefixesAndTypos) {
  std::stringstream out;
  bench::generate_dataset(1, 300, 900, out);
  Graph g;
  g.ingest(out);
  const auto snap = g.snapshot();
  const auto qac = bench::make_query_corpus(*snap, Endpoint::QAC, 5, 50);
  const auto search = bench::make_query_corpus(*snap, Endpoint::Search, 5, 50);
  ASSERT_EQ(qac.size(), 50u);
  ASSERT_EQ(search.size(), 50u);
  EXPECT_EQ(qac, bench::make_query_corpus(*snap, Endpoint::QAC, 5, 50));
  for (const auto& q : qac) {
    bool prefix = false;
    for (const auto& e : snap->entities()) prefix = prefix || e.name.rfind(q, 0) == 0;
    EXPECT_TRUE(prefix) << q;
  }
  const auto users = bench::sample_users(*snap, 1, 10);
  EXPECT_EQ(users.size(), 10u);
  for (const auto& u : users) EXPECT_EQ(snap->entity(snap->index_of(u)).kind, EntityKind::User);
}

TEST(BenchRun, TwoLevelsReported) {
  std::stringstream out;
  bench::generate_dataset(1, 200, 600, out);
  Graph g;
  g.ingest(out);
  const auto snap = g.snapshot();
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.threads = 8;
  Service svc(cfg, snap);
  const int port = svc.start();
  bench::BenchPlan plan;
  plan.endpoint = Endpoint::QS;
  plan.total_requests = 64;
  plan.levels = {1, 64};
  plan.users = bench::sample_users(*snap, 1, 64);
  const auto report = bench::run_bench(plan, "http://127.0.0.1:" + std::to_string(port));
  ASSERT_EQ(report.levels.size(), 2u);
  EXPECT_EQ(report.levels[0].n, 1u);
  EXPECT_EQ(report.levels[0].count, 64u);
  EXPECT_EQ(report.levels[1].n, 64u);
  EXPECT_EQ(report.levels[1].count, 64u);
  EXPECT_EQ(report.failures(), 0u);
  EXPECT_EQ(report.entities, 200u);
  EXPECT_EQ(report.relationships, 600u);
  std::stringstream csv;
  bench::write_csv(report, csv);
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  EXPECT_EQ(lines, 3u);
  const auto j = bench::to_json(report);
  EXPECT_EQ(j["levels"].size(), 2u);
  svc.stop();
}

TEST(BenchRun, UnreachableTarget) {
  bench::BenchPlan plan;
  plan.users = {"u0"};
  try {
    bench::run_bench(plan, "http://127.0.0.1:1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ServiceUnreachable);
  }
}

TEST(Stats, NearestRank) {
  const auto s = summarize({0.5, 0.1, 0.4, 0.2, 0.3});
  EXPECT_EQ(s.count, 5u);
  EXPECT_NEAR(s.avg, 0.3, 1e-15);
  EXPECT_EQ(s.p50, 0.3);
  EXPECT_EQ(s.p95, 0.5);
  EXPECT_EQ(s.max, 0.5);
  EXPECT_EQ(summarize({}).count, 0u);
}
