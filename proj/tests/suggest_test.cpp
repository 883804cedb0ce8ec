#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "fullbrain/suggest.hpp"

using namespace fullbrain;

namespace {

constexpr Timestamp kDay = kSecondsPerDay;
constexpr Timestamp kNow = 1'700'000'000;

QuerySuggester::UserCheck users(std::set<std::string> ids) {
  return [ids = std::move(ids)](std::string_view id) { return ids.count(std::string(id)) > 0; };
}

QueryLogEntry entry(std::string user, std::string q, Timestamp ts, std::optional<std::string> clicked = {}) {
  return {std::move(user), std::move(q), "", ts, std::move(clicked)};
}

std::vector<std::string> values(const std::vector<Suggestion>& s, SuggestionSource src) {
  std::vector<std::string> out;
  for (const auto& x : s) {
    if (x.source == src) out.push_back(x.value);
  }
  return out;
}

}  // namespace

TEST(Suggest, LoggedQueryAppearsInHistory) {
  QuerySuggester qs(users({"u1"}));
  qs.log_query(entry("u1", "PCA tutorial", kNow - 10));
  const auto s = qs.suggest("u1", kNow);
  EXPECT_EQ(values(s, SuggestionSource::History), std::vector<std::string>{"pca tutorial"});
}

TEST(Suggest, DuplicateTextCollapsesToLatest) {
  QuerySuggester qs(users({"u1"}));
  qs.log_query(entry("u1", "pca", kNow - 100));
  qs.log_query(entry("u1", "regression", kNow - 50));
  qs.log_query(entry("u1", "PCA!", kNow - 10));
  const auto s = qs.suggest("u1", kNow);
  EXPECT_EQ(values(s, SuggestionSource::History), (std::vector<std::string>{"pca", "regression"}));
  EXPECT_EQ(s.front().score, static_cast<double>(kNow - 10));
}

TEST(Suggest, Errors) {
  QuerySuggester qs(users({"u1"}));
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code([&] { qs.log_query(entry("ghost", "pca", kNow)); }), ErrorCode::UnknownUser);
  EXPECT_EQ(code([&] { qs.log_query(entry("u1", " ?? ", kNow)); }), ErrorCode::EmptyQuery);
  EXPECT_EQ(code([&] { qs.suggest("ghost", kNow); }), ErrorCode::UnknownUser);
  qs.log_query(entry("u1", "pca", kNow));
  EXPECT_EQ(code([&] { qs.log_query(entry("u1", "pca", kNow - 1)); }), ErrorCode::NonMonotonicTimestamp);
}

TEST(Suggest, FreshUserEmptyLog) {
  QuerySuggester qs(users({"u1"}));
  EXPECT_TRUE(qs.suggest("u1", kNow).empty());
}

TEST(Suggest, SevenQueriesGiveFiveMostRecent) {
  QuerySuggester qs(users({"u1"}), SuggestConfig{0, 5, 5});  // zero-length window: history only
  for (int i = 0; i < 7; ++i) qs.log_query(entry("u1", "query " + std::to_string(i), kNow - 100 + i));
  const auto s = qs.suggest("u1", kNow);
  EXPECT_EQ(values(s, SuggestionSource::History),
            (std::vector<std::string>{"query 6", "query 5", "query 4", "query 3", "query 2"}));
}

TEST(Suggest, InWindowBeatsOutOfWindowPopularity) {
  QuerySuggester qs(users({"u1", "u2", "me"}));
  for (int i = 0; i < 100; ++i) qs.log_query(entry(i % 2 ? "u1" : "u2", "old favourite", kNow - 30 * kDay + i));
  for (int i = 0; i < 10; ++i) qs.log_query(entry("u2", "fresh topic", kNow - kDay + i));
  qs.log_query(entry("u1", "other", kNow - kDay + 20));
  const auto s = qs.suggest("me", kNow);
  const auto trending = values(s, SuggestionSource::Trending);
  ASSERT_FALSE(trending.empty());
  EXPECT_EQ(trending.front(), "fresh topic");
  EXPECT_EQ(std::count(trending.begin(), trending.end(), "old favourite"), 0);
  // Brute-force count over the log for the window.
  std::size_t in_window = 0;
  for (const auto& e : qs.entries()) in_window += e.normalized == "fresh topic" && e.timestamp >= kNow - 7 * kDay;
  EXPECT_EQ(s.front().score, static_cast<double>(in_window));
}

TEST(Suggest, ClicksBecomeEntityLinks) {
  QuerySuggester qs(users({"u1", "u2"}));
  qs.log_query(entry("u1", "pca", kNow - 20, "c1"));
  qs.log_query(entry("u2", "pca", kNow - 10, "c1"));
  const auto s = qs.suggest("u1", kNow);
  ASSERT_EQ(s.size(), 1u);  // trending c1 is the same payload as the history item
  EXPECT_EQ(s[0].payload, PayloadKind::EntityLink);
  EXPECT_EQ(s[0].value, "c1");
}

TEST(Suggest, PersistsAndReloads) {
  const auto path = std::filesystem::temp_directory_path() / "fullbrain_suggest_test.jsonl";
  std::filesystem::remove(path);
  {
    QuerySuggester qs(users({"u1"}), {}, path);
    qs.log_query(entry("u1", "graph search", kNow - 5));
    qs.log_query(entry("u1", "pca", kNow - 1, "c1"));
  }
  QuerySuggester again(users({"u1"}), {}, path);
  ASSERT_EQ(again.entries().size(), 2u);
  EXPECT_EQ(again.entries()[1].clicked, std::optional<std::string>("c1"));
  EXPECT_EQ(again.suggest("u1", kNow).size(), 2u);
  std::filesystem::remove(path);
}

TEST(SuggestProperty, ContractOnRandomLogs) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> texts = {"pca", "graph", "deep learning", "regression", "svm", "kmeans",
                                          "bayes", "network", "PCA", "Graph!", "vector", "matrix"};
  const std::vector<std::string> people = {"a", "b", "c", "d"};
  for (int round = 0; round < 60; ++round) {
    SuggestConfig cfg;
    cfg.window = static_cast<Timestamp>(1 + rng() % 10) * kDay;
    QuerySuggester qs(users({"a", "b", "c", "d"}), cfg);
    Timestamp t = kNow - 20 * kDay;
    const int n = static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) {
      t += static_cast<Timestamp>(rng() % (kDay / 4));
      std::optional<std::string> click;
      if (rng() % 5 == 0) click = "ent" + std::to_string(rng() % 4);
      qs.log_query(entry(people[rng() % people.size()], texts[rng() % texts.size()], t, click));
    }
    const Timestamp now = t + static_cast<Timestamp>(rng() % kDay);
    for (const auto& who : people) {
      const auto s = qs.suggest(who, now);
      const auto hist = std::count_if(s.begin(), s.end(), [](auto& x) { return x.source == SuggestionSource::History; });
      EXPECT_LE(hist, 5);
      EXPECT_LE(static_cast<long>(s.size()) - hist, 5);
      std::set<std::string> keys;
      std::set<std::string> texts_seen;
      double last = std::numeric_limits<double>::max();
      for (const auto& x : s) {
        EXPECT_TRUE(keys.insert(x.key()).second);
        if (x.source == SuggestionSource::History) {
          EXPECT_LE(x.score, last);
          last = x.score;
        }
      }
      // Trending counts equal a linear scan over the window.
      for (const auto& x : s) {
        if (x.source != SuggestionSource::Trending) continue;
        std::size_t count = 0;
        for (const auto& e : qs.entries()) {
          if (e.timestamp < now - cfg.window || e.timestamp > now) continue;
          const std::string key = e.clicked ? "e:" + *e.clicked : "q:" + e.normalized;
          count += key == x.key();
        }
        EXPECT_EQ(x.score, static_cast<double>(count));
      }
      // History depends only on this user's entries.
      QuerySuggester solo(users({"a", "b", "c", "d"}), cfg);
      for (const auto& e : qs.entries()) {
        if (e.user == who) solo.log_query(e);
      }
      const auto own = solo.suggest(who, now);
      EXPECT_EQ(values(own, SuggestionSource::History), values(s, SuggestionSource::History));
    }
  }
}
