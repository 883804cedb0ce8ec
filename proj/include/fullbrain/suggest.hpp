#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"
#include "fullbrain/text_index.hpp"

namespace fullbrain {

inline constexpr Timestamp kSecondsPerDay = 86'400;

struct QueryLogEntry {
  std::string user;
  std::string raw;
  std::string normalized;  // filled from raw when left empty
  Timestamp timestamp = 0;
  std::optional<std::string> clicked;
};

enum class SuggestionSource { History, Trending };
enum class PayloadKind { PastQuery, EntityLink };

constexpr std::string_view to_string(SuggestionSource s) {
  return s == SuggestionSource::History ? "history" : "trending";
}
constexpr std::string_view to_string(PayloadKind p) {
  return p == PayloadKind::PastQuery ? "query" : "entity";
}

struct Suggestion {
  PayloadKind payload = PayloadKind::PastQuery;
  std::string value;  // normalized query text or entity id
  SuggestionSource source = SuggestionSource::History;
  double score = 0.0;  // history: timestamp of last use; trending: in-window count

  std::string key() const { return (payload == PayloadKind::PastQuery ? "q:" : "e:") + value; }
};

struct SuggestConfig {
  Timestamp window = 7 * kSecondsPerDay;
  std::size_t history_limit = 5;
  std::size_t trending_limit = 5;
};

// Pre-typing suggestions: the user's recent queries followed by what is
// trending in the recent window (most-popular-completion over whole queries).
class QuerySuggester {
 public:
  using UserCheck = std::function<bool(std::string_view)>;

  explicit QuerySuggester(UserCheck is_user, SuggestConfig config = {},
                          std::optional<std::filesystem::path> log_path = std::nullopt)
      : is_user_(std::move(is_user)), config_(config), log_path_(std::move(log_path)) {
    if (log_path_ && std::filesystem::exists(*log_path_)) load(*log_path_);
  }

  const SuggestConfig& config() const { return config_; }

  void log_query(QueryLogEntry entry) {
    if (!is_user_(entry.user)) throw Error(ErrorCode::UnknownUser, "no user with id '" + entry.user + "'");
    if (entry.normalized.empty()) entry.normalized = normalize(entry.raw);
    if (entry.normalized.empty()) throw Error(ErrorCode::EmptyQuery, "query is empty after normalization");
    std::unique_lock lock(mutex_);
    if (!entries_.empty() && entry.timestamp < entries_.back().timestamp) {
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  "timestamp " + std::to_string(entry.timestamp) + " precedes the last logged entry");
    }
    if (log_path_) append_line(entry);
    by_user_[entry.user].push_back(entries_.size());
    entries_.push_back(std::move(entry));
  }

  std::vector<Suggestion> suggest(std::string_view user, Timestamp now) const {
    if (!is_user_(user)) throw Error(ErrorCode::UnknownUser, "no user with id '" + std::string(user) + "'");
    std::shared_lock lock(mutex_);
    std::vector<Suggestion> out;
    std::set<std::string> taken_keys;
    std::set<std::string> taken_texts;

    // History: newest first, one item per normalized text.
    if (auto it = by_user_.find(std::string(user)); it != by_user_.end()) {
      std::set<std::string> seen;
      for (auto pos = it->second.rbegin(); pos != it->second.rend(); ++pos) {
        const QueryLogEntry& e = entries_[*pos];
        if (e.timestamp > now) continue;
        if (!seen.insert(e.normalized).second) continue;
        Suggestion s = payload_of(e);
        if (!taken_keys.insert(s.key()).second) continue;  // same entity clicked from another text
        s.source = SuggestionSource::History;
        s.score = static_cast<double>(e.timestamp);
        taken_texts.insert(e.normalized);
        out.push_back(std::move(s));
        if (out.size() == config_.history_limit) break;
      }
    }

    struct Trend {
      Suggestion suggestion;
      std::size_t count = 0;
      Timestamp last = 0;
    };
    std::map<std::string, Trend> trends;
    auto first = std::lower_bound(entries_.begin(), entries_.end(), now - config_.window,
                                  [](const QueryLogEntry& e, Timestamp t) { return e.timestamp < t; });
    for (auto it = first; it != entries_.end() && it->timestamp <= now; ++it) {
      Suggestion s = payload_of(*it);
      auto& t = trends[s.key()];
      if (t.count == 0) t.suggestion = std::move(s);
      ++t.count;
      t.last = std::max(t.last, it->timestamp);
    }
    std::vector<const Trend*> ranked;
    for (const auto& [key, t] : trends) {
      if (taken_keys.count(key)) continue;
      if (t.suggestion.payload == PayloadKind::PastQuery && taken_texts.count(t.suggestion.value)) continue;
      ranked.push_back(&t);
    }
    std::sort(ranked.begin(), ranked.end(), [](const Trend* a, const Trend* b) {
      if (a->count != b->count) return a->count > b->count;
      if (a->last != b->last) return a->last > b->last;
      return a->suggestion.key() < b->suggestion.key();
    });
    for (std::size_t i = 0; i < ranked.size() && i < config_.trending_limit; ++i) {
      Suggestion s = ranked[i]->suggestion;
      s.source = SuggestionSource::Trending;
      s.score = static_cast<double>(ranked[i]->count);
      out.push_back(std::move(s));
    }
    return out;
  }

  std::vector<QueryLogEntry> entries() const {
    std::shared_lock lock(mutex_);
    return entries_;
  }

  static nlohmann::ordered_json to_json(const QueryLogEntry& e) {
    nlohmann::ordered_json j{{"user", e.user}, {"q", e.raw}, {"norm", e.normalized}, {"ts", e.timestamp}};
    j["clicked"] = e.clicked ? nlohmann::ordered_json(*e.clicked) : nlohmann::ordered_json(nullptr);
    return j;
  }

 private:
  static Suggestion payload_of(const QueryLogEntry& e) {
    Suggestion s;
    if (e.clicked) {
      s.payload = PayloadKind::EntityLink;
      s.value = *e.clicked;
    } else {
      s.payload = PayloadKind::PastQuery;
      s.value = e.normalized;
    }
    return s;
  }

  void append_line(const QueryLogEntry& e) {
    std::ofstream out(*log_path_, std::ios::app);
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + log_path_->string());
    out << to_json(e).dump() << '\n';
  }

  void load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        QueryLogEntry e;
        e.user = j.at("user").get<std::string>();
        e.raw = j.at("q").get<std::string>();
        e.normalized = j.value("norm", std::string());
        if (e.normalized.empty()) e.normalized = normalize(e.raw);
        e.timestamp = j.at("ts").get<Timestamp>();
        if (j.contains("clicked") && !j["clicked"].is_null()) e.clicked = j["clicked"].get<std::string>();
        if (!entries_.empty() && e.timestamp < entries_.back().timestamp) {
          throw Error(ErrorCode::NonMonotonicTimestamp, "query log out of order", line_no);
        }
        by_user_[e.user].push_back(entries_.size());
        entries_.push_back(std::move(e));
      } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ParseError, ex.what(), line_no);
      }
    }
  }

  UserCheck is_user_;
  SuggestConfig config_;
  std::optional<std::filesystem::path> log_path_;
  mutable std::shared_mutex mutex_;
  std::vector<QueryLogEntry> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_user_;
};

}  // namespace fullbrain
