#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"

namespace fullbrain {

/// Exact decimal points, stored in tenths.
struct Points {
  std::int64_t tenths = 0;

  constexpr double value() const { return static_cast<double>(tenths) / 10.0; }
  constexpr Points operator-() const { return {-tenths}; }
  constexpr Points& operator+=(Points o) {
    tenths += o.tenths;
    return *this;
  }
  friend constexpr Points operator+(Points a, Points b) { return {a.tenths + b.tenths}; }
  friend constexpr auto operator<=>(const Points&, const Points&) = default;
};

enum class ActionKind : std::uint8_t {
  SourceAdd,
  SourceShare,
  SourceRate,
  SourceComment,
  SourceUpvoteComment,
  PostAdd,
  PostShare,
  PostLike,
  PostComment,
  PostUpvoteComment,
  Include,
};

inline constexpr std::array<ActionKind, 11> kAllActions = {
    ActionKind::SourceAdd,  ActionKind::SourceShare, ActionKind::SourceRate,  ActionKind::SourceComment,
    ActionKind::SourceUpvoteComment, ActionKind::PostAdd, ActionKind::PostShare, ActionKind::PostLike,
    ActionKind::PostComment, ActionKind::PostUpvoteComment, ActionKind::Include};

// Effort + value sums from the user interviews, in tenths.
constexpr Points points_for(ActionKind action) {
  switch (action) {
    case ActionKind::SourceAdd: return {91};
    case ActionKind::SourceShare: return {78};
    case ActionKind::SourceRate: return {63};
    case ActionKind::SourceComment: return {64};
    case ActionKind::SourceUpvoteComment: return {51};
    case ActionKind::PostAdd: return {70};
    case ActionKind::PostShare: return {58};
    case ActionKind::PostLike: return {57};
    case ActionKind::PostComment: return {62};
    case ActionKind::PostUpvoteComment: return {57};
    case ActionKind::Include: return {47};
  }
  return {0};
}

constexpr std::string_view to_string(ActionKind action) {
  switch (action) {
    case ActionKind::SourceAdd: return "source_add";
    case ActionKind::SourceShare: return "source_share";
    case ActionKind::SourceRate: return "source_rate";
    case ActionKind::SourceComment: return "source_comment";
    case ActionKind::SourceUpvoteComment: return "source_upvote_comment";
    case ActionKind::PostAdd: return "post_add";
    case ActionKind::PostShare: return "post_share";
    case ActionKind::PostLike: return "post_like";
    case ActionKind::PostComment: return "post_comment";
    case ActionKind::PostUpvoteComment: return "post_upvote_comment";
    case ActionKind::Include: return "include";
  }
  return "unknown";
}

inline ActionKind parse_action(std::string_view text) {
  for (ActionKind a : kAllActions) {
    if (to_string(a) == text) return a;
  }
  throw Error(ErrorCode::UnknownAction, "unknown action '" + std::string(text) + "'");
}

constexpr bool is_comment(ActionKind a) {
  return a == ActionKind::SourceComment || a == ActionKind::PostComment;
}
constexpr bool is_upvote(ActionKind a) {
  return a == ActionKind::SourceUpvoteComment || a == ActionKind::PostUpvoteComment;
}

using ActivityId = std::uint64_t;

struct Activity {
  ActivityId id = 0;
  std::string actor;
  ActionKind action = ActionKind::Include;
  std::string location;  // concept / course / user space
  std::string object;    // thing acted upon
  Timestamp timestamp = 0;
  Points points;
  std::optional<ActivityId> reverses;  // set on delete records
  std::optional<ActivityId> target;    // upvotes: the comment activity upvoted

  bool is_delete() const { return reverses.has_value(); }
};

struct ActivityRequest {
  std::string actor;
  ActionKind action = ActionKind::Include;
  std::string location;
  std::string object;
  Timestamp timestamp = 0;
  std::optional<ActivityId> target;
};

enum class TimeWindow { Week, Month, Semester, AllTime };
enum class LeaderboardKind { TopContributor, TopResponder };
enum class LeaderboardDesign { HybridAbsolute, Hybrid5050 };

constexpr std::string_view to_string(TimeWindow w) {
  switch (w) {
    case TimeWindow::Week: return "week";
    case TimeWindow::Month: return "month";
    case TimeWindow::Semester: return "semester";
    case TimeWindow::AllTime: return "all";
  }
  return "unknown";
}
constexpr std::string_view to_string(LeaderboardKind k) {
  return k == LeaderboardKind::TopContributor ? "contributor" : "responder";
}
constexpr std::string_view to_string(LeaderboardDesign d) {
  return d == LeaderboardDesign::HybridAbsolute ? "absolute" : "hybrid50";
}

inline std::optional<TimeWindow> parse_window(std::string_view s) {
  for (auto w : {TimeWindow::Week, TimeWindow::Month, TimeWindow::Semester, TimeWindow::AllTime}) {
    if (to_string(w) == s) return w;
  }
  return std::nullopt;
}
inline std::optional<LeaderboardKind> parse_leaderboard_kind(std::string_view s) {
  if (s == "contributor") return LeaderboardKind::TopContributor;
  if (s == "responder") return LeaderboardKind::TopResponder;
  return std::nullopt;
}
inline std::optional<LeaderboardDesign> parse_design(std::string_view s) {
  if (s == "absolute" || s == "hybrid-absolute") return LeaderboardDesign::HybridAbsolute;
  if (s == "hybrid50" || s == "hybrid-50-50") return LeaderboardDesign::Hybrid5050;
  return std::nullopt;
}

/// Half-open [begin, end).
struct TimeRange {
  Timestamp begin = std::numeric_limits<Timestamp>::min();
  Timestamp end = std::numeric_limits<Timestamp>::max();

  bool contains(Timestamp t) const { return t >= begin && t < end; }

  /// Rolling window ending at (and including) `now`.
  static TimeRange rolling(TimeWindow w, Timestamp now) {
    constexpr Timestamp day = 86'400;
    TimeRange r;
    r.end = now + 1;
    switch (w) {
      case TimeWindow::Week: r.begin = now - 7 * day; break;
      case TimeWindow::Month: r.begin = now - 30 * day; break;
      case TimeWindow::Semester: r.begin = now - 180 * day; break;
      case TimeWindow::AllTime: break;
    }
    return r;
  }
};

struct ScoreFilter {
  std::optional<std::string> context;  // nullopt = any location
  TimeRange range;
  LeaderboardKind kind = LeaderboardKind::TopContributor;
};

struct RankedUser {
  std::string user;
  Points score;
  Timestamp reached_at = 0;  // earliest time the running total reached `score`
};

struct LeaderboardRow {
  std::string user;
  Points score;
  std::size_t rank = 0;  // 1-based
  bool active = false;
};

struct LeaderboardView {
  std::optional<std::string> context;
  TimeWindow window = TimeWindow::AllTime;
  LeaderboardKind kind = LeaderboardKind::TopContributor;
  LeaderboardDesign design = LeaderboardDesign::HybridAbsolute;
  std::vector<LeaderboardRow> rows;
};

inline constexpr std::size_t kAbsoluteTop = 10;
inline constexpr std::size_t kHybridTop = 5;
inline constexpr std::size_t kHybridBandRadius = 2;

/// Lays out rows for a design given the full ranking. A user missing from the
/// ranking is shown with zero points one place below the last ranked user.
inline std::vector<LeaderboardRow> layout_rows(const std::vector<RankedUser>& ranking, std::string_view active,
                                               LeaderboardDesign design) {
  std::size_t active_rank = ranking.size() + 1;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].user == active) active_rank = i + 1;
  }
  auto row = [&](std::size_t rank) {
    if (rank > ranking.size()) return LeaderboardRow{std::string(active), Points{0}, rank, true};
    const auto& r = ranking[rank - 1];
    return LeaderboardRow{r.user, r.score, rank, rank == active_rank};
  };
  std::vector<std::size_t> ranks;
  const std::size_t top = design == LeaderboardDesign::HybridAbsolute ? kAbsoluteTop : kHybridTop;
  for (std::size_t r = 1; r <= std::min(top, ranking.size()); ++r) ranks.push_back(r);
  if (design == LeaderboardDesign::HybridAbsolute) {
    if (active_rank > top || active_rank > ranking.size()) ranks.push_back(active_rank);
  } else {
    const std::size_t last = std::max(active_rank, ranking.size());
    const std::size_t lo = active_rank > kHybridBandRadius ? active_rank - kHybridBandRadius : 1;
    const std::size_t hi = std::min(last, active_rank + kHybridBandRadius);
    for (std::size_t r = std::max(lo, ranks.size() + 1); r <= hi; ++r) ranks.push_back(r);
  }
  std::vector<LeaderboardRow> rows;
  for (std::size_t r : ranks) rows.push_back(row(r));
  return rows;
}

struct LedgerConfig {
  /// Bonus per upvote received on a comment, for Top Responder.
  Points upvote_bonus{10};
};

// Append-only activity ledger. Appends are serialized; reads see a
// consistent prefix and may run concurrently.
class Ledger {
 public:
  using EntityCheck = std::function<bool(std::string_view)>;

  explicit Ledger(EntityCheck exists, EntityCheck is_user = {}, LedgerConfig config = {},
                  std::optional<std::filesystem::path> path = std::nullopt)
      : exists_(std::move(exists)),
        is_user_(is_user ? std::move(is_user) : exists_),
        config_(config),
        path_(std::move(path)) {
    if (path_ && std::filesystem::exists(*path_)) load(*path_);
  }

  Activity record_activity(const ActivityRequest& req) {
    for (const std::string* id : {&req.actor, &req.location, &req.object}) {
      if (!exists_(*id)) throw Error(ErrorCode::UnknownEntity, "no entity with id '" + *id + "'");
    }
    if (!is_user_(req.actor)) throw Error(ErrorCode::UnknownEntity, "actor '" + req.actor + "' is not a user");
    std::unique_lock lock(mutex_);
    if (req.target) {
      if (!is_upvote(req.action)) throw Error(ErrorCode::UnknownActivity, "only upvotes may target a comment");
      const Activity* t = find(*req.target);
      if (!t || t->is_delete() || !is_comment(t->action)) {
        throw Error(ErrorCode::UnknownActivity, "upvote target is not a comment");
      }
      for (const Activity& r : records_) {
        if (r.reverses == *req.target) throw Error(ErrorCode::UnknownActivity, "upvote target was deleted");
      }
    }
    Activity a;
    a.id = records_.size() + 1;
    a.actor = req.actor;
    a.action = req.action;
    a.location = req.location;
    a.object = req.object;
    a.timestamp = req.timestamp;
    a.points = points_for(req.action);
    a.target = req.target;
    append(a);
    return a;
  }

  /// Appends a negated mirror of an activity the actor performed. Points
  /// other users earned on the same object are untouched.
  Activity record_delete(ActivityId original, std::string_view actor, Timestamp timestamp) {
    std::unique_lock lock(mutex_);
    const Activity* ref = find(original);
    if (!ref || ref->is_delete()) throw Error(ErrorCode::UnknownActivity, "no activity #" + std::to_string(original));
    if (ref->actor != actor) {
      throw Error(ErrorCode::NotOwner, std::string(actor) + " did not perform activity #" + std::to_string(original));
    }
    for (const Activity& r : records_) {
      if (r.reverses == original) throw Error(ErrorCode::AlreadyDeleted, "activity #" + std::to_string(original));
    }
    Activity a = *ref;
    a.id = records_.size() + 1;
    a.timestamp = timestamp;
    a.points = -ref->points;
    a.reverses = original;
    append(a);
    return a;
  }

  std::vector<Activity> records() const {
    std::shared_lock lock(mutex_);
    return records_;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
  }

  const LedgerConfig& config() const { return config_; }

  /// Per-user totals; users with a non-positive total are omitted.
  std::map<std::string, Points> compute_scores(const ScoreFilter& filter) const {
    std::map<std::string, Points> out;
    for (const auto& r : ranking(filter)) out.emplace(r.user, r.score);
    return out;
  }

  /// Users with positive score, best first. Ties go to whoever reached the
  /// score first, then to the smaller id.
  std::vector<RankedUser> ranking(const ScoreFilter& filter) const {
    std::shared_lock lock(mutex_);
    struct Event {
      Timestamp ts;
      ActivityId seq;
      Points delta;
    };
    std::map<std::string, std::vector<Event>> events;
    auto in_context = [&](const Activity& a) { return !filter.context || a.location == *filter.context; };
    // Deleted comments stop earning upvote bonuses; deleted upvotes undo theirs.
    std::vector<bool> deleted(records_.size() + 1, false);
    for (const Activity& a : records_) {
      if (a.reverses) deleted[*a.reverses] = true;
    }
    for (const Activity& a : records_) {
      if (!filter.range.contains(a.timestamp) || !in_context(a)) continue;
      if (filter.kind == LeaderboardKind::TopContributor) {
        events[a.actor].push_back({a.timestamp, a.id, a.points});
        continue;
      }
      if (is_comment(a.action)) events[a.actor].push_back({a.timestamp, a.id, a.points});
      if (is_upvote(a.action) && a.target && !deleted[*a.target]) {
        const Activity& comment = records_[*a.target - 1];
        const Points bonus = a.is_delete() ? -config_.upvote_bonus : config_.upvote_bonus;
        events[comment.actor].push_back({a.timestamp, a.id, bonus});
      }
    }
    std::vector<RankedUser> out;
    for (auto& [user, list] : events) {
      std::sort(list.begin(), list.end(),
                [](const Event& a, const Event& b) { return std::tie(a.ts, a.seq) < std::tie(b.ts, b.seq); });
      Points total;
      for (const Event& e : list) total += e.delta;
      if (total.tenths <= 0) continue;
      Points running;
      Timestamp reached = list.back().ts;
      for (const Event& e : list) {
        running += e.delta;
        if (running >= total) {
          reached = e.ts;
          break;
        }
      }
      out.push_back({user, total, reached});
    }
    std::sort(out.begin(), out.end(), [](const RankedUser& a, const RankedUser& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.reached_at != b.reached_at) return a.reached_at < b.reached_at;
      return a.user < b.user;
    });
    return out;
  }

  LeaderboardView build_view(const std::optional<std::string>& context, TimeWindow window, LeaderboardKind kind,
                             Timestamp now, std::string_view active_user, LeaderboardDesign design) const {
    if (!is_user_(active_user)) {
      throw Error(ErrorCode::UnknownUser, "no user with id '" + std::string(active_user) + "'");
    }
    LeaderboardView view;
    view.context = context;
    view.window = window;
    view.kind = kind;
    view.design = design;
    view.rows = layout_rows(ranking({context, TimeRange::rolling(window, now), kind}), active_user, design);
    return view;
  }

  static nlohmann::ordered_json to_json(const Activity& a) {
    nlohmann::ordered_json j{{"id", a.id},          {"actor", a.actor}, {"action", to_string(a.action)},
                             {"location", a.location}, {"object", a.object}, {"ts", a.timestamp},
                             {"points", a.points.value()}};
    j["reverses"] = a.reverses ? nlohmann::ordered_json(*a.reverses) : nlohmann::ordered_json(nullptr);
    j["target"] = a.target ? nlohmann::ordered_json(*a.target) : nlohmann::ordered_json(nullptr);
    return j;
  }

 private:
  const Activity* find(ActivityId id) const {
    if (id == 0 || id > records_.size()) return nullptr;
    return &records_[id - 1];
  }

  void append(const Activity& a) {
    if (path_) {
      std::ofstream out(*path_, std::ios::app);
      if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path_->string());
      out << to_json(a).dump() << '\n';
    }
    records_.push_back(a);
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
        Activity a;
        a.id = j.at("id").get<ActivityId>();
        if (a.id != records_.size() + 1) throw Error(ErrorCode::ParseError, "ledger ids not sequential", line_no);
        a.actor = j.at("actor").get<std::string>();
        a.action = parse_action(j.at("action").get<std::string>());
        a.location = j.at("location").get<std::string>();
        a.object = j.at("object").get<std::string>();
        a.timestamp = j.at("ts").get<Timestamp>();
        if (j.contains("reverses") && !j["reverses"].is_null()) a.reverses = j["reverses"].get<ActivityId>();
        if (j.contains("target") && !j["target"].is_null()) a.target = j["target"].get<ActivityId>();
        // Points are re-derived so a hand-edited file cannot drift from the table.
        a.points = a.reverses ? -points_for(a.action) : points_for(a.action);
        records_.push_back(std::move(a));
      } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ParseError, ex.what(), line_no);
      }
    }
  }

  EntityCheck exists_;
  EntityCheck is_user_;
  LedgerConfig config_;
  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mutex_;
  std::vector<Activity> records_;
};

}  // namespace fullbrain
