#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "fullbrain/engine.hpp"
#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"
#include "fullbrain/leaderboard.hpp"
#include "fullbrain/stats.hpp"
#include "fullbrain/suggest.hpp"

namespace fullbrain {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kEnvPrefix = "FULLBRAIN_";

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data;
  std::optional<std::filesystem::path> ledger;
  std::optional<std::filesystem::path> qlog;
  std::optional<std::filesystem::path> request_log;
  std::optional<std::filesystem::path> index;
  std::optional<std::filesystem::path> static_dir;
  std::size_t landmarks = 0;  // 0 = default for the graph size
  Timestamp window = 7 * kSecondsPerDay;
  std::size_t search_limit = kDefaultSearchLimit;
  std::size_t qac_limit = kDefaultAutocompleteLimit;
  std::size_t threads = 16;
};

/// Applies one `key = value` setting. Unknown keys are rejected.
inline void set_config_value(ServiceConfig& cfg, const std::string& key, const std::string& value) {
  auto as_size = [&]() -> std::size_t {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "config '" + key + "' expects a non-negative integer, got '" + value + "'");
    }
  };
  auto as_path = [&]() -> std::optional<std::filesystem::path> {
    if (value.empty()) return std::nullopt;
    return std::filesystem::path(value);
  };
  if (key == "host") cfg.host = value;
  else if (key == "port") cfg.port = static_cast<int>(as_size());
  else if (key == "data") cfg.data = value;
  else if (key == "ledger") cfg.ledger = as_path();
  else if (key == "qlog") cfg.qlog = as_path();
  else if (key == "request_log") cfg.request_log = as_path();
  else if (key == "index") cfg.index = as_path();
  else if (key == "static_dir") cfg.static_dir = as_path();
  else if (key == "landmarks") cfg.landmarks = as_size();
  else if (key == "window_days") cfg.window = static_cast<Timestamp>(as_size()) * kSecondsPerDay;
  else if (key == "search_limit") cfg.search_limit = as_size();
  else if (key == "qac_limit") cfg.qac_limit = as_size();
  else if (key == "threads") cfg.threads = as_size();
  else throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
}

inline constexpr std::array<std::string_view, 13> kConfigKeys = {
    "host", "port", "data", "ledger", "qlog", "request_log", "index", "static_dir",
    "landmarks", "window_days", "search_limit", "qac_limit", "threads"};

/// Reads `key = value` lines; blank lines and `#` comments are ignored.
inline void load_config_file(ServiceConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "expected key = value", line_no);
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), e.message(), line_no);
    }
  }
}

/// FULLBRAIN_PORT=9000 overrides `port`, and so on for every key.
inline void apply_env_overrides(ServiceConfig& cfg) {
  for (std::string_view key : kConfigKeys) {
    std::string name(kEnvPrefix);
    for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (const char* value = std::getenv(name.c_str())) set_config_value(cfg, std::string(key), value);
  }
}

inline Timestamp wall_clock_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

enum class Endpoint { QS, QAC, Search, Activity, Leaderboard };

constexpr std::string_view to_string(Endpoint e) {
  switch (e) {
    case Endpoint::QS: return "qs";
    case Endpoint::QAC: return "qac";
    case Endpoint::Search: return "search";
    case Endpoint::Activity: return "activity";
    case Endpoint::Leaderboard: return "leaderboard";
  }
  return "unknown";
}

inline std::optional<Endpoint> parse_endpoint(std::string_view s) {
  for (auto e : {Endpoint::QS, Endpoint::QAC, Endpoint::Search, Endpoint::Activity, Endpoint::Leaderboard}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

struct RequestLogRecord {
  Endpoint endpoint = Endpoint::QS;
  std::string user;
  double latency = 0.0;  // seconds, monotonic clock
  Timestamp timestamp = 0;
  int status = 200;
};

// Per-request latency records for day-to-day measurement.
class RequestLog {
 public:
  explicit RequestLog(std::optional<std::filesystem::path> path = std::nullopt) : path_(std::move(path)) {}

  void append(RequestLogRecord r) {
    std::lock_guard lock(mutex_);
    if (path_) {
      std::ofstream out(*path_, std::ios::app);
      nlohmann::ordered_json j{{"endpoint", to_string(r.endpoint)}, {"user", r.user}, {"latency_s", r.latency},
                               {"ts", r.timestamp}, {"status", r.status}};
      out << j.dump() << '\n';
    }
    records_.push_back(std::move(r));
  }

  std::vector<RequestLogRecord> records() const {
    std::lock_guard lock(mutex_);
    return records_;
  }

  /// Statistics for one endpoint over records with timestamp in [from, to].
  LatencySummary latency_summary(Endpoint endpoint, Timestamp from, Timestamp to) const {
    std::vector<double> samples;
    {
      std::lock_guard lock(mutex_);
      for (const auto& r : records_) {
        if (r.endpoint == endpoint && r.timestamp >= from && r.timestamp <= to) samples.push_back(r.latency);
      }
    }
    if (samples.empty()) throw Error(ErrorCode::NoData, "no requests logged for " + std::string(to_string(endpoint)));
    return summarize(std::move(samples));
  }

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::vector<RequestLogRecord> records_;
};

inline nlohmann::ordered_json to_json(const ScoredResult& r, const GraphSnapshot& g) {
  return {{"id", r.id},          {"kind", to_string(r.kind)}, {"name", g.entity(g.index_of(r.id)).name},
          {"S", r.overall},      {"S_T", r.topical},          {"S_U", r.social}};
}

inline nlohmann::ordered_json to_json(const Suggestion& s) {
  return {{"payload", to_string(s.payload)}, {"value", s.value}, {"source", to_string(s.source)}, {"score", s.score}};
}

inline nlohmann::ordered_json to_json(const LeaderboardView& v) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : v.rows) {
    rows.push_back({{"rank", r.rank}, {"user", r.user}, {"score", r.score.value()}, {"active", r.active}});
  }
  nlohmann::ordered_json j;
  j["context"] = v.context ? nlohmann::ordered_json(*v.context) : nlohmann::ordered_json("all");
  j["window"] = to_string(v.window);
  j["kind"] = to_string(v.kind);
  j["design"] = to_string(v.design);
  j["rows"] = std::move(rows);
  return j;
}

inline nlohmann::ordered_json to_json(const LatencySummary& s) {
  return {{"count", s.count}, {"avg_s", s.avg}, {"p50_s", s.p50}, {"p95_s", s.p95}, {"max_s", s.max}};
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownUser:
    case ErrorCode::UnknownId:
    case ErrorCode::UnknownEntity:
    case ErrorCode::UnknownActivity:
      return 404;
    case ErrorCode::NotOwner: return 403;
    case ErrorCode::AlreadyDeleted:
    case ErrorCode::NonMonotonicTimestamp:
      return 409;
    case ErrorCode::NoData: return 404;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

// The SIR + leaderboard HTTP facade. All indexes are built in the
// constructor; request handlers only read immutable state or go through the
// single-writer ledger and query log.
class Service {
 public:
  explicit Service(ServiceConfig config) : config_(std::move(config)), requests_(config_.request_log) {
    Graph graph;
    try {
      graph.ingest(config_.data);
    } catch (const Error& e) {
      throw Error(ErrorCode::DataLoadError, e.what());
    }
    init(graph.snapshot());
  }

  Service(ServiceConfig config, std::shared_ptr<const GraphSnapshot> graph)
      : config_(std::move(config)), requests_(config_.request_log) {
    init(std::move(graph));
  }

  ~Service() { stop(); }
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const { return config_; }
  const SearchEngine& engine() const { return *engine_; }
  QuerySuggester& suggester() { return *suggester_; }
  Ledger& ledger() { return *ledger_; }
  const RequestLog& requests() const { return requests_; }

  /// Binds the listening socket; port 0 picks a free port. Returns the port.
  int bind() {
    if (config_.port == 0) {
      port_ = server_.bind_to_any_port(config_.host);
    } else {
      port_ = server_.bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (port_ < 0) {
      throw Error(ErrorCode::BindError, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    return port_;
  }

  int port() const { return port_; }

  /// Serves until stop(). bind() must have succeeded.
  void run() { server_.listen_after_bind(); }

  /// Binds (if needed) and serves on a background thread.
  int start() {
    if (port_ < 0) bind();
    thread_ = std::thread([this] { run(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void init(std::shared_ptr<const GraphSnapshot> graph) {
    if (!graph || graph->empty()) throw Error(ErrorCode::DataLoadError, "dataset contains no entities");
    graph_ = graph;
    std::optional<DistanceIndex> distances;
    if (config_.index && std::filesystem::exists(*config_.index)) {
      std::ifstream in(*config_.index, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      try {
        distances = DistanceIndex::deserialize(graph, buf.str());
      } catch (const Error&) {
        distances.reset();  // stale or foreign index file; rebuild below
      }
    }
    if (!distances) {
      distances = config_.landmarks == 0 ? DistanceIndex::build(graph) : DistanceIndex::build(graph, config_.landmarks);
    }
    engine_ = std::make_unique<SearchEngine>(std::move(*distances), TextIndex::build(graph));

    auto is_user = [g = graph](std::string_view id) {
      auto n = g->find(id);
      return n && g->entity(*n).kind == EntityKind::User;
    };
    auto exists = [g = graph](std::string_view id) { return g->contains(id); };
    SuggestConfig sc;
    sc.window = config_.window;
    suggester_ = std::make_unique<QuerySuggester>(is_user, sc, config_.qlog);
    ledger_ = std::make_unique<Ledger>(exists, is_user, LedgerConfig{}, config_.ledger);
    if (auto logged = suggester_->entries(); !logged.empty()) last_logged_ = logged.back().timestamp;
    routes();
  }

  static std::size_t limit_param(const httplib::Request& req, std::size_t fallback) {
    if (!req.has_param("limit")) return fallback;
    try {
      const long long v = std::stoll(req.get_param_value("limit"));
      if (v < 1) throw Error(ErrorCode::OutOfRangeInput, "limit must be at least 1");
      return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::OutOfRangeInput, "limit must be an integer");
    }
  }

  static Timestamp now_param(const httplib::Request& req) {
    if (!req.has_param("now")) return wall_clock_now();
    try {
      return std::stoll(req.get_param_value("now"));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::OutOfRangeInput, "now must be an integer timestamp");
    }
  }

  static std::string required(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) throw Error(ErrorCode::OutOfRangeInput, std::string("missing parameter '") + name + "'");
    return req.get_param_value(name);
  }

  // Wraps a handler: JSON body, error mapping and one latency record per request.
  template <typename Handler>
  httplib::Server::Handler measured(Endpoint endpoint, Handler handler) {
    return [this, endpoint, handler](const httplib::Request& req, httplib::Response& res) {
      const auto start = std::chrono::steady_clock::now();
      std::string user;
      try {
        nlohmann::ordered_json body = handler(req, user);
        res.set_content(body.dump(), "application/json");
        res.status = 200;
      } catch (const Error& e) {
        fail(res, e);
      } catch (const nlohmann::json::exception& e) {
        fail(res, Error(ErrorCode::ParseError, e.what()));
      }
      const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      requests_.append({endpoint, std::move(user), latency, wall_clock_now(), res.status});
    };
  }

  static void fail(httplib::Response& res, const Error& e) {
    nlohmann::ordered_json body{{"error", to_string(e.code())}, {"message", e.what()}};
    res.set_content(body.dump(), "application/json");
    res.status = http_status(e.code());
  }

  nlohmann::ordered_json results_json(const std::vector<ScoredResult>& results) const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : results) arr.push_back(to_json(r, *graph_));
    return arr;
  }

  void log_search(const std::string& user, const std::string& q, std::optional<std::string> clicked) {
    std::lock_guard lock(qlog_mutex_);
    const auto entries_ts = std::max(wall_clock_now(), last_logged_);
    suggester_->log_query({user, q, "", entries_ts, std::move(clicked)});
    last_logged_ = entries_ts;
  }

  static std::vector<EntityKind> parse_kinds(const std::string& csv) {
    std::vector<EntityKind> kinds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      auto k = parse_entity_kind(item);
      if (!k) throw Error(ErrorCode::OutOfRangeInput, "unknown kind '" + item + "'");
      kinds.push_back(*k);
    }
    if (kinds.empty()) kinds.assign(kSearchKinds.begin(), kSearchKinds.end());
    return kinds;
  }

  void routes() {
    if (config_.static_dir) server_.set_mount_point("/ui", config_.static_dir->string());
    const std::size_t threads = std::max<std::size_t>(1, config_.threads);
    server_.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server_.set_tcp_nodelay(true);

    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::ordered_json body{{"status", "ok"},
                                  {"version", kVersion},
                                  {"entities", graph_->entity_count()},
                                  {"edges", graph_->edge_count()},
                                  {"landmarks", engine_->distances().landmarks().size()}};
      res.set_content(body.dump(), "application/json");
    });

    server_.Get("/stats", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        auto endpoint = parse_endpoint(required(req, "endpoint"));
        if (!endpoint) throw Error(ErrorCode::OutOfRangeInput, "unknown endpoint");
        const Timestamp now = wall_clock_now();
        const Timestamp since = req.has_param("since") ? std::stoll(req.get_param_value("since")) : 0;
        res.set_content(to_json(requests_.latency_summary(*endpoint, since, now)).dump(), "application/json");
      } catch (const Error& e) {
        fail(res, e);
      } catch (const std::logic_error& e) {
        fail(res, Error(ErrorCode::OutOfRangeInput, e.what()));
      }
    });

    server_.Get("/qs", measured(Endpoint::QS, [this](const httplib::Request& req, std::string& user) {
      user = required(req, "user");
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& s : suggester_->suggest(user, now_param(req))) arr.push_back(to_json(s));
      return nlohmann::ordered_json{{"user", user}, {"suggestions", std::move(arr)}};
    }));

    server_.Get("/qac", measured(Endpoint::QAC, [this](const httplib::Request& req, std::string& user) {
      user = required(req, "user");
      const std::string q = required(req, "q");
      auto results = engine_->autocomplete(user, q, limit_param(req, config_.qac_limit));
      return nlohmann::ordered_json{{"user", user}, {"q", q}, {"results", results_json(results)}};
    }));

    server_.Get("/search", measured(Endpoint::Search, [this](const httplib::Request& req, std::string& user) {
      user = required(req, "user");
      const std::string q = required(req, "q");
      const auto kinds = parse_kinds(req.has_param("kinds") ? req.get_param_value("kinds") : "");
      auto results = engine_->search(user, q, limit_param(req, config_.search_limit), kinds);
      if (!req.has_param("log") || req.get_param_value("log") != "0") log_search(user, q, std::nullopt);
      return nlohmann::ordered_json{{"user", user}, {"q", q}, {"results", results_json(results)}};
    }));

    // Click-through on a search result or suggestion; feeds entity-link suggestions.
    server_.Post("/click", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto body = nlohmann::json::parse(req.body);
        const std::string entity = body.at("entity").get<std::string>();
        if (!graph_->contains(entity)) throw Error(ErrorCode::UnknownEntity, "no entity '" + entity + "'");
        log_search(body.at("user").get<std::string>(), body.value("q", graph_->entity(graph_->index_of(entity)).name),
                   entity);
        res.set_content(R"({"status":"ok"})", "application/json");
      } catch (const Error& e) {
        fail(res, e);
      } catch (const nlohmann::json::exception& e) {
        fail(res, Error(ErrorCode::ParseError, e.what()));
      }
    });

    server_.Post("/activity", measured(Endpoint::Activity, [this](const httplib::Request& req, std::string& user) {
      const auto body = nlohmann::json::parse(req.body);
      ActivityRequest a;
      a.actor = body.at("actor").get<std::string>();
      user = a.actor;
      a.action = parse_action(body.at("action").get<std::string>());
      a.location = body.at("location").get<std::string>();
      a.object = body.at("object").get<std::string>();
      a.timestamp = body.contains("ts") ? body["ts"].get<Timestamp>() : wall_clock_now();
      if (body.contains("target") && !body["target"].is_null()) a.target = body["target"].get<ActivityId>();
      return Ledger::to_json(ledger_->record_activity(a));
    }));

    server_.Post("/activity/delete", measured(Endpoint::Activity, [this](const httplib::Request& req, std::string& user) {
      const auto body = nlohmann::json::parse(req.body);
      user = body.at("actor").get<std::string>();
      const Timestamp ts = body.contains("ts") ? body["ts"].get<Timestamp>() : wall_clock_now();
      return Ledger::to_json(ledger_->record_delete(body.at("id").get<ActivityId>(), user, ts));
    }));

    server_.Get("/leaderboard", measured(Endpoint::Leaderboard, [this](const httplib::Request& req, std::string& user) {
      user = required(req, "user");
      std::optional<std::string> context;
      if (req.has_param("context") && req.get_param_value("context") != "all") context = req.get_param_value("context");
      if (context && !graph_->contains(*context)) throw Error(ErrorCode::UnknownEntity, "no context '" + *context + "'");
      auto window = parse_window(req.has_param("window") ? req.get_param_value("window") : "week");
      auto kind = parse_leaderboard_kind(req.has_param("kind") ? req.get_param_value("kind") : "contributor");
      if (!window || !kind) throw Error(ErrorCode::OutOfRangeInput, "bad window or kind");
      std::optional<LeaderboardDesign> design;
      if (req.has_param("design")) {
        design = parse_design(req.get_param_value("design"));
        if (!design) throw Error(ErrorCode::OutOfRangeInput, "bad design");
      } else {
        design = default_design(context);
      }
      return to_json(ledger_->build_view(context, *window, *kind, now_param(req), user, *design));
    }));
  }

  // Concept spaces default to hybrid-absolute, course spaces to hybrid 50-50.
  LeaderboardDesign default_design(const std::optional<std::string>& context) const {
    if (context) {
      if (auto n = graph_->find(*context); n && graph_->entity(*n).kind == EntityKind::Course) {
        return LeaderboardDesign::Hybrid5050;
      }
    }
    return LeaderboardDesign::HybridAbsolute;
  }

  ServiceConfig config_;
  std::shared_ptr<const GraphSnapshot> graph_;
  std::unique_ptr<SearchEngine> engine_;
  std::unique_ptr<QuerySuggester> suggester_;
  std::unique_ptr<Ledger> ledger_;
  RequestLog requests_;
  std::mutex qlog_mutex_;
  Timestamp last_logged_ = 0;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace fullbrain
