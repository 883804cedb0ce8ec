#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "fullbrain/distance_index.hpp"
#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"
#include "fullbrain/service.hpp"
#include "fullbrain/stats.hpp"

namespace fullbrain::bench {

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

struct KindMix {
  std::size_t users = 0, posts = 0, sources = 0, concepts = 0, courses = 0, origins = 0, tags = 0, playlists = 0;
  std::size_t total() const { return users + posts + sources + concepts + courses + origins + tags + playlists; }
};

/// 40% users, 20% posts, 15% sources, 15% concepts, 8% courses and 2% split
/// across origins, tags and playlists. Rounding leftovers go to users.
inline KindMix kind_mix(std::size_t entities) {
  KindMix m;
  m.posts = entities * 20 / 100;
  m.sources = entities * 15 / 100;
  m.concepts = entities * 15 / 100;
  m.courses = entities * 8 / 100;
  const std::size_t small = entities * 2 / 100;
  m.origins = small - 2 * (small / 3);
  m.tags = small / 3;
  m.playlists = small / 3;
  m.users = entities - (m.posts + m.sources + m.concepts + m.courses + small);
  return m;
}

inline std::uint64_t max_simple_edges(std::size_t entities) {
  const auto n = static_cast<std::uint64_t>(entities);
  return n < 2 ? 0 : n * (n - 1) / 2;
}

namespace detail {

inline constexpr std::array<const char*, 24> kFirstNames = {
    "Vittoria", "Marco",   "Pavel",  "Anna",   "Lars",    "Sofia",   "Jonas",  "Maria",
    "Ahmed",    "Chen",   "Freja",  "Mads",   "Giulia",  "Tobias",  "Elena",  "Nikos",
    "Ida",      "Omar",   "Laura",  "Pietro", "Hannah",  "Rasmus",  "Yuki",   "Clara"};
inline constexpr std::array<const char*, 24> kLastNames = {
    "Castellani", "Ferrari", "Fotiou", "Jensen", "Nielsen", "Rossi",  "Hansen",  "Papadopoulos",
    "Larsen",     "Bianchi", "Schmidt",  "Wang",   "Kowalski", "Moreau", "Andersen", "Silva",
    "Costa",      "Berg",    "Novak",    "Ferrari", "Lindqvist", "Okafor", "Tanaka", "Ricci"};
inline constexpr std::array<const char*, 32> kTopics = {
    "PCA",            "Principal Component Analysis", "Gradient Descent", "Linear Regression",
    "Logistic Regression", "Neural Networks",        "Backpropagation",  "Bayesian Inference",
    "Decision Trees", "Random Forests",              "Support Vector Machines", "Clustering",
    "K Means",        "Graph Theory",                "Dynamic Programming", "Linear Algebra",
    "Eigenvalues",    "Probability",                 "Hypothesis Testing", "Fourier Transform",
    "Convolution",    "Recurrent Networks",          "Attention",         "Reinforcement Learning",
    "Markov Chains",  "Information Retrieval",       "Hash Tables",       "Sorting Algorithms",
    "Compilers",      "Operating Systems",           "Databases",         "Cryptography"};
inline constexpr std::array<const char*, 12> kOrigins = {
    "DTU Technical University of Denmark", "University of Copenhagen", "KTH Royal Institute of Technology",
    "ETH Zurich", "Politecnico di Milano", "TU Delft", "Aalborg University", "Aarhus University",
    "University of Oslo", "EPFL", "Imperial College London", "TU Munich"};
inline constexpr std::array<const char*, 16> kWords = {
    "intro", "notes", "exam", "lecture", "exercise", "proof", "example", "summary",
    "video", "slides", "question", "answer", "tutorial", "project", "paper", "review"};
inline constexpr std::array<const char*, 4> kPostPatterns = {"Question about ", "Notes on ", "Help with ",
                                                             "Thoughts on "};
inline constexpr std::array<const char*, 4> kSourcePatterns = {" explained", " tutorial", " lecture notes",
                                                               " cheat sheet"};

inline std::string relation_for(EntityKind from, EntityKind to) {
  auto is = [&](EntityKind a, EntityKind b) { return from == a && to == b; };
  if (from == EntityKind::User) {
    switch (to) {
      case EntityKind::User:
      case EntityKind::Course:
      case EntityKind::Concept: return "includes";
      case EntityKind::Post: return "authored";
      case EntityKind::Source: return "shared";
      case EntityKind::Origin: return "affiliated_with";
      case EntityKind::Playlist: return "created";
      case EntityKind::Tag: return "follows_tag";
    }
  }
  if (is(EntityKind::Source, EntityKind::Tag) || is(EntityKind::Post, EntityKind::Tag)) return "tagged_with";
  if (from == EntityKind::Source && to == EntityKind::Concept) return "prerequisite";
  if (to == EntityKind::Course || to == EntityKind::Concept) return "posted_in";
  if (to == EntityKind::Playlist) return "in_playlist";
  return "related";
}

}  // namespace detail

/// Writes a deterministic ingest file with exactly `entities` entities and
/// `relationships` undirected-simple edges. Edges follow preferential
/// attachment over a seeded arrival order.
inline void generate_dataset(std::uint64_t seed, std::size_t entities, std::size_t relationships, std::ostream& out) {
  using namespace detail;
  if (relationships > max_simple_edges(entities)) {
    throw Error(ErrorCode::InfeasibleCounts, std::to_string(relationships) + " relationships exceed the " +
                                                 std::to_string(max_simple_edges(entities)) + " possible among " +
                                                 std::to_string(entities) + " entities");
  }
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng)); };
  const KindMix mix = kind_mix(entities);

  std::vector<EntityKind> kinds;
  kinds.reserve(entities);
  auto push = [&](EntityKind k, std::size_t count) { kinds.insert(kinds.end(), count, k); };
  push(EntityKind::User, mix.users);
  push(EntityKind::Post, mix.posts);
  push(EntityKind::Source, mix.sources);
  push(EntityKind::Concept, mix.concepts);
  push(EntityKind::Course, mix.courses);
  push(EntityKind::Origin, mix.origins);
  push(EntityKind::Tag, mix.tags);
  push(EntityKind::Playlist, mix.playlists);

  std::vector<Entity> nodes(entities);
  std::array<std::size_t, 8> seq{};
  constexpr Timestamp kBase = 1'600'000'000;
  for (std::size_t i = 0; i < entities; ++i) {
    Entity& e = nodes[i];
    e.kind = kinds[i];
    const auto k = static_cast<std::size_t>(e.kind);
    static constexpr std::array<const char*, 8> kPrefix = {"u", "c", "k", "s", "p", "o", "t", "pl"};
    e.id = kPrefix[k] + std::to_string(seq[k]++);
    e.created_at = kBase + static_cast<Timestamp>(i) * 60;
    const std::string topic = kTopics[pick(kTopics.size())];
    switch (e.kind) {
      case EntityKind::User:
        e.name = std::string(kFirstNames[pick(kFirstNames.size())]) + " " + kLastNames[pick(kLastNames.size())];
        e.fields["affiliation"] = kOrigins[pick(kOrigins.size())];
        e.description = std::string("student interested in ") + topic;
        break;
      case EntityKind::Post:
        e.name = kPostPatterns[pick(kPostPatterns.size())] + topic;
        e.description = std::string(kWords[pick(kWords.size())]) + " " + kWords[pick(kWords.size())];
        break;
      case EntityKind::Source:
        e.name = topic + kSourcePatterns[pick(kSourcePatterns.size())];
        e.fields["tags"] = std::string(kWords[pick(kWords.size())]) + " " + kTopics[pick(kTopics.size())];
        break;
      case EntityKind::Concept:
        e.name = topic;
        e.description = std::string("concept space for ") + topic;
        break;
      case EntityKind::Course:
        e.name = std::to_string(10000 + pick(90000)) + " " + topic;
        e.fields["affiliation"] = kOrigins[pick(kOrigins.size())];
        break;
      case EntityKind::Origin:
        e.name = kOrigins[pick(kOrigins.size())];
        break;
      case EntityKind::Tag:
        e.name = kWords[pick(kWords.size())];
        break;
      case EntityKind::Playlist:
        e.name = std::string(kWords[pick(kWords.size())]) + " " + topic + " playlist";
        break;
    }
  }

  // Arrival order for attachment: early arrivals become hubs.
  std::vector<std::size_t> order(entities);
  for (std::size_t i = 0; i < entities; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::unordered_set<std::size_t>> adj(entities);
  std::vector<std::size_t> urn;  // node repeated (degree + 1) times
  urn.reserve(entities + 2 * relationships);
  std::vector<Edge> edges;
  edges.reserve(relationships);
  std::size_t remaining = relationships;
  for (std::size_t pos = 0; pos < entities; ++pos) {
    const std::size_t node = order[pos];
    if (pos > 0 && remaining > 0) {
      const std::size_t left = entities - pos;
      const std::size_t want = std::min<std::size_t>(pos, (remaining + left - 1) / left);
      std::size_t added = 0;
      std::size_t misses = 0;
      while (added < want) {
        std::size_t target;
        if (misses < 64 * want) {
          target = urn[pick(urn.size())];
          if (target == node || adj[node].count(target)) {
            ++misses;
            continue;
          }
        } else {
          std::vector<std::size_t> open;
          for (std::size_t p = 0; p < pos; ++p) {
            if (!adj[node].count(order[p])) open.push_back(order[p]);
          }
          target = open[pick(open.size())];
        }
        adj[node].insert(target);
        adj[target].insert(node);
        urn.push_back(target);
        urn.push_back(node);
        Edge e;
        e.src = nodes[node].id;
        e.dst = nodes[target].id;
        e.relation = relation_for(nodes[node].kind, nodes[target].kind);
        e.created_at = std::max(nodes[node].created_at, nodes[target].created_at) + 1;
        edges.push_back(std::move(e));
        ++added;
      }
      remaining -= added;
    }
    urn.push_back(node);
  }
  if (remaining != 0) throw Error(ErrorCode::InfeasibleCounts, "edge budget could not be placed");

  for (const Entity& e : nodes) out << to_json(e).dump() << '\n';
  for (const Edge& e : edges) out << to_json(e).dump() << '\n';
}

inline void generate_dataset(std::uint64_t seed, std::size_t entities, std::size_t relationships,
                             const std::filesystem::path& path) {
  std::ostringstream buf;
  generate_dataset(seed, entities, relationships, buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << buf.str();
}

// ---------------------------------------------------------------------------
// Load harness
// ---------------------------------------------------------------------------

inline constexpr std::array<std::size_t, 7> kDefaultLevels = {1, 2, 4, 8, 16, 32, 64};

struct BenchPlan {
  Endpoint endpoint = Endpoint::QS;
  std::size_t total_requests = 1000;
  std::vector<std::size_t> levels{kDefaultLevels.begin(), kDefaultLevels.end()};
  std::vector<std::string> users;    // client c acts as users[c % size]
  std::vector<std::string> queries;  // cycled per request; unused for QS

  /// Requests issued by each client at concurrency n.
  std::size_t per_client(std::size_t n) const { return total_requests / n; }
};

struct BenchLevel {
  std::size_t n = 0;
  std::size_t count = 0;     // requests issued
  std::size_t failures = 0;  // non-200 or transport errors
  LatencySummary latency;    // over successful requests
};

struct BenchReport {
  Endpoint endpoint = Endpoint::QS;
  std::size_t entities = 0;
  std::size_t relationships = 0;
  std::vector<BenchLevel> levels;
  std::optional<CompressionReport> compression;

  std::size_t failures() const {
    std::size_t f = 0;
    for (const auto& l : levels) f += l.failures;
    return f;
  }
};

/// Query texts: name prefixes for autocomplete, full names with an injected
/// single-character typo on every other query for search.
inline std::vector<std::string> make_query_corpus(const GraphSnapshot& graph, Endpoint endpoint, std::uint64_t seed,
                                                  std::size_t size = 256) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng)); };
  std::vector<NodeIndex> pool;
  for (NodeIndex i = 0; i < graph.entity_count(); ++i) {
    const EntityKind k = graph.entity(i).kind;
    const bool qac_kind = k == EntityKind::User || k == EntityKind::Concept || k == EntityKind::Course;
    const bool search_kind = qac_kind || k == EntityKind::Source || k == EntityKind::Post;
    if (endpoint == Endpoint::QAC ? qac_kind : search_kind) pool.push_back(i);
  }
  std::vector<std::string> out;
  if (pool.empty()) return out;
  for (std::size_t i = 0; i < size; ++i) {
    std::string name = graph.entity(pool[pick(pool.size())]).name;
    if (endpoint == Endpoint::QAC) {
      const std::size_t len = std::min<std::size_t>(name.size(), 3 + pick(6));
      name = name.substr(0, len);
    } else if (i % 2 == 1 && name.size() > 2) {
      const std::size_t at = pick(name.size());
      if (std::isalpha(static_cast<unsigned char>(name[at]))) name[at] = static_cast<char>('a' + pick(26));
    }
    out.push_back(std::move(name));
  }
  return out;
}

inline std::vector<std::string> sample_users(const GraphSnapshot& graph, std::uint64_t seed, std::size_t count) {
  std::vector<std::string> users;
  for (const Entity& e : graph.entities()) {
    if (e.kind == EntityKind::User) users.push_back(e.id);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(users.begin(), users.end(), rng);
  if (users.size() > count) users.resize(count);
  return users;
}

namespace detail {

inline std::string request_path(Endpoint endpoint, const std::string& user, const std::string& query) {
  const std::string u = httplib::detail::encode_query_param(user);
  switch (endpoint) {
    case Endpoint::QS: return "/qs?user=" + u;
    case Endpoint::QAC: return "/qac?user=" + u + "&q=" + httplib::detail::encode_query_param(query);
    case Endpoint::Search: return "/search?user=" + u + "&q=" + httplib::detail::encode_query_param(query);
    default: break;
  }
  throw Error(ErrorCode::OutOfRangeInput, "bench supports qs, qac and search only");
}

}  // namespace detail

/// Drives `target` (e.g. "http://127.0.0.1:8080") level by level. Each of the
/// n clients sends its share back-to-back with no think time; latency is
/// measured client-side from send to full response.
inline BenchReport run_bench(const BenchPlan& plan, const std::string& target) {
  if (plan.users.empty()) throw Error(ErrorCode::OutOfRangeInput, "bench plan needs at least one user");
  if (plan.endpoint != Endpoint::QS && plan.queries.empty()) {
    throw Error(ErrorCode::OutOfRangeInput, "bench plan needs a query corpus");
  }
  BenchReport report;
  report.endpoint = plan.endpoint;
  {
    httplib::Client probe(target);
    probe.set_connection_timeout(5);
    auto res = probe.Get("/health");
    if (!res || res->status != 200) throw Error(ErrorCode::ServiceUnreachable, target + " is not healthy");
    const auto health = nlohmann::json::parse(res->body);
    report.entities = health.value("entities", std::size_t{0});
    report.relationships = health.value("edges", std::size_t{0});
  }

  for (std::size_t n : plan.levels) {
    if (n == 0) throw Error(ErrorCode::OutOfRangeInput, "concurrency level must be positive");
    const std::size_t share = plan.per_client(n);
    std::vector<std::vector<double>> latencies(n);
    std::vector<std::size_t> failures(n, 0);
    std::vector<std::thread> clients;
    clients.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
      clients.emplace_back([&, c] {
        httplib::Client client(target);
        client.set_keep_alive(true);
        client.set_tcp_nodelay(true);
        client.set_connection_timeout(30);
        client.set_read_timeout(300);
        const std::string& user = plan.users[c % plan.users.size()];
        for (std::size_t i = 0; i < share; ++i) {
          const std::string query =
              plan.queries.empty() ? std::string() : plan.queries[(c * share + i) % plan.queries.size()];
          const std::string path = detail::request_path(plan.endpoint, user, query);
          const auto start = std::chrono::steady_clock::now();
          auto res = client.Get(path);
          const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          if (res && res->status == 200) {
            latencies[c].push_back(dt);
          } else {
            ++failures[c];
          }
        }
      });
    }
    for (auto& t : clients) t.join();

    BenchLevel level;
    level.n = n;
    level.count = n * share;
    std::vector<double> all;
    for (std::size_t c = 0; c < n; ++c) {
      all.insert(all.end(), latencies[c].begin(), latencies[c].end());
      level.failures += failures[c];
    }
    level.latency = summarize(std::move(all));
    report.levels.push_back(level);
  }
  return report;
}

inline void write_csv(const BenchReport& report, std::ostream& out, bool header = true) {
  if (header) out << "endpoint,n,count,avg_s,p50_s,p95_s,max_s\n";
  for (const auto& l : report.levels) {
    char line[256];
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(report.endpoint)).c_str(),
                  l.n, l.count, l.latency.avg, l.latency.p50, l.latency.p95, l.latency.max);
    out << line;
  }
}

inline nlohmann::ordered_json to_json(const BenchReport& report) {
  nlohmann::ordered_json levels = nlohmann::ordered_json::array();
  for (const auto& l : report.levels) {
    auto j = fullbrain::to_json(l.latency);
    j["count"] = l.count;
    nlohmann::ordered_json row{{"n", l.n}};
    row.update(j);
    row["failures"] = l.failures;
    levels.push_back(std::move(row));
  }
  nlohmann::ordered_json j{{"endpoint", to_string(report.endpoint)},
                           {"dataset", {{"entities", report.entities}, {"relationships", report.relationships}}},
                           {"levels", std::move(levels)}};
  if (report.compression) {
    j["compression"] = {{"stored_pairs", report.compression->stored_pairs},
                        {"total_pairs", report.compression->total_pairs},
                        {"saving_ratio", report.compression->saving_ratio},
                        {"reference_saving_ratio", 0.8}};
  }
  return j;
}

}  // namespace fullbrain::bench
