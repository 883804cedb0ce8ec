#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fullbrain/error.hpp"

namespace fullbrain {

/// UTC epoch seconds.
using Timestamp = std::int64_t;

/// Dense position of an entity inside a snapshot.
using NodeIndex = std::uint32_t;

enum class EntityKind : std::uint8_t { User, Concept, Course, Source, Post, Origin, Tag, Playlist };

inline constexpr std::array<EntityKind, 8> kAllKinds = {
    EntityKind::User,   EntityKind::Concept, EntityKind::Course, EntityKind::Source,
    EntityKind::Post,   EntityKind::Origin,  EntityKind::Tag,    EntityKind::Playlist};

constexpr std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::User: return "user";
    case EntityKind::Concept: return "concept";
    case EntityKind::Course: return "course";
    case EntityKind::Source: return "source";
    case EntityKind::Post: return "post";
    case EntityKind::Origin: return "origin";
    case EntityKind::Tag: return "tag";
    case EntityKind::Playlist: return "playlist";
  }
  return "unknown";
}

inline std::optional<EntityKind> parse_entity_kind(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (EntityKind kind : kAllKinds) {
    if (to_string(kind) == lowered) return kind;
  }
  return std::nullopt;
}

struct Entity {
  std::string id;
  EntityKind kind = EntityKind::User;
  std::string name;
  std::string description;
  /// Extra labelled text fields (affiliation, tags, ...). Labels are kept verbatim.
  std::map<std::string, std::string> fields;
  Timestamp created_at = 0;
};

struct Edge {
  std::string src;
  std::string dst;
  std::string relation;
  Timestamp created_at = 0;
};

struct IngestCounts {
  std::size_t entities = 0;
  std::size_t edges = 0;
  friend bool operator==(const IngestCounts&, const IngestCounts&) = default;
};

class Graph;

// Immutable view of the graph. Adjacency is the undirected projection of all
// directed edges, with each neighbour listed once no matter how many relations
// connect the pair.
class GraphSnapshot {
 public:
  std::size_t entity_count() const { return entities_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return entities_.empty(); }

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Entity& entity(NodeIndex node) const { return entities_.at(node); }

  std::optional<NodeIndex> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeIndex index_of(std::string_view id) const {
    if (auto node = find(id)) return *node;
    throw Error(ErrorCode::UnknownId, "no entity with id '" + std::string(id) + "'");
  }

  bool contains(std::string_view id) const { return find(id).has_value(); }

  /// Neighbour indices, ascending.
  std::span<const NodeIndex> adjacent(NodeIndex node) const { return adjacency_.at(node); }

  std::size_t degree(NodeIndex node) const { return adjacency_.at(node).size(); }

  /// Undirected neighbour ids, sorted by id.
  std::vector<std::string> neighbors(std::string_view id) const {
    std::vector<std::string> out;
    for (NodeIndex n : adjacent(index_of(id))) out.push_back(entities_[n].id);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Full-graph consistency check: symmetric adjacency, no dangling or
  /// self-referencing edges, edge list consistent with adjacency.
  bool audit() const {
    if (adjacency_.size() != entities_.size()) return false;
    for (NodeIndex u = 0; u < adjacency_.size(); ++u) {
      const auto& row = adjacency_[u];
      if (!std::is_sorted(row.begin(), row.end())) return false;
      if (std::adjacent_find(row.begin(), row.end()) != row.end()) return false;
      for (NodeIndex v : row) {
        if (v >= adjacency_.size() || v == u) return false;
        const auto& back = adjacency_[v];
        if (!std::binary_search(back.begin(), back.end(), u)) return false;
      }
    }
    for (const Edge& e : edges_) {
      auto s = find(e.src);
      auto d = find(e.dst);
      if (!s || !d || *s == *d) return false;
      if (!std::binary_search(adjacency_[*s].begin(), adjacency_[*s].end(), *d)) return false;
    }
    return true;
  }

 private:
  friend class Graph;

  std::vector<Entity> entities_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<std::vector<NodeIndex>> adjacency_;
  std::vector<Edge> edges_;
};

// Mutable graph store. Writers must be serialized by the caller; readers take
// a snapshot() and may share it across threads.
class Graph {
 public:
  Graph() = default;

  std::string add_entity(Entity entity) {
    if (entity.name.empty()) throw Error(ErrorCode::EmptyName, "entity name must not be empty");
    if (entity.id.empty()) entity.id = fresh_id(entity.kind);
    if (data_.contains(entity.id)) {
      throw Error(ErrorCode::DuplicateId, "entity '" + entity.id + "' already exists");
    }
    const auto node = static_cast<NodeIndex>(data_.entities_.size());
    data_.index_.emplace(entity.id, node);
    data_.entities_.push_back(std::move(entity));
    data_.adjacency_.emplace_back();
    ++revision_;
    return data_.entities_.back().id;
  }

  void add_edge(Edge edge) {
    auto src = data_.find(edge.src);
    auto dst = data_.find(edge.dst);
    if (!src || !dst) {
      throw Error(ErrorCode::MissingEndpoint,
                  "edge " + edge.src + " -> " + edge.dst + " references an unknown entity");
    }
    if (*src == *dst) throw Error(ErrorCode::SelfLoop, "self-loop on '" + edge.src + "'");
    if (!directed_.emplace(*src, *dst, edge.relation).second) {
      throw Error(ErrorCode::DuplicateEdge,
                  edge.src + " -[" + edge.relation + "]-> " + edge.dst + " already exists");
    }
    link(*src, *dst);
    link(*dst, *src);
    data_.edges_.push_back(std::move(edge));
    ++revision_;
  }

  std::vector<std::string> neighbors(std::string_view id) const { return data_.neighbors(id); }
  bool contains(std::string_view id) const { return data_.contains(id); }
  std::size_t entity_count() const { return data_.entity_count(); }
  std::size_t edge_count() const { return data_.edge_count(); }

  /// Bumped on every successful write; consumers use it to detect stale indexes.
  std::uint64_t revision() const { return revision_; }

  std::shared_ptr<const GraphSnapshot> snapshot() const {
    if (!cached_ || cached_revision_ != revision_) {
      cached_ = std::make_shared<const GraphSnapshot>(data_);
      cached_revision_ = revision_;
    }
    return cached_;
  }

  /// Loads a JSON-lines file. Either every record is committed or none is.
  IngestCounts ingest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return ingest(in);
  }

  IngestCounts ingest(std::istream& in) {
    Graph staged = *this;
    IngestCounts counts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what(), line_no);
      }
      try {
        const std::string type = required_string(record, "t", line_no);
        if (type == "entity") {
          staged.add_entity(parse_entity(record, line_no));
          ++counts.entities;
        } else if (type == "edge") {
          staged.add_edge(parse_edge(record, line_no));
          ++counts.edges;
        } else {
          throw Error(ErrorCode::ParseError, "unknown record type '" + type + "'", line_no);
        }
      } catch (const Error& e) {
        if (e.line()) throw;
        const ErrorCode code =
            e.code() == ErrorCode::MissingEndpoint ? ErrorCode::ReferentialError : e.code();
        throw Error(code, e.message(), line_no);
      }
    }
    *this = std::move(staged);
    return counts;
  }

 private:
  static std::string required_string(const nlohmann::json& j, const char* key, std::size_t line) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
      throw Error(ErrorCode::ParseError, std::string("missing string field '") + key + "'", line);
    }
    return j[key].get<std::string>();
  }

  static Timestamp optional_ts(const nlohmann::json& j, std::size_t line) {
    if (!j.contains("ts") || j["ts"].is_null()) return 0;
    if (!j["ts"].is_number_integer()) throw Error(ErrorCode::ParseError, "'ts' must be an integer", line);
    return j["ts"].get<Timestamp>();
  }

  static Entity parse_entity(const nlohmann::json& j, std::size_t line) {
    Entity e;
    e.id = required_string(j, "id", line);
    const std::string kind = required_string(j, "kind", line);
    auto parsed = parse_entity_kind(kind);
    if (!parsed) throw Error(ErrorCode::ParseError, "unknown kind '" + kind + "'", line);
    e.kind = *parsed;
    e.name = required_string(j, "name", line);
    if (j.contains("description") && !j["description"].is_null()) {
      e.description = required_string(j, "description", line);
    }
    if (j.contains("fields") && !j["fields"].is_null()) {
      if (!j["fields"].is_object()) throw Error(ErrorCode::ParseError, "'fields' must be an object", line);
      for (const auto& [label, value] : j["fields"].items()) {
        if (!value.is_string()) {
          throw Error(ErrorCode::ParseError, "field '" + label + "' must be a string", line);
        }
        e.fields.emplace(label, value.get<std::string>());
      }
    }
    e.created_at = optional_ts(j, line);
    return e;
  }

  static Edge parse_edge(const nlohmann::json& j, std::size_t line) {
    Edge e;
    e.src = required_string(j, "src", line);
    e.dst = required_string(j, "dst", line);
    e.relation = required_string(j, "rel", line);
    e.created_at = optional_ts(j, line);
    return e;
  }

  void link(NodeIndex from, NodeIndex to) {
    auto& row = data_.adjacency_[from];
    auto it = std::lower_bound(row.begin(), row.end(), to);
    if (it == row.end() || *it != to) row.insert(it, to);
  }

  std::string fresh_id(EntityKind kind) const {
    std::size_t n = data_.entity_count();
    std::string id;
    do {
      id = std::string(to_string(kind)) + "-" + std::to_string(n++);
    } while (data_.contains(id));
    return id;
  }

  GraphSnapshot data_;
  std::set<std::tuple<NodeIndex, NodeIndex, std::string>> directed_;
  std::uint64_t revision_ = 0;
  mutable std::shared_ptr<const GraphSnapshot> cached_;
  mutable std::uint64_t cached_revision_ = 0;
};

/// Serializes an entity as one ingest-format line.
inline nlohmann::ordered_json to_json(const Entity& e) {
  nlohmann::ordered_json fields = nlohmann::ordered_json::object();
  for (const auto& [label, value] : e.fields) fields[label] = value;
  return {{"t", "entity"}, {"id", e.id},         {"kind", to_string(e.kind)}, {"name", e.name},
          {"description", e.description}, {"fields", fields}, {"ts", e.created_at}};
}

inline nlohmann::ordered_json to_json(const Edge& e) {
  return {{"t", "edge"}, {"src", e.src}, {"dst", e.dst}, {"rel", e.relation}, {"ts", e.created_at}};
}

}  // namespace fullbrain
