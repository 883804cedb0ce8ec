#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"

namespace fullbrain {

/// Hop count; nullopt means "farther than the cutoff or unreachable".
using HopDistance = std::optional<std::uint8_t>;

inline constexpr std::uint8_t kDistanceCutoff = 3;
inline constexpr double kMaxDistance = 4.0;

/// Social proximity score: 1 - d/4 for stored distances, 0 when unreachable.
constexpr double user_similarity(HopDistance d) {
  return d ? 1.0 - static_cast<double>(*d) / kMaxDistance : 0.0;
}

struct CompressionReport {
  std::uint64_t stored_pairs = 0;
  std::uint64_t total_pairs = 0;
  double saving_ratio = 0.0;
};

inline std::size_t default_landmark_count(std::size_t entity_count) {
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(entity_count))));
  return std::min(entity_count, std::max<std::size_t>(16, root));
}

/// Top-k nodes by undirected degree; ties go to the smaller id.
inline std::vector<NodeIndex> select_landmarks(const GraphSnapshot& graph, std::size_t k) {
  std::vector<NodeIndex> order(graph.entity_count());
  std::iota(order.begin(), order.end(), NodeIndex{0});
  auto by_rank = [&](NodeIndex a, NodeIndex b) {
    if (graph.degree(a) != graph.degree(b)) return graph.degree(a) > graph.degree(b);
    return graph.entity(a).id < graph.entity(b).id;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), by_rank);
  order.resize(k);
  return order;
}

// Landmark table truncated at three hops. For every landmark, a BFS records
// each node within the cutoff; pair distances are approximated through the
// best shared landmark.
class DistanceIndex {
 public:
  struct Hop {
    std::uint32_t slot;  // landmark position
    std::uint8_t distance;
  };

  static DistanceIndex build(std::shared_ptr<const GraphSnapshot> graph, std::size_t k) {
    if (!graph || graph->empty()) throw Error(ErrorCode::EmptyGraph, "cannot index an empty graph");
    if (k < 1 || k > graph->entity_count()) {
      throw Error(ErrorCode::InvalidK, "landmark count " + std::to_string(k) + " outside [1, " +
                                           std::to_string(graph->entity_count()) + "]");
    }
    DistanceIndex idx;
    idx.graph_ = std::move(graph);
    idx.landmarks_ = select_landmarks(*idx.graph_, k);
    idx.by_node_.assign(idx.graph_->entity_count(), {});

    std::vector<std::uint8_t> seen(idx.graph_->entity_count(), kUnset);
    std::vector<NodeIndex> frontier;
    std::vector<NodeIndex> next;
    for (std::uint32_t slot = 0; slot < idx.landmarks_.size(); ++slot) {
      std::fill(seen.begin(), seen.end(), kUnset);
      const NodeIndex root = idx.landmarks_[slot];
      seen[root] = 0;
      idx.by_node_[root].push_back({slot, 0});
      frontier.assign(1, root);
      for (std::uint8_t depth = 1; depth <= kDistanceCutoff && !frontier.empty(); ++depth) {
        next.clear();
        for (NodeIndex u : frontier) {
          for (NodeIndex v : idx.graph_->adjacent(u)) {
            if (seen[v] != kUnset) continue;
            seen[v] = depth;
            idx.by_node_[v].push_back({slot, depth});
            next.push_back(v);
          }
        }
        frontier.swap(next);
      }
    }
    // Slots are visited in increasing order, so every per-node list is sorted.
    return idx;
  }

  static DistanceIndex build(std::shared_ptr<const GraphSnapshot> graph) {
    const std::size_t n = graph ? graph->entity_count() : 0;
    return build(std::move(graph), default_landmark_count(n));
  }

  const GraphSnapshot& graph() const { return *graph_; }
  std::shared_ptr<const GraphSnapshot> graph_ptr() const { return graph_; }
  const std::vector<NodeIndex>& landmarks() const { return landmarks_; }

  /// Stored (landmark slot, distance) pairs for a node, ascending by slot.
  const std::vector<Hop>& hops(NodeIndex node) const { return by_node_.at(node); }

  /// Stored distance from landmark `slot` to `node`, if within the cutoff.
  HopDistance stored(std::uint32_t slot, NodeIndex node) const {
    const auto& list = by_node_.at(node);
    auto it = std::lower_bound(list.begin(), list.end(), slot,
                               [](const Hop& h, std::uint32_t s) { return h.slot < s; });
    if (it == list.end() || it->slot != slot) return std::nullopt;
    return it->distance;
  }

  HopDistance approx_distance(NodeIndex u, NodeIndex e) const {
    if (u == e) return 0;
    const auto& a = by_node_.at(u);
    const auto& b = by_node_.at(e);
    unsigned best = kUnset;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
      if (ia->slot < ib->slot) {
        ++ia;
      } else if (ib->slot < ia->slot) {
        ++ib;
      } else {
        best = std::min<unsigned>(best, unsigned{ia->distance} + ib->distance);
        ++ia;
        ++ib;
      }
    }
    return clamp(best);
  }

  HopDistance approx_distance(std::string_view u, std::string_view e) const {
    return approx_distance(graph_->index_of(u), graph_->index_of(e));
  }

  double user_similarity(std::string_view u, std::string_view e) const {
    return fullbrain::user_similarity(approx_distance(u, e));
  }

  // Dense landmark profile of one source node; answers distance_to() in
  // O(stored hops of the target) without a merge.
  class Probe {
   public:
    HopDistance distance_to(NodeIndex e) const {
      if (e == source_) return 0;
      unsigned best = kUnset;
      for (const Hop& h : index_->by_node_[e]) {
        const std::uint8_t d = profile_[h.slot];
        if (d != kUnset) best = std::min<unsigned>(best, unsigned{d} + h.distance);
      }
      return clamp(best);
    }

   private:
    friend class DistanceIndex;
    const DistanceIndex* index_ = nullptr;
    NodeIndex source_ = 0;
    std::vector<std::uint8_t> profile_;
  };

  Probe probe(NodeIndex source) const {
    Probe p;
    p.index_ = this;
    p.source_ = source;
    p.profile_.assign(landmarks_.size(), kUnset);
    for (const Hop& h : by_node_.at(source)) p.profile_[h.slot] = h.distance;
    return p;
  }

  CompressionReport compression_report() const {
    CompressionReport r;
    for (const auto& list : by_node_) r.stored_pairs += list.size();
    r.total_pairs = static_cast<std::uint64_t>(landmarks_.size()) * by_node_.size();
    r.saving_ratio =
        r.total_pairs == 0 ? 0.0
                           : 1.0 - static_cast<double>(r.stored_pairs) / static_cast<double>(r.total_pairs);
    return r;
  }

  /// Canonical byte encoding: landmark ids followed by each landmark's table
  /// in node order. Identical snapshots and k produce identical bytes.
  std::string serialize() const {
    std::string out = "FBDI1\n";
    out += std::to_string(landmarks_.size()) + "\n";
    for (NodeIndex l : landmarks_) out += graph_->entity(l).id + "\n";
    for (std::uint32_t slot = 0; slot < landmarks_.size(); ++slot) {
      std::string row;
      std::size_t count = 0;
      for (NodeIndex n = 0; n < by_node_.size(); ++n) {
        if (auto d = stored(slot, n)) {
          row += graph_->entity(n).id + "\t" + std::to_string(*d) + "\n";
          ++count;
        }
      }
      out += std::to_string(count) + "\n" + row;
    }
    return out;
  }

  /// Inverse of serialize() against the snapshot it was built from.
  static DistanceIndex deserialize(std::shared_ptr<const GraphSnapshot> graph, std::string_view bytes) {
    DistanceIndex idx;
    idx.graph_ = std::move(graph);
    idx.by_node_.assign(idx.graph_->entity_count(), {});
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
      if (pos >= bytes.size()) throw Error(ErrorCode::ParseError, "truncated distance index");
      const auto end = bytes.find('\n', pos);
      if (end == std::string_view::npos) throw Error(ErrorCode::ParseError, "truncated distance index");
      std::string line(bytes.substr(pos, end - pos));
      pos = end + 1;
      return line;
    };
    auto to_count = [](const std::string& s) {
      try {
        return static_cast<std::size_t>(std::stoull(s));
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "bad count '" + s + "' in distance index");
      }
    };
    if (next_line() != "FBDI1") throw Error(ErrorCode::ParseError, "not a distance index");
    const std::size_t k = to_count(next_line());
    if (k < 1 || k > idx.graph_->entity_count()) throw Error(ErrorCode::InvalidK, "stored landmark count");
    for (std::size_t i = 0; i < k; ++i) idx.landmarks_.push_back(idx.graph_->index_of(next_line()));
    for (std::uint32_t slot = 0; slot < k; ++slot) {
      const std::size_t count = to_count(next_line());
      for (std::size_t i = 0; i < count; ++i) {
        const std::string line = next_line();
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(ErrorCode::ParseError, "bad distance row");
        const auto d = to_count(line.substr(tab + 1));
        if (d > kDistanceCutoff) throw Error(ErrorCode::ParseError, "stored distance above cutoff");
        idx.by_node_[idx.graph_->index_of(line.substr(0, tab))].push_back(
            {slot, static_cast<std::uint8_t>(d)});
      }
    }
    return idx;
  }

 private:
  static constexpr std::uint8_t kUnset = std::numeric_limits<std::uint8_t>::max();

  static HopDistance clamp(unsigned best) {
    if (best > kDistanceCutoff) return std::nullopt;
    return static_cast<std::uint8_t>(best);
  }

  std::shared_ptr<const GraphSnapshot> graph_;
  std::vector<NodeIndex> landmarks_;
  std::vector<std::vector<Hop>> by_node_;
};

}  // namespace fullbrain
