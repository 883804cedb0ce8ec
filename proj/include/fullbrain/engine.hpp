#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fullbrain/distance_index.hpp"
#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"
#include "fullbrain/text_index.hpp"

namespace fullbrain {

/// Relative importance of topical (alpha) and social (beta) similarity.
struct SimilarityWeights {
  double alpha = 1.0;
  double beta = 1.0;
};

inline void validate(const SimilarityWeights& w) {
  if (!(w.alpha > 0.0) || !(w.beta > 0.0)) {
    throw Error(ErrorCode::OutOfRangeInput, "alpha and beta must be positive");
  }
}

/// (alpha * topical + beta * social) / (alpha + beta).
inline double overall_similarity(const SimilarityWeights& w, double topical, double social) {
  validate(w);
  if (!(topical >= 0.0 && topical <= 1.0) || !(social >= 0.0 && social <= 1.0)) {
    throw Error(ErrorCode::OutOfRangeInput, "similarity components must lie in [0, 1]");
  }
  return (w.alpha * topical + w.beta * social) / (w.alpha + w.beta);
}

struct ScoredResult {
  std::string id;
  EntityKind kind = EntityKind::User;
  double overall = 0.0;
  double topical = 0.0;
  double social = 0.0;
};

inline constexpr std::array<EntityKind, 5> kSearchKinds = {
    EntityKind::User, EntityKind::Concept, EntityKind::Course, EntityKind::Source, EntityKind::Post};
inline constexpr std::array<EntityKind, 3> kAutocompleteKinds = {EntityKind::User, EntityKind::Concept,
                                                                 EntityKind::Course};

inline constexpr std::size_t kDefaultSearchLimit = 25;
inline constexpr std::size_t kDefaultAutocompleteLimit = 10;

/// Position of a kind in the tie-break order User < Concept < Course < Source < Post.
constexpr int kind_order(EntityKind kind) {
  for (std::size_t i = 0; i < kSearchKinds.size(); ++i) {
    if (kSearchKinds[i] == kind) return static_cast<int>(i);
  }
  return static_cast<int>(kSearchKinds.size());
}

/// Ranking order: overall score descending, then kind order, then id.
inline bool ranks_before(const ScoredResult& a, const ScoredResult& b) {
  if (a.overall != b.overall) return a.overall > b.overall;
  if (kind_order(a.kind) != kind_order(b.kind)) return kind_order(a.kind) < kind_order(b.kind);
  return a.id < b.id;
}

struct SimilarityBreakdown {
  double partial = 0.0;
  double exact = 0.0;
  double topical = 0.0;
  double social = 0.0;
  double overall = 0.0;
};

// Search and autocomplete over one immutable snapshot. Thread-safe for
// concurrent reads.
class SearchEngine {
 public:
  SearchEngine(DistanceIndex distances, TextIndex text, SimilarityWeights weights = {})
      : distances_(std::move(distances)), text_(std::move(text)), weights_(weights) {
    validate(weights_);
  }

  static SearchEngine build(std::shared_ptr<const GraphSnapshot> graph, std::size_t landmarks = 0,
                            SimilarityWeights weights = {}, FieldWeights fields = {}) {
    if (!graph || graph->empty()) throw Error(ErrorCode::EmptyGraph, "cannot index an empty graph");
    auto distances = landmarks == 0 ? DistanceIndex::build(graph) : DistanceIndex::build(graph, landmarks);
    auto text = TextIndex::build(graph, fields);
    return SearchEngine(std::move(distances), std::move(text), weights);
  }

  const GraphSnapshot& graph() const { return distances_.graph(); }
  const DistanceIndex& distances() const { return distances_; }
  const TextIndex& text() const { return text_; }
  const SimilarityWeights& weights() const { return weights_; }

  /// Topical score = mean of trigram and tf-idf similarity; kinds default to
  /// user, concept, course, source and post.
  std::vector<ScoredResult> search(std::string_view searcher, std::string_view query,
                                   std::size_t limit = kDefaultSearchLimit,
                                   std::span<const EntityKind> kinds = kSearchKinds) const {
    for (EntityKind k : kinds) {
      if (kind_order(k) >= static_cast<int>(kSearchKinds.size())) {
        throw Error(ErrorCode::OutOfRangeInput, std::string("kind '") + std::string(to_string(k)) +
                                                    "' is not searchable");
      }
    }
    const NodeIndex user = require_user(searcher);
    require_query(query);
    const auto grams = text_.resolve_grams(query);
    const auto vec = text_.vectorize(query);
    const auto probe = distances_.probe(user);
    std::vector<ScoredResult> out;
    for (NodeIndex node : text_.candidates(grams, vec)) {
      const Entity& e = graph().entity(node);
      if (std::find(kinds.begin(), kinds.end(), e.kind) == kinds.end()) continue;
      const double topical = (text_.partial_similarity(grams, node) + text_.exact_similarity(vec, node)) / 2.0;
      if (topical == 0.0) continue;
      out.push_back(score(e, topical, probe.distance_to(node)));
    }
    return top(std::move(out), limit);
  }

  /// Trigram-only topical score over users, concepts and courses.
  std::vector<ScoredResult> autocomplete(std::string_view searcher, std::string_view prefix,
                                         std::size_t limit = kDefaultAutocompleteLimit) const {
    const NodeIndex user = require_user(searcher);
    require_query(prefix);
    const auto grams = text_.resolve_grams(prefix);
    const auto probe = distances_.probe(user);
    std::vector<ScoredResult> out;
    for (NodeIndex node : text_.gram_candidates(grams)) {
      const Entity& e = graph().entity(node);
      if (std::find(kAutocompleteKinds.begin(), kAutocompleteKinds.end(), e.kind) == kAutocompleteKinds.end()) {
        continue;
      }
      const double topical = text_.partial_similarity(grams, node);
      if (topical == 0.0) continue;
      out.push_back(score(e, topical, probe.distance_to(node)));
    }
    return top(std::move(out), limit);
  }

  /// Full score breakdown for one (searcher, query, entity) triple.
  SimilarityBreakdown explain(std::string_view searcher, std::string_view query, std::string_view entity) const {
    const NodeIndex user = require_user(searcher);
    const NodeIndex node = graph().index_of(entity);
    SimilarityBreakdown b;
    b.partial = text_.partial_similarity(text_.resolve_grams(query), node);
    b.exact = text_.exact_similarity(text_.vectorize(query), node);
    b.topical = (b.partial + b.exact) / 2.0;
    b.social = user_similarity(distances_.approx_distance(user, node));
    b.overall = overall_similarity(weights_, b.topical, b.social);
    return b;
  }

 private:
  NodeIndex require_user(std::string_view id) const {
    auto node = graph().find(id);
    if (!node || graph().entity(*node).kind != EntityKind::User) {
      throw Error(ErrorCode::UnknownUser, "no user with id '" + std::string(id) + "'");
    }
    return *node;
  }

  static void require_query(std::string_view q) {
    if (normalize(q).empty()) throw Error(ErrorCode::EmptyQuery, "query is empty after normalization");
  }

  ScoredResult score(const Entity& e, double topical, HopDistance d) const {
    ScoredResult r;
    r.id = e.id;
    r.kind = e.kind;
    r.topical = topical;
    r.social = user_similarity(d);
    r.overall = (weights_.alpha * r.topical + weights_.beta * r.social) / (weights_.alpha + weights_.beta);
    return r;
  }

  static std::vector<ScoredResult> top(std::vector<ScoredResult> results, std::size_t limit) {
    if (limit == 0) throw Error(ErrorCode::OutOfRangeInput, "limit must be at least 1");
    const auto keep = std::min(limit, results.size());
    std::partial_sort(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(keep), results.end(),
                      ranks_before);
    results.resize(keep);
    return results;
  }

  DistanceIndex distances_;
  TextIndex text_;
  SimilarityWeights weights_;
};

}  // namespace fullbrain
