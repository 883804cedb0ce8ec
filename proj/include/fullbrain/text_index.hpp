#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"

namespace fullbrain {

inline constexpr std::size_t kGramLength = 3;

/// Lowercase ASCII, map ASCII punctuation/whitespace/control to a single
/// space, trim. Non-ASCII bytes pass through unchanged.
inline std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool separator = c < 0x80 && !std::isalnum(c);
    if (separator) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  const std::string norm = normalize(text);
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < norm.size()) {
    auto end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    tokens.emplace_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

/// Sorted, duplicate-free set of trigrams.
using QGramSet = std::vector<std::string>;

/// Trigrams of the normalized text padded with "^^" and "$$".
inline QGramSet qgrams(std::string_view text) {
  const std::string norm = normalize(text);
  if (norm.empty()) return {};
  const std::string padded = "^^" + norm + "$$";
  QGramSet grams;
  for (std::size_t i = 0; i + kGramLength <= padded.size(); ++i) {
    grams.push_back(padded.substr(i, kGramLength));
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

/// |A ∩ B| / |A ∪ B| over sorted sets; two empty sets score 0.
inline double jaccard(const QGramSet& a, const QGramSet& b) {
  std::size_t shared = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++shared;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - shared;
  return uni == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(uni);
}

inline double partial_similarity(std::string_view query, std::string_view name) {
  return jaccard(qgrams(query), qgrams(name));
}

struct FieldWeights {
  double name = 3.0;
  double tags = 2.0;
  double other = 1.0;

  double for_label(std::string_view label) const { return label == "tags" ? tags : other; }
};

/// Sparse term vector keyed by term id, ascending.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// tf-idf vectors over each entity's weighted field union plus inverted
// indexes (name trigram -> entities, term -> entities) for candidate lookup.
class TextIndex {
 public:
  struct QueryVector {
    SparseVector terms;  // unit length or empty
  };

  static TextIndex build(std::shared_ptr<const GraphSnapshot> graph, FieldWeights weights = {}) {
    if (!graph || graph->empty()) throw Error(ErrorCode::EmptyGraph, "cannot index an empty graph");
    TextIndex idx;
    idx.graph_ = std::move(graph);
    idx.weights_ = weights;
    const auto n = idx.graph_->entity_count();

    // Raw weighted term frequencies, accumulated in field order.
    std::vector<std::map<std::string, double>> tf(n);
    std::map<std::string, std::size_t> df;
    for (NodeIndex node = 0; node < n; ++node) {
      const Entity& e = idx.graph_->entity(node);
      auto add = [&](std::string_view text, double w) {
        for (auto& t : tokenize(text)) tf[node][t] += w;
      };
      add(e.name, weights.name);
      add(e.description, weights.other);
      for (const auto& [label, value] : e.fields) add(value, weights.for_label(label));
      for (const auto& [term, unused] : tf[node]) ++df[term];
    }

    // Term ids follow lexicographic order so sparse vectors iterate in the
    // same order as a string-keyed map.
    idx.terms_.reserve(df.size());
    idx.idf_.reserve(df.size());
    for (const auto& [term, count] : df) {
      idx.term_ids_.emplace(term, static_cast<std::uint32_t>(idx.terms_.size()));
      idx.terms_.push_back(term);
      idx.idf_.push_back(std::log(static_cast<double>(n) / static_cast<double>(count)));
    }
    idx.term_postings_.assign(idx.terms_.size(), {});

    idx.vectors_.resize(n);
    idx.name_grams_.resize(n);
    for (NodeIndex node = 0; node < n; ++node) {
      SparseVector v;
      for (const auto& [term, freq] : tf[node]) {
        const auto id = idx.term_ids_.at(term);
        idx.term_postings_[id].push_back(node);
        v.emplace_back(id, freq * idx.idf_[id]);
      }
      idx.vectors_[node] = unit(std::move(v));

      for (auto& gram : qgrams(idx.graph_->entity(node).name)) {
        auto [it, inserted] = idx.gram_ids_.emplace(std::move(gram), static_cast<std::uint32_t>(idx.gram_postings_.size()));
        if (inserted) idx.gram_postings_.emplace_back();
        idx.gram_postings_[it->second].push_back(node);
        idx.name_grams_[node].push_back(it->second);
      }
      std::sort(idx.name_grams_[node].begin(), idx.name_grams_[node].end());
    }
    return idx;
  }

  const GraphSnapshot& graph() const { return *graph_; }
  const FieldWeights& weights() const { return weights_; }

  /// idf of a term, or nullopt if the corpus never contains it.
  std::optional<double> idf(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) return std::nullopt;
    return idf_[it->second];
  }

  /// Unit-normalized tf-idf weight of `term` in the entity's vector (0 if absent).
  double weight(NodeIndex node, std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) return 0.0;
    for (const auto& [id, w] : vectors_.at(node)) {
      if (id == it->second) return w;
    }
    return 0.0;
  }

  const SparseVector& vector(NodeIndex node) const { return vectors_.at(node); }

  QueryVector vectorize(std::string_view query) const {
    std::map<std::uint32_t, double> counts;
    for (const auto& t : tokenize(query)) {
      auto it = term_ids_.find(t);
      if (it != term_ids_.end()) counts[it->second] += 1.0;
    }
    SparseVector v;
    for (const auto& [id, count] : counts) v.emplace_back(id, count * idf_[id]);
    return {unit(std::move(v))};
  }

  /// Cosine between the query and the entity's field-union vector.
  double exact_similarity(const QueryVector& q, NodeIndex node) const {
    const auto& e = vectors_.at(node);
    double dot = 0.0;
    auto ie = e.begin();
    for (const auto& [id, w] : q.terms) {
      while (ie != e.end() && ie->first < id) ++ie;
      if (ie == e.end()) break;
      if (ie->first == id) dot += w * ie->second;
    }
    return std::clamp(dot, 0.0, 1.0);
  }

  double exact_similarity(std::string_view query, std::string_view id) const {
    return exact_similarity(vectorize(query), graph_->index_of(id));
  }

  /// Query trigrams resolved to ids; `unmatched` counts grams absent from
  /// every indexed name (they still enlarge the union).
  struct QueryGrams {
    std::vector<std::uint32_t> ids;
    std::size_t unmatched = 0;
    std::size_t size() const { return ids.size() + unmatched; }
  };

  QueryGrams resolve_grams(std::string_view query) const {
    QueryGrams out;
    for (const auto& gram : qgrams(query)) {
      auto it = gram_ids_.find(gram);
      if (it == gram_ids_.end()) {
        ++out.unmatched;
      } else {
        out.ids.push_back(it->second);
      }
    }
    std::sort(out.ids.begin(), out.ids.end());
    return out;
  }

  /// Jaccard of query trigrams against the entity's name trigrams.
  double partial_similarity(const QueryGrams& q, NodeIndex node) const {
    const auto& name = name_grams_.at(node);
    std::size_t shared = 0;
    auto in = name.begin();
    for (std::uint32_t id : q.ids) {
      while (in != name.end() && *in < id) ++in;
      if (in == name.end()) break;
      if (*in == id) ++shared;
    }
    const std::size_t uni = q.size() + name.size() - shared;
    return uni == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(uni);
  }

  /// Entities sharing at least one name trigram with the query. Ascending.
  std::vector<NodeIndex> gram_candidates(const QueryGrams& q) const {
    std::vector<NodeIndex> out;
    for (std::uint32_t id : q.ids) {
      const auto& posting = gram_postings_[id];
      out.insert(out.end(), posting.begin(), posting.end());
    }
    sort_unique(out);
    return out;
  }

  /// Entities sharing a name trigram or an indexed term with the query. Ascending.
  std::vector<NodeIndex> candidates(const QueryGrams& grams, const QueryVector& q) const {
    std::vector<NodeIndex> out;
    for (std::uint32_t id : grams.ids) {
      const auto& posting = gram_postings_[id];
      out.insert(out.end(), posting.begin(), posting.end());
    }
    for (const auto& [id, w] : q.terms) {
      const auto& posting = term_postings_[id];
      out.insert(out.end(), posting.begin(), posting.end());
    }
    sort_unique(out);
    return out;
  }

  /// Same as above, but also includes terms whose idf is zero (present in
  /// every entity); used to prove candidate completeness in tests.
  std::vector<NodeIndex> candidates(std::string_view query) const {
    auto grams = resolve_grams(query);
    std::vector<NodeIndex> out;
    for (std::uint32_t id : grams.ids) {
      const auto& posting = gram_postings_[id];
      out.insert(out.end(), posting.begin(), posting.end());
    }
    for (const auto& t : tokenize(query)) {
      auto it = term_ids_.find(t);
      if (it == term_ids_.end()) continue;
      const auto& posting = term_postings_[it->second];
      out.insert(out.end(), posting.begin(), posting.end());
    }
    sort_unique(out);
    return out;
  }

 private:
  static void sort_unique(std::vector<NodeIndex>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  static SparseVector unit(SparseVector v) {
    double norm_sq = 0.0;
    for (const auto& [id, w] : v) norm_sq += w * w;
    if (norm_sq == 0.0) return {};
    const double norm = std::sqrt(norm_sq);
    SparseVector out;
    out.reserve(v.size());
    for (const auto& [id, w] : v) {
      if (w != 0.0) out.emplace_back(id, w / norm);
    }
    return out;
  }

  std::shared_ptr<const GraphSnapshot> graph_;
  FieldWeights weights_;
  std::unordered_map<std::string, std::uint32_t> term_ids_;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::vector<std::vector<NodeIndex>> term_postings_;
  std::vector<SparseVector> vectors_;
  std::unordered_map<std::string, std::uint32_t> gram_ids_;
  std::vector<std::vector<NodeIndex>> gram_postings_;
  std::vector<std::vector<std::uint32_t>> name_grams_;
};

}  // namespace fullbrain
