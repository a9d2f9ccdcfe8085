// Retrieval and classification evaluation: an exact linear-scan index with
// canonical tie-breaking, identical-item Recall@K in set and hit-rate forms,
// per-category Precision@1, and mean average precision at K.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vid/common.hpp"
#include "vid/vecmath.hpp"

namespace vid {

// ---------------------------------------------------------------------------
// Index: item embeddings, optional per-item category for filtered search.

struct RetrievalIndex {
  std::vector<std::string> ids;  // sorted after finalize()
  std::vector<std::string> categories;  // parallel to ids; "" when unknown
  std::vector<double> data;      // ids.size() x dim
  int dim = 0;

  void add(const std::string& id, std::span<const double> embedding,
           const std::string& category = "") {
    if (dim == 0) {
      dim = static_cast<int>(embedding.size());
    } else if (static_cast<int>(embedding.size()) != dim) {
      fail(ErrorCode::kDimensionMismatch, "index embeddings must share dimension");
    }
    ids.push_back(id);
    categories.push_back(category);
    data.insert(data.end(), embedding.begin(), embedding.end());
  }

  // Sorts rows by item id (making scan order canonical) and rejects duplicates.
  void finalize() {
    std::vector<int> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ids[a] < ids[b]; });
    std::vector<std::string> new_ids, new_cats;
    std::vector<double> new_data;
    new_ids.reserve(ids.size());
    new_cats.reserve(ids.size());
    new_data.reserve(data.size());
    for (int i : order) {
      if (!new_ids.empty() && new_ids.back() == ids[i]) {
        fail(ErrorCode::kInvalidArgs, "duplicate item '" + ids[i] + "' in index");
      }
      new_ids.push_back(ids[i]);
      new_cats.push_back(categories[i]);
      new_data.insert(new_data.end(), data.begin() + static_cast<std::size_t>(i) * dim,
                      data.begin() + static_cast<std::size_t>(i + 1) * dim);
    }
    ids = std::move(new_ids);
    categories = std::move(new_cats);
    data = std::move(new_data);
  }

  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * dim,
            static_cast<std::size_t>(dim)};
  }
};

// Exact linear scan, Euclidean ascending, distance ties by item id (rows are
// id-sorted, so a stable sort on distance realizes the tie rule).
inline std::vector<std::string> retrieve(std::span<const double> query,
                                         const RetrievalIndex& index, int k,
                                         const std::optional<std::string>& category_filter =
                                             std::nullopt) {
  if (k < 1) fail(ErrorCode::kInvalidArgs, "k must be >= 1");
  if (index.ids.empty()) fail(ErrorCode::kEmptyIndex, "retrieval index is empty");
  if (static_cast<int>(query.size()) != index.dim) {
    fail(ErrorCode::kDimensionMismatch, "query dimension differs from index");
  }
  std::vector<std::pair<double, int>> scored;
  scored.reserve(index.ids.size());
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    if (category_filter.has_value() && index.categories[i] != *category_filter) continue;
    scored.emplace_back(l2_dist_sq(query, index.row(static_cast<int>(i))),
                        static_cast<int>(i));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  const int take = std::min<int>(k, static_cast<int>(scored.size()));
  out.reserve(take);
  for (int i = 0; i < take; ++i) out.push_back(index.ids[scored[i].second]);
  return out;
}

// ---------------------------------------------------------------------------
// Recall@K over identical-item truth sets.

struct RecallResult {
  std::map<std::string, double> per_query_set;  // |topK ∩ truth| / |truth|
  std::map<std::string, double> per_query_hit;  // 1 if any truth item in topK
  double mean_set = 0.0;
  double mean_hit = 0.0;
  std::int64_t evaluated = 0;
  std::int64_t missing_truth = 0;
};

inline RecallResult recall_at_k(
    const std::map<std::string, std::vector<std::string>>& rankings,
    const std::map<std::string, std::set<std::string>>& truth, int k) {
  if (k < 1) fail(ErrorCode::kInvalidArgs, "k must be >= 1");
  RecallResult out;
  for (const auto& [query, ranking] : rankings) {
    const auto it = truth.find(query);
    if (it == truth.end() || it->second.empty()) {
      ++out.missing_truth;
      continue;
    }
    const std::set<std::string>& ident = it->second;
    int hits = 0;
    const int upto = std::min<int>(k, static_cast<int>(ranking.size()));
    for (int i = 0; i < upto; ++i) {
      if (ident.count(ranking[i])) ++hits;
    }
    const double set_recall = static_cast<double>(hits) / static_cast<double>(ident.size());
    out.per_query_set[query] = set_recall;
    out.per_query_hit[query] = hits > 0 ? 1.0 : 0.0;
    out.mean_set += set_recall;
    out.mean_hit += hits > 0 ? 1.0 : 0.0;
    ++out.evaluated;
  }
  if (out.evaluated > 0) {
    out.mean_set /= static_cast<double>(out.evaluated);
    out.mean_hit /= static_cast<double>(out.evaluated);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Precision@1 per true category.

struct PrecisionReport {
  // true category -> (correct, total)
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_category;
  double weighted = 0.0;  // query-count-weighted average
  double macro = 0.0;     // unweighted mean over categories
  std::int64_t evaluated = 0;
};

inline PrecisionReport precision_at_1(
    const std::map<std::string, std::string>& predictions,
    const std::map<std::string, std::string>& truth) {
  PrecisionReport out;
  std::int64_t correct_total = 0;
  for (const auto& [query, predicted] : predictions) {
    const auto it = truth.find(query);
    if (it == truth.end()) continue;
    auto& [correct, total] = out.per_category[it->second];
    ++total;
    if (predicted == it->second) {
      ++correct;
      ++correct_total;
    }
    ++out.evaluated;
  }
  if (out.evaluated > 0) {
    out.weighted = static_cast<double>(correct_total) / static_cast<double>(out.evaluated);
  }
  double macro_sum = 0.0;
  for (const auto& [cat, counts] : out.per_category) {
    macro_sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  if (!out.per_category.empty()) {
    out.macro = macro_sum / static_cast<double>(out.per_category.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Average precision at K: sum of precision@i over hit ranks i <= K, divided
// by min(|truth|, K).

inline double ap_at_k(const std::vector<std::string>& ranking,
                      const std::set<std::string>& truth, int k) {
  if (k < 1) fail(ErrorCode::kInvalidArgs, "k must be >= 1");
  if (truth.empty()) fail(ErrorCode::kInvalidArgs, "truth set must be non-empty");
  int hits = 0;
  double ap = 0.0;
  const int upto = std::min<int>(k, static_cast<int>(ranking.size()));
  for (int i = 0; i < upto; ++i) {
    if (truth.count(ranking[i])) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return ap / static_cast<double>(std::min<int>(static_cast<int>(truth.size()), k));
}

struct MapResult {
  std::map<std::string, double> per_query;
  double mean = 0.0;
  std::int64_t evaluated = 0;
  std::int64_t missing_truth = 0;
};

inline MapResult map_at_k(const std::map<std::string, std::vector<std::string>>& rankings,
                          const std::map<std::string, std::set<std::string>>& truth,
                          int k) {
  MapResult out;
  for (const auto& [query, ranking] : rankings) {
    const auto it = truth.find(query);
    if (it == truth.end() || it->second.empty()) {
      ++out.missing_truth;
      continue;
    }
    const double ap = ap_at_k(ranking, it->second, k);
    out.per_query[query] = ap;
    out.mean += ap;
    ++out.evaluated;
  }
  if (out.evaluated > 0) out.mean /= static_cast<double>(out.evaluated);
  return out;
}

}  // namespace vid
