// Virtual-ID assignment: spherical k-means (L2-normalized rows, k-means++
// seeding, Lloyd iterations) over an embedding table, majority-vote mapping
// of clusters to top categories, clustering agreement (ARI), and file I/O.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vid/common.hpp"
#include "vid/coclick_graph.hpp"
#include "vid/deepwalk.hpp"
#include "vid/pvlog.hpp"
#include "vid/rng.hpp"
#include "vid/vecmath.hpp"

namespace vid {

struct VirtualIdAssignment {
  GraphLevel level = GraphLevel::kItem;
  std::vector<std::string> nodes;  // sorted
  std::vector<int> vid;            // per node, in [0, k)
  std::vector<double> centroids;   // k x dim, row-major
  int k = 0;
  int dim = 0;

  int index_of(const std::string& key) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), key);
    if (it == nodes.end() || *it != key) return -1;
    return static_cast<int>(it - nodes.begin());
  }
  std::span<const double> centroid(int c) const {
    return {centroids.data() + static_cast<std::size_t>(c) * dim,
            static_cast<std::size_t>(dim)};
  }
};

inline double assignment_inertia(const std::vector<double>& points,
                                 const VirtualIdAssignment& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const std::span<const double> p{points.data() + i * a.dim,
                                    static_cast<std::size_t>(a.dim)};
    total += l2_dist_sq(p, a.centroid(a.vid[i]));
  }
  return total;
}

namespace detail {

inline constexpr std::uint64_t kTagKmSeed = 0x6B;

// k-means++ D^2 seeding; zero total mass falls back to the lowest-index
// point not yet chosen.
inline std::vector<int> kmeanspp_centers(const std::vector<double>& points, int n,
                                         int dim, int k, Rng& rng) {
  std::vector<int> centers;
  std::vector<char> chosen(n, 0);
  std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
  const auto point = [&](int i) {
    return std::span<const double>{points.data() + static_cast<std::size_t>(i) * dim,
                                   static_cast<std::size_t>(dim)};
  };
  const int first = static_cast<int>(rng.next_index(n));
  centers.push_back(first);
  chosen[first] = 1;
  while (static_cast<int>(centers.size()) < k) {
    const std::span<const double> last = point(centers.back());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      best_d2[i] = std::min(best_d2[i], l2_dist_sq(point(i), last));
      if (!chosen[i]) total += best_d2[i];
    }
    int pick = -1;
    if (total > 0.0) {
      const double target = rng.next_unit() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        acc += best_d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {  // numeric slack: take the last eligible point
        for (int i = n - 1; i >= 0; --i) {
          if (!chosen[i]) {
            pick = i;
            break;
          }
        }
      }
    } else {
      for (int i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pick);
    chosen[pick] = 1;
  }
  return centers;
}

}  // namespace detail

// Rows are L2-normalized first, then clustered by Lloyd's algorithm with
// k-means++ seeding. Distance ties take the lowest cluster index; a cluster
// left empty is reseeded to the point farthest from its own centroid.
inline VirtualIdAssignment cluster_embeddings(const EmbeddingTable& table, int k,
                                              std::uint64_t seed, int max_iters,
                                              GraphLevel level) {
  const int n = static_cast<int>(table.keys.size());
  if (n == 0) fail(ErrorCode::kEmptyIndex, "cannot cluster an empty table");
  if (k < 1 || k > n) {
    fail(ErrorCode::kInvalidK,
         "k must lie in [1, node_count]; got " + std::to_string(k));
  }
  if (max_iters < 1) fail(ErrorCode::kInvalidArgs, "max_iters must be >= 1");
  const int dim = table.dim;

  std::vector<double> points(table.data);
  for (int i = 0; i < n; ++i) {
    std::span<double> row{points.data() + static_cast<std::size_t>(i) * dim,
                          static_cast<std::size_t>(dim)};
    const double norm = l2_norm(row);
    if (norm > 0.0) {
      for (double& v : row) v /= norm;
    }
  }
  const auto point = [&](int i) {
    return std::span<const double>{points.data() + static_cast<std::size_t>(i) * dim,
                                   static_cast<std::size_t>(dim)};
  };

  VirtualIdAssignment out;
  out.level = level;
  out.nodes = table.keys;
  out.k = k;
  out.dim = dim;
  out.vid.assign(n, 0);
  out.centroids.assign(static_cast<std::size_t>(k) * dim, 0.0);

  Rng rng(mix_key(seed, detail::kTagKmSeed));
  const std::vector<int> centers = detail::kmeanspp_centers(points, n, dim, k, rng);
  for (int c = 0; c < k; ++c) {
    std::copy_n(points.data() + static_cast<std::size_t>(centers[c]) * dim, dim,
                out.centroids.data() + static_cast<std::size_t>(c) * dim);
  }

  std::vector<int> counts(k);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = iter == 0;  // first pass always sets assignments
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = l2_dist_sq(point(i), out.centroid(0));
      for (int c = 1; c < k; ++c) {
        const double d = l2_dist_sq(point(i), out.centroid(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.vid[i] != best) changed = true;
      out.vid[i] = best;
    }
    if (!changed) break;

    std::fill(out.centroids.begin(), out.centroids.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      ++counts[out.vid[i]];
      double* c = out.centroids.data() + static_cast<std::size_t>(out.vid[i]) * dim;
      const std::span<const double> p = point(i);
      for (int d = 0; d < dim; ++d) c[d] += p[d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double* row = out.centroids.data() + static_cast<std::size_t>(c) * dim;
      for (int d = 0; d < dim; ++d) row[d] /= counts[c];
    }
    std::set<int> reseeded;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (reseeded.count(i)) continue;
        const double d = l2_dist_sq(point(i), out.centroid(out.vid[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      reseeded.insert(far);
      std::copy_n(points.data() + static_cast<std::size_t>(far) * dim, dim,
                  out.centroids.data() + static_cast<std::size_t>(c) * dim);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Virtual ID -> top category

struct VidCategoryMap {
  std::map<int, std::string> vid_to_top;
  std::map<std::pair<int, std::string>, std::int64_t> votes;
  std::vector<int> unmapped;  // clusters with zero category evidence
};

// Majority vote over clicked occurrences of each cluster's member nodes; a
// tie picks the lexicographically smallest category.
inline VidCategoryMap map_vid_to_top_category(const VirtualIdAssignment& assignment,
                                              const std::vector<PVRecord>& records) {
  VidCategoryMap map;
  for (const PVRecord& record : records) {
    for (const ResultEntry& entry : record.results) {
      if (!entry.clicked) continue;
      const std::string& key = assignment.level == GraphLevel::kItem
                                   ? entry.item_id
                                   : entry.leaf_category;
      const int idx = assignment.index_of(key);
      if (idx < 0) continue;
      ++map.votes[{assignment.vid[idx], entry.top_category}];
    }
  }
  for (int c = 0; c < assignment.k; ++c) {
    std::string best;
    std::int64_t best_votes = 0;
    for (auto it = map.votes.lower_bound({c, ""});
         it != map.votes.end() && it->first.first == c; ++it) {
      if (it->second > best_votes) {  // map order makes ties lexicographic
        best_votes = it->second;
        best = it->first.second;
      }
    }
    if (best_votes > 0) {
      map.vid_to_top[c] = best;
    } else {
      map.unmapped.push_back(c);
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Adjusted Rand Index between two labelings of the same nodes.

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kDimensionMismatch, "ARI labelings differ in length");
  }
  const auto comb2 = [](std::int64_t m) {
    return static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
  };
  std::map<std::pair<int, int>, std::int64_t> joint;
  std::map<int, std::int64_t> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ca[a[i]];
    ++cb[b[i]];
  }
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, m] : joint) sum_joint += comb2(m);
  for (const auto& [key, m] : ca) sum_a += comb2(m);
  for (const auto& [key, m] : cb) sum_b += comb2(m);
  const double total = comb2(static_cast<std::int64_t>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (sum_joint - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Serialization. Assignment: JSON lines {"node","vid"}; map: one JSON object
// {"vid_to_top":{"<vid>":"<top>",...},"unmapped":[...]}.

inline void save_assignment(std::ostream& os, const VirtualIdAssignment& a) {
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    nlohmann::ordered_json j;
    j["node"] = a.nodes[i];
    j["vid"] = a.vid[i];
    os << j.dump() << '\n';
  }
}

struct LoadedAssignment {
  std::vector<std::string> nodes;  // sorted
  std::vector<int> vid;
  int k = 0;  // max vid + 1

  int index_of(const std::string& key) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), key);
    if (it == nodes.end() || *it != key) return -1;
    return static_cast<int>(it - nodes.begin());
  }
};

inline LoadedAssignment load_assignment(std::istream& in) {
  std::vector<std::pair<std::string, int>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      rows.emplace_back(j.at("node").get<std::string>(), j.at("vid").get<int>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kMalformedLine,
           "assignment line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::sort(rows.begin(), rows.end());
  LoadedAssignment out;
  for (auto& [node, vid] : rows) {
    if (vid < 0) fail(ErrorCode::kMalformedLine, "negative vid for node '" + node + "'");
    if (!out.nodes.empty() && out.nodes.back() == node) {
      fail(ErrorCode::kMalformedLine, "duplicate assignment for node '" + node + "'");
    }
    out.nodes.push_back(std::move(node));
    out.vid.push_back(vid);
    out.k = std::max(out.k, vid + 1);
  }
  return out;
}

inline void save_vid_map(std::ostream& os, const VidCategoryMap& map) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [vid, top] : map.vid_to_top) {
    m[std::to_string(vid)] = top;
  }
  j["vid_to_top"] = std::move(m);
  j["unmapped"] = map.unmapped;
  os << j.dump() << '\n';
}

inline VidCategoryMap load_vid_map(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedLine, std::string("unparseable vid map: ") + e.what());
  }
  VidCategoryMap map;
  for (const auto& [key, value] : j.at("vid_to_top").items()) {
    map.vid_to_top[std::stoi(key)] = value.get<std::string>();
  }
  if (j.contains("unmapped")) {
    map.unmapped = j.at("unmapped").get<std::vector<int>>();
  }
  return map;
}

}  // namespace vid
