// Weighted undirected co-click graphs over items or leaf categories:
// projection from page-view records, pruning, and JSON (de)serialization.
#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vid/common.hpp"
#include "vid/pvlog.hpp"

namespace vid {

enum class GraphLevel { kItem, kLeafCategory };

inline const char* graph_level_name(GraphLevel level) {
  return level == GraphLevel::kItem ? "item" : "leaf";
}

using EdgeKey = std::pair<std::string, std::string>;

inline EdgeKey make_edge_key(const std::string& a, const std::string& b) {
  return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

struct CoClickGraph {
  GraphLevel level = GraphLevel::kItem;
  std::set<std::string> nodes;
  // Keys normalized with the lexicographically smaller node first.
  std::map<EdgeKey, std::int64_t> edges;

  bool operator==(const CoClickGraph&) const = default;
};

// Every unordered pair of distinct clicked entries in one record contributes
// +1 to the edge between their node keys; pairs that collapse to one key
// (possible at leaf level) contribute nothing. Nodes also include clicked
// singletons that never form an edge.
inline CoClickGraph project_coclick(const std::vector<PVRecord>& records,
                                    GraphLevel level) {
  CoClickGraph graph;
  graph.level = level;
  std::vector<const std::string*> keys;
  for (const PVRecord& record : records) {
    keys.clear();
    for (const ResultEntry& entry : record.results) {
      if (!entry.clicked) continue;
      keys.push_back(level == GraphLevel::kItem ? &entry.item_id
                                                : &entry.leaf_category);
      graph.nodes.insert(*keys.back());
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      for (std::size_t j = i + 1; j < keys.size(); ++j) {
        if (*keys[i] == *keys[j]) continue;
        ++graph.edges[make_edge_key(*keys[i], *keys[j])];
      }
    }
  }
  return graph;
}

// Number of incident edges per node (unweighted degree).
inline std::map<std::string, int> node_degrees(const CoClickGraph& graph) {
  std::map<std::string, int> degree;
  for (const std::string& node : graph.nodes) degree[node] = 0;
  for (const auto& [key, w] : graph.edges) {
    ++degree[key.first];
    ++degree[key.second];
  }
  return degree;
}

// Drops light edges, then low-degree nodes, then edges left dangling by the
// node removal, repeating until nothing changes.
inline CoClickGraph prune(const CoClickGraph& graph, std::int64_t min_edge_weight,
                          int min_degree) {
  if (min_edge_weight < 1 || min_degree < 0) {
    fail(ErrorCode::kInvalidArgs, "prune thresholds out of range");
  }
  CoClickGraph out = graph;
  for (;;) {
    bool changed = false;
    for (auto it = out.edges.begin(); it != out.edges.end();) {
      if (it->second < min_edge_weight) {
        it = out.edges.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
    const std::map<std::string, int> degree = node_degrees(out);
    for (auto it = out.nodes.begin(); it != out.nodes.end();) {
      if (degree.at(*it) < min_degree) {
        it = out.nodes.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
    for (auto it = out.edges.begin(); it != out.edges.end();) {
      if (!out.nodes.count(it->first.first) || !out.nodes.count(it->first.second)) {
        it = out.edges.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
    if (!changed) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: {"level":"item"|"leaf","edges":[["a","b",w],...]}.
// Isolated nodes have no representation on disk and drop across a round trip.

inline void save_graph(std::ostream& out, const CoClickGraph& graph) {
  nlohmann::ordered_json j;
  j["level"] = graph_level_name(graph.level);
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& [key, w] : graph.edges) {
    edges.push_back(nlohmann::ordered_json::array({key.first, key.second, w}));
  }
  j["edges"] = std::move(edges);
  out << j.dump() << '\n';
}

inline CoClickGraph load_graph(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidGraph, std::string("unparseable graph file: ") + e.what());
  }
  CoClickGraph graph;
  const std::string level = j.at("level").get<std::string>();
  if (level == "item") {
    graph.level = GraphLevel::kItem;
  } else if (level == "leaf") {
    graph.level = GraphLevel::kLeafCategory;
  } else {
    fail(ErrorCode::kInvalidGraph, "unknown graph level '" + level + "'");
  }
  for (const auto& e : j.at("edges")) {
    const std::string a = e.at(0).get<std::string>();
    const std::string b = e.at(1).get<std::string>();
    const std::int64_t w = e.at(2).get<std::int64_t>();
    if (a == b) {
      fail(ErrorCode::kInvalidGraph, "self-loop on node '" + a + "'");
    }
    if (w < 1) {
      fail(ErrorCode::kInvalidGraph, "non-positive weight on edge (" + a + "," + b + ")");
    }
    graph.edges[make_edge_key(a, b)] += w;
    graph.nodes.insert(a);
    graph.nodes.insert(b);
  }
  return graph;
}

}  // namespace vid
