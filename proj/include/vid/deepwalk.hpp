// Graph embeddings via truncated random walks and skip-gram: weighted walk
// generation, window context pairs, Huffman code tree, hierarchical-softmax
// and negative-sampling objectives, SGD trainer, and embedding-table I/O.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "vid/coclick_graph.hpp"
#include "vid/common.hpp"
#include "vid/rng.hpp"
#include "vid/vecmath.hpp"

namespace vid {

// ---------------------------------------------------------------------------
// Adjacency with cumulative weights for proportional sampling.

struct Adjacency {
  std::vector<std::string> nodes;  // sorted
  // per node: neighbor indices ascending, parallel cumulative weights
  std::vector<std::vector<int>> neighbors;
  std::vector<std::vector<double>> cumweight;

  int index_of(const std::string& key) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), key);
    if (it == nodes.end() || *it != key) return -1;
    return static_cast<int>(it - nodes.begin());
  }
};

inline Adjacency build_adjacency(const CoClickGraph& graph, bool flatten_weights = false) {
  Adjacency adj;
  adj.nodes.assign(graph.nodes.begin(), graph.nodes.end());
  adj.neighbors.resize(adj.nodes.size());
  adj.cumweight.resize(adj.nodes.size());
  std::vector<std::vector<std::pair<int, double>>> lists(adj.nodes.size());
  for (const auto& [key, w] : graph.edges) {
    const int a = adj.index_of(key.first);
    const int b = adj.index_of(key.second);
    if (a < 0 || b < 0) {
      fail(ErrorCode::kInvalidGraph, "edge endpoint missing from node set");
    }
    const double weight = flatten_weights ? 1.0 : static_cast<double>(w);
    lists[a].emplace_back(b, weight);
    lists[b].emplace_back(a, weight);
  }
  for (std::size_t i = 0; i < lists.size(); ++i) {
    std::sort(lists[i].begin(), lists[i].end());
    double total = 0.0;
    for (const auto& [nb, w] : lists[i]) {
      adj.neighbors[i].push_back(nb);
      total += w;
      adj.cumweight[i].push_back(total);
    }
  }
  return adj;
}

// ---------------------------------------------------------------------------
// Walks

struct WalkCorpus {
  std::vector<std::string> nodes;       // sorted vocabulary
  std::vector<std::vector<int>> walks;  // node indices into `nodes`
  int walks_per_node = 0;
  int walk_length = 0;
  std::uint64_t seed = 0;
};

// r walks per node of up to t nodes; each step picks a neighbor proportional
// to edge weight using a counter RNG keyed by (seed, start node, walk, step),
// so corpora are reproducible and order-independent.
inline WalkCorpus generate_walks(const CoClickGraph& graph, int r, int t,
                                 std::uint64_t seed, bool flatten_weights = false) {
  if (r < 1 || t < 1) fail(ErrorCode::kInvalidArgs, "walk params must be >= 1");
  const Adjacency adj = build_adjacency(graph, flatten_weights);
  WalkCorpus corpus;
  corpus.nodes = adj.nodes;
  corpus.walks_per_node = r;
  corpus.walk_length = t;
  corpus.seed = seed;
  corpus.walks.reserve(adj.nodes.size() * static_cast<std::size_t>(r));
  for (std::size_t start = 0; start < adj.nodes.size(); ++start) {
    const std::uint64_t start_key = hash_str(adj.nodes[start].c_str());
    for (int w = 0; w < r; ++w) {
      std::vector<int> walk;
      walk.reserve(t);
      int cur = static_cast<int>(start);
      walk.push_back(cur);
      for (int step = 1; step < t; ++step) {
        const std::vector<double>& cum = adj.cumweight[cur];
        if (cum.empty()) break;  // isolated node truncates the walk
        const double u = counter_uniform(seed, start_key, static_cast<std::uint64_t>(w),
                                         static_cast<std::uint64_t>(step)) *
                         cum.back();
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const std::size_t pick = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
        cur = adj.neighbors[cur][pick];
        walk.push_back(cur);
      }
      corpus.walks.push_back(std::move(walk));
    }
  }
  return corpus;
}

// (center, context) pairs with window w, clipped to walk bounds.
inline std::vector<std::pair<int, int>> context_pairs(const std::vector<int>& walk, int w) {
  if (w < 1) fail(ErrorCode::kInvalidArgs, "window must be >= 1");
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(walk.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - w);
    const int hi = std::min(n - 1, i + w);
    for (int j = lo; j <= hi; ++j) {
      if (j != i) pairs.emplace_back(walk[i], walk[j]);
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Huffman code tree

struct CodeTree {
  // Per leaf: inner-node ids and branch bits along the root-to-leaf path.
  std::vector<std::vector<int>> path_nodes;
  std::vector<std::vector<std::uint8_t>> path_bits;
  int inner_count = 0;
  int leaf_count = 0;
};

// Huffman by count; ties pop the node whose smallest leaf index is lowest
// (leaves are indexed over sorted keys, so ties resolve lexicographically).
// The first-popped child of a merge takes branch bit 0.
inline CodeTree build_code_tree(const std::vector<std::int64_t>& counts) {
  const int n = static_cast<int>(counts.size());
  if (n == 0) fail(ErrorCode::kEmptyVocabulary, "code tree needs at least one leaf");
  CodeTree tree;
  tree.leaf_count = n;
  tree.path_nodes.resize(n);
  tree.path_bits.resize(n);
  if (n == 1) return tree;  // single leaf: empty code, probability one

  struct Node {
    std::int64_t count;
    int rep;  // smallest leaf index under this node (tie key)
    int id;   // leaf: [0,n); inner: n + inner_id
  };
  const auto order = [](const Node& a, const Node& b) {
    return std::tie(a.count, a.rep) > std::tie(b.count, b.rep);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(order)> heap(order);
  for (int i = 0; i < n; ++i) {
    if (counts[i] < 1) fail(ErrorCode::kInvalidArgs, "leaf counts must be >= 1");
    heap.push({counts[i], i, i});
  }
  std::vector<int> parent(2 * n - 1, -1);
  std::vector<std::uint8_t> bit(2 * n - 1, 0);
  int next_inner = 0;
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    const int inner_id = next_inner++;
    const int merged = n + inner_id;
    parent[a.id] = merged;
    bit[a.id] = 0;
    parent[b.id] = merged;
    bit[b.id] = 1;
    heap.push({a.count + b.count, std::min(a.rep, b.rep), merged});
  }
  tree.inner_count = next_inner;
  for (int leaf = 0; leaf < n; ++leaf) {
    std::vector<int> nodes;
    std::vector<std::uint8_t> bits;
    for (int cur = leaf; parent[cur] != -1; cur = parent[cur]) {
      nodes.push_back(parent[cur] - n);
      bits.push_back(bit[cur]);
    }
    std::reverse(nodes.begin(), nodes.end());
    std::reverse(bits.begin(), bits.end());
    tree.path_nodes[leaf] = std::move(nodes);
    tree.path_bits[leaf] = std::move(bits);
  }
  return tree;
}

// log P(leaf | center) with branch probability sigmoid(score) for bit 1.
inline double hs_log_prob(const CodeTree& tree, std::span<const double> inner,
                          int dim, int leaf, std::span<const double> center) {
  double lp = 0.0;
  const std::vector<int>& nodes = tree.path_nodes[leaf];
  const std::vector<std::uint8_t>& bits = tree.path_bits[leaf];
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::span<const double> u = inner.subspan(nodes[k] * dim, dim);
    const double s = dot(center, u);
    lp += log_sigmoid(bits[k] ? s : -s);
  }
  return lp;
}

// Loss −log P(leaf | center) with gradients into grad_center (accumulated)
// and, when non-null, grad_inner (same layout as inner, accumulated).
inline double hs_loss_grad(const CodeTree& tree, std::span<const double> inner,
                           int dim, int leaf, std::span<const double> center,
                           std::span<double> grad_center,
                           std::vector<double>* grad_inner) {
  double loss = 0.0;
  const std::vector<int>& nodes = tree.path_nodes[leaf];
  const std::vector<std::uint8_t>& bits = tree.path_bits[leaf];
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::span<const double> u = inner.subspan(nodes[k] * dim, dim);
    const double s = dot(center, u);
    loss -= log_sigmoid(bits[k] ? s : -s);
    const double g = sigmoid(s) - static_cast<double>(bits[k]);  // dloss/ds
    for (int j = 0; j < dim; ++j) grad_center[j] += g * u[j];
    if (grad_inner != nullptr) {
      for (int j = 0; j < dim; ++j) (*grad_inner)[nodes[k] * dim + j] += g * center[j];
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Embedding table

struct EmbeddingTable {
  std::vector<std::string> keys;  // sorted
  int dim = 0;
  std::vector<double> data;  // keys.size() x dim, row-major

  std::span<double> row(int i) { return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> row(int i) const { return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  int index_of(const std::string& key) const {
    const auto it = std::lower_bound(keys.begin(), keys.end(), key);
    if (it == keys.end() || *it != key) return -1;
    return static_cast<int>(it - keys.begin());
  }
};

enum class SkipgramMode { kHierSoftmax, kNegSampling };

struct SkipgramConfig {
  int dim = 64;
  int window = 5;
  int epochs = 5;
  double lr0 = 0.025;
  SkipgramMode mode = SkipgramMode::kHierSoftmax;
  int negatives = 5;     // NegSampling only
  bool shuffle = false;  // seeded walk-order shuffle per epoch
  std::uint64_t seed = 0;
};

namespace detail {

inline constexpr std::uint64_t kTagSgInit = 0xD1;
inline constexpr std::uint64_t kTagSgShuffle = 0x5F;
inline constexpr std::uint64_t kTagSgNeg = 0x4E;

// Unigram^0.75 cumulative table for negative sampling.
inline std::vector<double> negative_table(const std::vector<std::int64_t>& counts) {
  std::vector<double> cum(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total += std::pow(static_cast<double>(counts[i]), 0.75);
    cum[i] = total;
  }
  return cum;
}

}  // namespace detail

// SGD over all window pairs maximizing sum of log Pr(context | center), with
// linear lr decay from lr0 down to lr0/100 across all updates. When
// epoch_losses is non-null it receives the average per-pair loss of each
// epoch, evaluated at the parameters in effect when each pair is visited.
inline EmbeddingTable train_skipgram(const WalkCorpus& corpus, const SkipgramConfig& cfg,
                                     std::vector<double>* epoch_losses = nullptr) {
  if (corpus.nodes.empty() || corpus.walks.empty()) {
    fail(ErrorCode::kEmptyCorpus, "skip-gram needs a non-empty walk corpus");
  }
  if (cfg.dim < 2) fail(ErrorCode::kInvalidArgs, "embedding dim must be >= 2");
  if (cfg.window < 1) fail(ErrorCode::kInvalidArgs, "window must be >= 1");
  if (cfg.epochs < 0) fail(ErrorCode::kInvalidArgs, "epochs must be >= 0");
  const int n = static_cast<int>(corpus.nodes.size());
  const int dim = cfg.dim;

  EmbeddingTable table;
  table.keys = corpus.nodes;
  table.dim = dim;
  table.data.resize(static_cast<std::size_t>(n) * dim);
  Rng init_rng(mix_key(cfg.seed, detail::kTagSgInit));
  for (double& v : table.data) v = (init_rng.next_unit() - 0.5) / dim;
  if (cfg.epochs == 0) return table;

  std::vector<std::int64_t> counts(n, 0);
  std::size_t total_pairs = 0;
  for (const std::vector<int>& walk : corpus.walks) {
    for (int node : walk) ++counts[node];
    const int len = static_cast<int>(walk.size());
    for (int i = 0; i < len; ++i) {
      total_pairs += std::min(len - 1, i + cfg.window) - std::max(0, i - cfg.window);
    }
  }
  for (std::int64_t& c : counts) c = std::max<std::int64_t>(c, 1);

  CodeTree tree;
  std::vector<double> inner;  // HS inner-node vectors, zero-init
  std::vector<double> outputs;  // NegSampling context vectors, zero-init
  std::vector<double> neg_cum;
  if (cfg.mode == SkipgramMode::kHierSoftmax) {
    tree = build_code_tree(counts);
    inner.assign(static_cast<std::size_t>(tree.inner_count) * dim, 0.0);
  } else {
    outputs.assign(static_cast<std::size_t>(n) * dim, 0.0);
    neg_cum = detail::negative_table(counts);
  }

  std::vector<int> walk_order(corpus.walks.size());
  for (std::size_t i = 0; i < walk_order.size(); ++i) walk_order[i] = static_cast<int>(i);
  std::vector<double> grad_center(dim);
  const std::size_t total_updates = std::max<std::size_t>(total_pairs * cfg.epochs, 1);
  std::size_t update = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      Rng shuffle_rng(mix_key(cfg.seed, detail::kTagSgShuffle, static_cast<std::uint64_t>(epoch)));
      shuffle_rng.shuffle(walk_order);
    }
    double epoch_loss = 0.0;
    std::size_t epoch_pairs = 0;
    for (const int wi : walk_order) {
      const std::vector<int>& walk = corpus.walks[wi];
      const int len = static_cast<int>(walk.size());
      for (int i = 0; i < len; ++i) {
        const int center = walk[i];
        double* v = table.data.data() + static_cast<std::size_t>(center) * dim;
        const int lo = std::max(0, i - cfg.window);
        const int hi = std::min(len - 1, i + cfg.window);
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const int context = walk[j];
          const double progress = static_cast<double>(update) / static_cast<double>(total_updates);
          const double lr = cfg.lr0 * std::max(1.0 - progress, 0.01);
          std::fill(grad_center.begin(), grad_center.end(), 0.0);
          if (cfg.mode == SkipgramMode::kHierSoftmax) {
            const std::vector<int>& nodes = tree.path_nodes[context];
            const std::vector<std::uint8_t>& bits = tree.path_bits[context];
            for (std::size_t k = 0; k < nodes.size(); ++k) {
              double* u = inner.data() + static_cast<std::size_t>(nodes[k]) * dim;
              double s = 0.0;
              for (int d = 0; d < dim; ++d) s += v[d] * u[d];
              if (epoch_losses != nullptr) epoch_loss -= log_sigmoid(bits[k] ? s : -s);
              const double g = sigmoid(s) - static_cast<double>(bits[k]);
              for (int d = 0; d < dim; ++d) {
                grad_center[d] += g * u[d];
                u[d] -= lr * g * v[d];
              }
            }
          } else {
            for (int k = 0; k <= cfg.negatives; ++k) {
              int target;
              double label;
              if (k == 0) {
                target = context;
                label = 1.0;
              } else {
                const double u01 = counter_uniform(cfg.seed, detail::kTagSgNeg,
                                                   static_cast<std::uint64_t>(update),
                                                   static_cast<std::uint64_t>(k));
                const auto it = std::upper_bound(neg_cum.begin(), neg_cum.end(),
                                                 u01 * neg_cum.back());
                target = static_cast<int>(std::min<std::size_t>(
                    it - neg_cum.begin(), neg_cum.size() - 1));
                if (target == context) continue;
                label = 0.0;
              }
              double* u = outputs.data() + static_cast<std::size_t>(target) * dim;
              double s = 0.0;
              for (int d = 0; d < dim; ++d) s += v[d] * u[d];
              if (epoch_losses != nullptr) epoch_loss -= log_sigmoid(label > 0.5 ? s : -s);
              const double g = sigmoid(s) - label;
              for (int d = 0; d < dim; ++d) {
                grad_center[d] += g * u[d];
                u[d] -= lr * g * v[d];
              }
            }
          }
          for (int d = 0; d < dim; ++d) v[d] -= lr * grad_center[d];
          ++update;
          ++epoch_pairs;
        }
      }
    }
    if (epoch_losses != nullptr) {
      epoch_losses->push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(epoch_pairs, 1)));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Serialization: header "node_count dim", then "key v0 v1 ..." per node.

inline void save_embeddings(std::ostream& os, const EmbeddingTable& table) {
  os << table.keys.size() << ' ' << table.dim << '\n';
  char buf[32];
  for (std::size_t i = 0; i < table.keys.size(); ++i) {
    os << table.keys[i];
    const std::span<const double> r = table.row(static_cast<int>(i));
    for (double v : r) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ' ' << buf;
    }
    os << '\n';
  }
}

inline EmbeddingTable load_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::size_t count = 0;
  if (!(in >> count >> table.dim) || table.dim < 1) {
    fail(ErrorCode::kMalformedLine, "bad embedding file header");
  }
  std::vector<std::pair<std::string, std::vector<double>>> rows(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> rows[i].first)) {
      fail(ErrorCode::kMalformedLine, "embedding file truncated");
    }
    rows[i].second.resize(table.dim);
    for (int d = 0; d < table.dim; ++d) {
      if (!(in >> rows[i].second[d])) {
        fail(ErrorCode::kMalformedLine, "embedding row truncated");
      }
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  table.data.reserve(count * table.dim);
  for (auto& [key, vec] : rows) {
    if (!table.keys.empty() && table.keys.back() == key) {
      fail(ErrorCode::kMalformedLine, "duplicate embedding key '" + key + "'");
    }
    table.keys.push_back(std::move(key));
    table.data.insert(table.data.end(), vec.begin(), vec.end());
  }
  return table;
}

}  // namespace vid
