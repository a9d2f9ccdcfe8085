#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "vid/deepwalk.hpp"
#include "vid/rng.hpp"
#include "vid/vecmath.hpp"

namespace vid {
namespace {

CoClickGraph graph_from_edges(
    const std::vector<std::tuple<std::string, std::string, std::int64_t>>& edges,
    const std::vector<std::string>& extra_nodes = {}) {
  CoClickGraph g;
  g.level = GraphLevel::kItem;
  for (const auto& [a, b, w] : edges) {
    g.nodes.insert(a);
    g.nodes.insert(b);
    g.edges[make_edge_key(a, b)] = w;
  }
  for (const std::string& n : extra_nodes) g.nodes.insert(n);
  return g;
}

TEST(Walks, IsolatedNodeTruncatesToItself) {
  const CoClickGraph g = graph_from_edges({{"A", "B", 1}}, {"C"});
  const WalkCorpus corpus = generate_walks(g, 2, 5, 42);
  const Adjacency adj = build_adjacency(g);
  const int c_idx = adj.index_of("C");
  int c_walks = 0;
  for (const std::vector<int>& walk : corpus.walks) {
    if (walk.front() == c_idx) {
      ++c_walks;
      EXPECT_EQ(walk, std::vector<int>{c_idx});
    } else {
      EXPECT_EQ(walk.size(), 5u);
    }
  }
  EXPECT_EQ(c_walks, 2);
}

TEST(Walks, PathAlternates) {
  const CoClickGraph g = graph_from_edges({{"A", "B", 3}});
  const WalkCorpus corpus = generate_walks(g, 3, 6, 9);
  for (const std::vector<int>& walk : corpus.walks) {
    ASSERT_EQ(walk.size(), 6u);
    for (std::size_t i = 1; i < walk.size(); ++i) {
      EXPECT_NE(walk[i], walk[i - 1]);  // only one neighbor each step
    }
  }
}

TEST(Walks, DeterministicCorpus) {
  const CoClickGraph g = graph_from_edges(
      {{"A", "B", 1}, {"B", "C", 2}, {"C", "A", 5}, {"C", "D", 1}});
  const WalkCorpus a = generate_walks(g, 4, 7, 13);
  const WalkCorpus b = generate_walks(g, 4, 7, 13);
  EXPECT_EQ(a.walks, b.walks);
  const WalkCorpus c = generate_walks(g, 4, 7, 14);
  EXPECT_NE(a.walks, c.walks);
}

TEST(Walks, WeightProportionalTransitions) {
  // From A, edge to B has weight 9 and to C weight 1: ~90% of first steps go
  // to B. With flattened weights both targets are near 50%.
  const CoClickGraph g = graph_from_edges({{"A", "B", 9}, {"A", "C", 1}});
  const Adjacency adj = build_adjacency(g);
  const int a_idx = adj.index_of("A");
  const int b_idx = adj.index_of("B");
  const auto count_b = [&](bool flatten) {
    const WalkCorpus corpus = generate_walks(g, 400, 2, 21, flatten);
    int b_steps = 0, a_starts = 0;
    for (const std::vector<int>& walk : corpus.walks) {
      if (walk.front() != a_idx) continue;
      ++a_starts;
      if (walk[1] == b_idx) ++b_steps;
    }
    EXPECT_EQ(a_starts, 400);
    return b_steps;
  };
  EXPECT_GT(count_b(false), 330);
  const int flat = count_b(true);
  EXPECT_GT(flat, 140);
  EXPECT_LT(flat, 260);
}

TEST(ContextPairs, WindowClipsAtBounds) {
  const std::vector<int> walk{1, 2, 3, 4, 5};
  const auto pairs = context_pairs(walk, 2);
  std::vector<int> contexts_of_3;
  for (const auto& [center, ctx] : pairs) {
    if (center == 3) contexts_of_3.push_back(ctx);
  }
  EXPECT_EQ(contexts_of_3, (std::vector<int>{1, 2, 4, 5}));
}

TEST(ContextPairs, SingletonAndTwoNodeWalks) {
  EXPECT_TRUE(context_pairs({7}, 3).empty());
  const auto pairs = context_pairs({1, 2}, 1);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], std::make_pair(1, 2));
  EXPECT_EQ(pairs[1], std::make_pair(2, 1));
}

TEST(CodeTree, TwoEqualLeaves) {
  const CodeTree tree = build_code_tree({1, 1});
  ASSERT_EQ(tree.path_bits[0].size(), 1u);
  ASSERT_EQ(tree.path_bits[1].size(), 1u);
  EXPECT_NE(tree.path_bits[0][0], tree.path_bits[1][0]);
  EXPECT_EQ(tree.inner_count, 1);
}

TEST(CodeTree, SkewedCountsGiveSkewedDepths) {
  const CodeTree tree = build_code_tree({5, 1, 1});
  EXPECT_EQ(tree.path_bits[0].size(), 1u);
  EXPECT_EQ(tree.path_bits[1].size(), 2u);
  EXPECT_EQ(tree.path_bits[2].size(), 2u);
}

TEST(CodeTree, SingleLeafHasEmptyCodeAndProbabilityOne) {
  const CodeTree tree = build_code_tree({3});
  EXPECT_TRUE(tree.path_bits[0].empty());
  EXPECT_EQ(tree.inner_count, 0);
  const std::vector<double> center{0.4, -0.2};
  EXPECT_DOUBLE_EQ(hs_log_prob(tree, {}, 2, 0, center), 0.0);
}

TEST(CodeTree, DeterministicShape) {
  const std::vector<std::int64_t> counts{4, 2, 7, 1, 1, 9};
  const CodeTree a = build_code_tree(counts);
  const CodeTree b = build_code_tree(counts);
  EXPECT_EQ(a.path_nodes, b.path_nodes);
  EXPECT_EQ(a.path_bits, b.path_bits);
}

TEST(HierSoftmax, LeafProbabilitiesSumToOne) {
  Rng rng(31);
  for (const int leaves : {2, 3, 5, 17, 64}) {
    std::vector<std::int64_t> counts(leaves);
    for (auto& c : counts) c = 1 + static_cast<std::int64_t>(rng.next_index(50));
    const CodeTree tree = build_code_tree(counts);
    const int dim = 6;
    std::vector<double> inner(static_cast<std::size_t>(tree.inner_count) * dim);
    for (double& v : inner) v = rng.next_uniform(-2.0, 2.0);
    std::vector<double> center(dim);
    for (double& v : center) v = rng.next_uniform(-2.0, 2.0);
    double total = 0.0;
    for (int leaf = 0; leaf < leaves; ++leaf) {
      total += std::exp(hs_log_prob(tree, inner, dim, leaf, center));
    }
    EXPECT_NEAR(total, 1.0, 1e-6) << leaves << " leaves";
  }
}

TEST(HierSoftmax, GradientMatchesFiniteDifferences) {
  Rng rng(77);
  const std::vector<std::int64_t> counts{3, 1, 4, 1, 5};
  const CodeTree tree = build_code_tree(counts);
  const int dim = 4;
  std::vector<double> inner(static_cast<std::size_t>(tree.inner_count) * dim);
  for (double& v : inner) v = rng.next_uniform(-1.0, 1.0);
  std::vector<double> center(dim);
  for (double& v : center) v = rng.next_uniform(-1.0, 1.0);
  const int leaf = 2;

  std::vector<double> grad_center(dim, 0.0);
  std::vector<double> grad_inner(inner.size(), 0.0);
  hs_loss_grad(tree, inner, dim, leaf, center, grad_center, &grad_inner);

  const double h = 1e-5;
  const auto loss_at = [&](std::vector<double>& target, std::size_t i, double delta) {
    target[i] += delta;
    const double value = -hs_log_prob(tree, inner, dim, leaf, center);
    target[i] -= delta;
    return value;
  };
  for (int j = 0; j < dim; ++j) {
    const double fd =
        (loss_at(center, j, h) - loss_at(center, j, -h)) / (2 * h);
    EXPECT_NEAR(grad_center[j], fd, 1e-6 + 1e-4 * std::abs(fd));
  }
  for (std::size_t j = 0; j < inner.size(); ++j) {
    const double fd = (loss_at(inner, j, h) - loss_at(inner, j, -h)) / (2 * h);
    EXPECT_NEAR(grad_inner[j], fd, 1e-6 + 1e-4 * std::abs(fd));
  }
}

CoClickGraph two_cliques(int size) {
  CoClickGraph g;
  g.level = GraphLevel::kItem;
  for (int clique = 0; clique < 2; ++clique) {
    for (int i = 0; i < size; ++i) {
      for (int j = i + 1; j < size; ++j) {
        const std::string a = "c" + std::to_string(clique) + "_" + std::to_string(i);
        const std::string b = "c" + std::to_string(clique) + "_" + std::to_string(j);
        g.nodes.insert(a);
        g.nodes.insert(b);
        g.edges[make_edge_key(a, b)] = 1;
      }
    }
  }
  return g;
}

double mean_cosine(const EmbeddingTable& table, bool same_clique) {
  double total = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < table.keys.size(); ++i) {
    for (std::size_t j = i + 1; j < table.keys.size(); ++j) {
      const bool same = table.keys[i][1] == table.keys[j][1];
      if (same != same_clique) continue;
      const auto a = table.row(static_cast<int>(i));
      const auto b = table.row(static_cast<int>(j));
      total += dot(a, b) / (l2_norm(a) * l2_norm(b));
      ++count;
    }
  }
  return total / count;
}

TEST(Skipgram, TwoCliquesSeparateAndLossDecreases) {
  const CoClickGraph g = two_cliques(5);
  const WalkCorpus corpus = generate_walks(g, 10, 20, 3);
  SkipgramConfig cfg;
  cfg.dim = 16;
  cfg.window = 5;
  cfg.epochs = 5;
  cfg.seed = 3;

  // Per-epoch mean pair loss is non-increasing over the first three epochs
  // (at most one increase of <= 1%).
  std::vector<double> losses;
  const EmbeddingTable table = train_skipgram(corpus, cfg, &losses);
  ASSERT_EQ(losses.size(), 5u);
  int increases = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (losses[i] > losses[i - 1]) {
      ++increases;
      EXPECT_LT(losses[i], losses[i - 1] * 1.01);
    }
  }
  EXPECT_LE(increases, 1);
  EXPECT_LT(losses.back(), losses.front());

  EXPECT_GT(mean_cosine(table, true), mean_cosine(table, false));
}

TEST(Skipgram, NegativeSamplingSeparatesCliques) {
  const CoClickGraph g = two_cliques(5);
  const WalkCorpus corpus = generate_walks(g, 10, 20, 3);
  SkipgramConfig cfg;
  cfg.dim = 16;
  cfg.window = 5;
  cfg.epochs = 5;
  cfg.seed = 3;
  cfg.mode = SkipgramMode::kNegSampling;
  cfg.negatives = 5;
  const EmbeddingTable table = train_skipgram(corpus, cfg);
  EXPECT_GT(mean_cosine(table, true), mean_cosine(table, false));
}

TEST(Skipgram, ZeroEpochsReturnsSeededInit) {
  const CoClickGraph g = two_cliques(3);
  const WalkCorpus corpus = generate_walks(g, 2, 5, 1);
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 0;
  cfg.seed = 11;
  const EmbeddingTable a = train_skipgram(corpus, cfg);
  const EmbeddingTable b = train_skipgram(corpus, cfg);
  EXPECT_EQ(a.data, b.data);
  for (const double v : a.data) {
    EXPECT_GE(v, -0.5 / cfg.dim);
    EXPECT_LE(v, 0.5 / cfg.dim);
  }
}

TEST(Skipgram, DeterministicTraining) {
  const CoClickGraph g = two_cliques(4);
  const WalkCorpus corpus = generate_walks(g, 3, 8, 5);
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 2;
  cfg.seed = 5;
  const EmbeddingTable a = train_skipgram(corpus, cfg);
  const EmbeddingTable b = train_skipgram(corpus, cfg);
  EXPECT_EQ(a.data, b.data);
}

TEST(Embeddings, SaveLoadRoundtrip) {
  EmbeddingTable table;
  table.keys = {"alpha", "beta"};
  table.dim = 3;
  table.data = {0.125, -2.5, 1e-17, 3.0, 4.5, -0.75};
  std::stringstream stream;
  save_embeddings(stream, table);
  const EmbeddingTable back = load_embeddings(stream);
  EXPECT_EQ(back.keys, table.keys);
  EXPECT_EQ(back.dim, table.dim);
  EXPECT_EQ(back.data, table.data);
}

TEST(Embeddings, LoadRejectsDuplicateKeys) {
  std::stringstream stream("2 2\na 1 2\na 3 4\n");
  EXPECT_THROW(load_embeddings(stream), Error);
}

}  // namespace
}  // namespace vid
