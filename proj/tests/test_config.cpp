#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "vid/common.hpp"
#include "vid/config.hpp"

namespace vid {
namespace {

PipelineConfig parse_text(const std::string& text, PipelineConfig start = {}) {
  std::istringstream in(text);
  parse_config(in, start);
  return start;
}

std::string dump_text(const PipelineConfig& cfg) {
  std::ostringstream out;
  dump_config(out, cfg);
  return out.str();
}

void expect_rejected_at_line(const std::string& text, const std::string& line_tag) {
  try {
    parse_text(text);
    FAIL() << "expected kInvalidConfig for:\n" << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    EXPECT_NE(std::string(e.what()).find(line_tag), std::string::npos)
        << "message was: " << e.what();
  }
}

TEST(ConfigDefaults, MatchDocumentedValues) {
  const PipelineConfig cfg;
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.threads, 0);
  EXPECT_EQ(cfg.embed_walks_per_node, 10);
  EXPECT_EQ(cfg.embed_walk_length, 40);
  EXPECT_EQ(cfg.embed_window, 5);
  EXPECT_EQ(cfg.embed_dim, 64);
  EXPECT_EQ(cfg.embed_mode, "hs");
  EXPECT_EQ(cfg.cluster_k_leaf, 0);   // auto: min(100, node_count)
  EXPECT_EQ(cfg.cluster_k_item, 0);   // auto: max(16, node_count / 20)
  EXPECT_DOUBLE_EQ(cfg.mine_gamma_percentile, 60.0);
  EXPECT_DOUBLE_EQ(cfg.mine_epsilon_percentile, 40.0);
  EXPECT_EQ(cfg.mine_list_n, 5);
  EXPECT_DOUBLE_EQ(cfg.train_eta_simple, 1.0);
  EXPECT_DOUBLE_EQ(cfg.train_eta_hard, 2.0);
  EXPECT_DOUBLE_EQ(cfg.train_alpha, 1.0);
  EXPECT_DOUBLE_EQ(cfg.train_beta, 1.0);
  EXPECT_DOUBLE_EQ(cfg.train_lambda, 1.0);
  EXPECT_EQ(cfg.eval_recall_ks, (std::vector<int>{1, 4, 20}));
  EXPECT_EQ(cfg.eval_map_k, 20);
  EXPECT_DOUBLE_EQ(cfg.eval_ensemble_weight, 0.5);
}

TEST(ConfigParse, AppliesValuesOnTopOfDefaults) {
  const PipelineConfig cfg = parse_text(
      "run.seed = 7\n"
      "embed.dim = 32\n"
      "train.lr = 0.005\n");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.embed_dim, 32);
  EXPECT_DOUBLE_EQ(cfg.train_lr, 0.005);
  // Untouched keys keep their defaults.
  EXPECT_EQ(cfg.embed_window, 5);
  EXPECT_DOUBLE_EQ(cfg.train_momentum, 0.9);
}

TEST(ConfigParse, SkipsBlankLinesAndComments) {
  const PipelineConfig cfg = parse_text(
      "# pipeline overrides\n"
      "\n"
      "   \t\n"
      "# another note\n"
      "run.threads = 2\n");
  EXPECT_EQ(cfg.threads, 2);
}

TEST(ConfigParse, TrimsWhitespaceAroundKeyAndValue) {
  const PipelineConfig cfg = parse_text("   embed.epochs   =   9   \r\n");
  EXPECT_EQ(cfg.embed_epochs, 9);
}

TEST(ConfigParse, ParsesBoolsEnumsAndVectors) {
  const PipelineConfig cfg = parse_text(
      "embed.mode = neg\n"
      "embed.shuffle_walks = true\n"
      "train.printed_pair_form = false\n"
      "eval.recall_ks = 1,2,8\n"
      "mine.channel_weights = 1,0.02\n"
      "synth.channel_dims = 4,2\n");
  EXPECT_EQ(cfg.embed_mode, "neg");
  EXPECT_TRUE(cfg.embed_shuffle_walks);
  EXPECT_FALSE(cfg.train_printed_pair_form);
  EXPECT_EQ(cfg.eval_recall_ks, (std::vector<int>{1, 2, 8}));
  ASSERT_EQ(cfg.mine_channel_weights.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.mine_channel_weights[0], 1.0);
  EXPECT_DOUBLE_EQ(cfg.mine_channel_weights[1], 0.02);
  EXPECT_EQ(cfg.synth.channel_dims, (std::vector<int>{4, 2}));
}

TEST(ConfigParse, EmptyValueClearsAVectorKey) {
  PipelineConfig start;
  start.mine_channel_weights = {1.0, 2.0};
  const PipelineConfig cfg = parse_text("mine.channel_weights =\n", start);
  EXPECT_TRUE(cfg.mine_channel_weights.empty());
}

TEST(ConfigParse, RejectsUnknownKeyWithLineNumber) {
  expect_rejected_at_line(
      "run.seed = 7\n"
      "embed.dimension = 32\n",
      "line 2");
}

TEST(ConfigParse, RejectsDuplicateKeyWithLineNumber) {
  expect_rejected_at_line(
      "run.seed = 7\n"
      "# comment between\n"
      "run.seed = 8\n",
      "line 3");
}

TEST(ConfigParse, RejectsLineWithoutEquals) {
  expect_rejected_at_line("run.seed 7\n", "line 1");
}

TEST(ConfigParse, RejectsBadTypedValues) {
  expect_rejected_at_line("train.lr = fast\n", "line 1");
  expect_rejected_at_line("embed.epochs = 2.5\n", "line 1");
  expect_rejected_at_line("embed.shuffle_walks = 1\n", "line 1");
  expect_rejected_at_line("embed.mode = cbow\n", "line 1");
  expect_rejected_at_line("eval.recall_ks = 1,x,3\n", "line 1");
}

TEST(ConfigRoundtrip, DumpParseDumpIsIdempotentOnDefaults) {
  const std::string first = dump_text(PipelineConfig{});
  const PipelineConfig reparsed = parse_text(first);
  EXPECT_EQ(dump_text(reparsed), first);
}

TEST(ConfigRoundtrip, DumpParseDumpIsIdempotentOnModifiedConfig) {
  PipelineConfig cfg;
  cfg.seed = 1234567;
  cfg.embed_mode = "neg";
  cfg.embed_lr0 = 0.012345678901234567;
  cfg.mine_channel_weights = {1.0, 0.02, 3.5};
  cfg.eval_recall_ks = {2, 16};
  cfg.train_normalize_triplet = true;
  cfg.synth.p_in = 0.3;
  cfg.synth.p_out = 0.01;
  const std::string first = dump_text(cfg);
  const PipelineConfig reparsed = parse_text(first);
  EXPECT_EQ(dump_text(reparsed), first);
}

TEST(ConfigRoundtrip, ParseOfDumpReproducesEveryField) {
  PipelineConfig cfg;
  cfg.threads = 3;
  cfg.graph_min_edge_weight = 2;
  cfg.cluster_k_item = 11;
  cfg.mine_virtual_source_feature = "both";
  cfg.train_batch_size = 8;
  cfg.eval_ensemble_weight = 0.25;
  const PipelineConfig reparsed = parse_text(dump_text(cfg));
  EXPECT_EQ(reparsed.threads, 3);
  EXPECT_EQ(reparsed.graph_min_edge_weight, 2);
  EXPECT_EQ(reparsed.cluster_k_item, 11);
  EXPECT_EQ(reparsed.mine_virtual_source_feature, "both");
  EXPECT_EQ(reparsed.train_batch_size, 8);
  EXPECT_DOUBLE_EQ(reparsed.eval_ensemble_weight, 0.25);
}

}  // namespace
}  // namespace vid
