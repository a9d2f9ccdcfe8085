// File-wired pipeline stages: synth | ingest | graph | embed | cluster | map |
// mine | train-category | train-feature | eval-category | eval-retrieval | e2e.
// Every stage reads fixed paths under one output root, validates its inputs
// before creating any output, and writes byte-reproducible files.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vid/coclick_graph.hpp"
#include "vid/common.hpp"
#include "vid/config.hpp"
#include "vid/deepwalk.hpp"
#include "vid/eval.hpp"
#include "vid/kmeans.hpp"
#include "vid/losses.hpp"
#include "vid/mining.hpp"
#include "vid/network.hpp"
#include "vid/pvlog.hpp"
#include "vid/rng.hpp"
#include "vid/synth.hpp"
#include "vid/train.hpp"

namespace vid {

namespace paths {
inline constexpr const char* kPvlog = "synth/pvlog.jsonl";
inline constexpr const char* kPvlogEval = "synth/pvlog_eval.jsonl";
inline constexpr const char* kGroundTruth = "synth/ground_truth.jsonl";
inline constexpr const char* kRecords = "ingest/records.jsonl";
inline constexpr const char* kEvalRecords = "ingest/eval_records.jsonl";
inline constexpr const char* kIngestSummary = "ingest/summary.json";
inline constexpr const char* kItemGraph = "graph/item_graph.json";
inline constexpr const char* kLeafGraph = "graph/leaf_graph.json";
inline constexpr const char* kItemEmbeddings = "embed/item_embeddings.txt";
inline constexpr const char* kLeafEmbeddings = "embed/leaf_embeddings.txt";
inline constexpr const char* kItemAssignment = "cluster/item_assignment.jsonl";
inline constexpr const char* kLeafAssignment = "cluster/leaf_assignment.jsonl";
inline constexpr const char* kVidMap = "map/vid_map.json";
inline constexpr const char* kCategoryClassSamples = "mine/category_class_samples.jsonl";
inline constexpr const char* kCategoryPairs = "mine/category_pairs.jsonl";
inline constexpr const char* kFeatureClassSamples = "mine/feature_class_samples.jsonl";
inline constexpr const char* kTriplets = "mine/triplets.jsonl";
inline constexpr const char* kLists = "mine/lists.jsonl";
inline constexpr const char* kTopVocab = "mine/top_vocab.json";
inline constexpr const char* kMineSummary = "mine/summary.json";
inline constexpr const char* kCategoryCheckpoint = "train/category_checkpoint.bin";
inline constexpr const char* kCategoryLoss = "train/category_loss.csv";
inline constexpr const char* kFeatureCheckpoint = "train/feature_checkpoint.bin";
inline constexpr const char* kFeatureLoss = "train/feature_loss.csv";
inline constexpr const char* kCategoryReportJson = "eval/category_report.json";
inline constexpr const char* kCategoryReportTxt = "eval/category_report.txt";
inline constexpr const char* kRetrievalReportJson = "eval/retrieval_report.json";
inline constexpr const char* kRetrievalReportTxt = "eval/retrieval_report.txt";
inline constexpr const char* kE2eReport = "eval/e2e_report.json";
}  // namespace paths

namespace detail {

inline void require_inputs(const std::filesystem::path& root,
                           const std::vector<const char*>& rels) {
  for (const char* rel : rels) {
    const std::filesystem::path p = root / rel;
    if (!std::filesystem::exists(p)) {
      fail(ErrorCode::kMissingInput, "missing input file: " + p.string());
    }
  }
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
  std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(ErrorCode::kMissingInput, "cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + p.string());
  return out;
}

inline std::vector<PVRecord> read_records(const std::filesystem::path& p, bool strict,
                                          std::int64_t* skipped = nullptr) {
  std::ifstream in = open_in(p);
  ParseResult parsed = parse_pvlog(in, strict);
  if (skipped != nullptr) *skipped = static_cast<std::int64_t>(parsed.skipped.size());
  for (const auto& [line_no, reason] : parsed.skipped) {
    log_warn("%s:%d skipped: %s", p.string().c_str(), line_no, reason.c_str());
  }
  return std::move(parsed.records);
}

inline std::uint64_t level_seed(std::uint64_t seed, GraphLevel level) {
  return mix_key(seed, 0x17EB, level == GraphLevel::kItem ? 1 : 2);
}

inline std::vector<double> encode(const Network& net, const FeatureChannels& f) {
  Forward ws;
  forward(net, concat(f), ws);
  return ws.embed;
}

inline std::vector<double> channel_weights_or_uniform(const PipelineConfig& cfg,
                                                      std::size_t arity) {
  if (cfg.mine_channel_weights.empty()) {
    return std::vector<double>(arity, 1.0);
  }
  return cfg.mine_channel_weights;
}

inline VirtualSampleSource parse_virtual_source(const std::string& name) {
  if (name == "query") return VirtualSampleSource::kQuery;
  if (name == "item") return VirtualSampleSource::kItem;
  return VirtualSampleSource::kBoth;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

inline void run_synth(const PipelineConfig& cfg, const std::filesystem::path& root) {
  const SynthOutput out = generate_synthetic(cfg.synth, cfg.seed);
  {
    std::ofstream os = detail::open_out(root / paths::kPvlog);
    write_pvlog(os, out.train_records);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kPvlogEval);
    write_pvlog(os, out.eval_records);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kGroundTruth);
    write_ground_truth(os, out.truth);
  }
  log_info("synth: %zu train PVs, %zu eval PVs, %zu items", out.train_records.size(),
           out.eval_records.size(), out.truth.size());
}

// ---------------------------------------------------------------------------
// ingest

inline void run_ingest(const PipelineConfig& cfg, const std::filesystem::path& root,
                       bool strict) {
  (void)cfg;
  detail::require_inputs(root, {paths::kPvlog, paths::kPvlogEval});
  std::int64_t train_skipped = 0, eval_skipped = 0;
  const std::vector<PVRecord> train =
      detail::read_records(root / paths::kPvlog, strict, &train_skipped);
  const std::vector<PVRecord> eval =
      detail::read_records(root / paths::kPvlogEval, strict, &eval_skipped);
  {
    std::ofstream os = detail::open_out(root / paths::kRecords);
    write_pvlog(os, train);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kEvalRecords);
    write_pvlog(os, eval);
  }
  nlohmann::ordered_json j;
  j["train_records"] = train.size();
  j["train_skipped"] = train_skipped;
  j["eval_records"] = eval.size();
  j["eval_skipped"] = eval_skipped;
  std::ofstream os = detail::open_out(root / paths::kIngestSummary);
  os << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// graph

inline void run_graph(const PipelineConfig& cfg, const std::filesystem::path& root) {
  detail::require_inputs(root, {paths::kRecords});
  const std::vector<PVRecord> records = detail::read_records(root / paths::kRecords, true);
  for (const GraphLevel level : {GraphLevel::kItem, GraphLevel::kLeafCategory}) {
    CoClickGraph graph = project_coclick(records, level);
    graph = prune(graph, cfg.graph_min_edge_weight, cfg.graph_min_degree);
    const char* rel = level == GraphLevel::kItem ? paths::kItemGraph : paths::kLeafGraph;
    std::ofstream os = detail::open_out(root / rel);
    save_graph(os, graph);
    log_info("graph[%s]: %zu nodes, %zu edges", graph_level_name(level),
             graph.nodes.size(), graph.edges.size());
  }
}

// ---------------------------------------------------------------------------
// embed

inline void run_embed(const PipelineConfig& cfg, const std::filesystem::path& root) {
  detail::require_inputs(root, {paths::kItemGraph, paths::kLeafGraph});
  for (const GraphLevel level : {GraphLevel::kItem, GraphLevel::kLeafCategory}) {
    const char* in_rel = level == GraphLevel::kItem ? paths::kItemGraph : paths::kLeafGraph;
    const char* out_rel =
        level == GraphLevel::kItem ? paths::kItemEmbeddings : paths::kLeafEmbeddings;
    std::ifstream is = detail::open_in(root / in_rel);
    const CoClickGraph graph = load_graph(is);
    if (graph.nodes.empty()) {
      fail(ErrorCode::kEmptyCorpus,
           std::string("graph ") + in_rel + " has no nodes to embed");
    }
    const std::uint64_t seed = detail::level_seed(cfg.seed, level);
    const WalkCorpus corpus =
        generate_walks(graph, cfg.embed_walks_per_node, cfg.embed_walk_length, seed,
                       cfg.embed_flatten_weights);
    SkipgramConfig sg;
    sg.dim = cfg.embed_dim;
    sg.window = cfg.embed_window;
    sg.epochs = cfg.embed_epochs;
    sg.lr0 = cfg.embed_lr0;
    sg.mode = cfg.embed_mode == "neg" ? SkipgramMode::kNegSampling
                                      : SkipgramMode::kHierSoftmax;
    sg.negatives = cfg.embed_negatives;
    sg.shuffle = cfg.embed_shuffle_walks;
    sg.seed = seed;
    const EmbeddingTable table = train_skipgram(corpus, sg);
    std::ofstream os = detail::open_out(root / out_rel);
    save_embeddings(os, table);
    log_info("embed[%s]: %zu nodes, dim %d", graph_level_name(level),
             table.keys.size(), table.dim);
  }
}

// ---------------------------------------------------------------------------
// cluster

inline int resolve_k(const PipelineConfig& cfg, GraphLevel level, int node_count) {
  int k = level == GraphLevel::kItem ? cfg.cluster_k_item : cfg.cluster_k_leaf;
  if (k == 0) {
    k = level == GraphLevel::kItem ? std::max(16, node_count / 20)
                                   : std::min(100, node_count);
  }
  return std::clamp(k, 1, node_count);
}

inline void run_cluster(const PipelineConfig& cfg, const std::filesystem::path& root) {
  detail::require_inputs(root, {paths::kItemEmbeddings, paths::kLeafEmbeddings});
  for (const GraphLevel level : {GraphLevel::kItem, GraphLevel::kLeafCategory}) {
    const char* in_rel =
        level == GraphLevel::kItem ? paths::kItemEmbeddings : paths::kLeafEmbeddings;
    const char* out_rel =
        level == GraphLevel::kItem ? paths::kItemAssignment : paths::kLeafAssignment;
    std::ifstream is = detail::open_in(root / in_rel);
    const EmbeddingTable table = load_embeddings(is);
    const int k = resolve_k(cfg, level, static_cast<int>(table.keys.size()));
    const VirtualIdAssignment assignment = cluster_embeddings(
        table, k, detail::level_seed(cfg.seed, level), cfg.cluster_max_iters, level);
    std::ofstream os = detail::open_out(root / out_rel);
    save_assignment(os, assignment);
    log_info("cluster[%s]: %zu nodes into %d virtual ids", graph_level_name(level),
             assignment.nodes.size(), k);
  }
}

// ---------------------------------------------------------------------------
// map

inline void run_map(const PipelineConfig& cfg, const std::filesystem::path& root) {
  (void)cfg;
  detail::require_inputs(root, {paths::kLeafAssignment, paths::kRecords});
  std::ifstream is = detail::open_in(root / paths::kLeafAssignment);
  const LoadedAssignment loaded = load_assignment(is);
  VirtualIdAssignment assignment;
  assignment.level = GraphLevel::kLeafCategory;
  assignment.nodes = loaded.nodes;
  assignment.vid = loaded.vid;
  assignment.k = loaded.k;
  const std::vector<PVRecord> records = detail::read_records(root / paths::kRecords, true);
  const VidCategoryMap map = map_vid_to_top_category(assignment, records);
  std::ofstream os = detail::open_out(root / paths::kVidMap);
  save_vid_map(os, map);
  log_info("map: %zu mapped, %zu unmapped", map.vid_to_top.size(), map.unmapped.size());
}

// ---------------------------------------------------------------------------
// mine

inline void run_mine(const PipelineConfig& cfg, const std::filesystem::path& root) {
  detail::require_inputs(root,
                         {paths::kRecords, paths::kLeafAssignment, paths::kItemAssignment});
  const std::vector<PVRecord> records = detail::read_records(root / paths::kRecords, true);
  if (records.empty()) fail(ErrorCode::kEmptyCorpus, "no records to mine");
  std::ifstream leaf_is = detail::open_in(root / paths::kLeafAssignment);
  const LoadedAssignment leaf_assignment = load_assignment(leaf_is);
  std::ifstream item_is = detail::open_in(root / paths::kItemAssignment);
  const LoadedAssignment item_assignment = load_assignment(item_is);

  const CategoryVocab vocab = build_category_vocab(records);
  const std::vector<double> weights =
      detail::channel_weights_or_uniform(cfg, records.front().query_features.size());

  double gamma = cfg.mine_gamma;
  double epsilon = cfg.mine_epsilon;
  if (gamma <= 0.0 || epsilon <= 0.0) {
    const DistancePercentiles pct = distance_percentiles(
        records, weights, cfg.mine_gamma_percentile, cfg.mine_epsilon_percentile);
    if (gamma <= 0.0) gamma = pct.gamma;
    if (epsilon <= 0.0) epsilon = pct.epsilon;
    log_info("mine: auto gamma=%.6f epsilon=%.6f", gamma, epsilon);
  }
  if (gamma <= 0.0 || epsilon <= 0.0) {
    fail(ErrorCode::kInvalidConfig, "cannot derive positive gamma/epsilon thresholds");
  }

  // Category branch: simple/hard/pair from click semantics, virtual from the
  // leaf-level assignment.
  std::vector<ClassSample> category_class;
  std::vector<PairSample> category_pairs;
  for (const PVRecord& record : records) {
    auto [cls, pairs] = mine_category_samples(record, vocab);
    for (ClassSample& s : cls) category_class.push_back(std::move(s));
    for (PairSample& s : pairs) category_pairs.push_back(std::move(s));
  }
  const VirtualMineResult leaf_virtual = mine_virtual_samples(
      records, leaf_assignment, GraphLevel::kLeafCategory,
      detail::parse_virtual_source(cfg.mine_virtual_source_category));
  for (const ClassSample& s : leaf_virtual.samples) category_class.push_back(s);

  // Feature branch: virtual from the item-level assignment, triplets, lists.
  const VirtualMineResult item_virtual = mine_virtual_samples(
      records, item_assignment, GraphLevel::kItem,
      detail::parse_virtual_source(cfg.mine_virtual_source_feature));
  std::vector<Triplet> triplets;
  std::vector<ListSample> lists;
  const std::vector<double> position_weights = dcg_position_weights(cfg.mine_list_n);
  std::int64_t lists_absent = 0;
  for (const PVRecord& record : records) {
    std::vector<Triplet> t =
        mine_triplets(record, gamma, epsilon, weights, cfg.mine_max_triplets_per_pv);
    for (Triplet& x : t) triplets.push_back(std::move(x));
    std::optional<ListSample> l =
        mine_list_sample(record, cfg.mine_list_n, weights, position_weights);
    if (l.has_value()) {
      lists.push_back(std::move(*l));
    } else {
      ++lists_absent;
    }
  }

  {
    std::ofstream os = detail::open_out(root / paths::kCategoryClassSamples);
    write_class_samples(os, category_class);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kCategoryPairs);
    write_pair_samples(os, category_pairs);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kFeatureClassSamples);
    write_class_samples(os, item_virtual.samples);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kTriplets);
    write_triplets(os, triplets);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kLists);
    write_list_samples(os, lists);
  }
  {
    std::ofstream os = detail::open_out(root / paths::kTopVocab);
    write_category_vocab(os, vocab);
  }
  nlohmann::ordered_json j;
  j["gamma"] = gamma;
  j["epsilon"] = epsilon;
  j["category_class_samples"] = category_class.size();
  j["category_pairs"] = category_pairs.size();
  j["feature_class_samples"] = item_virtual.samples.size();
  j["triplets"] = triplets.size();
  j["lists"] = lists.size();
  j["lists_absent"] = lists_absent;
  j["leaf_virtual_skipped"] = leaf_virtual.skipped;
  j["item_virtual_skipped"] = item_virtual.skipped;
  std::ofstream os = detail::open_out(root / paths::kMineSummary);
  os << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// train

inline TrainConfig make_train_config(const PipelineConfig& cfg) {
  TrainConfig tc;
  tc.alpha = cfg.train_alpha;
  tc.beta = cfg.train_beta;
  tc.lambda = cfg.train_lambda;
  tc.eta_simple = cfg.train_eta_simple;
  tc.eta_hard = cfg.train_eta_hard;
  tc.lr = cfg.train_lr;
  tc.momentum = cfg.train_momentum;
  tc.batch_size = cfg.train_batch_size;
  tc.epochs = cfg.train_epochs;
  tc.seed = cfg.seed;
  tc.printed_pair_form = cfg.train_printed_pair_form;
  tc.printed_list_direction = cfg.train_printed_list_direction;
  tc.normalize_triplet = cfg.train_normalize_triplet;
  return tc;
}

inline void run_train_category(const PipelineConfig& cfg,
                               const std::filesystem::path& root) {
  detail::require_inputs(root, {paths::kCategoryClassSamples, paths::kCategoryPairs,
                                paths::kTopVocab, paths::kLeafAssignment});
  SampleSet set;
  {
    std::ifstream is = detail::open_in(root / paths::kCategoryClassSamples);
    set.class_samples = read_class_samples(is);
  }
  {
    std::ifstream is = detail::open_in(root / paths::kCategoryPairs);
    set.pairs = read_pair_samples(is);
  }
  std::ifstream vis = detail::open_in(root / paths::kTopVocab);
  const CategoryVocab vocab = load_category_vocab(vis);
  std::ifstream ais = detail::open_in(root / paths::kLeafAssignment);
  const LoadedAssignment assignment = load_assignment(ais);
  if (set.class_samples.empty()) {
    fail(ErrorCode::kEmptyBatch, "no category samples to train on");
  }

  NetworkDims dims;
  dims.input = static_cast<int>(concat(set.class_samples.front().features).size());
  dims.hidden = cfg.train_hidden;
  dims.embed = cfg.train_embed_dim;
  dims.virtual_classes = assignment.k;
  dims.top_classes = vocab.size();
  Network net = init_network(dims, mix_key(cfg.seed, 0xCA7));
  const TrainResult result =
      train_network(std::move(net), NetworkKind::kCategory, set, make_train_config(cfg));
  if (result.diverged) {
    log_warn("train-category: diverged; checkpoint holds the last stable epoch");
  }
  {
    std::ofstream os = detail::open_out(root / paths::kCategoryCheckpoint, true);
    save_checkpoint(os, result.net);
  }
  std::ofstream os = detail::open_out(root / paths::kCategoryLoss);
  write_loss_history(os, result.history);
}

inline void run_train_feature(const PipelineConfig& cfg,
                              const std::filesystem::path& root) {
  detail::require_inputs(root, {paths::kFeatureClassSamples, paths::kTriplets,
                                paths::kLists, paths::kItemAssignment});
  SampleSet set;
  {
    std::ifstream is = detail::open_in(root / paths::kFeatureClassSamples);
    set.class_samples = read_class_samples(is);
  }
  {
    std::ifstream is = detail::open_in(root / paths::kTriplets);
    set.triplets = read_triplets(is);
  }
  {
    std::ifstream is = detail::open_in(root / paths::kLists);
    set.lists = read_list_samples(is);
  }
  std::ifstream ais = detail::open_in(root / paths::kItemAssignment);
  const LoadedAssignment assignment = load_assignment(ais);
  if (set.class_samples.empty() && set.triplets.empty() && set.lists.empty()) {
    fail(ErrorCode::kEmptyBatch, "no feature samples to train on");
  }

  FeatureChannels probe;
  if (!set.class_samples.empty()) {
    probe = set.class_samples.front().features;
  } else if (!set.triplets.empty()) {
    probe = set.triplets.front().q;
  } else {
    probe = set.lists.front().q;
  }
  NetworkDims dims;
  dims.input = static_cast<int>(concat(probe).size());
  dims.hidden = cfg.train_hidden;
  dims.embed = cfg.train_embed_dim;
  dims.virtual_classes = std::max(assignment.k, 1);
  dims.top_classes = 0;
  Network net = init_network(dims, mix_key(cfg.seed, 0xFEA));
  const TrainResult result =
      train_network(std::move(net), NetworkKind::kFeature, set, make_train_config(cfg));
  if (result.diverged) {
    log_warn("train-feature: diverged; checkpoint holds the last stable epoch");
  }
  {
    std::ofstream os = detail::open_out(root / paths::kFeatureCheckpoint, true);
    save_checkpoint(os, result.net);
  }
  std::ofstream os = detail::open_out(root / paths::kFeatureLoss);
  write_loss_history(os, result.history);
}

// ---------------------------------------------------------------------------
// eval-category

inline void run_eval_category(const PipelineConfig& cfg,
                              const std::filesystem::path& root) {
  detail::require_inputs(root, {paths::kEvalRecords, paths::kRecords,
                                paths::kCategoryCheckpoint, paths::kVidMap,
                                paths::kTopVocab, paths::kGroundTruth});
  std::vector<PVRecord> queries =
      detail::read_records(root / paths::kEvalRecords, true);
  if (queries.empty()) {
    log_warn("eval-category: no holdout records; evaluating on the training log");
    queries = detail::read_records(root / paths::kRecords, true);
  }
  std::ifstream cis = detail::open_in(root / paths::kCategoryCheckpoint, true);
  const Network net = load_checkpoint(cis);
  std::ifstream mis = detail::open_in(root / paths::kVidMap);
  const VidCategoryMap vid_map = load_vid_map(mis);
  std::ifstream vis = detail::open_in(root / paths::kTopVocab);
  const CategoryVocab vocab = load_category_vocab(vis);
  std::ifstream gis = detail::open_in(root / paths::kGroundTruth);
  const std::vector<GroundTruthEntry> truth_entries = parse_ground_truth(gis);
  std::map<std::string, std::string> item_top;
  for (const GroundTruthEntry& e : truth_entries) item_top[e.item_id] = e.top_category;

  std::map<std::string, std::string> truth;
  std::map<std::string, std::string> pred_ensemble, pred_top, pred_virtual;
  std::int64_t missing_truth = 0;
  for (const PVRecord& record : queries) {
    const auto it = item_top.find(record.query_id);
    if (it == item_top.end()) {
      ++missing_truth;
      continue;
    }
    truth[record.pv_id] = it->second;
    const auto [e_idx, e_scores] =
        predict_category(net, record.query_features, vid_map, vocab,
                         cfg.eval_ensemble_weight);
    const auto [t_idx, t_scores] =
        predict_category(net, record.query_features, vid_map, vocab, 1.0);
    const auto [v_idx, v_scores] =
        predict_category(net, record.query_features, vid_map, vocab, 0.0);
    pred_ensemble[record.pv_id] = vocab.names[e_idx];
    pred_top[record.pv_id] = vocab.names[t_idx];
    pred_virtual[record.pv_id] = vocab.names[v_idx];
  }
  const PrecisionReport ens = precision_at_1(pred_ensemble, truth);
  const PrecisionReport top = precision_at_1(pred_top, truth);
  const PrecisionReport vrt = precision_at_1(pred_virtual, truth);

  nlohmann::ordered_json j;
  j["queries"] = ens.evaluated;
  j["missing_truth"] = missing_truth;
  j["ensemble_weight"] = cfg.eval_ensemble_weight;
  const auto fill = [](const PrecisionReport& r) {
    nlohmann::ordered_json out;
    out["precision_at_1"] = r.weighted;
    out["macro"] = r.macro;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [cat, counts] : r.per_category) {
      nlohmann::ordered_json row;
      row["correct"] = counts.first;
      row["total"] = counts.second;
      row["precision"] = static_cast<double>(counts.first) /
                         static_cast<double>(counts.second);
      per[cat] = std::move(row);
    }
    out["per_category"] = std::move(per);
    return out;
  };
  j["ensemble"] = fill(ens);
  j["top_branch"] = fill(top);
  j["virtual_branch"] = fill(vrt);
  {
    std::ofstream os = detail::open_out(root / paths::kCategoryReportJson);
    os << j.dump(2) << '\n';
  }

  std::ofstream os = detail::open_out(root / paths::kCategoryReportTxt);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %8s %10s %10s %10s\n", "category", "queries",
                "ensemble", "top", "virtual");
  os << buf;
  for (const auto& [cat, counts] : ens.per_category) {
    const auto pct = [&](const PrecisionReport& r) {
      const auto it = r.per_category.find(cat);
      if (it == r.per_category.end() || it->second.second == 0) return 0.0;
      return static_cast<double>(it->second.first) /
             static_cast<double>(it->second.second);
    };
    std::snprintf(buf, sizeof(buf), "%-16s %8lld %10.4f %10.4f %10.4f\n", cat.c_str(),
                  static_cast<long long>(counts.second), pct(ens), pct(top), pct(vrt));
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-16s %8lld %10.4f %10.4f %10.4f\n", "average",
                static_cast<long long>(ens.evaluated), ens.weighted, top.weighted,
                vrt.weighted);
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-16s %8s %10.4f %10.4f %10.4f\n", "macro", "",
                ens.macro, top.macro, vrt.macro);
  os << buf;
}

// ---------------------------------------------------------------------------
// eval-retrieval

inline void run_eval_retrieval(const PipelineConfig& cfg,
                               const std::filesystem::path& root, int threads = 0) {
  detail::require_inputs(root, {paths::kEvalRecords, paths::kRecords,
                                paths::kFeatureCheckpoint, paths::kGroundTruth});
  const std::vector<PVRecord> train = detail::read_records(root / paths::kRecords, true);
  std::vector<PVRecord> queries = detail::read_records(root / paths::kEvalRecords, true);
  if (queries.empty()) {
    log_warn("eval-retrieval: no holdout records; evaluating on the training log");
    queries = train;
  }
  std::ifstream cis = detail::open_in(root / paths::kFeatureCheckpoint, true);
  const Network net = load_checkpoint(cis);
  std::ifstream gis = detail::open_in(root / paths::kGroundTruth);
  const std::vector<GroundTruthEntry> truth_entries = parse_ground_truth(gis);
  std::map<std::string, int> item_group;
  std::map<std::string, std::string> item_top;
  std::map<int, std::set<std::string>> group_members;
  for (const GroundTruthEntry& e : truth_entries) {
    item_group[e.item_id] = e.identical_group;
    item_top[e.item_id] = e.top_category;
    group_members[e.identical_group].insert(e.item_id);
  }

  // Inventory: every item seen in either log, encoded by the feature network.
  std::map<std::string, const FeatureChannels*> inventory;
  for (const std::vector<PVRecord>* recs :
       std::initializer_list<const std::vector<PVRecord>*>{&train, &queries}) {
    for (const PVRecord& record : *recs) {
      for (const ResultEntry& entry : record.results) {
        inventory.emplace(entry.item_id, &entry.item_features);
      }
    }
  }
  std::vector<std::pair<std::string, const FeatureChannels*>> items(inventory.begin(),
                                                                    inventory.end());
  const int workers = threads == 0 ? default_thread_count() : threads;
  std::vector<std::vector<double>> rows(items.size());
  parallel_for(static_cast<std::int64_t>(items.size()), workers, [&](std::int64_t i) {
    rows[i] = detail::encode(net, *items[i].second);
  });
  RetrievalIndex index;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto it = item_top.find(items[i].first);
    index.add(items[i].first, rows[i], it == item_top.end() ? "" : it->second);
  }
  index.finalize();

  int k_max = cfg.eval_map_k;
  for (int k : cfg.eval_recall_ks) k_max = std::max(k_max, k);
  std::map<std::string, std::vector<std::string>> rankings;
  std::map<std::string, std::set<std::string>> truth;
  std::int64_t skipped_queries = 0;
  std::vector<std::vector<std::string>> ranked(queries.size());
  parallel_for(static_cast<std::int64_t>(queries.size()), workers, [&](std::int64_t i) {
    ranked[i] = retrieve(detail::encode(net, queries[i].query_features), index, k_max);
  });
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const PVRecord& record = queries[i];
    const auto git = item_group.find(record.query_id);
    if (git == item_group.end()) {
      ++skipped_queries;
      continue;
    }
    rankings[record.pv_id] = ranked[i];
    truth[record.pv_id] = group_members.at(git->second);
  }

  std::set<int> ks(cfg.eval_recall_ks.begin(), cfg.eval_recall_ks.end());
  ks.insert(cfg.eval_map_k);
  nlohmann::ordered_json j;
  j["queries"] = rankings.size();
  j["indexed_items"] = index.ids.size();
  j["skipped_queries"] = skipped_queries;
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  std::ofstream txt = detail::open_out(root / paths::kRetrievalReportTxt);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%6s %12s %12s %12s\n", "k", "set_recall",
                "hit_rate", "map");
  txt << buf;
  for (int k : ks) {
    const RecallResult rec = recall_at_k(rankings, truth, k);
    const MapResult mp = map_at_k(rankings, truth, k);
    nlohmann::ordered_json row;
    row["k"] = k;
    row["set_recall"] = rec.mean_set;
    row["hit_rate"] = rec.mean_hit;
    row["map"] = mp.mean;
    row["evaluated"] = rec.evaluated;
    row["missing_truth"] = rec.missing_truth;
    rows_json.push_back(std::move(row));
    std::snprintf(buf, sizeof(buf), "%6d %12.4f %12.4f %12.4f\n", k, rec.mean_set,
                  rec.mean_hit, mp.mean);
    txt << buf;
  }
  j["metrics"] = std::move(rows_json);
  std::ofstream os = detail::open_out(root / paths::kRetrievalReportJson);
  os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// e2e

inline void run_e2e(const PipelineConfig& cfg, const std::filesystem::path& root,
                    bool strict, int threads = 0) {
  run_synth(cfg, root);
  run_ingest(cfg, root, strict);
  run_graph(cfg, root);
  run_embed(cfg, root);
  run_cluster(cfg, root);
  run_map(cfg, root);
  run_mine(cfg, root);
  run_train_category(cfg, root);
  run_train_feature(cfg, root);
  run_eval_category(cfg, root);
  run_eval_retrieval(cfg, root, threads);

  nlohmann::json category, retrieval;
  {
    std::ifstream is = detail::open_in(root / paths::kCategoryReportJson);
    is >> category;
  }
  {
    std::ifstream is = detail::open_in(root / paths::kRetrievalReportJson);
    is >> retrieval;
  }
  nlohmann::ordered_json j;
  j["category"] = category;
  j["retrieval"] = retrieval;
  std::ofstream os = detail::open_out(root / paths::kE2eReport);
  os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// dispatch

inline void run_stage(const std::string& stage, const PipelineConfig& cfg,
                      const std::filesystem::path& root, bool strict, int threads) {
  if (stage == "synth") {
    run_synth(cfg, root);
  } else if (stage == "ingest") {
    run_ingest(cfg, root, strict);
  } else if (stage == "graph") {
    run_graph(cfg, root);
  } else if (stage == "embed") {
    run_embed(cfg, root);
  } else if (stage == "cluster") {
    run_cluster(cfg, root);
  } else if (stage == "map") {
    run_map(cfg, root);
  } else if (stage == "mine") {
    run_mine(cfg, root);
  } else if (stage == "train-category") {
    run_train_category(cfg, root);
  } else if (stage == "train-feature") {
    run_train_feature(cfg, root);
  } else if (stage == "eval-category") {
    run_eval_category(cfg, root);
  } else if (stage == "eval-retrieval") {
    run_eval_retrieval(cfg, root, threads);
  } else if (stage == "e2e") {
    run_e2e(cfg, root, strict, threads);
  } else {
    fail(ErrorCode::kUnknownStage, "unknown stage '" + stage + "'");
  }
}

}  // namespace vid
