// Training-sample mining from page views: fusion distance over feature
// channels, first-click/switch category samples, virtual-ID class samples,
// distance-filtered triplets, teacher-ranked list samples, and sample I/O.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vid/common.hpp"
#include "vid/kmeans.hpp"
#include "vid/pvlog.hpp"
#include "vid/vecmath.hpp"

namespace vid {

enum class SampleKind { kVirtual, kSimple, kHard };

inline const char* sample_kind_name(SampleKind kind) {
  switch (kind) {
    case SampleKind::kVirtual: return "virtual";
    case SampleKind::kSimple: return "simple";
    case SampleKind::kHard: return "hard";
  }
  return "?";
}

struct ClassSample {
  FeatureChannels features;
  int label = 0;
  SampleKind kind = SampleKind::kVirtual;

  bool operator==(const ClassSample&) const = default;
};

struct PairSample {
  FeatureChannels features;
  int y_neg = 0;
  int y_hard = 0;

  bool operator==(const PairSample&) const = default;
};

struct Triplet {
  FeatureChannels q;
  FeatureChannels pos;
  FeatureChannels neg;
  std::string query_id;
  std::string pos_item;
  std::string neg_item;

  bool operator==(const Triplet&) const = default;
};

struct ListSample {
  FeatureChannels q;
  std::vector<FeatureChannels> candidates;
  std::vector<int> teacher_pi;  // 0-based in memory, 1-based on disk
  std::vector<double> weights;

  bool operator==(const ListSample&) const = default;
};

// ---------------------------------------------------------------------------
// Fusion distance: weighted mean of per-channel Euclidean distances.

inline double fusion_distance(const FeatureChannels& a, const FeatureChannels& b,
                              const std::vector<double>& channel_weights) {
  if (a.size() != b.size() || a.size() != channel_weights.size()) {
    fail(ErrorCode::kChannelMismatch, "fusion distance needs matching channel arity");
  }
  double total_w = 0.0;
  double acc = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (a[m].size() != b[m].size()) {
      fail(ErrorCode::kChannelMismatch,
           "channel " + std::to_string(m) + " dimensions differ");
    }
    if (channel_weights[m] < 0.0) {
      fail(ErrorCode::kInvalidArgs, "channel weights must be non-negative");
    }
    acc += channel_weights[m] * l2_dist(a[m], b[m]);
    total_w += channel_weights[m];
  }
  if (total_w <= 0.0) fail(ErrorCode::kInvalidArgs, "channel weights sum to zero");
  return acc / total_w;
}

// ---------------------------------------------------------------------------
// Category vocabulary: sorted unique top-category names.

struct CategoryVocab {
  std::vector<std::string> names;  // sorted

  int index_of(const std::string& name) const {
    const auto it = std::lower_bound(names.begin(), names.end(), name);
    if (it == names.end() || *it != name) return -1;
    return static_cast<int>(it - names.begin());
  }
  int require(const std::string& name) const {
    const int idx = index_of(name);
    if (idx < 0) fail(ErrorCode::kUnknownCategory, "category '" + name + "' not in vocabulary");
    return idx;
  }
  int size() const { return static_cast<int>(names.size()); }
};

inline CategoryVocab build_category_vocab(const std::vector<PVRecord>& records) {
  std::set<std::string> seen;
  for (const PVRecord& record : records) {
    seen.insert(record.predicted_top_category);
    if (record.selected_top_category.has_value()) {
      seen.insert(*record.selected_top_category);
    }
    for (const ResultEntry& entry : record.results) seen.insert(entry.top_category);
  }
  CategoryVocab vocab;
  vocab.names.assign(seen.begin(), seen.end());
  return vocab;
}

// ---------------------------------------------------------------------------
// Category-branch samples: a switch yields one hard sample plus a pair;
// otherwise the first click yields one simple sample.

inline std::pair<std::vector<ClassSample>, std::vector<PairSample>>
mine_category_samples(const PVRecord& record, const CategoryVocab& vocab) {
  std::vector<ClassSample> cls;
  std::vector<PairSample> pairs;
  const ClickSummary summary = extract_click_summary(record);
  if (summary.switch_labels.has_value()) {
    const int y_neg = vocab.require(summary.switch_labels->first);
    const int y_hard = vocab.require(summary.switch_labels->second);
    cls.push_back({record.query_features, y_hard, SampleKind::kHard});
    pairs.push_back({record.query_features, y_neg, y_hard});
  } else if (summary.first_click.has_value()) {
    const int y_simple = vocab.require(summary.first_click->second);
    cls.push_back({record.query_features, y_simple, SampleKind::kSimple});
  }
  return {std::move(cls), std::move(pairs)};
}

// ---------------------------------------------------------------------------
// Virtual-ID samples: one per clicked entry with an assigned node key.

enum class VirtualSampleSource { kQuery, kItem, kBoth };

struct VirtualMineResult {
  std::vector<ClassSample> samples;
  std::int64_t skipped = 0;  // clicked entries without an assignment
};

inline VirtualMineResult mine_virtual_samples(const std::vector<PVRecord>& records,
                                              const LoadedAssignment& assignment,
                                              GraphLevel level,
                                              VirtualSampleSource source) {
  VirtualMineResult out;
  for (const PVRecord& record : records) {
    for (const ResultEntry& entry : record.results) {
      if (!entry.clicked) continue;
      const std::string& key =
          level == GraphLevel::kItem ? entry.item_id : entry.leaf_category;
      const int idx = assignment.index_of(key);
      if (idx < 0) {
        ++out.skipped;
        continue;
      }
      const int label = assignment.vid[idx];
      if (source != VirtualSampleSource::kItem) {
        out.samples.push_back({record.query_features, label, SampleKind::kVirtual});
      }
      if (source != VirtualSampleSource::kQuery) {
        out.samples.push_back({entry.item_features, label, SampleKind::kVirtual});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Triplets. Positives: clicked entries with D(d,q) <= epsilon. Negatives:
// non-clicked entries whose distance to the query and to every clicked entry
// stays >= gamma (filters likely identical items misread as negatives).
// Cross-pairs are capped hardest-negative-first (smallest D(neg,q), then
// position), positives in position order within each negative.

inline std::vector<Triplet> mine_triplets(const PVRecord& record, double gamma,
                                          double epsilon,
                                          const std::vector<double>& channel_weights,
                                          int max_triplets_per_pv = 16) {
  if (gamma <= 0.0 || epsilon <= 0.0) {
    fail(ErrorCode::kInvalidArgs, "gamma and epsilon must be positive");
  }
  std::vector<const ResultEntry*> clicked;
  std::vector<const ResultEntry*> nonclicked;
  for (const ResultEntry& entry : record.results) {
    (entry.clicked ? clicked : nonclicked).push_back(&entry);
  }
  std::vector<const ResultEntry*> positives;
  for (const ResultEntry* d : clicked) {
    if (fusion_distance(d->item_features, record.query_features, channel_weights) <=
        epsilon) {
      positives.push_back(d);
    }
  }
  struct Neg {
    const ResultEntry* entry;
    double d_query;
  };
  std::vector<Neg> negatives;
  for (const ResultEntry* d : nonclicked) {
    const double d_query =
        fusion_distance(d->item_features, record.query_features, channel_weights);
    double closest = d_query;
    for (const ResultEntry* c : clicked) {
      closest = std::min(
          closest, fusion_distance(d->item_features, c->item_features, channel_weights));
    }
    if (closest >= gamma) negatives.push_back({d, d_query});
  }
  std::sort(negatives.begin(), negatives.end(), [](const Neg& a, const Neg& b) {
    if (a.d_query != b.d_query) return a.d_query < b.d_query;
    return a.entry->position < b.entry->position;
  });

  std::vector<Triplet> out;
  for (const Neg& neg : negatives) {
    for (const ResultEntry* pos : positives) {
      if (static_cast<int>(out.size()) >= max_triplets_per_pv) return out;
      out.push_back({record.query_features, pos->item_features,
                     neg.entry->item_features, record.query_id, pos->item_id,
                     neg.entry->item_id});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// List sample: first N results by position, teacher permutation = fusion
// distance ascending (ties by position), DCG-style position weights.

inline std::vector<double> dcg_position_weights(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return w;
}

inline std::optional<ListSample> mine_list_sample(
    const PVRecord& record, int n, const std::vector<double>& channel_weights,
    const std::vector<double>& position_weights) {
  if (n < 2) fail(ErrorCode::kInvalidArgs, "list size must be >= 2");
  if (static_cast<int>(position_weights.size()) != n) {
    fail(ErrorCode::kDimensionMismatch, "position weights must have length N");
  }
  for (double w : position_weights) {
    if (w <= 0.0) fail(ErrorCode::kInvalidArgs, "position weights must be positive");
  }
  if (static_cast<int>(record.results.size()) < n) return std::nullopt;

  ListSample sample;
  sample.q = record.query_features;
  sample.weights = position_weights;
  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) {
    sample.candidates.push_back(record.results[i].item_features);
    dist[i] = fusion_distance(record.results[i].item_features, record.query_features,
                              channel_weights);
  }
  sample.teacher_pi.resize(n);
  for (int i = 0; i < n; ++i) sample.teacher_pi[i] = i;
  std::sort(sample.teacher_pi.begin(), sample.teacher_pi.end(),
            [&](int a, int b) {
              if (dist[a] != dist[b]) return dist[a] < dist[b];
              return a < b;  // candidate order is position order
            });
  return sample;
}

// ---------------------------------------------------------------------------
// Corpus-level distance percentiles for auto-tuned gamma/epsilon
// (nearest-rank percentile of non-click and click distances to the query).

struct DistancePercentiles {
  double gamma = 0.0;    // percentile of D(nonclick, q)
  double epsilon = 0.0;  // percentile of D(click, q)
  std::int64_t click_count = 0;
  std::int64_t nonclick_count = 0;
};

inline double nearest_rank_percentile(std::vector<double> values, double pct) {
  if (values.empty()) fail(ErrorCode::kInvalidArgs, "percentile of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::min(std::max<std::size_t>(rank, 1) - 1, values.size() - 1)];
}

inline DistancePercentiles distance_percentiles(
    const std::vector<PVRecord>& records, const std::vector<double>& channel_weights,
    double gamma_pct = 60.0, double epsilon_pct = 40.0) {
  std::vector<double> click_d, nonclick_d;
  for (const PVRecord& record : records) {
    for (const ResultEntry& entry : record.results) {
      const double d =
          fusion_distance(entry.item_features, record.query_features, channel_weights);
      (entry.clicked ? click_d : nonclick_d).push_back(d);
    }
  }
  DistancePercentiles out;
  out.click_count = static_cast<std::int64_t>(click_d.size());
  out.nonclick_count = static_cast<std::int64_t>(nonclick_d.size());
  if (!nonclick_d.empty()) out.gamma = nearest_rank_percentile(nonclick_d, gamma_pct);
  if (!click_d.empty()) out.epsilon = nearest_rank_percentile(click_d, epsilon_pct);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (JSON lines per family).

inline void write_class_samples(std::ostream& os, const std::vector<ClassSample>& samples) {
  for (const ClassSample& s : samples) {
    nlohmann::ordered_json j;
    j["features"] = s.features;
    j["label"] = s.label;
    j["kind"] = sample_kind_name(s.kind);
    os << j.dump() << '\n';
  }
}

inline SampleKind parse_sample_kind(const std::string& name) {
  if (name == "virtual") return SampleKind::kVirtual;
  if (name == "simple") return SampleKind::kSimple;
  if (name == "hard") return SampleKind::kHard;
  fail(ErrorCode::kMalformedLine, "unknown sample kind '" + name + "'");
}

inline std::vector<ClassSample> read_class_samples(std::istream& in) {
  std::vector<ClassSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      ClassSample s;
      s.features = j.at("features").get<FeatureChannels>();
      s.label = j.at("label").get<int>();
      s.kind = parse_sample_kind(j.at("kind").get<std::string>());
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kMalformedLine,
           "class sample line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_pair_samples(std::ostream& os, const std::vector<PairSample>& samples) {
  for (const PairSample& s : samples) {
    nlohmann::ordered_json j;
    j["features"] = s.features;
    j["y_neg"] = s.y_neg;
    j["y_hard"] = s.y_hard;
    os << j.dump() << '\n';
  }
}

inline std::vector<PairSample> read_pair_samples(std::istream& in) {
  std::vector<PairSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      PairSample s;
      s.features = j.at("features").get<FeatureChannels>();
      s.y_neg = j.at("y_neg").get<int>();
      s.y_hard = j.at("y_hard").get<int>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kMalformedLine,
           "pair sample line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_triplets(std::ostream& os, const std::vector<Triplet>& triplets) {
  for (const Triplet& t : triplets) {
    nlohmann::ordered_json j;
    j["query_id"] = t.query_id;
    j["pos_item"] = t.pos_item;
    j["neg_item"] = t.neg_item;
    j["q"] = t.q;
    j["pos"] = t.pos;
    j["neg"] = t.neg;
    os << j.dump() << '\n';
  }
}

inline std::vector<Triplet> read_triplets(std::istream& in) {
  std::vector<Triplet> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      Triplet t;
      t.query_id = j.at("query_id").get<std::string>();
      t.pos_item = j.at("pos_item").get<std::string>();
      t.neg_item = j.at("neg_item").get<std::string>();
      t.q = j.at("q").get<FeatureChannels>();
      t.pos = j.at("pos").get<FeatureChannels>();
      t.neg = j.at("neg").get<FeatureChannels>();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kMalformedLine,
           "triplet line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_list_samples(std::ostream& os, const std::vector<ListSample>& samples) {
  for (const ListSample& s : samples) {
    nlohmann::ordered_json j;
    j["q"] = s.q;
    j["candidates"] = s.candidates;
    std::vector<int> pi_one_based(s.teacher_pi.size());
    for (std::size_t i = 0; i < s.teacher_pi.size(); ++i) {
      pi_one_based[i] = s.teacher_pi[i] + 1;
    }
    j["teacher_pi"] = pi_one_based;
    j["weights"] = s.weights;
    os << j.dump() << '\n';
  }
}

inline std::vector<ListSample> read_list_samples(std::istream& in) {
  std::vector<ListSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      ListSample s;
      s.q = j.at("q").get<FeatureChannels>();
      s.candidates = j.at("candidates").get<std::vector<FeatureChannels>>();
      s.teacher_pi = j.at("teacher_pi").get<std::vector<int>>();
      for (int& v : s.teacher_pi) --v;
      s.weights = j.at("weights").get<std::vector<double>>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kMalformedLine,
           "list sample line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// Vocabulary file: {"categories":["...",...]} (sorted).
inline void write_category_vocab(std::ostream& os, const CategoryVocab& vocab) {
  nlohmann::ordered_json j;
  j["categories"] = vocab.names;
  os << j.dump() << '\n';
}

inline CategoryVocab load_category_vocab(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedLine, std::string("unparseable vocabulary: ") + e.what());
  }
  CategoryVocab vocab;
  vocab.names = j.at("categories").get<std::vector<std::string>>();
  if (!std::is_sorted(vocab.names.begin(), vocab.names.end())) {
    fail(ErrorCode::kMalformedLine, "vocabulary must be sorted");
  }
  return vocab;
}

}  // namespace vid
