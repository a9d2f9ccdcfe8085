// Synthetic click-log generator with planted structure: item communities with
// intra/inter co-click rates, identical-item groups, a top/leaf category tree,
// hierarchical Gaussian features, and optional category-switch page views.
// Deterministic given (config, seed).
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vid/common.hpp"
#include "vid/pvlog.hpp"
#include "vid/rng.hpp"

namespace vid {

struct SynthConfig {
  int num_communities = 8;
  int items_per_community = 50;
  int num_pvs = 5000;
  double p_in = 0.3;    // click prob for same-community (non-group) results
  double p_out = 0.01;  // click prob for cross-community results
  double p_identical = 0.85;  // click prob for identical-group partners
  int num_tops = 4;           // top categories; community c maps to c mod num_tops
  int leaves_per_community = 2;
  int identical_group_size = 2;
  int results_per_pv = 10;
  std::vector<int> channel_dims = {8, 8};  // channel 0 signal, rest nuisance
  double community_scale = 4.0;  // channel-0 community centroid magnitude
  double group_scale = 2.0;      // channel-0 identical-group offset magnitude
  double item_noise = 0.25;      // channel-0 per-item jitter
  double noise_scale = 1.0;      // nuisance channel magnitude
  double query_noise = 0.25;     // channel-0 query jitter around group centroid
  double switch_rate = 0.0;      // fraction of training PVs with a tab switch
  double holdout_fraction = 0.0;  // fraction of PVs diverted to the eval log
};

struct GroundTruthEntry {
  std::string item_id;
  int community = 0;
  std::string top_category;
  std::string leaf_category;
  int identical_group = 0;

  bool operator==(const GroundTruthEntry&) const = default;
};

struct SynthOutput {
  std::vector<PVRecord> train_records;
  std::vector<PVRecord> eval_records;
  std::vector<GroundTruthEntry> truth;
};

inline std::string padded_id(const char* prefix, int value, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

inline void validate_synth_config(const SynthConfig& c) {
  auto bad = [](const std::string& msg) { fail(ErrorCode::kInvalidConfig, msg); };
  if (c.num_communities < 1) bad("num_communities must be >= 1");
  if (c.items_per_community < 1) bad("items_per_community must be >= 1");
  if (c.num_pvs < 1) bad("num_pvs must be >= 1");
  if (c.p_in <= c.p_out) bad("p_in must exceed p_out");
  if (c.p_in < 0 || c.p_in > 1 || c.p_out < 0 || c.p_out > 1 ||
      c.p_identical < 0 || c.p_identical > 1) {
    bad("click probabilities must lie in [0,1]");
  }
  if (c.num_tops < 1 || c.num_tops > c.num_communities) {
    bad("num_tops must lie in [1, num_communities]");
  }
  if (c.leaves_per_community < 1) bad("leaves_per_community must be >= 1");
  if (c.identical_group_size < 1) bad("identical_group_size must be >= 1");
  if (c.results_per_pv < c.identical_group_size + 1) {
    bad("results_per_pv must exceed identical_group_size");
  }
  if (c.channel_dims.empty()) bad("channel_dims must be non-empty");
  for (int d : c.channel_dims) {
    if (d < 1) bad("channel dimensions must be >= 1");
  }
  if (c.switch_rate < 0 || c.switch_rate >= 1) bad("switch_rate must lie in [0,1)");
  if (c.switch_rate > 0 && c.num_tops < 2) bad("switch PVs need num_tops >= 2");
  if (c.holdout_fraction < 0 || c.holdout_fraction >= 1) {
    bad("holdout_fraction must lie in [0,1)");
  }
}

namespace detail {

// Key-mix tags keeping the generator's RNG streams independent.
inline constexpr std::uint64_t kTagCommunity = 1;
inline constexpr std::uint64_t kTagGroup = 2;
inline constexpr std::uint64_t kTagItem = 3;
inline constexpr std::uint64_t kTagPv = 4;
inline constexpr std::uint64_t kTagHoldout = 5;
inline constexpr std::uint64_t kTagSwitch = 6;

inline std::vector<double> gaussian_vector(Rng& rng, int dim, double scale) {
  std::vector<double> v(dim);
  for (int i = 0; i < dim; ++i) v[i] = scale * rng.next_gaussian();
  return v;
}

// Draws `count` distinct values from `pool` that are absent from `chosen`,
// appending them to both `out` and `chosen`. Falls back to a scan from a
// random offset when rejection sampling stalls; stops early if the pool is
// exhausted.
inline void sample_distinct(const std::vector<int>& pool, int count,
                            std::set<int>& chosen, std::vector<int>& out, Rng& rng) {
  int taken = 0;
  int attempts = 0;
  const int max_attempts = 64 * std::max(count, 1);
  while (taken < count && attempts < max_attempts) {
    ++attempts;
    const int candidate = pool[rng.next_index(pool.size())];
    if (chosen.insert(candidate).second) {
      out.push_back(candidate);
      ++taken;
    }
  }
  if (taken < count) {
    const std::size_t start = rng.next_index(std::max<std::size_t>(pool.size(), 1));
    for (std::size_t k = 0; k < pool.size() && taken < count; ++k) {
      const int candidate = pool[(start + k) % pool.size()];
      if (chosen.insert(candidate).second) {
        out.push_back(candidate);
        ++taken;
      }
    }
  }
}

}  // namespace detail

inline SynthOutput generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  validate_synth_config(cfg);
  const int C = cfg.num_communities;
  const int ipc = cfg.items_per_community;
  const int g = cfg.identical_group_size;
  const int total_items = C * ipc;
  const int groups_per_comm = (ipc + g - 1) / g;
  const int d0 = cfg.channel_dims[0];

  SynthOutput out;

  // --- static world: categories, features, ground truth -----------------
  std::vector<std::string> top_names(cfg.num_tops);
  for (int t = 0; t < cfg.num_tops; ++t) top_names[t] = padded_id("top", t, 2);

  std::vector<std::vector<double>> community_centroid(C);
  for (int c = 0; c < C; ++c) {
    Rng rng(mix_key(seed, detail::kTagCommunity, static_cast<std::uint64_t>(c)));
    community_centroid[c] = detail::gaussian_vector(rng, d0, cfg.community_scale);
  }
  const int total_groups = C * groups_per_comm;
  std::vector<std::vector<double>> group_offset(total_groups);
  for (int gi = 0; gi < total_groups; ++gi) {
    Rng rng(mix_key(seed, detail::kTagGroup, static_cast<std::uint64_t>(gi)));
    group_offset[gi] = detail::gaussian_vector(rng, d0, cfg.group_scale);
  }

  std::vector<FeatureChannels> item_features(total_items);
  std::vector<std::string> item_ids(total_items);
  std::vector<int> item_community(total_items);
  std::vector<int> item_group(total_items);
  std::vector<std::string> item_leaf(total_items);
  std::vector<std::string> item_top(total_items);
  for (int idx = 0; idx < total_items; ++idx) {
    const int c = idx / ipc;
    const int j = idx % ipc;
    const int group_id = c * groups_per_comm + j / g;
    item_ids[idx] = padded_id("i", idx, 6);
    item_community[idx] = c;
    item_group[idx] = group_id;
    item_top[idx] = top_names[c % cfg.num_tops];
    item_leaf[idx] =
        padded_id("leaf", c, 3) + std::string("_") + padded_id("", j % cfg.leaves_per_community, 2);

    Rng rng(mix_key(seed, detail::kTagItem, static_cast<std::uint64_t>(idx)));
    FeatureChannels channels(cfg.channel_dims.size());
    channels[0].resize(d0);
    for (int k = 0; k < d0; ++k) {
      channels[0][k] = community_centroid[c][k] + group_offset[group_id][k] +
                       cfg.item_noise * rng.next_gaussian();
    }
    for (std::size_t m = 1; m < cfg.channel_dims.size(); ++m) {
      channels[m] = detail::gaussian_vector(rng, cfg.channel_dims[m], cfg.noise_scale);
    }
    item_features[idx] = std::move(channels);

    out.truth.push_back({item_ids[idx], c, item_top[idx], item_leaf[idx], group_id});
  }

  // Item pools for result-list sampling.
  std::vector<std::vector<int>> comm_pool(C);
  std::vector<std::vector<int>> top_pool(cfg.num_tops);
  for (int idx = 0; idx < total_items; ++idx) {
    comm_pool[item_community[idx]].push_back(idx);
    top_pool[item_community[idx] % cfg.num_tops].push_back(idx);
  }
  // --- page views --------------------------------------------------------
  for (int pv = 0; pv < cfg.num_pvs; ++pv) {
    Rng rng(mix_key(seed, detail::kTagPv, static_cast<std::uint64_t>(pv)));
    const bool is_eval =
        counter_uniform(seed, detail::kTagHoldout, static_cast<std::uint64_t>(pv), 0) <
        cfg.holdout_fraction;
    const bool is_switch =
        !is_eval &&
        counter_uniform(seed, detail::kTagSwitch, static_cast<std::uint64_t>(pv), 0) <
            cfg.switch_rate;

    const int c = static_cast<int>(rng.next_index(C));
    const int true_top = c % cfg.num_tops;
    const int group_local = static_cast<int>(rng.next_index(groups_per_comm));
    const int group_id = c * groups_per_comm + group_local;
    std::vector<int> group_members;
    for (int j = group_local * g; j < std::min((group_local + 1) * g, ipc); ++j) {
      group_members.push_back(c * ipc + j);
    }
    const int intent =
        group_members[rng.next_index(group_members.size())];

    // Result list: the whole identical group, same-community items filling
    // half the list, the remainder cross-community (from the mis-predicted
    // top category on switch PVs).
    std::set<int> chosen(group_members.begin(), group_members.end());
    std::vector<int> list = group_members;
    const int half = cfg.results_per_pv / 2;
    const int comm_fill = std::max(0, half - static_cast<int>(list.size()));
    detail::sample_distinct(comm_pool[c], comm_fill, chosen, list, rng);
    const int cross_fill = cfg.results_per_pv - static_cast<int>(list.size());

    int wrong_top = -1;
    if (is_switch) {
      wrong_top = static_cast<int>(
          (true_top + 1 + rng.next_index(cfg.num_tops - 1)) % cfg.num_tops);
      detail::sample_distinct(top_pool[wrong_top], cross_fill, chosen, list, rng);
    } else {
      std::vector<int> other_pool;
      other_pool.reserve(total_items - ipc);
      for (int idx = 0; idx < total_items; ++idx) {
        if (item_community[idx] != c) other_pool.push_back(idx);
      }
      detail::sample_distinct(other_pool, cross_fill, chosen, list, rng);
    }
    rng.shuffle(list);

    PVRecord record;
    record.pv_id = padded_id("pv", pv, 8);
    record.user_id = padded_id("u", pv % 101, 4);
    record.query_id = item_ids[intent];
    record.timestamp = 1'700'000'000'000LL + static_cast<std::int64_t>(pv) * 60'000;
    record.predicted_top_category = is_switch ? top_names[wrong_top] : top_names[true_top];
    if (is_switch) record.selected_top_category = top_names[true_top];

    FeatureChannels query(cfg.channel_dims.size());
    query[0].resize(d0);
    for (int k = 0; k < d0; ++k) {
      query[0][k] = community_centroid[c][k] + group_offset[group_id][k] +
                    cfg.query_noise * rng.next_gaussian();
    }
    for (std::size_t m = 1; m < cfg.channel_dims.size(); ++m) {
      query[m] = detail::gaussian_vector(rng, cfg.channel_dims[m], cfg.noise_scale);
    }
    record.query_features = std::move(query);

    for (std::size_t pos = 0; pos < list.size(); ++pos) {
      const int idx = list[pos];
      ResultEntry entry;
      entry.item_id = item_ids[idx];
      entry.leaf_category = item_leaf[idx];
      entry.top_category = item_top[idx];
      entry.position = static_cast<int>(pos) + 1;
      double p_click;
      if (item_group[idx] == group_id) {
        p_click = cfg.p_identical;
      } else if (item_community[idx] == c) {
        p_click = cfg.p_in;
      } else {
        p_click = is_switch ? 0.0 : cfg.p_out;  // pre-switch results stay unclicked
      }
      entry.clicked = rng.next_bernoulli(p_click);
      if (is_switch && idx == intent) entry.clicked = true;  // guarantee the switch click
      if (entry.clicked) {
        entry.click_time = record.timestamp + (is_switch ? 10'000 : 0) +
                           100 * static_cast<std::int64_t>(entry.position);
      }
      entry.item_features = item_features[idx];
      record.results.push_back(std::move(entry));
    }

    (is_eval ? out.eval_records : out.train_records).push_back(std::move(record));
  }
  return out;
}

// ---------------------------------------------------------------------------
// GroundTruth serialization: JSON lines
// {"item_id","community","top","leaf","identical_group"}.

inline void write_ground_truth(std::ostream& os,
                               const std::vector<GroundTruthEntry>& truth) {
  for (const GroundTruthEntry& e : truth) {
    nlohmann::ordered_json j;
    j["item_id"] = e.item_id;
    j["community"] = e.community;
    j["top"] = e.top_category;
    j["leaf"] = e.leaf_category;
    j["identical_group"] = e.identical_group;
    os << j.dump() << '\n';
  }
}

inline std::vector<GroundTruthEntry> parse_ground_truth(std::istream& in) {
  std::vector<GroundTruthEntry> truth;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      GroundTruthEntry e;
      e.item_id = j.at("item_id").get<std::string>();
      e.community = j.at("community").get<int>();
      e.top_category = j.at("top").get<std::string>();
      e.leaf_category = j.at("leaf").get<std::string>();
      e.identical_group = j.at("identical_group").get<int>();
      truth.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorCode::kMalformedLine,
           "ground truth line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return truth;
}

}  // namespace vid
