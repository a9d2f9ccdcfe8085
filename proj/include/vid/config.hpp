// Pipeline configuration: one line-oriented `section.key = value` file drives
// every stage. Unknown and duplicate keys are rejected; dump emits a canonical
// form so dump(parse(f)) is idempotent.
#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vid/common.hpp"
#include "vid/synth.hpp"

namespace vid {

struct PipelineConfig {
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = hardware default

  SynthConfig synth;

  std::int64_t graph_min_edge_weight = 1;
  int graph_min_degree = 0;

  int embed_walks_per_node = 10;
  int embed_walk_length = 40;
  int embed_window = 5;
  int embed_dim = 64;
  int embed_epochs = 5;
  double embed_lr0 = 0.025;
  std::string embed_mode = "hs";  // hs | neg
  int embed_negatives = 5;
  bool embed_flatten_weights = false;
  bool embed_shuffle_walks = false;

  int cluster_k_leaf = 0;  // 0 = min(100, node_count)
  int cluster_k_item = 0;  // 0 = max(16, node_count / 20)
  int cluster_max_iters = 100;

  double mine_gamma = 0.0;    // 0 = percentile auto-tune
  double mine_epsilon = 0.0;  // 0 = percentile auto-tune
  double mine_gamma_percentile = 60.0;
  double mine_epsilon_percentile = 40.0;
  std::vector<double> mine_channel_weights;  // empty = uniform
  int mine_list_n = 5;
  int mine_max_triplets_per_pv = 16;
  std::string mine_virtual_source_category = "query";  // query | item | both
  std::string mine_virtual_source_feature = "item";

  int train_hidden = 128;
  int train_embed_dim = 64;
  double train_alpha = 1.0;
  double train_beta = 1.0;
  double train_lambda = 1.0;
  double train_eta_simple = 1.0;
  double train_eta_hard = 2.0;
  double train_lr = 0.01;
  double train_momentum = 0.9;
  int train_batch_size = 32;
  int train_epochs = 10;
  bool train_printed_pair_form = false;
  bool train_printed_list_direction = false;
  bool train_normalize_triplet = false;

  std::vector<int> eval_recall_ks = {1, 4, 20};
  int eval_map_k = 20;
  double eval_ensemble_weight = 0.5;
};

namespace detail {

struct ConfigField {
  std::string key;
  std::function<std::string()> get;
  std::function<bool(const std::string&)> set;  // false on parse failure
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline bool parse_full_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_full_i64(const std::string& s, std::int64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

class ConfigBinder {
 public:
  explicit ConfigBinder(PipelineConfig& cfg) {
    bind_u64("run.seed", &cfg.seed);
    bind_int("run.threads", &cfg.threads);

    bind_int("synth.num_communities", &cfg.synth.num_communities);
    bind_int("synth.items_per_community", &cfg.synth.items_per_community);
    bind_int("synth.num_pvs", &cfg.synth.num_pvs);
    bind_double("synth.p_in", &cfg.synth.p_in);
    bind_double("synth.p_out", &cfg.synth.p_out);
    bind_double("synth.p_identical", &cfg.synth.p_identical);
    bind_int("synth.num_tops", &cfg.synth.num_tops);
    bind_int("synth.leaves_per_community", &cfg.synth.leaves_per_community);
    bind_int("synth.identical_group_size", &cfg.synth.identical_group_size);
    bind_int("synth.results_per_pv", &cfg.synth.results_per_pv);
    bind_vec_int("synth.channel_dims", &cfg.synth.channel_dims);
    bind_double("synth.community_scale", &cfg.synth.community_scale);
    bind_double("synth.group_scale", &cfg.synth.group_scale);
    bind_double("synth.item_noise", &cfg.synth.item_noise);
    bind_double("synth.noise_scale", &cfg.synth.noise_scale);
    bind_double("synth.query_noise", &cfg.synth.query_noise);
    bind_double("synth.switch_rate", &cfg.synth.switch_rate);
    bind_double("synth.holdout_fraction", &cfg.synth.holdout_fraction);

    bind_i64("graph.min_edge_weight", &cfg.graph_min_edge_weight);
    bind_int("graph.min_degree", &cfg.graph_min_degree);

    bind_int("embed.walks_per_node", &cfg.embed_walks_per_node);
    bind_int("embed.walk_length", &cfg.embed_walk_length);
    bind_int("embed.window", &cfg.embed_window);
    bind_int("embed.dim", &cfg.embed_dim);
    bind_int("embed.epochs", &cfg.embed_epochs);
    bind_double("embed.lr0", &cfg.embed_lr0);
    bind_enum("embed.mode", &cfg.embed_mode, {"hs", "neg"});
    bind_int("embed.negatives", &cfg.embed_negatives);
    bind_bool("embed.flatten_weights", &cfg.embed_flatten_weights);
    bind_bool("embed.shuffle_walks", &cfg.embed_shuffle_walks);

    bind_int("cluster.k_leaf", &cfg.cluster_k_leaf);
    bind_int("cluster.k_item", &cfg.cluster_k_item);
    bind_int("cluster.max_iters", &cfg.cluster_max_iters);

    bind_double("mine.gamma", &cfg.mine_gamma);
    bind_double("mine.epsilon", &cfg.mine_epsilon);
    bind_double("mine.gamma_percentile", &cfg.mine_gamma_percentile);
    bind_double("mine.epsilon_percentile", &cfg.mine_epsilon_percentile);
    bind_vec_double("mine.channel_weights", &cfg.mine_channel_weights);
    bind_int("mine.list_n", &cfg.mine_list_n);
    bind_int("mine.max_triplets_per_pv", &cfg.mine_max_triplets_per_pv);
    bind_enum("mine.virtual_source_category", &cfg.mine_virtual_source_category,
              {"query", "item", "both"});
    bind_enum("mine.virtual_source_feature", &cfg.mine_virtual_source_feature,
              {"query", "item", "both"});

    bind_int("train.hidden", &cfg.train_hidden);
    bind_int("train.embed_dim", &cfg.train_embed_dim);
    bind_double("train.alpha", &cfg.train_alpha);
    bind_double("train.beta", &cfg.train_beta);
    bind_double("train.lambda", &cfg.train_lambda);
    bind_double("train.eta_simple", &cfg.train_eta_simple);
    bind_double("train.eta_hard", &cfg.train_eta_hard);
    bind_double("train.lr", &cfg.train_lr);
    bind_double("train.momentum", &cfg.train_momentum);
    bind_int("train.batch_size", &cfg.train_batch_size);
    bind_int("train.epochs", &cfg.train_epochs);
    bind_bool("train.printed_pair_form", &cfg.train_printed_pair_form);
    bind_bool("train.printed_list_direction", &cfg.train_printed_list_direction);
    bind_bool("train.normalize_triplet", &cfg.train_normalize_triplet);

    bind_vec_int("eval.recall_ks", &cfg.eval_recall_ks);
    bind_int("eval.map_k", &cfg.eval_map_k);
    bind_double("eval.ensemble_weight", &cfg.eval_ensemble_weight);
  }

  const std::vector<ConfigField>& fields() const { return fields_; }

  const ConfigField* find(const std::string& key) const {
    for (const ConfigField& f : fields_) {
      if (f.key == key) return &f;
    }
    return nullptr;
  }

 private:
  void bind_int(const std::string& key, int* p) {
    fields_.push_back({key, [p] { return std::to_string(*p); },
                       [p](const std::string& s) {
                         std::int64_t v;
                         if (!parse_full_i64(s, v)) return false;
                         *p = static_cast<int>(v);
                         return true;
                       }});
  }
  void bind_i64(const std::string& key, std::int64_t* p) {
    fields_.push_back({key, [p] { return std::to_string(*p); },
                       [p](const std::string& s) { return parse_full_i64(s, *p); }});
  }
  void bind_u64(const std::string& key, std::uint64_t* p) {
    fields_.push_back({key, [p] { return std::to_string(*p); },
                       [p](const std::string& s) {
                         try {
                           std::size_t pos = 0;
                           *p = std::stoull(s, &pos);
                           return pos == s.size();
                         } catch (...) {
                           return false;
                         }
                       }});
  }
  void bind_double(const std::string& key, double* p) {
    fields_.push_back({key, [p] { return format_double(*p); },
                       [p](const std::string& s) { return parse_full_double(s, *p); }});
  }
  void bind_bool(const std::string& key, bool* p) {
    fields_.push_back({key, [p] { return std::string(*p ? "true" : "false"); },
                       [p](const std::string& s) {
                         if (s == "true") {
                           *p = true;
                         } else if (s == "false") {
                           *p = false;
                         } else {
                           return false;
                         }
                         return true;
                       }});
  }
  void bind_enum(const std::string& key, std::string* p, std::set<std::string> allowed) {
    fields_.push_back({key, [p] { return *p; },
                       [p, allowed = std::move(allowed)](const std::string& s) {
                         if (!allowed.count(s)) return false;
                         *p = s;
                         return true;
                       }});
  }
  void bind_vec_double(const std::string& key, std::vector<double>* p) {
    fields_.push_back({key,
                       [p] {
                         std::string out;
                         for (std::size_t i = 0; i < p->size(); ++i) {
                           if (i) out += ",";
                           out += format_double((*p)[i]);
                         }
                         return out;
                       },
                       [p](const std::string& s) {
                         std::vector<double> vals;
                         if (!s.empty()) {
                           std::stringstream ss(s);
                           std::string tok;
                           while (std::getline(ss, tok, ',')) {
                             double v;
                             if (!parse_full_double(tok, v)) return false;
                             vals.push_back(v);
                           }
                         }
                         *p = std::move(vals);
                         return true;
                       }});
  }
  void bind_vec_int(const std::string& key, std::vector<int>* p) {
    fields_.push_back({key,
                       [p] {
                         std::string out;
                         for (std::size_t i = 0; i < p->size(); ++i) {
                           if (i) out += ",";
                           out += std::to_string((*p)[i]);
                         }
                         return out;
                       },
                       [p](const std::string& s) {
                         std::vector<int> vals;
                         if (!s.empty()) {
                           std::stringstream ss(s);
                           std::string tok;
                           while (std::getline(ss, tok, ',')) {
                             std::int64_t v;
                             if (!parse_full_i64(tok, v)) return false;
                             vals.push_back(static_cast<int>(v));
                           }
                         }
                         *p = std::move(vals);
                         return true;
                       }});
  }

  std::vector<ConfigField> fields_;
};

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Applies `key = value` lines on top of the given config (usually defaults).
// Blank lines and full-line `#` comments are allowed.
inline void parse_config(std::istream& in, PipelineConfig& cfg) {
  detail::ConfigBinder binder(cfg);
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kInvalidConfig,
           "line " + std::to_string(line_no) + ": expected 'section.key = value'");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    const detail::ConfigField* field = binder.find(key);
    if (field == nullptr) {
      fail(ErrorCode::kInvalidConfig,
           "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      fail(ErrorCode::kInvalidConfig,
           "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    if (!field->set(value)) {
      fail(ErrorCode::kInvalidConfig, "line " + std::to_string(line_no) +
                                          ": bad value '" + value + "' for " + key);
    }
  }
}

inline void dump_config(std::ostream& os, const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;  // binder needs a mutable reference
  detail::ConfigBinder binder(copy);
  for (const detail::ConfigField& f : binder.fields()) {
    os << f.key << " = " << f.get() << '\n';
  }
}

}  // namespace vid
