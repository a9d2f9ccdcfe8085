// Training for the two networks: composite losses (virtual-ID CE plus either
// hard-aware/pair category terms or triplet/listwise feature terms) with full
// backprop, seeded mini-batch SGD with momentum, divergence rollback,
// category ensembling, and the loss-history CSV.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vid/common.hpp"
#include "vid/kmeans.hpp"
#include "vid/losses.hpp"
#include "vid/mining.hpp"
#include "vid/network.hpp"
#include "vid/rng.hpp"
#include "vid/vecmath.hpp"

namespace vid {

enum class NetworkKind { kCategory, kFeature };

struct SampleSet {
  std::vector<ClassSample> class_samples;  // virtual + simple + hard
  std::vector<PairSample> pairs;
  std::vector<Triplet> triplets;
  std::vector<ListSample> lists;
};

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double lambda = 1.0;
  double eta_simple = 1.0;
  double eta_hard = 2.0;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
  bool printed_pair_form = false;
  bool printed_list_direction = false;  // score = +distance instead of -distance
  bool normalize_triplet = false;
};

// Raw per-family loss sums and counts (before alpha/beta/lambda scaling).
struct LossParts {
  double virtual_sum = 0.0;
  std::int64_t virtual_n = 0;
  double hard_sum = 0.0;  // eta-weighted CE over simple+hard samples
  std::int64_t hard_n = 0;
  double pair_sum = 0.0;
  std::int64_t pair_n = 0;
  double triplet_sum = 0.0;
  std::int64_t triplet_n = 0;
  double list_sum = 0.0;
  std::int64_t list_n = 0;

  void add(const LossParts& o) {
    virtual_sum += o.virtual_sum;
    virtual_n += o.virtual_n;
    hard_sum += o.hard_sum;
    hard_n += o.hard_n;
    pair_sum += o.pair_sum;
    pair_n += o.pair_n;
    triplet_sum += o.triplet_sum;
    triplet_n += o.triplet_n;
    list_sum += o.list_sum;
    list_n += o.list_n;
  }
};

inline double composite_loss(const LossParts& p, NetworkKind kind,
                             const TrainConfig& cfg) {
  const auto mean = [](double sum, std::int64_t n) { return n > 0 ? sum / n : 0.0; };
  double total = mean(p.virtual_sum, p.virtual_n);
  if (kind == NetworkKind::kCategory) {
    total += cfg.alpha * mean(p.hard_sum, p.hard_n) + cfg.beta * mean(p.pair_sum, p.pair_n);
  } else {
    total += cfg.lambda * (mean(p.triplet_sum, p.triplet_n) + mean(p.list_sum, p.list_n));
  }
  return total;
}

// Tagged sample reference: family and index within its family vector.
enum class Family { kVirtual, kTopCat, kPair, kTriplet, kList };
using BatchItem = std::pair<Family, int>;

inline std::vector<BatchItem> collect_items(const SampleSet& set, NetworkKind kind) {
  std::vector<BatchItem> items;
  for (std::size_t i = 0; i < set.class_samples.size(); ++i) {
    const SampleKind k = set.class_samples[i].kind;
    if (k == SampleKind::kVirtual) {
      items.emplace_back(Family::kVirtual, static_cast<int>(i));
    } else if (kind == NetworkKind::kCategory) {
      items.emplace_back(Family::kTopCat, static_cast<int>(i));
    }
  }
  if (kind == NetworkKind::kCategory) {
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
      items.emplace_back(Family::kPair, static_cast<int>(i));
    }
  } else {
    for (std::size_t i = 0; i < set.triplets.size(); ++i) {
      items.emplace_back(Family::kTriplet, static_cast<int>(i));
    }
    for (std::size_t i = 0; i < set.lists.size(); ++i) {
      items.emplace_back(Family::kList, static_cast<int>(i));
    }
  }
  return items;
}

namespace detail {

inline constexpr std::uint64_t kTagEpochShuffle = 0xE9;

// dL/dy of y = e/||e|| pulled back to dL/de (accumulated).
inline void backprop_l2_normalize(std::span<const double> e, std::span<const double> y,
                                  std::span<const double> dy, std::span<double> de) {
  const double norm = l2_norm(e);
  if (norm == 0.0) {  // normalization was skipped
    for (std::size_t i = 0; i < e.size(); ++i) de[i] += dy[i];
    return;
  }
  double y_dot_dy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) y_dot_dy += y[i] * dy[i];
  for (std::size_t i = 0; i < e.size(); ++i) {
    de[i] += (dy[i] - y[i] * y_dot_dy) / norm;
  }
}

inline std::vector<double> maybe_normalized(const std::vector<double>& e, bool enabled) {
  if (!enabled) return e;
  const double norm = l2_norm(e);
  if (norm == 0.0) return e;
  std::vector<double> y(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) y[i] = e[i] / norm;
  return y;
}

}  // namespace detail

// Composite loss and (when grad non-null) accumulated parameter gradient over
// one batch of tagged samples. Per-family means use the batch's own counts.
inline double batch_loss_grad(const Network& net, NetworkKind kind,
                              const SampleSet& set,
                              std::span<const BatchItem> batch,
                              const TrainConfig& cfg, std::vector<double>* grad,
                              LossParts* parts_out = nullptr) {
  if (batch.empty()) fail(ErrorCode::kEmptyBatch, "batch has no samples");
  LossParts counts;
  for (const BatchItem& item : batch) {
    switch (item.first) {
      case Family::kVirtual: ++counts.virtual_n; break;
      case Family::kTopCat: ++counts.hard_n; break;
      case Family::kPair: ++counts.pair_n; break;
      case Family::kTriplet: ++counts.triplet_n; break;
      case Family::kList: ++counts.list_n; break;
    }
  }
  const auto scale = [&](Family f) {
    switch (f) {
      case Family::kVirtual: return 1.0 / counts.virtual_n;
      case Family::kTopCat: return cfg.alpha / counts.hard_n;
      case Family::kPair: return cfg.beta / counts.pair_n;
      case Family::kTriplet: return cfg.lambda / counts.triplet_n;
      case Family::kList: return cfg.lambda / counts.list_n;
    }
    return 0.0;
  };

  LossParts parts;
  Forward ws;
  std::vector<double> dlogits;
  for (const BatchItem& item : batch) {
    const double s = scale(item.first);
    switch (item.first) {
      case Family::kVirtual:
      case Family::kTopCat: {
        const ClassSample& sample = set.class_samples[item.second];
        const bool is_virtual = item.first == Family::kVirtual;
        forward(net, concat(sample.features), ws);
        const std::vector<double>& logits = is_virtual ? ws.logits_virtual : ws.logits_top;
        if (logits.empty()) {
          fail(ErrorCode::kInvalidArgs, "network lacks the required head");
        }
        double loss;
        if (is_virtual) {
          loss = softmax_ce(logits, sample.label, grad != nullptr ? &dlogits : nullptr);
          parts.virtual_sum += loss;
        } else {
          loss = hard_aware_loss(logits, sample.label, sample.kind, cfg.eta_simple,
                                 cfg.eta_hard, grad != nullptr ? &dlogits : nullptr);
          parts.hard_sum += loss;
        }
        if (grad != nullptr) {
          for (double& g : dlogits) g *= s;
          backprop_head(net, ws, is_virtual ? Head::kVirtual : Head::kTop, dlogits, *grad);
        }
        break;
      }
      case Family::kPair: {
        const PairSample& sample = set.pairs[item.second];
        forward(net, concat(sample.features), ws);
        if (ws.logits_top.empty()) {
          fail(ErrorCode::kInvalidArgs, "network lacks the top-category head");
        }
        const int n = static_cast<int>(ws.logits_top.size());
        if (sample.y_neg < 0 || sample.y_neg >= n || sample.y_hard < 0 ||
            sample.y_hard >= n) {
          fail(ErrorCode::kLabelOutOfRange, "pair labels outside the logit range");
        }
        double g_neg = 0.0, g_hard = 0.0;
        const double loss =
            pair_hinge_loss(ws.logits_top[sample.y_neg], ws.logits_top[sample.y_hard],
                            &g_neg, &g_hard, cfg.printed_pair_form);
        parts.pair_sum += loss;
        if (grad != nullptr) {
          dlogits.assign(n, 0.0);
          dlogits[sample.y_neg] += s * g_neg;
          dlogits[sample.y_hard] += s * g_hard;
          backprop_head(net, ws, Head::kTop, dlogits, *grad);
        }
        break;
      }
      case Family::kTriplet: {
        const Triplet& t = set.triplets[item.second];
        Forward ws_q, ws_p, ws_n;
        forward(net, concat(t.q), ws_q);
        forward(net, concat(t.pos), ws_p);
        forward(net, concat(t.neg), ws_n);
        const std::vector<double> eq = detail::maybe_normalized(ws_q.embed, cfg.normalize_triplet);
        const std::vector<double> ep = detail::maybe_normalized(ws_p.embed, cfg.normalize_triplet);
        const std::vector<double> en = detail::maybe_normalized(ws_n.embed, cfg.normalize_triplet);
        const std::size_t dim = eq.size();
        std::vector<double> gq(dim, 0.0), gp(dim, 0.0), gn(dim, 0.0);
        const double loss = triplet_loss(eq, ep, en, grad != nullptr ? std::span<double>(gq) : std::span<double>{},
                                         grad != nullptr ? std::span<double>(gp) : std::span<double>{},
                                         grad != nullptr ? std::span<double>(gn) : std::span<double>{});
        parts.triplet_sum += loss;
        if (grad != nullptr) {
          for (double& g : gq) g *= s;
          for (double& g : gp) g *= s;
          for (double& g : gn) g *= s;
          if (cfg.normalize_triplet) {
            std::vector<double> dq(dim, 0.0), dp(dim, 0.0), dn(dim, 0.0);
            detail::backprop_l2_normalize(ws_q.embed, eq, gq, dq);
            detail::backprop_l2_normalize(ws_p.embed, ep, gp, dp);
            detail::backprop_l2_normalize(ws_n.embed, en, gn, dn);
            backprop_encoder(net, ws_q, dq, *grad);
            backprop_encoder(net, ws_p, dp, *grad);
            backprop_encoder(net, ws_n, dn, *grad);
          } else {
            backprop_encoder(net, ws_q, gq, *grad);
            backprop_encoder(net, ws_p, gp, *grad);
            backprop_encoder(net, ws_n, gn, *grad);
          }
        }
        break;
      }
      case Family::kList: {
        const ListSample& sample = set.lists[item.second];
        const int n = static_cast<int>(sample.candidates.size());
        Forward ws_q;
        forward(net, concat(sample.q), ws_q);
        std::vector<Forward> ws_c(n);
        std::vector<double> scores(n);
        std::vector<double> dist(n);
        for (int i = 0; i < n; ++i) {
          forward(net, concat(sample.candidates[i]), ws_c[i]);
          dist[i] = l2_dist(ws_q.embed, ws_c[i].embed);
          scores[i] = cfg.printed_list_direction ? dist[i] : -dist[i];
        }
        std::vector<double> dscores;
        const double loss = listwise_loss(scores, sample.teacher_pi, sample.weights,
                                          grad != nullptr ? &dscores : nullptr);
        parts.list_sum += loss;
        if (grad != nullptr) {
          const std::size_t dim = ws_q.embed.size();
          std::vector<double> d_eq(dim, 0.0);
          std::vector<double> d_ec(dim);
          const double sign = cfg.printed_list_direction ? 1.0 : -1.0;
          for (int i = 0; i < n; ++i) {
            if (dist[i] == 0.0) continue;  // subgradient 0 at coincident points
            const double coeff = s * dscores[i] * sign / dist[i];
            if (coeff == 0.0) continue;
            std::fill(d_ec.begin(), d_ec.end(), 0.0);
            for (std::size_t d = 0; d < dim; ++d) {
              const double diff = ws_q.embed[d] - ws_c[i].embed[d];
              d_eq[d] += coeff * diff;
              d_ec[d] = -coeff * diff;
            }
            backprop_encoder(net, ws_c[i], d_ec, *grad);
          }
          backprop_encoder(net, ws_q, d_eq, *grad);
        }
        break;
      }
    }
  }
  parts.virtual_n = counts.virtual_n;
  parts.hard_n = counts.hard_n;
  parts.pair_n = counts.pair_n;
  parts.triplet_n = counts.triplet_n;
  parts.list_n = counts.list_n;
  if (parts_out != nullptr) *parts_out = parts;
  return composite_loss(parts, kind, cfg);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  int epoch = 0;
  double total = 0.0;
  double virtual_mean = 0.0;
  double hard_mean = 0.0;
  double pair_mean = 0.0;
  double triplet_mean = 0.0;
  double list_mean = 0.0;
};

struct TrainResult {
  Network net;
  std::vector<EpochStats> history;
  bool diverged = false;
};

inline EpochStats epoch_stats_from_parts(int epoch, const LossParts& p,
                                         NetworkKind kind, const TrainConfig& cfg) {
  const auto mean = [](double sum, std::int64_t n) { return n > 0 ? sum / n : 0.0; };
  EpochStats s;
  s.epoch = epoch;
  s.virtual_mean = mean(p.virtual_sum, p.virtual_n);
  s.hard_mean = mean(p.hard_sum, p.hard_n);
  s.pair_mean = mean(p.pair_sum, p.pair_n);
  s.triplet_mean = mean(p.triplet_sum, p.triplet_n);
  s.list_mean = mean(p.list_sum, p.list_n);
  s.total = composite_loss(p, kind, cfg);
  return s;
}

// Mini-batch SGD with momentum over a seeded global shuffle of all tagged
// samples. Epoch statistics aggregate per-family means over the whole epoch,
// so a zero learning rate yields a flat history. A non-finite batch loss
// rolls parameters back to the end of the last completed epoch.
inline TrainResult train_network(Network net, NetworkKind kind, const SampleSet& set,
                                 const TrainConfig& cfg) {
  if (cfg.batch_size < 1) fail(ErrorCode::kInvalidArgs, "batch_size must be >= 1");
  if (cfg.epochs < 0) fail(ErrorCode::kInvalidArgs, "epochs must be >= 0");
  if (cfg.alpha < 0 || cfg.beta < 0 || cfg.lambda < 0) {
    fail(ErrorCode::kInvalidArgs, "loss mixture scalars must be >= 0");
  }
  if (cfg.eta_hard < cfg.eta_simple || cfg.eta_simple <= 0) {
    fail(ErrorCode::kInvalidArgs, "need eta_hard >= eta_simple > 0");
  }
  std::vector<BatchItem> items = collect_items(set, kind);
  if (items.empty()) fail(ErrorCode::kEmptyBatch, "no samples for this network kind");

  TrainResult result;
  result.net = std::move(net);
  std::vector<double> velocity(result.net.params.size(), 0.0);
  std::vector<double> grad(result.net.params.size());
  std::vector<double> snapshot = result.net.params;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_key(cfg.seed, detail::kTagEpochShuffle, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(items);
    LossParts epoch_parts;
    for (std::size_t start = 0; start < items.size(); start += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, items.size() - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      LossParts parts;
      const double loss = batch_loss_grad(result.net, kind, set,
                                          {items.data() + start, len}, cfg, &grad, &parts);
      if (!std::isfinite(loss)) {
        result.net.params = snapshot;
        result.diverged = true;
        log_warn("training diverged at epoch %d; restored last checkpoint", epoch);
        return result;
      }
      epoch_parts.add(parts);
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] - cfg.lr * grad[i];
        result.net.params[i] += velocity[i];
      }
    }
    result.history.push_back(epoch_stats_from_parts(epoch, epoch_parts, kind, cfg));
    snapshot = result.net.params;
    result.net.epoch = epoch + 1;
    log_debug("epoch %d loss %.6f", epoch, result.history.back().total);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Category ensemble: blend the top-head softmax with virtual-head softmax
// mass folded through the vid -> top map (unmapped clusters drop their mass).

inline std::pair<int, std::vector<double>> predict_category(
    const Network& net, const FeatureChannels& query, const VidCategoryMap& vid_map,
    const CategoryVocab& vocab, double ensemble_weight) {
  if (ensemble_weight < 0.0 || ensemble_weight > 1.0) {
    fail(ErrorCode::kInvalidArgs, "ensemble weight must lie in [0,1]");
  }
  if (net.dims.top_classes != vocab.size()) {
    fail(ErrorCode::kDimensionMismatch, "top head size differs from vocabulary");
  }
  Forward ws;
  forward(net, concat(query), ws);
  std::vector<double> p_top = ws.logits_top;
  softmax_inplace(p_top);
  std::vector<double> p_vid = ws.logits_virtual;
  softmax_inplace(p_vid);

  std::vector<double> scores(vocab.size(), 0.0);
  for (const auto& [vid, top] : vid_map.vid_to_top) {
    if (vid < 0 || vid >= static_cast<int>(p_vid.size())) continue;
    const int idx = vocab.index_of(top);
    if (idx < 0) fail(ErrorCode::kUnknownCategory, "mapped category '" + top + "' not in vocabulary");
    scores[idx] += (1.0 - ensemble_weight) * p_vid[vid];
  }
  for (int i = 0; i < vocab.size(); ++i) scores[i] += ensemble_weight * p_top[i];

  int best = 0;
  for (int i = 1; i < vocab.size(); ++i) {
    if (scores[i] > scores[best]) best = i;  // ties keep the lower index
  }
  return {best, std::move(scores)};
}

// ---------------------------------------------------------------------------
// Loss history CSV.

inline void write_loss_history(std::ostream& os, const std::vector<EpochStats>& history) {
  os << "epoch, loss_total, loss_virtual, loss_hard_aware, loss_pair, loss_triplet, loss_listwise\n";
  char buf[192];
  for (const EpochStats& s : history) {
    std::snprintf(buf, sizeof(buf), "%d, %.17g, %.17g, %.17g, %.17g, %.17g, %.17g\n",
                  s.epoch, s.total, s.virtual_mean, s.hard_mean, s.pair_mean,
                  s.triplet_mean, s.list_mean);
    os << buf;
  }
}

}  // namespace vid
