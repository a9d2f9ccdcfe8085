// Loss primitives with analytic gradients: softmax cross-entropy, pairwise
// category hinge, hard-aware weighting, unsquared-Euclidean triplet margin,
// and Plackett-Luce listwise ranking. All gradients are hand-derived and
// finite-difference checked in the test suite.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "vid/common.hpp"
#include "vid/mining.hpp"
#include "vid/vecmath.hpp"

namespace vid {

// ---------------------------------------------------------------------------
// Softmax cross-entropy (max-subtracted). grad, when non-null, RECEIVES
// softmax(z) - onehot(label) (overwritten, not accumulated).

inline double softmax_ce(std::span<const double> logits, int label,
                         std::vector<double>* grad = nullptr) {
  const int n = static_cast<int>(logits.size());
  if (label < 0 || label >= n) {
    fail(ErrorCode::kLabelOutOfRange,
         "label " + std::to_string(label) + " outside [0," + std::to_string(n) + ")");
  }
  const double lse = logsumexp(logits);
  if (grad != nullptr) {
    grad->resize(n);
    for (int i = 0; i < n; ++i) (*grad)[i] = std::exp(logits[i] - lse);
    (*grad)[label] -= 1.0;
  }
  return lse - logits[label];
}

// ---------------------------------------------------------------------------
// Pairwise category loss over the two involved top-category scores.
// Default (consistent with the separation the loss is meant to enforce):
//   L = max(0, 1 + z_neg - z_hard)^2  — zero once the clicked (hard)
// category outscores the abandoned one by the margin. The squared form
// without the hinge on the score gap is available as printed_form.

inline double pair_hinge_loss(double z_neg, double z_hard, double* g_neg = nullptr,
                              double* g_hard = nullptr, bool printed_form = false) {
  if (printed_form) {
    const double m = 1.0 - z_neg + z_hard;
    if (g_neg != nullptr) *g_neg = -2.0 * m;
    if (g_hard != nullptr) *g_hard = 2.0 * m;
    return m * m;
  }
  const double m = 1.0 + z_neg - z_hard;
  if (m <= 0.0) {
    if (g_neg != nullptr) *g_neg = 0.0;
    if (g_hard != nullptr) *g_hard = 0.0;
    return 0.0;
  }
  if (g_neg != nullptr) *g_neg = 2.0 * m;
  if (g_hard != nullptr) *g_hard = -2.0 * m;
  return m * m;
}

// Pre-hinge margin, exposed so gradient checks can avoid the kink.
inline double pair_hinge_margin(double z_neg, double z_hard) {
  return 1.0 + z_neg - z_hard;
}

// ---------------------------------------------------------------------------
// Hard-aware classification loss: per-kind scalar weight on softmax CE.

inline double hard_aware_loss(std::span<const double> logits, int label,
                              SampleKind kind, double eta_simple, double eta_hard,
                              std::vector<double>* grad = nullptr) {
  const double eta = kind == SampleKind::kHard ? eta_hard : eta_simple;
  const double loss = softmax_ce(logits, label, grad);
  if (grad != nullptr) {
    for (double& g : *grad) g *= eta;
  }
  return eta * loss;
}

// ---------------------------------------------------------------------------
// Triplet margin loss with unsquared Euclidean distances, margin 1.
// Subgradient is 0 at the hinge kink and at zero distance. Gradients are
// ACCUMULATED into the provided spans when non-empty.

inline double triplet_loss(std::span<const double> q, std::span<const double> pos,
                           std::span<const double> neg,
                           std::span<double> grad_q = {},
                           std::span<double> grad_pos = {},
                           std::span<double> grad_neg = {}) {
  if (q.size() != pos.size() || q.size() != neg.size()) {
    fail(ErrorCode::kDimensionMismatch, "triplet embeddings must share dimension");
  }
  const double d_pos = l2_dist(q, pos);
  const double d_neg = l2_dist(q, neg);
  const double margin = d_pos - d_neg + 1.0;
  if (margin <= 0.0) return 0.0;
  const bool want_grad = !grad_q.empty();
  if (want_grad) {
    if (d_pos > 0.0) {
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double g = (q[i] - pos[i]) / d_pos;
        grad_q[i] += g;
        grad_pos[i] -= g;
      }
    }
    if (d_neg > 0.0) {
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double g = (q[i] - neg[i]) / d_neg;
        grad_q[i] -= g;
        grad_neg[i] += g;
      }
    }
  }
  return margin;
}

// Pre-hinge value, exposed so gradient checks can avoid the kink.
inline double triplet_margin(std::span<const double> q, std::span<const double> pos,
                             std::span<const double> neg) {
  return l2_dist(q, pos) - l2_dist(q, neg) + 1.0;
}

// ---------------------------------------------------------------------------
// Plackett-Luce. pi is 0-based and must be a bijection on {0..N-1}.

inline void validate_permutation(std::span<const int> pi, std::size_t n) {
  if (pi.size() != n) {
    fail(ErrorCode::kInvalidPermutation, "permutation length mismatch");
  }
  std::vector<char> seen(n, 0);
  for (int v : pi) {
    if (v < 0 || static_cast<std::size_t>(v) >= n || seen[v]) {
      fail(ErrorCode::kInvalidPermutation, "indices must form a bijection");
    }
    seen[v] = 1;
  }
}

inline double plackett_log_prob(std::span<const double> scores, std::span<const int> pi) {
  validate_permutation(pi, scores.size());
  const int n = static_cast<int>(scores.size());
  std::vector<double> suffix(n);
  for (int i = 0; i < n; ++i) suffix[i] = scores[pi[i]];
  double lp = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::span<const double> tail{suffix.data() + i, static_cast<std::size_t>(n - i)};
    lp += suffix[i] - logsumexp(tail);
  }
  return lp;
}

inline double plackett_prob(std::span<const double> scores, std::span<const int> pi) {
  return std::exp(plackett_log_prob(scores, pi));
}

// ---------------------------------------------------------------------------
// Listwise loss: position-weighted negative log Plackett-Luce likelihood of
// the teacher permutation. grad, when non-null, RECEIVES dL/dscores.

inline double listwise_loss(std::span<const double> scores, std::span<const int> teacher_pi,
                            std::span<const double> weights,
                            std::vector<double>* grad = nullptr) {
  const int n = static_cast<int>(scores.size());
  if (static_cast<int>(weights.size()) != n) {
    fail(ErrorCode::kDimensionMismatch, "weights length must match scores");
  }
  validate_permutation(teacher_pi, scores.size());
  std::vector<double> suffix(n);
  for (int i = 0; i < n; ++i) suffix[i] = scores[teacher_pi[i]];
  if (grad != nullptr) grad->assign(n, 0.0);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::span<const double> tail{suffix.data() + i, static_cast<std::size_t>(n - i)};
    const double lse = logsumexp(tail);
    loss += weights[i] * (lse - suffix[i]);
    if (grad != nullptr) {
      for (int k = i; k < n; ++k) {
        (*grad)[teacher_pi[k]] += weights[i] * std::exp(suffix[k] - lse);
      }
      (*grad)[teacher_pi[i]] -= weights[i];
    }
  }
  return loss;
}

}  // namespace vid
