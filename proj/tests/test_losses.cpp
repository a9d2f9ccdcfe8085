#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vid/losses.hpp"
#include "vid/rng.hpp"

namespace vid {
namespace {

constexpr double kFdStep = 1e-5;

// |analytic - numeric| <= 1e-6 + 1e-4 * |numeric|
void expect_close_to_fd(double analytic, double numeric, const std::string& what) {
  EXPECT_NEAR(analytic, numeric, 1e-6 + 1e-4 * std::abs(numeric)) << what;
}

TEST(SoftmaxCe, SymmetricTwoWayCase) {
  std::vector<double> grad;
  const double loss = softmax_ce(std::vector<double>{0.0, 0.0}, 0, &grad);
  EXPECT_NEAR(loss, std::log(2.0), 1e-15);
  ASSERT_EQ(grad.size(), 2u);
  EXPECT_NEAR(grad[0], -0.5, 1e-15);
  EXPECT_NEAR(grad[1], 0.5, 1e-15);
}

TEST(SoftmaxCe, ConfidentCorrectPredictionHasTinyLoss) {
  const double loss = softmax_ce(std::vector<double>{10.0, -10.0}, 0);
  // The max-shifted evaluation quantizes the tiny log term at the magnitude of
  // the shift, so agreement is to ~1 ulp of the largest logit, not of the loss.
  EXPECT_NEAR(loss, std::log1p(std::exp(-20.0)), 1e-14);
  EXPECT_NEAR(loss, 2.061e-9, 1e-11);
}

TEST(SoftmaxCe, InvariantToLogitShift) {
  Rng rng(501);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_index(6));
    std::vector<double> logits(n), shifted(n);
    const double c = rng.next_uniform(-50.0, 50.0);
    for (int i = 0; i < n; ++i) {
      logits[i] = rng.next_uniform(-5.0, 5.0);
      shifted[i] = logits[i] + c;
    }
    const int label = static_cast<int>(rng.next_index(n));
    EXPECT_NEAR(softmax_ce(logits, label), softmax_ce(shifted, label), 1e-9);
  }
}

TEST(SoftmaxCe, GradientMatchesFiniteDifferences) {
  Rng rng(502);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_index(5));
    std::vector<double> logits(n);
    for (double& z : logits) z = rng.next_uniform(-3.0, 3.0);
    const int label = static_cast<int>(rng.next_index(n));
    std::vector<double> grad;
    softmax_ce(logits, label, &grad);
    for (int j = 0; j < n; ++j) {
      std::vector<double> up = logits, dn = logits;
      up[j] += kFdStep;
      dn[j] -= kFdStep;
      const double fd = (softmax_ce(up, label) - softmax_ce(dn, label)) / (2 * kFdStep);
      expect_close_to_fd(grad[j], fd, "logit " + std::to_string(j));
    }
  }
}

TEST(SoftmaxCe, RejectsOutOfRangeLabel) {
  const std::vector<double> logits{0.0, 0.0};
  for (const int label : {-1, 2}) {
    try {
      softmax_ce(logits, label);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kLabelOutOfRange);
    }
  }
}

TEST(PairHinge, SatisfiedMarginIsInactive) {
  double g_neg = -99, g_hard = -99;
  EXPECT_DOUBLE_EQ(pair_hinge_loss(0.0, 2.0, &g_neg, &g_hard), 0.0);
  EXPECT_DOUBLE_EQ(g_neg, 0.0);
  EXPECT_DOUBLE_EQ(g_hard, 0.0);
}

TEST(PairHinge, EqualScoresSitAtMarginBoundary) {
  for (const double z : {-3.0, 0.0, 1.5}) {
    EXPECT_DOUBLE_EQ(pair_hinge_loss(z, z), 1.0);
  }
}

TEST(PairHinge, ViolatedMarginValueAndGradient) {
  double g_neg = 0, g_hard = 0;
  EXPECT_DOUBLE_EQ(pair_hinge_loss(1.0, 0.0, &g_neg, &g_hard), 4.0);
  EXPECT_DOUBLE_EQ(g_neg, 4.0);
  EXPECT_DOUBLE_EQ(g_hard, -4.0);
}

TEST(PairHinge, PrintedFormIsUnhingedSquare) {
  // (1 - z_neg + z_hard)^2 without a hinge.
  EXPECT_DOUBLE_EQ(pair_hinge_loss(1.0, 0.0, nullptr, nullptr, true), 0.0);
  EXPECT_DOUBLE_EQ(pair_hinge_loss(0.0, 1.0, nullptr, nullptr, true), 4.0);
  EXPECT_DOUBLE_EQ(pair_hinge_loss(2.0, 0.0, nullptr, nullptr, true), 1.0);
  double g_neg = 0, g_hard = 0;
  pair_hinge_loss(0.0, 1.0, &g_neg, &g_hard, true);
  EXPECT_DOUBLE_EQ(g_neg, -4.0);
  EXPECT_DOUBLE_EQ(g_hard, 4.0);
}

TEST(PairHinge, GradientMatchesFiniteDifferencesAwayFromKink) {
  Rng rng(503);
  for (const bool printed : {false, true}) {
    int checked = 0;
    for (int trial = 0; trial < 60 && checked < 20; ++trial) {
      const double z_neg = rng.next_uniform(-2.0, 2.0);
      const double z_hard = rng.next_uniform(-2.0, 2.0);
      if (!printed && std::abs(pair_hinge_margin(z_neg, z_hard)) < 1e-3) continue;
      ++checked;
      double g_neg = 0, g_hard = 0;
      pair_hinge_loss(z_neg, z_hard, &g_neg, &g_hard, printed);
      const double fd_neg = (pair_hinge_loss(z_neg + kFdStep, z_hard, nullptr, nullptr, printed) -
                             pair_hinge_loss(z_neg - kFdStep, z_hard, nullptr, nullptr, printed)) /
                            (2 * kFdStep);
      const double fd_hard = (pair_hinge_loss(z_neg, z_hard + kFdStep, nullptr, nullptr, printed) -
                              pair_hinge_loss(z_neg, z_hard - kFdStep, nullptr, nullptr, printed)) /
                             (2 * kFdStep);
      expect_close_to_fd(g_neg, fd_neg, "z_neg");
      expect_close_to_fd(g_hard, fd_hard, "z_hard");
    }
    EXPECT_EQ(checked, 20);
  }
}

TEST(HardAware, SimpleSampleReducesToPlainCrossEntropy) {
  const std::vector<double> logits{0.0, 0.0};
  EXPECT_NEAR(hard_aware_loss(logits, 0, SampleKind::kSimple, 1.0, 2.0),
              std::log(2.0), 1e-15);
}

TEST(HardAware, HardSampleIsScaledByEta) {
  const std::vector<double> logits{0.0, 0.0};
  EXPECT_NEAR(hard_aware_loss(logits, 0, SampleKind::kHard, 1.0, 2.0),
              2.0 * std::log(2.0), 1e-15);
}

TEST(HardAware, GradientIsScaledCrossEntropyGradient) {
  const std::vector<double> logits{0.3, -0.7, 1.1};
  std::vector<double> base, scaled;
  softmax_ce(logits, 2, &base);
  hard_aware_loss(logits, 2, SampleKind::kHard, 1.0, 2.5, &scaled);
  ASSERT_EQ(base.size(), scaled.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(scaled[i], 2.5 * base[i], 1e-15);
  }
}

TEST(TripletLoss, SatisfiedMarginIsZero) {
  const std::vector<double> q{0.0, 0.0};
  const std::vector<double> pos{0.0, 0.0};
  const std::vector<double> neg{2.0, 0.0};
  EXPECT_DOUBLE_EQ(triplet_loss(q, pos, neg), 0.0);
}

TEST(TripletLoss, FullyCollapsedTripleScoresOne) {
  const std::vector<double> v{0.5, -0.5};
  EXPECT_DOUBLE_EQ(triplet_loss(v, v, v), 1.0);
}

TEST(TripletLoss, HandComputedViolation) {
  const std::vector<double> q{0.0};
  const std::vector<double> pos{1.0};
  const std::vector<double> neg{0.5};
  EXPECT_DOUBLE_EQ(triplet_loss(q, pos, neg), 1.5);
}

TEST(TripletLoss, InactiveHingeLeavesGradientsUntouched) {
  const std::vector<double> q{0.0, 0.0};
  const std::vector<double> pos{0.1, 0.0};
  const std::vector<double> neg{5.0, 0.0};
  std::vector<double> gq(2, 0.0), gp(2, 0.0), gn(2, 0.0);
  EXPECT_DOUBLE_EQ(triplet_loss(q, pos, neg, gq, gp, gn), 0.0);
  for (int i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(gq[i], 0.0);
    EXPECT_DOUBLE_EQ(gp[i], 0.0);
    EXPECT_DOUBLE_EQ(gn[i], 0.0);
  }
}

TEST(TripletLoss, RejectsDimensionMismatch) {
  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{0.0};
  try {
    triplet_loss(a, a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(TripletLoss, GradientMatchesFiniteDifferencesAwayFromKinks) {
  Rng rng(504);
  const int dim = 4;
  int checked = 0;
  for (int trial = 0; trial < 100 && checked < 25; ++trial) {
    std::vector<double> q(dim), pos(dim), neg(dim);
    for (int i = 0; i < dim; ++i) {
      q[i] = rng.next_uniform(-1.0, 1.0);
      pos[i] = rng.next_uniform(-1.0, 1.0);
      neg[i] = rng.next_uniform(-1.0, 1.0);
    }
    if (std::abs(triplet_margin(q, pos, neg)) < 1e-3) continue;
    if (l2_dist(q, pos) < 1e-2 || l2_dist(q, neg) < 1e-2) continue;
    ++checked;
    std::vector<double> gq(dim, 0.0), gp(dim, 0.0), gn(dim, 0.0);
    triplet_loss(q, pos, neg, gq, gp, gn);
    const auto fd = [&](std::vector<double>& target, int j) {
      target[j] += kFdStep;
      const double up = triplet_loss(q, pos, neg);
      target[j] -= 2 * kFdStep;
      const double dn = triplet_loss(q, pos, neg);
      target[j] += kFdStep;
      return (up - dn) / (2 * kFdStep);
    };
    for (int j = 0; j < dim; ++j) {
      expect_close_to_fd(gq[j], fd(q, j), "q");
      expect_close_to_fd(gp[j], fd(pos, j), "pos");
      expect_close_to_fd(gn[j], fd(neg, j), "neg");
    }
  }
  EXPECT_EQ(checked, 25);
}

TEST(Permutation, ValidationRejectsNonBijections) {
  for (const std::vector<int>& bad :
       {std::vector<int>{0, 1, 1}, std::vector<int>{0, 3, 1}, std::vector<int>{-1, 0, 1},
        std::vector<int>{0, 1}}) {
    try {
      validate_permutation(bad, 3);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidPermutation);
    }
  }
  validate_permutation(std::vector<int>{2, 0, 1}, 3);  // must not throw
}

TEST(PlackettLuce, EqualScoresMakeBothOrdersEquallyLikely) {
  const std::vector<double> scores{0.7, 0.7};
  EXPECT_NEAR(plackett_prob(scores, std::vector<int>{0, 1}), 0.5, 1e-12);
  EXPECT_NEAR(plackett_prob(scores, std::vector<int>{1, 0}), 0.5, 1e-12);
}

TEST(PlackettLuce, HandComputedTwoCandidateCase) {
  const std::vector<double> scores{std::log(2.0), 0.0};
  EXPECT_NEAR(plackett_prob(scores, std::vector<int>{0, 1}), 2.0 / 3.0, 1e-12);
}

TEST(PlackettLuce, ProbabilitiesSumToOneOverAllPermutations) {
  Rng rng(505);
  for (const int n : {2, 3, 4, 5}) {
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.next_uniform(-2.0, 2.0);
    std::vector<int> pi(n);
    std::iota(pi.begin(), pi.end(), 0);
    double total = 0.0;
    do {
      total += plackett_prob(scores, pi);
    } while (std::next_permutation(pi.begin(), pi.end()));
    EXPECT_NEAR(total, 1.0, 1e-9) << "N=" << n;
  }
}

TEST(ListwiseLoss, UniformModelScoresGiveLnTwo) {
  const std::vector<double> scores{0.4, 0.4};
  const std::vector<double> weights{1.0, 1.0};
  for (const std::vector<int>& teacher : {std::vector<int>{0, 1}, std::vector<int>{1, 0}}) {
    EXPECT_NEAR(listwise_loss(scores, teacher, weights), std::log(2.0), 1e-12);
  }
}

TEST(ListwiseLoss, WellSeparatedAgreementDrivesLossToZero) {
  const std::vector<double> scores{20.0, 0.0};
  const std::vector<int> teacher{0, 1};
  const std::vector<double> weights{1.0, 1.0};
  EXPECT_LT(listwise_loss(scores, teacher, weights), 1e-8);
}

TEST(ListwiseLoss, PositionWeightsScaleEachStep) {
  const std::vector<double> scores{0.0, 0.0, 0.0};
  const std::vector<int> teacher{2, 0, 1};
  const std::vector<double> weights{2.0, 0.5, 3.0};
  // Steps contribute w_i * ln(remaining candidates) under equal scores.
  EXPECT_NEAR(listwise_loss(scores, teacher, weights),
              2.0 * std::log(3.0) + 0.5 * std::log(2.0), 1e-12);
}

TEST(ListwiseLoss, RejectsBadInputs) {
  const std::vector<double> scores{0.0, 0.0};
  try {
    listwise_loss(scores, std::vector<int>{0, 1}, std::vector<double>{1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
  EXPECT_THROW(
      listwise_loss(scores, std::vector<int>{0, 0}, std::vector<double>{1.0, 1.0}),
      Error);
}

TEST(ListwiseLoss, GradientMatchesFiniteDifferencesAndSumsToZero) {
  Rng rng(506);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_index(4));
    std::vector<double> scores(n), weights(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.next_uniform(-2.0, 2.0);
      weights[i] = rng.next_uniform(0.1, 2.0);
    }
    std::vector<int> teacher(n);
    std::iota(teacher.begin(), teacher.end(), 0);
    rng.shuffle(teacher);
    std::vector<double> grad;
    listwise_loss(scores, teacher, weights, &grad);
    double grad_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      std::vector<double> up = scores, dn = scores;
      up[j] += kFdStep;
      dn[j] -= kFdStep;
      const double fd =
          (listwise_loss(up, teacher, weights) - listwise_loss(dn, teacher, weights)) /
          (2 * kFdStep);
      expect_close_to_fd(grad[j], fd, "score " + std::to_string(j));
      grad_sum += grad[j];
    }
    EXPECT_NEAR(grad_sum, 0.0, 1e-10);
  }
}

}  // namespace
}  // namespace vid
