#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ram/assignment.hpp"
#include "ram/loss.hpp"

using namespace ram;

namespace {

AnchorGridConfig default_grid() { return AnchorGridConfig{416, 416, 13, 13, 3, 50.0, 50.0}; }

struct Pair {
  OutputTensor output;
  Assignment assignment;
};

Pair random_pair(std::mt19937_64& rng, const AnchorGridConfig& c) {
  const auto gts = oracle::random_scene(rng, c, 15);
  Pair p{OutputTensor(c), match(c, gts)};
  std::normal_distribution<double> n(0.0, 2.0);
  for (double& v : p.output.values()) v = n(rng);
  return p;
}

// Direct evaluation of the three sums with the textbook logistic, for moderate logits.
std::array<double, 3> naive_terms(const OutputTensor& out, const Assignment& a) {
  std::array<double, 3> l{0, 0, 0};
  for_each_anchor(out.config(), [&](const Anchor& anchor) {
    const double s = oracle::logistic(out.at(anchor, kConfidence));
    if (const auto& label = a.at(anchor)) {
      l[0] += -std::log(s);
      const auto t = label->target.as_array();
      const auto p = out.offsets(anchor).as_array();
      for (std::size_t k = 0; k < 5; ++k) l[2] += (p[k] - t[k]) * (p[k] - t[k]);
    } else {
      l[1] += -std::log(1.0 - s);
    }
  });
  return l;
}

double central_difference(OutputTensor out, const Assignment& a, const LossWeights& w, std::size_t i, double h) {
  const double x = out.values()[i];
  out.values()[i] = x + h;
  const double up = compute_loss(out, a, w).total;
  out.values()[i] = x - h;
  const double down = compute_loss(out, a, w).total;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST(Loss, AllNegativeZeroLogits) {
  const auto c = default_grid();
  const auto b = compute_loss(OutputTensor(c), match(c, {}), {});
  EXPECT_DOUBLE_EQ(b.loss1, 0.0);
  EXPECT_NEAR(b.loss2, 507.0 * std::log(2.0), 1e-10);
  EXPECT_DOUBLE_EQ(b.loss3, 0.0);
}

TEST(Loss, OnePositiveAtNinetyPercent) {
  const auto c = default_grid();
  const std::vector<GraspBox> gts{GraspBox(100, 200, 80, 30, 50)};
  const Assignment a = match(c, gts);
  OutputTensor out(c);
  const Anchor pos{6, 3, 0};
  out.at(pos, kConfidence) = std::log(0.9 / 0.1);
  out.set_offsets(pos, a.at(pos)->target);
  const auto b = compute_loss(out, a, {});
  EXPECT_NEAR(b.loss1, -std::log(0.9), 1e-12);
  EXPECT_NEAR(b.loss1, 0.1053605, 1e-7);
  EXPECT_DOUBLE_EQ(b.loss3, 0.0);
}

TEST(Loss, WeightedTotal) {
  std::mt19937_64 rng(1);
  const auto p = random_pair(rng, default_grid());
  const auto b = compute_loss(p.output, p.assignment, {2.0, 0.024, 10.0});
  EXPECT_NEAR(b.total, 2.0 * b.loss1 + 0.024 * b.loss2 + 10.0 * b.loss3, 1e-12 * b.total);
  const auto unit = compute_loss(p.output, p.assignment, {1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(unit.loss1, b.loss1);
  EXPECT_DOUBLE_EQ(unit.loss2, b.loss2);
  EXPECT_DOUBLE_EQ(unit.loss3, b.loss3);
}

TEST(Loss, MatchesDirectSums) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_pair(rng, default_grid());
    const auto b = compute_loss(p.output, p.assignment, {});
    const auto l = naive_terms(p.output, p.assignment);
    EXPECT_NEAR(b.loss1, l[0], 1e-9 * std::max(1.0, l[0]));
    EXPECT_NEAR(b.loss2, l[1], 1e-9 * std::max(1.0, l[1]));
    EXPECT_NEAR(b.loss3, l[2], 1e-9 * std::max(1.0, l[2]));
    EXPECT_GE(b.loss1, 0.0);
    EXPECT_GE(b.loss2, 0.0);
    EXPECT_GE(b.loss3, 0.0);
  }
}

TEST(Loss, GradientMatchesCentralDifferences) {
  const LossWeights w{2.0, 0.024, 10.0};
  std::mt19937_64 rng(3);
  for (const AnchorGridConfig c : {default_grid(), AnchorGridConfig{64, 64, 2, 2, 4, 20, 10}}) {
    for (int pair = 0; pair < 4; ++pair) {
      const auto p = random_pair(rng, c);
      const auto b = compute_loss(p.output, p.assignment, w);
      for (std::size_t i = 0; i < p.output.size(); ++i) {
        const double fd = central_difference(p.output, p.assignment, w, i, 1e-4);
        const double a = b.gradient[i];
        EXPECT_LT(std::abs(a - fd) / std::max(1.0, std::abs(a)), 1e-4) << "entry " << i;
      }
    }
  }
}

TEST(Loss, ClosedFormGradientEntries) {
  const auto c = default_grid();
  std::mt19937_64 rng(4);
  const auto p = random_pair(rng, c);
  const LossWeights w{2.0, 0.024, 10.0};
  const auto b = compute_loss(p.output, p.assignment, w);
  for_each_anchor(c, [&](const Anchor& a) {
    const double s = oracle::logistic(p.output.at(a, kConfidence));
    const auto& label = p.assignment.at(a);
    if (label) {
      EXPECT_NEAR(b.gradient[p.output.index(a, kConfidence)], w.lambda1 * (s - 1.0), 1e-12);
      const auto t = label->target.as_array();
      for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(b.gradient[p.output.index(a, kTx + k)], 2.0 * w.lambda3 * (p.output.at(a, kTx + k) - t[k]),
                    1e-12);
      }
    } else {
      EXPECT_NEAR(b.gradient[p.output.index(a, kConfidence)], w.lambda2 * s, 1e-12);
      for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(b.gradient[p.output.index(a, kTx + k)], 0.0);
    }
  });
}

TEST(Loss, TermsSeparateByChannel) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 10; ++i) {
    auto p = random_pair(rng, default_grid());
    const auto before = compute_loss(p.output, p.assignment, {});
    OutputTensor conf_moved = p.output, offs_moved = p.output;
    for_each_anchor(p.output.config(), [&](const Anchor& a) {
      conf_moved.at(a, kConfidence) += n(rng);
      for (std::size_t k = kTx; k < kChannelCount; ++k) offs_moved.at(a, k) += n(rng);
    });
    const auto c1 = compute_loss(conf_moved, p.assignment, {});
    const auto c2 = compute_loss(offs_moved, p.assignment, {});
    EXPECT_DOUBLE_EQ(c1.loss3, before.loss3);
    EXPECT_DOUBLE_EQ(c2.loss1, before.loss1);
    EXPECT_DOUBLE_EQ(c2.loss2, before.loss2);
  }
}

TEST(Loss, DecreasesToZeroAlongOptimalRay) {
  std::mt19937_64 rng(6);
  const auto p = random_pair(rng, default_grid());
  double last = INFINITY;
  for (double s = 0.0; s <= 60.0; s += 2.0) {
    OutputTensor out(p.output.config());
    for_each_anchor(out.config(), [&](const Anchor& a) {
      const auto& label = p.assignment.at(a);
      out.at(a, kConfidence) = label ? s : -s;
      if (label) {
        OffsetVector t = label->target;
        t.t_x += std::exp(-s);
        out.set_offsets(a, t);
      }
    });
    const double total = compute_loss(out, p.assignment, {}).total;
    EXPECT_LT(total, last);
    last = total;
  }
  EXPECT_LT(last, 1e-20);
}

TEST(Loss, StableAtExtremeLogits) {
  const auto c = default_grid();
  const std::vector<GraspBox> gts{GraspBox(100, 200, 80, 30, 50)};
  const Assignment a = match(c, gts);
  OutputTensor out(c);
  for (double& v : out.values()) v = 1000.0;
  auto b = compute_loss(out, a, {});
  EXPECT_TRUE(std::isfinite(b.total));
  EXPECT_NEAR(b.loss2, 506.0 * 1000.0, 1e-6);
  for (double& v : out.values()) v = -1000.0;
  b = compute_loss(out, a, {});
  EXPECT_TRUE(std::isfinite(b.total));
  EXPECT_NEAR(b.loss1, 1000.0, 1e-9);
  for (double g : b.gradient) EXPECT_TRUE(std::isfinite(g));
}

TEST(Loss, Errors) {
  const auto c = default_grid();
  AnchorGridConfig other = c;
  other.anchors_per_cell = 4;
  try {
    compute_loss(OutputTensor(other), match(c, {}), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigMismatch);
  }
  EXPECT_THROW(compute_loss(OutputTensor(c), match(c, {}), {-1.0, 1.0, 1.0}), Error);
  EXPECT_THROW(compute_loss(OutputTensor(c), match(c, {}), {1.0, NAN, 1.0}), Error);
}

TEST(BatchLoss, SumByDefaultMeanOnRequest) {
  std::mt19937_64 rng(7);
  std::vector<OutputTensor> outs;
  std::vector<Assignment> as;
  double sum = 0.0;
  for (int i = 0; i < 8; ++i) {
    auto p = random_pair(rng, default_grid());
    sum += compute_loss(p.output, p.assignment, {}).total;
    outs.push_back(p.output);
    as.push_back(p.assignment);
  }
  const auto s = compute_batch_loss(outs, as, {});
  EXPECT_NEAR(s.total, sum, 1e-9 * sum);
  const auto m = compute_batch_loss(outs, as, {}, BatchReduction::Mean);
  EXPECT_NEAR(m.total, sum / 8.0, 1e-9 * sum);
  const auto single = compute_loss(outs[2], as[2], {});
  for (std::size_t i = 0; i < single.gradient.size(); ++i) {
    EXPECT_DOUBLE_EQ(s.gradients[2][i], single.gradient[i]);
    EXPECT_DOUBLE_EQ(m.gradients[2][i], single.gradient[i] / 8.0);
  }
  std::vector<OutputTensor> fewer(outs.begin(), outs.begin() + 3);
  EXPECT_THROW(compute_batch_loss(fewer, as, {}), Error);
}

TEST(BatchLoss, OrderIndependent) {
  std::mt19937_64 rng(8);
  std::vector<OutputTensor> outs;
  std::vector<Assignment> as;
  for (int i = 0; i < 32; ++i) {
    auto p = random_pair(rng, default_grid());
    outs.push_back(p.output);
    as.push_back(p.assignment);
  }
  const double forward = compute_batch_loss(outs, as, {}).total;
  std::vector<std::size_t> idx(outs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<OutputTensor> o2;
  std::vector<Assignment> a2;
  for (std::size_t i : idx) {
    o2.push_back(outs[i]);
    a2.push_back(as[i]);
  }
  EXPECT_NEAR(compute_batch_loss(o2, a2, {}).total, forward, 1e-9 * forward);
}

TEST(PairwiseSum, MatchesLongDoubleAccumulation) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(100000);
  long double ref = 0.0L;
  for (double& x : v) {
    x = u(rng);
    ref += x;
  }
  EXPECT_NEAR(pairwise_sum(v), static_cast<double>(ref), 1e-9);
  EXPECT_EQ(pairwise_sum(std::span<const double>{}), 0.0);
}

TEST(Loss, JsonHasAllTerms) {
  const auto c = default_grid();
  const auto j = loss_to_json(compute_loss(OutputTensor(c), match(c, {}), {}));
  for (const char* k : {"loss1", "loss2", "loss3", "total"}) EXPECT_TRUE(j.contains(k));
}
