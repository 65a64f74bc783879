#include <gtest/gtest.h>

#include <random>

#include "mshgfn/data.hpp"
#include "mshgfn/gnn.hpp"
#include "mshgfn/gradcheck.hpp"

using namespace mshgfn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool rg = false) {
  Tensor t(std::move(shape), 0.0, rg);
  fill_uniform(t, -1.0, 1.0, rng);
  return t;
}

TEST(AttributeAdjacency, ZeroMatricesGiveUniformRows) {
  Tensor e1({5, 3}), e2({5, 3});
  Tensor r = attribute_adjacency(e1, e2);
  for (double v : r.values()) EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(AttributeAdjacency, RowsSumToOne) {
  std::mt19937_64 rng(1);
  for (int it = 0; it < 20; ++it) {
    Tensor r = attribute_adjacency(random_tensor({5, 4}, rng),
                                   random_tensor({5, 4}, rng));
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_GE(r.at2(i, j), 0.0);
        s += r.at2(i, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(AttributeAdjacency, ScalingChangesResultAndMatchesRecomputation) {
  std::mt19937_64 rng(2);
  Tensor e1 = random_tensor({5, 4}, rng);
  Tensor e2 = random_tensor({5, 4}, rng);
  Tensor r1 = attribute_adjacency(e1, e2);
  Tensor e1_scaled = ops::scale(e1, 3.0);
  Tensor r2 = attribute_adjacency(e1_scaled, e2);
  // direct recomputation oracle
  Tensor direct = ops::softmax(
      ops::relu(ops::matmul(e1_scaled, ops::transpose(e2))), 1);
  bool changed = false;
  for (std::size_t i = 0; i < r1.size(); ++i) {
    EXPECT_NEAR(r2.at(i), direct.at(i), 1e-12);
    if (std::abs(r2.at(i) - r1.at(i)) > 1e-9) changed = true;
  }
  EXPECT_TRUE(changed);
}

TEST(AttributeGcn, SelfLoopOnlyPropagation) {
  // R = 0 and W_c = identity (L = D) leaves ReLU(X^T)
  std::size_t d = 5;
  Tensor r({d, d});
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({d, d}, rng);
  Tensor e = attribute_gcn(r, x, Tensor::identity(d));
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t t = 0; t < d; ++t)
      EXPECT_NEAR(e.at2(a, t), std::max(0.0, x.at2(t, a)), 1e-12);
}

TEST(AttributeGcn, ZeroSeriesGivesZeroEmbedding) {
  std::mt19937_64 rng(4);
  Tensor r = attribute_adjacency(random_tensor({5, 3}, rng),
                                 random_tensor({5, 3}, rng));
  Tensor e = attribute_gcn(r, Tensor({7, 5}), random_tensor({7, 5}, rng));
  for (double v : e.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(AttributeGcn, MatchesLoopOracle) {
  std::mt19937_64 rng(5);
  std::size_t l = 4, d = 5;
  Tensor r = attribute_adjacency(random_tensor({d, 3}, rng),
                                 random_tensor({d, 3}, rng));
  Tensor x = random_tensor({l, d}, rng);
  Tensor w = random_tensor({l, d}, rng);
  Tensor e = attribute_gcn(r, x, w);
  ASSERT_EQ(e.shape(), (Shape{d, d}));
  // hand-rolled loops: e = ReLU((R+I) X^T W)
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < l; ++t) {
        double xt = 0.0;
        for (std::size_t b = 0; b < d; ++b)
          xt += (r.at2(a, b) + (a == b ? 1.0 : 0.0)) * x.at2(t, b);
        acc += xt * w.at2(t, c);
      }
      EXPECT_NEAR(e.at2(a, c), std::max(0.0, acc), 1e-12);
    }
}

TEST(GlobalAdjacency, IdenticalEmbeddingsGiveAllOnes) {
  Tensor flat({3, 6});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 6; ++j) flat.at2(i, j) = 0.5 * (j + 1);
  Tensor a = global_adjacency(flat);
  for (double v : a.values()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(GlobalAdjacency, SymmetricUnitDiagonalBounded) {
  std::mt19937_64 rng(6);
  Tensor flat = random_tensor({6, 25}, rng);
  Tensor a = global_adjacency(flat);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(a.at2(i, i), 1.0, 1e-9);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(a.at2(i, j), a.at2(j, i), 1e-9);
      EXPECT_GE(a.at2(i, j), -1.0 - 1e-9);
      EXPECT_LE(a.at2(i, j), 1.0 + 1e-9);
    }
  }
}

TEST(GlobalAdjacency, MatchesPairwiseCosineOracle) {
  std::mt19937_64 rng(7);
  Tensor flat = random_tensor({3, 10}, rng);
  Tensor a = global_adjacency(flat);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      std::vector<double> u(flat.values().begin() + i * 10,
                            flat.values().begin() + (i + 1) * 10);
      std::vector<double> v(flat.values().begin() + j * 10,
                            flat.values().begin() + (j + 1) * 10);
      EXPECT_NEAR(a.at2(i, j), ops::cosine_similarity(u, v), 1e-9);
    }
}

TEST(Propagate, IdentityAdjacencyIsRelu) {
  std::mt19937_64 rng(8);
  Tensor z = random_tensor({4, 5}, rng);
  std::mt19937_64 drop_rng(0);
  Tensor out = propagate(Tensor::identity(4), z, Tensor::identity(5), 0.0,
                         false, drop_rng);
  for (std::size_t i = 0; i < z.size(); ++i)
    EXPECT_NEAR(out.at(i), std::max(0.0, z.at(i)), 1e-12);
}

TEST(Propagate, NormalizedRowsSumToOne) {
  std::mt19937_64 rng(9);
  Tensor flat = random_tensor({5, 25}, rng);
  Tensor a_hat = normalize_adjacency(global_adjacency(flat));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_GE(a_hat.at2(i, j), 0.0);
      s += a_hat.at2(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Propagate, UniformAdjacencyAveragesRows) {
  std::mt19937_64 rng(10);
  std::size_t n = 4, d = 5;
  Tensor a({n, n}, 1.0 / n);
  Tensor z = random_tensor({n, d}, rng);
  std::mt19937_64 drop_rng(0);
  Tensor out = propagate(a, z, Tensor::identity(d), 0.0, false, drop_rng);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += z.at2(i, j);
    mean /= n;
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(out.at2(i, j), std::max(0.0, mean), 1e-12);
  }
}

TEST(Hierarchical, PermutationEquivariance) {
  std::mt19937_64 rng(11);
  std::size_t n = 4, l = 6;
  GraphScaleParams p;
  p.init(n, kNumIndicators, 4, l, kNumIndicators, false, rng);
  Tensor x = random_tensor({n, l, kNumIndicators}, rng);
  std::vector<std::size_t> perm{3, 1, 0, 2};
  Tensor xp({n, l, kNumIndicators});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < l; ++t)
      for (std::size_t k = 0; k < kNumIndicators; ++k)
        xp.at3(i, t, k) = x.at3(perm[i], t, k);
  GraphScaleParams pp = p;
  for (std::size_t i = 0; i < n; ++i) {
    pp.e1[i] = p.e1[perm[i]];
    pp.e2[i] = p.e2[perm[i]];
  }
  Tensor a = stock_adjacency_for_scale(p, x);
  Tensor ap = stock_adjacency_for_scale(pp, xp);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      EXPECT_NEAR(ap.at2(i, j), a.at2(perm[i], perm[j]), 1e-12);
}

TEST(Hierarchical, AdjacencyIsDynamicAcrossWindows) {
  std::mt19937_64 rng(12);
  std::size_t n = 2, l = 8;
  GraphScaleParams p;
  p.init(n, kNumIndicators, 4, l, kNumIndicators, false, rng);
  // co-moving series vs anti-moving series
  Tensor w1({n, l, kNumIndicators}), w2({n, l, kNumIndicators});
  for (std::size_t t = 0; t < l; ++t)
    for (std::size_t k = 0; k < kNumIndicators; ++k) {
      double v = std::sin(0.9 * t + 0.3 * k);
      w1.at3(0, t, k) = v;
      w1.at3(1, t, k) = v;  // identical movement
      w2.at3(0, t, k) = v;
      w2.at3(1, t, k) = -v;  // opposite movement
    }
  Tensor a1 = stock_adjacency_for_scale(p, w1);
  Tensor a2 = stock_adjacency_for_scale(p, w2);
  EXPECT_NE(a1.at2(0, 1), a2.at2(0, 1));
}

TEST(Hierarchical, GradientsFlowIntoEveryParameterGroup) {
  std::mt19937_64 rng(13);
  std::size_t n = 3, l = 5, d = kNumIndicators;
  GraphScaleParams p;
  p.init(n, d, 4, l, d, false, rng);
  Tensor x = random_tensor({n, l, d}, rng);
  Tensor z = random_tensor({n, d}, rng);
  std::mt19937_64 drop_rng(0);
  Tensor a_hat = normalize_adjacency(stock_adjacency_for_scale(p, x));
  Tensor out = propagate(a_hat, z, p.prop_weight, 0.0, false, drop_rng);
  ops::sum_all(ops::mul(out, out)).backward();
  std::vector<NamedParam> named;
  p.collect("g", named, true);
  for (auto& np : named) {
    double mag = 0.0;
    for (double g : np.tensor->grad()) mag += std::abs(g);
    EXPECT_GT(mag, 0.0) << np.name;
  }
}

TEST(Hierarchical, GradcheckThroughAdjacency) {
  std::mt19937_64 rng(14);
  std::size_t n = 3, l = 4, d = kNumIndicators;
  GraphScaleParams p;
  p.init(n, d, 3, l, d, false, rng);
  Tensor z = random_tensor({n, d}, rng);
  Tensor x = random_tensor({n, l, d}, rng);
  auto loss_of = [&]() {
    std::mt19937_64 r(0);
    Tensor a_hat = normalize_adjacency(stock_adjacency_for_scale(p, x));
    Tensor out = propagate(a_hat, z, p.prop_weight, 0.0, false, r);
    return ops::sum_all(ops::mul(out, out));
  };
  std::vector<NamedParam> named;
  p.collect("g", named, true);
  auto f = [&]() { return loss_of().at(0); };
  for (auto& np : named) {
    np.tensor->zero_grad();
    loss_of().backward();
    EXPECT_LT(finite_difference_check(f, *np.tensor, np.tensor->grad(), 1e-5),
              1e-4)
        << np.name;
  }
}

}  // namespace
