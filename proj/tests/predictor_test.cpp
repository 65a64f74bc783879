#include <gtest/gtest.h>

#include <random>

#include "mshgfn/gradcheck.hpp"
#include "mshgfn/predictor.hpp"

using namespace mshgfn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool rg = false) {
  Tensor t(std::move(shape), 0.0, rg);
  fill_uniform(t, -1.0, 1.0, rng);
  return t;
}

TEST(Predictor, LogitsMatchLoopOracle) {
  std::mt19937_64 rng(1);
  std::size_t n = 4, d = 5;
  PredictorParams p;
  p.init(d, rng);
  fill_uniform(p.hidden_b, -0.5, 0.5, rng);
  fill_uniform(p.out_b, -0.5, 0.5, rng);
  Tensor x = random_tensor({n, d}, rng);
  std::mt19937_64 drop_rng(0);
  Tensor logits = predict_logits(x, p, 0.0, false, drop_rng);
  ASSERT_EQ(logits.shape(), (Shape{n, 2}));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> h(d);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = p.hidden_b.at(j);
      for (std::size_t c = 0; c < d; ++c)
        acc += x.at2(i, c) * p.hidden_w.at2(c, j);
      h[j] = std::max(0.0, acc);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = p.out_b.at(j);
      for (std::size_t c = 0; c < d; ++c) acc += h[c] * p.out_w.at2(c, j);
      EXPECT_NEAR(logits.at2(i, j), acc, 1e-12);
    }
  }
}

TEST(Predictor, ZeroWeightsGiveUniformProbabilities) {
  std::mt19937_64 rng(2);
  PredictorParams p;
  p.init(5, rng);
  for (auto& v : p.out_w.values()) v = 0.0;
  for (auto& v : p.out_b.values()) v = 0.0;
  Tensor x = random_tensor({3, 5}, rng);
  std::mt19937_64 drop_rng(0);
  Tensor probs = predict(x, p, 0.0, false, drop_rng);
  for (double v : probs.values()) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(Predictor, ProbabilityRowsSumToOne) {
  std::mt19937_64 rng(3);
  PredictorParams p;
  p.init(5, rng);
  Tensor x = random_tensor({6, 5}, rng);
  std::mt19937_64 drop_rng(0);
  Tensor probs = predict(x, p, 0.0, false, drop_rng);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(probs.at2(i, 0) + probs.at2(i, 1), 1.0, 1e-12);
    EXPECT_GT(probs.at2(i, 0), 0.0);
    EXPECT_GT(probs.at2(i, 1), 0.0);
  }
}

TEST(Predictor, BiasShiftMovesProbabilityMonotonically) {
  std::mt19937_64 rng(4);
  PredictorParams p;
  p.init(5, rng);
  Tensor x = random_tensor({3, 5}, rng);
  std::mt19937_64 drop_rng(0);
  double prev = -1.0;
  for (double shift : {-2.0, 0.0, 2.0}) {
    p.out_b.at(1) = shift;
    Tensor probs = predict(x, p, 0.0, false, drop_rng);
    EXPECT_GT(probs.at2(0, 1), prev);
    prev = probs.at2(0, 1);
  }
}

TEST(Predictor, EvalModeIgnoresDropout) {
  std::mt19937_64 rng(5);
  PredictorParams p;
  p.init(5, rng);
  Tensor x = random_tensor({4, 5}, rng);
  std::mt19937_64 r1(7), r2(99);
  Tensor a = predict(x, p, 0.5, false, r1);
  Tensor b = predict(x, p, 0.5, false, r2);
  EXPECT_EQ(a.values(), b.values());
}

TEST(Predictor, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::size_t n = 3, d = 5;
  PredictorParams p;
  p.init(d, rng);
  Tensor x = random_tensor({n, d}, rng, true);
  std::vector<int> labels{1, 0, 1};
  auto loss_of = [&]() {
    std::mt19937_64 r(0);
    return ops::cross_entropy(predict_logits(x, p, 0.0, false, r), labels);
  };
  auto f = [&]() { return loss_of().at(0); };
  std::vector<NamedParam> named;
  p.collect("pred", named);
  named.push_back({"input", &x});
  for (auto& np : named) {
    np.tensor->zero_grad();
    loss_of().backward();
    EXPECT_LT(finite_difference_check(f, *np.tensor, np.tensor->grad(), 1e-5),
              1e-4)
        << np.name;
  }
}

}  // namespace
