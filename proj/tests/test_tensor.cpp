#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "parknet/ops.hpp"
#include "parknet/rng.hpp"
#include "parknet/tensor.hpp"

using namespace parknet;

TEST_CASE("construction validates shape against data length") {
  CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), std::invalid_argument);
  Tensor t = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
  CHECK(t.at({1, 0}) == 3.0);
}

TEST_CASE("backward of sum gives all-ones gradient for any shape") {
  Rng rng(7);
  for (auto shape : std::vector<std::vector<int64_t>>{{3}, {2, 4}, {2, 3, 2}}) {
    Tensor x = oracle::random_tensor(rng, shape);
    Tensor loss = reduce_sum(x);
    loss.backward();
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward of x*x at x=3 gives 6") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor loss = mul(x, x);
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::zeros({2, 2}, true);
  Tensor y = add(x, x);
  CHECK_THROWS_AS(y.backward(), std::logic_error);
}

TEST_CASE("backward twice without zeroing doubles every gradient") {
  Rng rng(11);
  Tensor x = oracle::random_tensor(rng, {3, 3});
  Tensor w = oracle::random_tensor(rng, {3, 3});
  Tensor loss = reduce_sum(mul(matmul(x, w), x));
  loss.backward();
  const std::vector<double> once_x = x.grad();
  const std::vector<double> once_w = w.grad();
  loss.backward();
  for (size_t i = 0; i < once_x.size(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(2.0 * once_x[i]).epsilon(1e-12));
    CHECK(w.grad()[i] == doctest::Approx(2.0 * once_w[i]).epsilon(1e-12));
  }
}

TEST_CASE("gradient flows through shared subexpressions once per use") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = mul(x, x);          // x^2
  Tensor loss = add(y, y);       // 2 x^2 -> d/dx = 4x = 8
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("no graph is recorded when nothing requires grad") {
  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({2}, {3, 4});
  Tensor c = add(a, b);
  CHECK_FALSE(c.requires_grad());
  CHECK_THROWS_AS(c.backward(), std::logic_error);
}

TEST_CASE("identical seeds give bit-identical op pipelines") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    Tensor a = oracle::random_tensor(rng, {4, 5});
    Tensor b = oracle::random_tensor(rng, {5, 3});
    Tensor out = softmax(matmul(a, b), -1);
    return out.data();
  };
  const auto r1 = run(123);
  const auto r2 = run(123);
  REQUIRE(r1.size() == r2.size());
  for (size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("detach cuts the graph") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = mul(x, x).detach();
  CHECK_FALSE(y.requires_grad());
  CHECK(y.item() == doctest::Approx(9.0));
}
