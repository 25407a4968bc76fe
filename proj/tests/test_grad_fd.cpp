#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Finite-difference gradient checks for every differentiable operation.
// Each case runs several random instances; the probe tensor is perturbed
// element by element and compared against the recorded backward pass.

#include "oracles.hpp"
#include "parknet/nn.hpp"
#include "parknet/ops.hpp"

using namespace parknet;
using oracle::finite_difference_gap;
using oracle::random_tensor;

namespace {

// Reduce an arbitrary tensor to a scalar with fixed random weights so every
// output element influences the loss.
Tensor weighted_sum(const Tensor& t, Rng& rng) {
  Tensor w = random_tensor(rng, t.shape(), false);
  return reduce_sum(mul(t, w));
}

}  // namespace

TEST_CASE("elementwise add/sub/mul with broadcasting") {
  Rng rng(100);
  for (int i = 0; i < 20; ++i) {
    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, i % 2 ? std::vector<int64_t>{3, 4} : std::vector<int64_t>{4});
    Rng wr(200 + i);
    auto loss = [&] { return weighted_sum(mul(add(a, b), sub(a, b)), wr); };
    CHECK(finite_difference_gap(a, [&] { Rng r(200 + i); return weighted_sum(mul(add(a, b), sub(a, b)), r); }) <= 0.0);
    CHECK(finite_difference_gap(b, [&] { Rng r(200 + i); return weighted_sum(mul(add(a, b), sub(a, b)), r); }) <= 0.0);
  }
}

TEST_CASE("scalar add/mul and neg") {
  Rng rng(101);
  for (int i = 0; i < 20; ++i) {
    Tensor a = random_tensor(rng, {2, 5});
    auto loss = [&] { Rng r(300 + i); return weighted_sum(neg(mul_scalar(add_scalar(a, 0.7), 1.3)), r); };
    CHECK(finite_difference_gap(a, loss) <= 0.0);
  }
}

TEST_CASE("relu and sigmoid") {
  Rng rng(102);
  for (int i = 0; i < 20; ++i) {
    // keep inputs away from the relu kink where FD is ill-defined
    Tensor a = random_tensor(rng, {4, 4});
    for (auto& v : a.data()) {
      if (std::abs(v) < 5e-3) v = v < 0 ? v - 5e-3 : v + 5e-3;
    }
    auto loss = [&] { Rng r(400 + i); return weighted_sum(add(relu(a), sigmoid(a)), r); };
    CHECK(finite_difference_gap(a, loss) <= 0.0);
  }
}

TEST_CASE("log") {
  Rng rng(103);
  for (int i = 0; i < 20; ++i) {
    Tensor a = random_tensor(rng, {3, 3}, true, 0.2, 3.0);
    auto loss = [&] { Rng r(500 + i); return weighted_sum(parknet::log(a), r); };
    CHECK(finite_difference_gap(a, loss) <= 0.0);
  }
}

TEST_CASE("matmul, matmul_nt, batched and broadcast") {
  Rng rng(104);
  for (int i = 0; i < 20; ++i) {
    Tensor a = random_tensor(rng, i % 2 ? std::vector<int64_t>{2, 3, 4} : std::vector<int64_t>{3, 4});
    Tensor b = random_tensor(rng, {4, 5});
    Tensor bn = random_tensor(rng, {5, 4});
    auto loss_mm = [&] { Rng r(600 + i); return weighted_sum(matmul(a, b), r); };
    CHECK(finite_difference_gap(a, loss_mm) <= 0.0);
    CHECK(finite_difference_gap(b, loss_mm) <= 0.0);
    auto loss_nt = [&] { Rng r(700 + i); return weighted_sum(matmul_nt(a, bn), r); };
    CHECK(finite_difference_gap(a, loss_nt) <= 0.0);
    CHECK(finite_difference_gap(bn, loss_nt) <= 0.0);
  }
}

TEST_CASE("softmax and masked softmax") {
  Rng rng(105);
  for (int i = 0; i < 20; ++i) {
    Tensor x = random_tensor(rng, {3, 5}, true, -2.0, 2.0);
    auto loss = [&] { Rng r(800 + i); return weighted_sum(softmax(x, -1), r); };
    CHECK(finite_difference_gap(x, loss) <= 0.0);

    Tensor mask = Tensor::full({3, 5}, 1.0);
    mask.set({0, 2}, 0.0);
    mask.set({2, 4}, 0.0);
    auto loss_m = [&] { Rng r(900 + i); return weighted_sum(softmax_masked(x, mask, -1), r); };
    CHECK(finite_difference_gap(x, loss_m) <= 0.0);
  }
}

TEST_CASE("attention with causal mask") {
  Rng rng(106);
  for (int i = 0; i < 20; ++i) {
    Tensor q = random_tensor(rng, {3, 4});
    Tensor k = random_tensor(rng, {3, 4});
    Tensor v = random_tensor(rng, {3, 6});
    Tensor mask = Tensor::zeros({3, 3});
    for (int64_t r = 0; r < 3; ++r) {
      for (int64_t c = 0; c <= r; ++c) mask.set({r, c}, 1.0);
    }
    auto loss = [&] { Rng r(1000 + i); return weighted_sum(attention(q, k, v, mask), r); };
    CHECK(finite_difference_gap(q, loss) <= 0.0);
    CHECK(finite_difference_gap(k, loss) <= 0.0);
    CHECK(finite_difference_gap(v, loss) <= 0.0);
  }
}

TEST_CASE("cross_entropy with ignore marker") {
  Rng rng(107);
  for (int i = 0; i < 20; ++i) {
    Tensor logits = random_tensor(rng, {5, 4}, true, -2.0, 2.0);
    std::vector<int64_t> targets = {0, 3, -1, 2, 1};  // -1 ignored by default marker
    auto loss = [&] { return cross_entropy(logits, targets, -1); };
    CHECK(finite_difference_gap(logits, loss) <= 0.0);
  }
}

TEST_CASE("embedding") {
  Rng rng(108);
  for (int i = 0; i < 20; ++i) {
    Tensor w = random_tensor(rng, {6, 3});
    std::vector<int64_t> idx = {1, 4, 1, 0};
    auto loss = [&] { Rng r(1100 + i); return weighted_sum(embedding(w, idx), r); };
    CHECK(finite_difference_gap(w, loss) <= 0.0);
  }
}

TEST_CASE("layer_norm") {
  Rng rng(109);
  for (int i = 0; i < 20; ++i) {
    Tensor x = random_tensor(rng, {3, 6}, true, -2.0, 2.0);
    Tensor g = random_tensor(rng, {6}, true, 0.5, 1.5);
    Tensor b = random_tensor(rng, {6});
    auto loss = [&] { Rng r(1200 + i); return weighted_sum(layer_norm(x, g, b), r); };
    CHECK(finite_difference_gap(x, loss) <= 0.0);
    CHECK(finite_difference_gap(g, loss) <= 0.0);
    CHECK(finite_difference_gap(b, loss) <= 0.0);
  }
}

TEST_CASE("linear") {
  Rng rng(110);
  for (int i = 0; i < 20; ++i) {
    Tensor x = random_tensor(rng, {4, 3});
    Tensor w = random_tensor(rng, {5, 3});
    Tensor b = random_tensor(rng, {5});
    auto loss = [&] { Rng r(1300 + i); return weighted_sum(linear(x, w, b), r); };
    CHECK(finite_difference_gap(x, loss) <= 0.0);
    CHECK(finite_difference_gap(w, loss) <= 0.0);
    CHECK(finite_difference_gap(b, loss) <= 0.0);
  }
}

TEST_CASE("conv2d with stride and padding") {
  Rng rng(111);
  for (int i = 0; i < 20; ++i) {
    const int64_t stride = 1 + i % 2;
    const int64_t pad = i % 2;
    Tensor x = random_tensor(rng, {1, 2, 5, 5});
    Tensor w = random_tensor(rng, {3, 2, 3, 3});
    Tensor b = random_tensor(rng, {3});
    auto loss = [&] {
      Rng r(1400 + i);
      return weighted_sum(conv2d(x, w, b, stride, pad), r);
    };
    CHECK(finite_difference_gap(x, loss) <= 0.0);
    CHECK(finite_difference_gap(w, loss) <= 0.0);
    CHECK(finite_difference_gap(b, loss) <= 0.0);
  }
}

TEST_CASE("avg_pool2d") {
  Rng rng(112);
  for (int i = 0; i < 20; ++i) {
    Tensor x = random_tensor(rng, {2, 4, 4});
    auto loss = [&] { Rng r(1500 + i); return weighted_sum(avg_pool2d(x, 2), r); };
    CHECK(finite_difference_gap(x, loss) <= 0.0);
  }
}

TEST_CASE("reductions") {
  Rng rng(113);
  for (int i = 0; i < 20; ++i) {
    Tensor x = random_tensor(rng, {3, 4, 2});
    auto loss1 = [&] { return reduce_sum(x); };
    CHECK(finite_difference_gap(x, loss1) <= 0.0);
    auto loss2 = [&] { Rng r(1600 + i); return weighted_sum(reduce_sum(x, 1), r); };
    CHECK(finite_difference_gap(x, loss2) <= 0.0);
    auto loss3 = [&] { Rng r(1700 + i); return weighted_sum(reduce_mean(x, 0, true), r); };
    CHECK(finite_difference_gap(x, loss3) <= 0.0);
  }
}

TEST_CASE("shape surgery: reshape, permute, slice, concat") {
  Rng rng(114);
  for (int i = 0; i < 20; ++i) {
    Tensor x = random_tensor(rng, {3, 4});
    Tensor y = random_tensor(rng, {3, 2});
    auto loss = [&] {
      Rng r(1800 + i);
      Tensor joined = concat({slice(x, 1, 1, 2), y}, 1);       // (3, 4)
      Tensor twisted = permute(reshape(joined, {3, 2, 2}), {1, 0, 2});
      return weighted_sum(twisted, r);
    };
    CHECK(finite_difference_gap(x, loss) <= 0.0);
    CHECK(finite_difference_gap(y, loss) <= 0.0);
  }
}

TEST_CASE("gaussian_maps centers") {
  Rng rng(115);
  for (int i = 0; i < 20; ++i) {
    Tensor centers = random_tensor(rng, {3, 2}, true, 1.0, 6.0);
    auto loss = [&] {
      Rng r(1900 + i);
      return weighted_sum(gaussian_maps(centers, 1.5, 8, 8), r);
    };
    CHECK(finite_difference_gap(centers, loss) <= 0.0);
  }
}

TEST_CASE("composite MLP loss matches finite differences") {
  Rng rng(116);
  for (int i = 0; i < 5; ++i) {
    ParamMap params;
    Rng init(2000 + i);
    Linear l1(params, "l1", 4, 8, init);
    Linear l2(params, "l2", 8, 3, init);
    Tensor x = random_tensor(rng, {6, 4}, false);
    std::vector<int64_t> targets = {0, 1, 2, 0, 1, 2};
    auto loss = [&] {
      return cross_entropy(l2.forward(relu(l1.forward(x))), targets);
    };
    for (auto& [name, p] : params) {
      CHECK(finite_difference_gap(p, loss) <= 0.0);
    }
  }
}
