#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "parknet/ops.hpp"
#include "parknet/rng.hpp"

using namespace parknet;

TEST_CASE("matmul: identity and 1x1 cases") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {3, 4, 5, 6});
  Tensor out = matmul(eye, m);
  CHECK(out.data() == m.data());

  Tensor a = Tensor::from_data({1, 1}, {2});
  Tensor b = Tensor::from_data({1, 1}, {3});
  CHECK(matmul(a, b).item() == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("matmul: random 3x4 by 4x2 matches the triple-loop oracle to 1e-12") {
  Rng rng(42);
  Tensor a = oracle::random_tensor(rng, {3, 4}, false);
  Tensor b = oracle::random_tensor(rng, {4, 2}, false);
  Tensor c = matmul(a, b);
  const auto ref = oracle::matmul_naive(a.data(), b.data(), 3, 4, 2);
  for (size_t i = 0; i < ref.size(); ++i) {
    CHECK(std::abs(c.data()[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({5, 2});
  try {
    matmul(a, b);
    FAIL("expected dimension error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[3, 4]") != std::string::npos);
    CHECK(msg.find("[5, 2]") != std::string::npos);
  }
}

TEST_CASE("matmul: batched leading dimensions broadcast") {
  Rng rng(5);
  Tensor a = oracle::random_tensor(rng, {4, 2, 3}, false);
  Tensor b = oracle::random_tensor(rng, {3, 5}, false);  // broadcast over batch of 4
  Tensor c = matmul(a, b);
  CHECK(c.shape() == std::vector<int64_t>{4, 2, 5});
  for (int s = 0; s < 4; ++s) {
    std::vector<double> as(a.data().begin() + s * 6, a.data().begin() + (s + 1) * 6);
    const auto ref = oracle::matmul_naive(as, b.data(), 2, 3, 5);
    for (int i = 0; i < 10; ++i) {
      CHECK(c.data()[s * 10 + i] == doctest::Approx(ref[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("matmul_nt equals matmul against explicit transpose") {
  Rng rng(9);
  Tensor a = oracle::random_tensor(rng, {3, 4}, false);
  Tensor b = oracle::random_tensor(rng, {5, 4}, false);
  Tensor nt = matmul_nt(a, b);
  Tensor bt = permute(b, {1, 0});
  Tensor ref = matmul(a, bt);
  for (size_t i = 0; i < ref.data().size(); ++i) {
    CHECK(nt.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-14));
  }
}

TEST_CASE("softmax: symmetry, stabilization, oracle") {
  Tensor z = Tensor::from_data({3}, {0, 0, 0});
  Tensor sz = softmax(z, 0);
  for (double v : sz.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  Tensor big = Tensor::from_data({2}, {1000, 1000});
  Tensor sbig = softmax(big, 0);
  for (double v : sbig.data()) {
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }

  Tensor x = Tensor::from_data({3}, {1, 2, 3});
  const auto ref = oracle::softmax_naive(x.data());
  const auto got = softmax(x, 0).data();
  for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref[i]) <= 1e-12);
}

TEST_CASE("softmax rows sum to one within 1e-12") {
  Rng rng(3);
  Tensor x = oracle::random_tensor(rng, {7, 11}, false, -30.0, 30.0);
  Tensor y = softmax(x, -1);
  for (int r = 0; r < 7; ++r) {
    double s = 0.0;
    for (int c = 0; c < 11; ++c) s += y.data()[r * 11 + c];
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("attention: single query equal to single key returns the value row") {
  Tensor q = Tensor::from_data({1, 4}, {1, 2, 3, 4});
  Tensor v = Tensor::from_data({1, 3}, {7, 8, 9});
  Tensor out = attention(q, q, v);
  CHECK(out.shape() == std::vector<int64_t>{1, 3});
  for (int i = 0; i < 3; ++i) CHECK(out.data()[i] == doctest::Approx(v.data()[i]));
}

TEST_CASE("attention: fully-open mask equals no-mask output") {
  Rng rng(17);
  Tensor q = oracle::random_tensor(rng, {2, 4}, false);
  Tensor k = oracle::random_tensor(rng, {3, 4}, false);
  Tensor v = oracle::random_tensor(rng, {3, 5}, false);
  Tensor open = Tensor::full({2, 3}, 1.0);
  const auto a = attention(q, k, v).data();
  const auto b = attention(q, k, v, open).data();
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("attention: 2-query/3-key case matches the scalar-loop oracle to 1e-10") {
  Rng rng(23);
  Tensor q = oracle::random_tensor(rng, {2, 4}, false);
  Tensor k = oracle::random_tensor(rng, {3, 4}, false);
  Tensor v = oracle::random_tensor(rng, {3, 5}, false);
  Tensor mask = Tensor::from_data({2, 3}, {1, 1, 0, 0, 1, 1});
  const auto got = attention(q, k, v, mask).data();
  const auto m = mask.data();
  const auto ref = oracle::attention_naive(q.data(), k.data(), v.data(), 2, 3, 4, 5, &m);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref[i]) <= 1e-10);
}

TEST_CASE("attention: masked positions receive exactly zero weight") {
  Tensor q = Tensor::from_data({1, 2}, {5, -3});
  Tensor k = Tensor::from_data({2, 2}, {5, -3, 1, 1});
  Tensor v = Tensor::from_data({2, 1}, {1.0, 100.0});
  Tensor mask = Tensor::from_data({1, 2}, {1, 0});
  CHECK(attention(q, k, v, mask).item() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("attention: an all-masked row is an error") {
  Tensor q = Tensor::zeros({1, 2});
  Tensor k = Tensor::zeros({2, 2});
  Tensor v = Tensor::zeros({2, 1});
  Tensor mask = Tensor::zeros({1, 2});
  CHECK_THROWS_AS(attention(q, k, v, mask), std::invalid_argument);
}

TEST_CASE("cross_entropy: uniform logits give ln(V)") {
  const int vocab = 7;
  Tensor logits = Tensor::zeros({3, vocab});
  Tensor loss = cross_entropy(logits, {0, 3, 6});
  CHECK(loss.item() == doctest::Approx(std::log(double(vocab))).epsilon(1e-12));
}

TEST_CASE("cross_entropy: confident correct logits approach zero") {
  Tensor logits = Tensor::from_data({1, 3}, {50.0, 0.0, 0.0});
  CHECK(cross_entropy(logits, {0}).item() < 1e-12);
}

TEST_CASE("cross_entropy: random 4-class batch matches the extended-precision oracle") {
  Rng rng(31);
  Tensor logits = oracle::random_tensor(rng, {6, 4}, false, -3.0, 3.0);
  std::vector<int64_t> targets = {0, 1, 2, 3, 1, 2};
  const double got = cross_entropy(logits, targets).item();
  const double ref = oracle::cross_entropy_naive(logits.data(), targets, 6, 4, -1);
  CHECK(std::abs(got - ref) <= 1e-10);
}

TEST_CASE("cross_entropy: ignored positions contribute nothing") {
  Rng rng(37);
  Tensor logits = oracle::random_tensor(rng, {4, 5});
  std::vector<int64_t> with_pad = {1, 2, 99, 99};
  Tensor loss = cross_entropy(logits, with_pad, /*ignore_index=*/99);

  Tensor head = slice(logits, 0, 0, 2);
  Tensor ref = cross_entropy(head, {1, 2});
  CHECK(loss.item() == doctest::Approx(ref.item()).epsilon(1e-14));

  loss.backward();
  for (int r = 2; r < 4; ++r) {
    for (int c = 0; c < 5; ++c) CHECK(logits.grad()[r * 5 + c] == 0.0);
  }
}

TEST_CASE("cross_entropy: out-of-range target raises an index error") {
  Tensor logits = Tensor::zeros({2, 4});
  CHECK_THROWS_AS(cross_entropy(logits, {0, 4}), std::out_of_range);
  CHECK_THROWS_AS(cross_entropy(logits, {-2, 0}), std::out_of_range);
}

TEST_CASE("embedding gathers rows and rejects bad indices") {
  Tensor w = Tensor::from_data({3, 2}, {0, 1, 10, 11, 20, 21});
  Tensor out = embedding(w, {2, 0, 2});
  CHECK(out.shape() == std::vector<int64_t>{3, 2});
  CHECK(out.at({0, 1}) == 21.0);
  CHECK(out.at({1, 0}) == 0.0);
  CHECK_THROWS_AS(embedding(w, {3}), std::out_of_range);
}

TEST_CASE("layer_norm normalizes the trailing axis") {
  Rng rng(41);
  Tensor x = oracle::random_tensor(rng, {4, 8}, false, -5.0, 5.0);
  Tensor g = Tensor::full({8}, 1.0);
  Tensor b = Tensor::zeros({8});
  Tensor y = layer_norm(x, g, b);
  for (int r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (int c = 0; c < 8; ++c) mean += y.data()[r * 8 + c];
    mean /= 8;
    for (int c = 0; c < 8; ++c) {
      const double d = y.data()[r * 8 + c] - mean;
      var += d * d;
    }
    var /= 8;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("conv2d: output size arithmetic and a hand case") {
  // 1x1x3x3 input, 1x1x2x2 kernel of ones, stride 1, no padding
  Tensor x = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor out = conv2d(x, w, Tensor(), 1, 0);
  CHECK(out.shape() == std::vector<int64_t>{1, 1, 2, 2});
  CHECK(out.data()[0] == doctest::Approx(12.0));  // 1+2+4+5
  CHECK(out.data()[3] == doctest::Approx(28.0));  // 5+6+8+9

  Tensor big = Tensor::zeros({1, 3, 16, 16});
  Tensor k = Tensor::zeros({8, 3, 3, 3});
  CHECK(conv2d(big, k, Tensor(), 2, 1).shape() == std::vector<int64_t>{1, 8, 8, 8});
}

TEST_CASE("broadcasting add/mul against manual expansion") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from_data({3}, {10, 20, 30});
  Tensor col = Tensor::from_data({2, 1}, {100, 200});
  Tensor s = add(a, row);
  CHECK(s.at({1, 2}) == 36.0);
  Tensor p = mul(a, col);
  CHECK(p.at({0, 1}) == 200.0);
  CHECK(p.at({1, 0}) == 800.0);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({4})), std::invalid_argument);
}

TEST_CASE("slice/concat/permute/reshape round trips") {
  Rng rng(55);
  Tensor x = oracle::random_tensor(rng, {3, 4}, false);
  Tensor left = slice(x, 1, 0, 2);
  Tensor right = slice(x, 1, 2, 2);
  Tensor back = concat({left, right}, 1);
  CHECK(back.data() == x.data());

  Tensor p = permute(permute(x, {1, 0}), {1, 0});
  CHECK(p.data() == x.data());

  Tensor r = reshape(x, {4, 3});
  CHECK(r.data() == x.data());
  CHECK_THROWS_AS(reshape(x, {5, 3}), std::invalid_argument);
}

TEST_CASE("gaussian_maps rows are normalized and peak at the nearest cell") {
  Tensor centers = Tensor::from_data({2, 2}, {3.0, 4.0, 1.2, 6.7});
  Tensor maps = gaussian_maps(centers, 2.0, 8, 9);
  CHECK(maps.shape() == std::vector<int64_t>{2, 72});
  for (int t = 0; t < 2; ++t) {
    double s = 0.0;
    int arg = 0;
    for (int c = 0; c < 72; ++c) {
      s += maps.data()[t * 72 + c];
      if (maps.data()[t * 72 + c] > maps.data()[t * 72 + arg]) arg = c;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
    const int want_row = static_cast<int>(std::lround(centers.data()[t * 2]));
    const int want_col = static_cast<int>(std::lround(centers.data()[t * 2 + 1]));
    CHECK(arg == want_row * 9 + want_col);
  }
}

TEST_CASE("avg_pool2d averages blocks") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  Tensor y = avg_pool2d(x, 2);
  CHECK(y.numel() == 1);
  CHECK(y.data()[0] == doctest::Approx(2.5));
  CHECK_THROWS_AS(avg_pool2d(Tensor::zeros({1, 3, 3}), 2), std::invalid_argument);
}
