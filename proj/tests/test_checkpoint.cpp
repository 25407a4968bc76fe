#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "oracles.hpp"
#include "parknet/checkpoint.hpp"
#include "parknet/nn.hpp"

using namespace parknet;

TEST_CASE("named arrays round-trip bit-exactly") {
  Rng rng(1);
  std::vector<NamedArray> arrays = {
      {"alpha", {2, 3}, {1, 2, 3, 4, 5, 6}},
      {"beta.w", {4}, {0.25, -1e300, 1e-300, 3.141592653589793}},
  };
  const std::string path = "/tmp/parknet_test_ckpt.bin";
  save_arrays(path, arrays);
  const auto back = load_arrays(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "alpha");
  CHECK(back[0].shape == std::vector<int64_t>{2, 3});
  CHECK(back[0].data == arrays[0].data);
  CHECK(back[1].data == arrays[1].data);
  std::remove(path.c_str());
}

TEST_CASE("parameter checkpoints restore by name with shape checks") {
  Rng rng(2);
  ParamMap params;
  Linear l(params, "layer", 3, 4, rng);
  const std::string path = "/tmp/parknet_test_params.bin";
  save_checkpoint(path, params);

  ParamMap fresh;
  Rng rng2(999);
  Linear l2(fresh, "layer", 3, 4, rng2);
  CHECK(l2.w.data() != l.w.data());
  load_checkpoint(path, fresh);
  CHECK(l2.w.data() == l.w.data());
  CHECK(l2.b.data() == l.b.data());

  // wrong shape rejected
  ParamMap wrong;
  Rng rng3(1);
  Linear l3(wrong, "layer", 3, 5, rng3);
  CHECK_THROWS_AS(load_checkpoint(path, wrong), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("loader rejects corrupt containers") {
  const std::string path = "/tmp/parknet_test_bad.bin";
  {
    std::ofstream os(path, std::ios::binary);
    os << "JUNKJUNKJUNK";
  }
  CHECK_THROWS_AS(load_arrays(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("adam state round-trips and resumes the step counter") {
  Rng rng(3);
  ParamMap params;
  Linear l(params, "layer", 2, 2, rng);
  Adam opt(params, {});
  Tensor x = oracle::random_tensor(rng, {4, 2}, false);
  for (int step = 0; step < 3; ++step) {
    opt.zero_grad();
    Tensor loss = reduce_sum(mul(l.forward(x), l.forward(x)));
    loss.backward();
    opt.step();
  }
  const std::string path = "/tmp/parknet_test_adam.bin";
  opt.save_state(path);

  Adam opt2(params, {});
  CHECK(opt2.steps_taken() == 0);
  opt2.load_state(path);
  CHECK(opt2.steps_taken() == 3);
  std::remove(path.c_str());
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  ParamMap params;
  Tensor theta = make_const_param(params, "theta", {1}, 5.0);
  Adam opt(params, {.lr = 0.1});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    Tensor loss = mul(theta, theta);
    loss.backward();
    opt.step();
  }
  CHECK(std::abs(theta.data()[0]) < 1e-2);
}
