#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "parknet/ops.hpp"
#include "parknet/rng.hpp"
#include "parknet/tensor.hpp"

namespace parknet {

// Ordered name -> parameter mapping; registration order is the checkpoint and
// optimizer order, so model construction must be deterministic.
using ParamMap = std::vector<std::pair<std::string, Tensor>>;

// New trainable tensor initialized uniform in +-1/sqrt(fan_in).
Tensor make_param(ParamMap& params, const std::string& name, std::vector<int64_t> shape,
                  int64_t fan_in, Rng& rng);
// New trainable tensor at a constant (layer-norm gains, biases that start at 0).
Tensor make_const_param(ParamMap& params, const std::string& name,
                        std::vector<int64_t> shape, double value);

const Tensor* find_param(const ParamMap& params, const std::string& name);

struct Linear {
  Tensor w;  // (out, in)
  Tensor b;  // (out) or undefined
  Linear() = default;
  Linear(ParamMap& params, const std::string& name, int64_t in, int64_t out, Rng& rng,
         bool bias = true);
  Tensor forward(const Tensor& x) const { return linear(x, w, b); }
};

struct LayerNorm {
  Tensor g, b;
  LayerNorm() = default;
  LayerNorm(ParamMap& params, const std::string& name, int64_t dim);
  Tensor forward(const Tensor& x) const { return layer_norm(x, g, b); }
};

struct Embedding {
  Tensor w;  // (vocab, dim)
  Embedding() = default;
  Embedding(ParamMap& params, const std::string& name, int64_t vocab, int64_t dim, Rng& rng);
  Tensor forward(const std::vector<int64_t>& indices) const { return embedding(w, indices); }
};

struct Conv2d {
  Tensor w, b;
  int64_t stride = 1, padding = 0;
  Conv2d() = default;
  Conv2d(ParamMap& params, const std::string& name, int64_t in_ch, int64_t out_ch,
         int64_t kernel, int64_t stride, int64_t padding, Rng& rng);
  Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, padding); }
};

struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  int64_t heads = 1, dim = 0;
  MultiheadAttention() = default;
  MultiheadAttention(ParamMap& params, const std::string& name, int64_t dim, int64_t heads,
                     Rng& rng);
  // q_in (Tq, d), kv_in (Tk, d); mask 0/1 broadcastable to (Tq, Tk).
  Tensor forward(const Tensor& q_in, const Tensor& kv_in, const Tensor& mask = Tensor()) const;
};

struct FeedForward {
  Linear fc1, fc2;
  FeedForward() = default;
  FeedForward(ParamMap& params, const std::string& name, int64_t dim, int64_t hidden, Rng& rng);
  Tensor forward(const Tensor& x) const { return fc2.forward(relu(fc1.forward(x))); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed parameter list; first/second moments are kept per element.
class Adam {
 public:
  Adam(ParamMap params, AdamConfig cfg = {});

  void zero_grad();
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t steps_taken() const { return t_; }

  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace parknet
