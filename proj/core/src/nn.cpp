#include "parknet/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "parknet/checkpoint.hpp"

namespace parknet {

Tensor make_param(ParamMap& params, const std::string& name, std::vector<int64_t> shape,
                  int64_t fan_in, Rng& rng) {
  if (fan_in < 1) throw std::invalid_argument("make_param: fan_in must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  params.emplace_back(name, t);
  return t;
}

Tensor make_const_param(ParamMap& params, const std::string& name,
                        std::vector<int64_t> shape, double value) {
  Tensor t = Tensor::full(std::move(shape), value, /*requires_grad=*/true);
  params.emplace_back(name, t);
  return t;
}

const Tensor* find_param(const ParamMap& params, const std::string& name) {
  for (const auto& [n, t] : params) {
    if (n == name) return &t;
  }
  return nullptr;
}

Linear::Linear(ParamMap& params, const std::string& name, int64_t in, int64_t out, Rng& rng,
               bool bias) {
  w = make_param(params, name + ".w", {out, in}, in, rng);
  if (bias) b = make_param(params, name + ".b", {out}, in, rng);
}

LayerNorm::LayerNorm(ParamMap& params, const std::string& name, int64_t dim) {
  g = make_const_param(params, name + ".g", {dim}, 1.0);
  b = make_const_param(params, name + ".b", {dim}, 0.0);
}

Embedding::Embedding(ParamMap& params, const std::string& name, int64_t vocab, int64_t dim,
                     Rng& rng) {
  w = make_param(params, name + ".w", {vocab, dim}, dim, rng);
}

Conv2d::Conv2d(ParamMap& params, const std::string& name, int64_t in_ch, int64_t out_ch,
               int64_t kernel, int64_t stride_, int64_t padding_, Rng& rng)
    : stride(stride_), padding(padding_) {
  const int64_t fan_in = in_ch * kernel * kernel;
  w = make_param(params, name + ".w", {out_ch, in_ch, kernel, kernel}, fan_in, rng);
  b = make_param(params, name + ".b", {out_ch}, fan_in, rng);
}

MultiheadAttention::MultiheadAttention(ParamMap& params, const std::string& name, int64_t dim_,
                                       int64_t heads_, Rng& rng)
    : heads(heads_), dim(dim_) {
  if (dim % heads != 0) {
    throw std::invalid_argument("attention width " + std::to_string(dim) +
                                " not divisible by head count " + std::to_string(heads));
  }
  wq = Linear(params, name + ".wq", dim, dim, rng);
  wk = Linear(params, name + ".wk", dim, dim, rng);
  wv = Linear(params, name + ".wv", dim, dim, rng);
  wo = Linear(params, name + ".wo", dim, dim, rng);
}

Tensor MultiheadAttention::forward(const Tensor& q_in, const Tensor& kv_in,
                                   const Tensor& mask) const {
  const int64_t tq = q_in.size(0);
  const int64_t tk = kv_in.size(0);
  const int64_t hd = dim / heads;
  Tensor q = permute(reshape(wq.forward(q_in), {tq, heads, hd}), {1, 0, 2});
  Tensor k = permute(reshape(wk.forward(kv_in), {tk, heads, hd}), {1, 0, 2});
  Tensor v = permute(reshape(wv.forward(kv_in), {tk, heads, hd}), {1, 0, 2});
  Tensor out = attention(q, k, v, mask);  // (heads, tq, hd)
  out = reshape(permute(out, {1, 0, 2}), {tq, dim});
  return wo.forward(out);
}

FeedForward::FeedForward(ParamMap& params, const std::string& name, int64_t dim,
                         int64_t hidden, Rng& rng) {
  fc1 = Linear(params, name + ".fc1", dim, hidden, rng);
  fc2 = Linear(params, name + ".fc2", hidden, dim, rng);
}

Adam::Adam(ParamMap params, AdamConfig cfg) : cfg_(cfg) {
  slots_.reserve(params.size());
  for (auto& [name, p] : params) {
    Slot s;
    s.name = name;
    s.param = p;
    s.m.assign(p.data().size(), 0.0);
    s.v.assign(p.data().size(), 0.0);
    slots_.push_back(std::move(s));
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& s : slots_) {
    auto& data = s.param.data();
    const auto& grad = s.param.grad();
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::save_state(const std::string& path) const {
  std::vector<NamedArray> arrays;
  arrays.push_back({"adam.t", {1}, {static_cast<double>(t_)}});
  for (const auto& s : slots_) {
    arrays.push_back({"adam.m." + s.name, s.param.shape(), s.m});
    arrays.push_back({"adam.v." + s.name, s.param.shape(), s.v});
  }
  save_arrays(path, arrays);
}

void Adam::load_state(const std::string& path) {
  const auto arrays = load_arrays(path);
  auto find = [&](const std::string& name) -> const NamedArray* {
    for (const auto& a : arrays) {
      if (a.name == name) return &a;
    }
    return nullptr;
  };
  const NamedArray* t = find("adam.t");
  if (!t) throw std::runtime_error("optimizer state missing step counter: " + path);
  t_ = static_cast<int64_t>(t->data[0]);
  for (auto& s : slots_) {
    const NamedArray* m = find("adam.m." + s.name);
    const NamedArray* v = find("adam.v." + s.name);
    if (!m || !v) {
      throw std::runtime_error("optimizer state missing moments for parameter " + s.name);
    }
    if (m->data.size() != s.m.size() || v->data.size() != s.v.size()) {
      throw std::runtime_error("optimizer state size mismatch for parameter " + s.name);
    }
    s.m = m->data;
    s.v = v->data;
  }
}

}  // namespace parknet
