#include "parknet/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "parknet/ops.hpp"

namespace parknet {

Tensor causal_mask(int64_t t) {
  Tensor m = Tensor::zeros({t, t});
  for (int64_t i = 0; i < t; ++i) {
    for (int64_t j = 0; j <= i; ++j) m.data()[static_cast<size_t>(i * t + j)] = 1.0;
  }
  return m;
}

Tensor pair_causal_mask(int64_t t) {
  const int64_t n = 2 * t;
  Tensor m = Tensor::zeros({n, n});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      if (j / 2 <= i / 2) m.data()[static_cast<size_t>(i * n + j)] = 1.0;
    }
  }
  return m;
}

Tensor interleave_rows(const Tensor& a, const Tensor& b) {
  const int64_t t = a.size(0);
  const int64_t d = a.size(1);
  Tensor az = reshape(a, {t, 1, d});
  Tensor bz = reshape(b, {t, 1, d});
  return reshape(concat({az, bz}, 1), {2 * t, d});
}

std::pair<Tensor, Tensor> deinterleave_rows(const Tensor& z) {
  const int64_t t = z.size(0) / 2;
  const int64_t d = z.size(1);
  Tensor pairs = reshape(z, {t, 2, d});
  Tensor a = reshape(slice(pairs, 1, 0, 1), {t, d});
  Tensor b = reshape(slice(pairs, 1, 1, 1), {t, d});
  return {a, b};
}

TrajectoryDecoder::TrajectoryDecoder(ParamMap& params, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  const int64_t d = cfg.d_model;
  const int64_t vocab = cfg.tokenizer.vocab_size();
  const int64_t q = cfg.tokenizer.horizon;

  auto make_stack = [&](const std::string& name, int64_t max_len) {
    AxisStack s;
    s.tok_emb = Embedding(params, name + ".tok", vocab, d, rng);
    s.pos_emb = make_param(params, name + ".pos", {max_len, d}, d, rng);
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
      const std::string ln = name + ".l" + std::to_string(l);
      s.self_attn.emplace_back(params, ln + ".self", d, cfg.n_heads, rng);
      s.cross_attn.emplace_back(params, ln + ".cross", d, cfg.n_heads, rng);
      s.ffn.emplace_back(params, ln + ".ffn", d, 4 * d, rng);
      s.ln1.emplace_back(params, ln + ".ln1", d);
      s.ln2.emplace_back(params, ln + ".ln2", d);
      s.ln3.emplace_back(params, ln + ".ln3", d);
    }
    return s;
  };

  if (cfg.dual_decoder) {
    x_stack_ = make_stack("decoder.x", q + 1);
    y_stack_ = make_stack("decoder.y", q + 1);
    if (cfg.dual_stream) {
      ds_attn_ = MultiheadAttention(params, "decoder.dual_stream", d, cfg.n_heads, rng);
      ds_ln_ = LayerNorm(params, "decoder.dual_stream.ln", d);
    }
    head_x_ = Linear(params, "decoder.head_x", d, vocab, rng);
    head_y_ = Linear(params, "decoder.head_y", d, vocab, rng);
    if (cfg.refinement) {
      const int64_t cb = cfg.bev_channels;
      center_fc1_ = Linear(params, "refine.center_fc1", 2 * d, d, rng);
      center_fc2_ = Linear(params, "refine.center_fc2", d, 2, rng);
      refine_q_ = Linear(params, "refine.q", d, d, rng);
      refine_k_ = Linear(params, "refine.k", cb, d, rng);
      refine_v_ = Linear(params, "refine.v", cb, d, rng);
      refine_o_ = Linear(params, "refine.o", d, d, rng);
      refine_ln1_x_ = LayerNorm(params, "refine.ln1_x", d);
      refine_ln2_x_ = LayerNorm(params, "refine.ln2_x", d);
      refine_ln1_y_ = LayerNorm(params, "refine.ln1_y", d);
      refine_ln2_y_ = LayerNorm(params, "refine.ln2_y", d);
      refine_ffn_x_ = FeedForward(params, "refine.ffn_x", d, 4 * d, rng);
      refine_ffn_y_ = FeedForward(params, "refine.ffn_y", d, 4 * d, rng);
    }
  } else {
    flat_stack_ = make_stack("decoder.flat", 2 * q + 1);
    flat_head_ = Linear(params, "decoder.flat_head", d, vocab, rng);
  }
}

Tensor TrajectoryDecoder::embed_axis(const AxisStack& axis,
                                     const std::vector<int64_t>& tokens) const {
  const int64_t t = static_cast<int64_t>(tokens.size());
  const int64_t max_len = axis.pos_emb.size(0);
  if (t < 1) throw std::invalid_argument("decoder: empty token sequence");
  if (t > max_len) {
    throw std::invalid_argument("decoder: sequence length " + std::to_string(t) +
                                " exceeds the configured maximum " + std::to_string(max_len));
  }
  return add(axis.tok_emb.forward(tokens), slice(axis.pos_emb, 0, 0, t));
}

Tensor TrajectoryDecoder::run_stack(const AxisStack& axis, Tensor h, const Tensor& causal,
                                    const EncoderContext& enc) const {
  for (size_t l = 0; l < axis.self_attn.size(); ++l) {
    h = axis.ln1[l].forward(add(h, axis.self_attn[l].forward(h, h, causal)));
    h = axis.ln2[l].forward(add(h, axis.cross_attn[l].forward(h, enc.kv)));
    h = axis.ln3[l].forward(add(h, axis.ffn[l].forward(h)));
  }
  return h;
}

DecoderOutput TrajectoryDecoder::forward(const std::vector<int64_t>& x_tokens,
                                         const std::vector<int64_t>& y_tokens,
                                         const EncoderContext& enc) const {
  if (!cfg_.dual_decoder) {
    throw std::logic_error("decoder: dual forward called on an interleaved-baseline model");
  }
  if (x_tokens.size() != y_tokens.size()) {
    throw std::invalid_argument("decoder: x/y token histories must have equal length");
  }
  Tensor hx = embed_axis(x_stack_, x_tokens);
  Tensor hy = embed_axis(y_stack_, y_tokens);
  const int64_t t = hx.size(0);

  if (cfg_.dual_stream) {
    Tensor z = interleave_rows(hx, hy);
    z = ds_ln_.forward(add(z, ds_attn_.forward(z, z, pair_causal_mask(t))));
    auto [nx, ny] = deinterleave_rows(z);
    hx = nx;
    hy = ny;
  }

  const Tensor causal = causal_mask(t);
  hx = run_stack(x_stack_, hx, causal, enc);
  hy = run_stack(y_stack_, hy, causal, enc);

  if (cfg_.refinement) return refine_batched(hx, hy, enc);

  DecoderOutput out;
  out.x_logits = head_x_.forward(hx);
  out.y_logits = head_y_.forward(hy);
  return out;
}

DecoderOutput TrajectoryDecoder::refine_batched(const Tensor& hx, const Tensor& hy,
                                                const EncoderContext& enc) const {
  if (!enc.refine_tokens.defined()) {
    throw std::logic_error("decoder: refinement enabled but no substrate provided");
  }
  const int64_t t = hx.size(0);
  const int64_t hr = enc.refine_grid.height;
  const int64_t wr = enc.refine_grid.width;

  // predicted map center, sigmoid-scaled into the grid
  Tensor hcat = concat({hx, hy}, 1);  // (T, 2d)
  Tensor s = sigmoid(center_fc2_.forward(relu(center_fc1_.forward(hcat))));
  Tensor scale = Tensor::from_data(
      {2}, {static_cast<double>(hr - 1), static_cast<double>(wr - 1)});
  Tensor centers = mul(s, scale);                              // (T, 2)
  Tensor maps = gaussian_maps(centers, cfg_.refine_sigma, hr, wr);  // (T, HWr)

  // weighted BEV as key/value. The map weighting commutes with the per-cell
  // channel projection, so the projections are hoisted out of the per-step
  // loop and the map scales scores and attention weights instead.
  Tensor k_base = refine_k_.forward(enc.refine_tokens);  // (HWr, d)
  Tensor v_base = refine_v_.forward(enc.refine_tokens);
  Tensor q2 = interleave_rows(refine_q_.forward(hx), refine_q_.forward(hy));  // (2T, d)
  Tensor maps2 = interleave_rows(maps, maps);                                 // (2T, HWr)
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
  Tensor scores = mul(mul_scalar(matmul_nt(q2, k_base), inv_sqrt_d), maps2);
  Tensor probs = softmax(scores, -1);
  Tensor attn = refine_o_.forward(matmul(mul(probs, maps2), v_base));  // (2T, d)
  auto [ax, ay] = deinterleave_rows(attn);

  Tensor rx = refine_ln1_x_.forward(add(hx, ax));
  rx = refine_ln2_x_.forward(add(rx, refine_ffn_x_.forward(rx)));
  Tensor ry = refine_ln1_y_.forward(add(hy, ay));
  ry = refine_ln2_y_.forward(add(ry, refine_ffn_y_.forward(ry)));

  DecoderOutput out;
  out.x_logits = head_x_.forward(rx);
  out.y_logits = head_y_.forward(ry);
  out.maps = maps;
  out.centers = centers;
  return out;
}

DecoderOutput TrajectoryDecoder::forward_interleaved(const std::vector<int64_t>& tokens,
                                                     const EncoderContext& enc) const {
  if (cfg_.dual_decoder) {
    throw std::logic_error("decoder: interleaved forward called on a dual-decoder model");
  }
  Tensor h = embed_axis(flat_stack_, tokens);
  const Tensor causal = causal_mask(h.size(0));
  h = run_stack(flat_stack_, h, causal, enc);
  DecoderOutput out;
  out.interleaved_logits = flat_head_.forward(h);
  return out;
}

namespace {

int64_t argmax_row(const Tensor& logits, int64_t row) {
  const int64_t v = logits.size(1);
  const double* d = logits.data().data() + row * v;
  int64_t best = 0;
  for (int64_t j = 1; j < v; ++j) {
    if (d[j] > d[best]) best = j;
  }
  return best;
}

}  // namespace

std::pair<std::vector<int64_t>, std::vector<int64_t>> TrajectoryDecoder::generate_tokens(
    const EncoderContext& enc, std::vector<GenerationStep>* trace) const {
  const int64_t bos = cfg_.tokenizer.bos();
  const int64_t n_coord = cfg_.tokenizer.n_tokens;
  const int64_t q = cfg_.tokenizer.horizon;

  std::vector<int64_t> xs, ys;
  if (cfg_.dual_decoder) {
    std::vector<int64_t> xin = {bos}, yin = {bos};
    for (int64_t step = 0; step < q; ++step) {
      const DecoderOutput out = forward(xin, yin, enc);
      const int64_t last = out.x_logits.size(0) - 1;
      const int64_t tx = argmax_row(out.x_logits, last);
      const int64_t ty = argmax_row(out.y_logits, last);
      if (trace) {
        GenerationStep gs;
        gs.x_token = tx;
        gs.y_token = ty;
        if (out.centers.defined()) {
          gs.center_row = out.centers.at({last, 0});
          gs.center_col = out.centers.at({last, 1});
          const int64_t cells = out.maps.size(1);
          const double* m = out.maps.data().data() + last * cells;
          int64_t arg = 0;
          for (int64_t c = 1; c < cells; ++c) {
            if (m[c] > m[arg]) arg = c;
          }
          gs.map_argmax = arg;
        }
        trace->push_back(gs);
      }
      // EOS (or any control token) on either stream stops both
      if (tx >= n_coord || ty >= n_coord) break;
      xs.push_back(tx);
      ys.push_back(ty);
      xin.push_back(tx);
      yin.push_back(ty);
    }
  } else {
    std::vector<int64_t> seq = {bos};
    for (int64_t i = 0; i < 2 * q; ++i) {
      const DecoderOutput out = forward_interleaved(seq, enc);
      const int64_t tok = argmax_row(out.interleaved_logits, out.interleaved_logits.size(0) - 1);
      if (trace && i % 2 == 0) {
        GenerationStep gs;
        gs.x_token = tok;
        trace->push_back(gs);
      } else if (trace && !trace->empty() && i % 2 == 1) {
        trace->back().y_token = tok;
      }
      if (tok >= n_coord) break;
      if (i % 2 == 0) {
        xs.push_back(tok);
      } else {
        ys.push_back(tok);
      }
      seq.push_back(tok);
    }
    if (xs.size() > ys.size()) xs.pop_back();  // drop a dangling half-pair
  }
  return {std::move(xs), std::move(ys)};
}

}  // namespace parknet
