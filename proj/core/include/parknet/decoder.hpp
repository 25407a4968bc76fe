#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "parknet/bev.hpp"
#include "parknet/config.hpp"
#include "parknet/nn.hpp"
#include "parknet/tensor.hpp"

namespace parknet {

// What the decoder needs from the encoder, per sample.
struct EncoderContext {
  Tensor kv;             // (Nk, d) cross-attention key/value tokens
  Tensor refine_tokens;  // (HW_r, C_bev) refinement substrate cells, row-major
  GridSpec refine_grid;
};

struct DecoderOutput {
  // Dual-decoder mode: one row per teacher-forced step, both axes emitted by
  // the same call.
  Tensor x_logits;  // (T, V)
  Tensor y_logits;  // (T, V)
  // Refinement head extras (undefined when the head is disabled).
  Tensor maps;     // (T, HW_r), every row sums to 1
  Tensor centers;  // (T, 2) fractional (row, col) on the refinement grid
  // Interleaved single-decoder baseline instead fills only this.
  Tensor interleaved_logits;  // (L, V)
};

struct GenerationStep {
  int64_t x_token = -1, y_token = -1;
  double center_row = -1.0, center_col = -1.0;
  int64_t map_argmax = -1;
};

// Two coordinate decoders emitting (x_t, y_t) simultaneously, coupled by
// interleaved dual-stream self-attention and refined by a soft-localization
// head over the BEV substrate.
class TrajectoryDecoder {
 public:
  TrajectoryDecoder() = default;
  TrajectoryDecoder(ParamMap& params, const ModelConfig& cfg, Rng& rng);

  // Teacher-forced parallel forward over input token sequences (BOS first,
  // equal lengths, coordinate tokens after it).
  DecoderOutput forward(const std::vector<int64_t>& x_tokens,
                        const std::vector<int64_t>& y_tokens,
                        const EncoderContext& enc) const;

  // Single-decoder ablation baseline over the interleaved
  // [BOS, x1, y1, x2, y2, ...] stream.
  DecoderOutput forward_interleaved(const std::vector<int64_t>& tokens,
                                    const EncoderContext& enc) const;

  // Greedy decoding from (BOS, BOS). Returns per-axis coordinate tokens;
  // stops at the first non-coordinate emission on either stream or after
  // horizon steps. Dispatches on dual_decoder.
  std::pair<std::vector<int64_t>, std::vector<int64_t>> generate_tokens(
      const EncoderContext& enc, std::vector<GenerationStep>* trace = nullptr) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct AxisStack {
    Embedding tok_emb;
    Tensor pos_emb;
    std::vector<MultiheadAttention> self_attn;
    std::vector<MultiheadAttention> cross_attn;
    std::vector<FeedForward> ffn;
    std::vector<LayerNorm> ln1, ln2, ln3;
  };

  Tensor embed_axis(const AxisStack& axis, const std::vector<int64_t>& tokens) const;
  Tensor run_stack(const AxisStack& axis, Tensor h, const Tensor& causal,
                   const EncoderContext& enc) const;
  DecoderOutput refine_batched(const Tensor& hx, const Tensor& hy,
                               const EncoderContext& enc) const;

  ModelConfig cfg_;
  // dual mode
  AxisStack x_stack_, y_stack_;
  MultiheadAttention ds_attn_;
  LayerNorm ds_ln_;
  Linear head_x_, head_y_;
  // refinement head
  Linear center_fc1_, center_fc2_;
  Linear refine_q_, refine_k_, refine_v_, refine_o_;
  LayerNorm refine_ln1_x_, refine_ln2_x_, refine_ln1_y_, refine_ln2_y_;
  FeedForward refine_ffn_x_, refine_ffn_y_;
  // interleaved baseline
  AxisStack flat_stack_;
  Linear flat_head_;
};

// 0/1 causal mask (T, T): position i may attend to j <= i.
Tensor causal_mask(int64_t t);
// 0/1 block-causal mask (2T, 2T) over interleaved pairs: position i may
// attend to j when pair(j) <= pair(i); same-pair attention is allowed.
Tensor pair_causal_mask(int64_t t);

// Interleave rows of two (T, d) tensors into (2T, d) and back.
Tensor interleave_rows(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> deinterleave_rows(const Tensor& z);

}  // namespace parknet
