#pragma once

#include <cstdint>
#include <utility>

#include "parknet/camera.hpp"
#include "parknet/config.hpp"
#include "parknet/grid.hpp"
#include "parknet/nn.hpp"
#include "parknet/tensor.hpp"

namespace parknet {

// Feature volume over a metric ground-plane grid; features is (C, H, W).
struct BevGrid {
  GridSpec grid;
  Tensor features;
};

struct EncoderOutput {
  Tensor fused;  // (Nq, d) query tokens after cross-attention with the BEV
  BevGrid bev;   // raw pre-fusion BEV, the refinement head substrate
  Tensor bev_tokens;  // (Nt, d) BEV token grid (optional decoder key/value)
};

// Convolutional image feature extractor plus per-pixel feature/depth heads.
// Three stride-2 blocks give a fixed /8 downsample.
class ImageBackbone {
 public:
  ImageBackbone() = default;
  ImageBackbone(ParamMap& params, const ModelConfig& cfg, Rng& rng);

  // images (cams, 3, H, W) -> {features (cams, C_bev, H/8, W/8),
  //                            depth_logits (cams, D, H/8, W/8)}
  std::pair<Tensor, Tensor> forward(const Tensor& images) const;
  static int64_t downsample() { return 8; }

 private:
  Conv2d c1_, c2_, c3_;
  Conv2d feat_head_, depth_head_;
};

// Depth-bin center in meters: depth_min + (bin + 0.5) * (depth_max - depth_min) / D.
double depth_bin_center(const ModelConfig& cfg, int64_t bin);

// Differentiable splat of per-camera features into the BEV grid: every
// (pixel, depth-bin) contributes feature * softmax(depth) at its unprojected
// ego-frame ground cell (nearest-cell assignment); off-grid contributions are
// dropped, per-cell contributions sum. Gradients flow to both features and
// depth logits.
BevGrid lift_splat(const Tensor& features, const Tensor& depth_logits,
                   const CameraRig& rig, const GridSpec& grid, const ModelConfig& cfg);

// Slot-query encoder + BEV tokenizer + attention fusion (the encoder's
// query/key/value stage).
class BevEncoder {
 public:
  BevEncoder() = default;
  BevEncoder(ParamMap& params, const ModelConfig& cfg, Rng& rng);

  // Query map -> conv features -> tokens -> self-attention, then
  // cross-attention against the flattened BEV tokens. The raw BEV rides
  // through untouched for the refinement head.
  EncoderOutput fuse(const WeightMap& query_map, const BevGrid& bev) const;

  int64_t query_token_count() const { return q_tokens_; }
  int64_t bev_token_count() const { return b_tokens_; }

 private:
  Tensor query_tokens(const WeightMap& query_map) const;
  Tensor bev_tokens(const Tensor& bev_chw) const;

  ModelConfig cfg_;
  Conv2d q1_, q2_;
  Conv2d b1_, b2_, b3_;
  Tensor q_pos_, b_pos_;
  MultiheadAttention self_attn_, cross_attn_;
  LayerNorm ln_self_, ln_cross_, ln_ffn_;
  FeedForward ffn_;
  int64_t q_tokens_ = 0, b_tokens_ = 0;
};

}  // namespace parknet
