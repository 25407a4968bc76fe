#include "parknet/bev.hpp"

#include <cmath>
#include <stdexcept>

#include "parknet/ops.hpp"

namespace parknet {

ImageBackbone::ImageBackbone(ParamMap& params, const ModelConfig& cfg, Rng& rng) {
  c1_ = Conv2d(params, "backbone.c1", 3, 16, 3, 2, 1, rng);
  c2_ = Conv2d(params, "backbone.c2", 16, 32, 3, 2, 1, rng);
  c3_ = Conv2d(params, "backbone.c3", 32, 64, 3, 2, 1, rng);
  feat_head_ = Conv2d(params, "backbone.feat", 64, cfg.bev_channels, 1, 1, 0, rng);
  depth_head_ = Conv2d(params, "backbone.depth", 64, cfg.depth_bins, 1, 1, 0, rng);
}

std::pair<Tensor, Tensor> ImageBackbone::forward(const Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw std::invalid_argument("image_backbone: expected (cams, 3, H, W), got " +
                                shape_to_string(images.shape()));
  }
  Tensor h = relu(c1_.forward(images));
  h = relu(c2_.forward(h));
  h = relu(c3_.forward(h));
  return {feat_head_.forward(h), depth_head_.forward(h)};
}

double depth_bin_center(const ModelConfig& cfg, int64_t bin) {
  const double span = cfg.depth_max - cfg.depth_min;
  return cfg.depth_min +
         (static_cast<double>(bin) + 0.5) * span / static_cast<double>(cfg.depth_bins);
}

BevGrid lift_splat(const Tensor& features, const Tensor& depth_logits, const CameraRig& rig,
                   const GridSpec& grid, const ModelConfig& cfg) {
  rig.validate();
  grid.validate();
  if (features.dim() != 4 || depth_logits.dim() != 4) {
    throw std::invalid_argument("lift_splat: features and depth logits must be 4-D");
  }
  const int64_t cams = features.size(0);
  const int64_t ch = features.size(1);
  const int64_t fh = features.size(2);
  const int64_t fw = features.size(3);
  if (static_cast<int64_t>(rig.cameras.size()) != cams || depth_logits.size(0) != cams ||
      depth_logits.size(2) != fh || depth_logits.size(3) != fw) {
    throw std::invalid_argument("lift_splat: camera/shape mismatch: features " +
                                shape_to_string(features.shape()) + ", depth " +
                                shape_to_string(depth_logits.shape()));
  }
  const int64_t bins = depth_logits.size(1);

  Tensor depth_probs = softmax(depth_logits, 1);

  // fixed geometry: landing cell per (camera, bin, pixel), -1 when off-grid
  const int64_t px = fh * fw;
  std::vector<int32_t> cell(static_cast<size_t>(cams * bins * px), -1);
  for (int64_t c = 0; c < cams; ++c) {
    const Camera& cam = rig.cameras[static_cast<size_t>(c)];
    const double ds = static_cast<double>(cam.image_width) / static_cast<double>(fw);
    for (int64_t d = 0; d < bins; ++d) {
      const double z = depth_bin_center(cfg, d);
      for (int64_t pi = 0; pi < fh; ++pi) {
        const double v = (static_cast<double>(pi) + 0.5) * ds - 0.5;
        for (int64_t pj = 0; pj < fw; ++pj) {
          const double u = (static_cast<double>(pj) + 0.5) * ds - 0.5;
          const auto p_ego = cam.unproject(u, v, z);
          const auto [row_f, col_f] = grid.metric_to_pixel(p_ego[0], p_ego[1]);
          const int64_t row = std::llround(row_f);
          const int64_t col = std::llround(col_f);
          if (row < 0 || row >= grid.height || col < 0 || col >= grid.width) continue;
          cell[static_cast<size_t>((c * bins + d) * px + pi * fw + pj)] =
              static_cast<int32_t>(row * grid.width + col);
        }
      }
    }
  }

  const int64_t cells = grid.cells();
  std::vector<double> out(static_cast<size_t>(ch * cells), 0.0);
  {
    const double* fd = features.data().data();
    const double* pd = depth_probs.data().data();
    for (int64_t c = 0; c < cams; ++c) {
      for (int64_t d = 0; d < bins; ++d) {
        const int32_t* ctab = cell.data() + (c * bins + d) * px;
        const double* prow = pd + (c * bins + d) * px;
        for (int64_t p = 0; p < px; ++p) {
          const int32_t landing = ctab[p];
          if (landing < 0) continue;
          const double w = prow[p];
          const double* feat = fd + c * ch * px + p;
          for (int64_t k = 0; k < ch; ++k) {
            out[static_cast<size_t>(k * cells + landing)] += feat[k * px] * w;
          }
        }
      }
    }
  }

  Tensor tf = features, tp = depth_probs;
  Tensor splat = make_op_node(
      {ch, grid.height, grid.width}, std::move(out), {features, depth_probs},
      [tf, tp, cell = std::move(cell), cams, bins, px, ch, cells](
          const std::vector<double>& go, const std::vector<std::vector<double>*>& pg) {
        const double* fd = tf.data().data();
        const double* pd = tp.data().data();
        for (int64_t c = 0; c < cams; ++c) {
          for (int64_t d = 0; d < bins; ++d) {
            const int32_t* ctab = cell.data() + (c * bins + d) * px;
            const double* prow = pd + (c * bins + d) * px;
            for (int64_t p = 0; p < px; ++p) {
              const int32_t landing = ctab[p];
              if (landing < 0) continue;
              const double* feat = fd + c * ch * px + p;
              if (pg[0]) {
                double* gf = pg[0]->data() + c * ch * px + p;
                const double w = prow[p];
                for (int64_t k = 0; k < ch; ++k) {
                  gf[k * px] += w * go[static_cast<size_t>(k * cells + landing)];
                }
              }
              if (pg[1]) {
                double acc = 0.0;
                for (int64_t k = 0; k < ch; ++k) {
                  acc += feat[k * px] * go[static_cast<size_t>(k * cells + landing)];
                }
                (*pg[1])[static_cast<size_t>((c * bins + d) * px + p)] += acc;
              }
            }
          }
        }
      });
  return BevGrid{grid, splat};
}

namespace {

int64_t conv_out(int64_t in, int64_t kernel, int64_t stride, int64_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

BevEncoder::BevEncoder(ParamMap& params, const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  const int64_t d = cfg.d_model;
  q1_ = Conv2d(params, "encoder.q1", 1, d / 4, 5, 4, 2, rng);
  q2_ = Conv2d(params, "encoder.q2", d / 4, d, 5, 4, 2, rng);
  const int64_t qh = conv_out(conv_out(cfg.grid.height, 5, 4, 2), 5, 4, 2);
  const int64_t qw = conv_out(conv_out(cfg.grid.width, 5, 4, 2), 5, 4, 2);
  q_tokens_ = qh * qw;

  const int64_t in_ch = cfg.input_mode == InputMode::Cameras ? cfg.bev_channels : 2;
  b1_ = Conv2d(params, "encoder.b1", in_ch, d / 2, 3, 2, 1, rng);
  b2_ = Conv2d(params, "encoder.b2", d / 2, d, 3, 2, 1, rng);
  b3_ = Conv2d(params, "encoder.b3", d, d, 3, 2, 1, rng);
  int64_t bh = cfg.grid.height, bw = cfg.grid.width;
  for (int i = 0; i < 3; ++i) {
    bh = conv_out(bh, 3, 2, 1);
    bw = conv_out(bw, 3, 2, 1);
  }
  b_tokens_ = bh * bw;

  q_pos_ = make_param(params, "encoder.q_pos", {q_tokens_, d}, d, rng);
  b_pos_ = make_param(params, "encoder.b_pos", {b_tokens_, d}, d, rng);
  self_attn_ = MultiheadAttention(params, "encoder.self", d, cfg.n_heads, rng);
  cross_attn_ = MultiheadAttention(params, "encoder.cross", d, cfg.n_heads, rng);
  ln_self_ = LayerNorm(params, "encoder.ln_self", d);
  ln_cross_ = LayerNorm(params, "encoder.ln_cross", d);
  ln_ffn_ = LayerNorm(params, "encoder.ln_ffn", d);
  ffn_ = FeedForward(params, "encoder.ffn", d, 4 * d, rng);
}

Tensor BevEncoder::query_tokens(const WeightMap& query_map) const {
  Tensor q = Tensor::from_data({1, 1, query_map.grid.height, query_map.grid.width},
                               query_map.values);
  Tensor h = relu(q1_.forward(q));
  h = relu(q2_.forward(h));  // (1, d, qh, qw)
  h = permute(reshape(h, {cfg_.d_model, q_tokens_}), {1, 0});
  return add(h, q_pos_);
}

Tensor BevEncoder::bev_tokens(const Tensor& bev_chw) const {
  Tensor x = reshape(bev_chw, {1, bev_chw.size(0), bev_chw.size(1), bev_chw.size(2)});
  Tensor h = relu(b1_.forward(x));
  h = relu(b2_.forward(h));
  h = relu(b3_.forward(h));  // (1, d, bh, bw)
  h = permute(reshape(h, {cfg_.d_model, b_tokens_}), {1, 0});
  return add(h, b_pos_);
}

EncoderOutput BevEncoder::fuse(const WeightMap& query_map, const BevGrid& bev) const {
  if (!(query_map.grid == bev.grid)) {
    throw std::logic_error("fuse: query map grid does not match the BEV grid");
  }
  Tensor x = query_tokens(query_map);
  x = ln_self_.forward(add(x, self_attn_.forward(x, x)));
  Tensor bt = bev_tokens(bev.features);
  x = ln_cross_.forward(add(x, cross_attn_.forward(x, bt)));
  x = ln_ffn_.forward(add(x, ffn_.forward(x)));
  return EncoderOutput{x, bev, bt};
}

}  // namespace parknet
