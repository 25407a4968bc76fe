#include "parknet/model.hpp"

#include <stdexcept>

#include "parknet/checkpoint.hpp"
#include "parknet/ops.hpp"
#include "parknet/tokenizer.hpp"

namespace parknet {

ParkingModel::ParkingModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  if (cfg_.input_mode == InputMode::Cameras) {
    backbone_ = ImageBackbone(params_, cfg_, rng);
    rig_ = make_default_rig(cfg_.image_size);
  }
  encoder_ = BevEncoder(params_, cfg_, rng);
  decoder_ = TrajectoryDecoder(params_, cfg_, rng);
  if (cfg_.refinement && cfg_.input_mode == InputMode::DirectBev) {
    refine_embed_ = Conv2d(params_, "refine.embed", 2, cfg_.bev_channels, 1, 1, 0, rng);
  }
}

WeightMap ParkingModel::make_query(double slot_x, double slot_y) const {
  const auto [row, col] = cfg_.grid.metric_to_pixel(slot_x, slot_y);
  if (cfg_.query_type == QueryType::Gaussian) {
    return gaussian_query(row, col, cfg_.query_sigma, cfg_.grid);
  }
  return binary_query(row, col, cfg_.binary_half_extent, cfg_.grid);
}

BevGrid ParkingModel::build_bev(const SampleInput& in) const {
  if (cfg_.input_mode == InputMode::DirectBev) {
    if (!in.bev.defined()) {
      throw std::invalid_argument("model: direct-bev mode requires an occupancy grid input");
    }
    if (in.bev.dim() != 3 || in.bev.size(0) != 2 || in.bev.size(1) != cfg_.grid.height ||
        in.bev.size(2) != cfg_.grid.width) {
      throw std::invalid_argument("model: occupancy grid shape " +
                                  shape_to_string(in.bev.shape()) +
                                  " does not match the configured grid");
    }
    return BevGrid{cfg_.grid, in.bev};
  }
  if (!in.images.defined()) {
    throw std::invalid_argument("model: camera mode requires per-camera images");
  }
  auto [feats, depth_logits] = backbone_.forward(in.images);
  return lift_splat(feats, depth_logits, rig_, cfg_.grid, cfg_);
}

EncoderOutput ParkingModel::encode(const SampleInput& in) const {
  const WeightMap query = make_query(in.slot_x, in.slot_y);
  return encoder_.fuse(query, build_bev(in));
}

EncoderContext ParkingModel::make_context(const EncoderOutput& enc) const {
  EncoderContext ctx;
  ctx.kv = cfg_.kv_source == KvSource::Fused ? enc.fused : enc.bev_tokens;
  ctx.refine_grid = cfg_.refine_grid();
  if (cfg_.refinement) {
    Tensor sub = avg_pool2d(enc.bev.features, cfg_.refine_pool);  // (C, hr, wr)
    if (cfg_.input_mode == InputMode::DirectBev) {
      sub = refine_embed_.forward(
          reshape(sub, {1, sub.size(0), sub.size(1), sub.size(2)}));
      sub = reshape(sub, {sub.size(1), sub.size(2), sub.size(3)});
    }
    const int64_t c = sub.size(0);
    const int64_t cells = sub.size(1) * sub.size(2);
    ctx.refine_tokens = permute(reshape(sub, {c, cells}), {1, 0});  // (HWr, C)
  }
  return ctx;
}

EncoderContext ParkingModel::encode_context(const SampleInput& in) const {
  return make_context(encode(in));
}

DecoderOutput ParkingModel::forward_teacher(const EncoderContext& ctx,
                                            const std::vector<int64_t>& x_in,
                                            const std::vector<int64_t>& y_in) const {
  if (cfg_.dual_decoder) return decoder_.forward(x_in, y_in, ctx);
  // interleave [BOS, x1, y1, ...] from the per-axis inputs (both start at BOS)
  std::vector<int64_t> seq;
  seq.reserve(x_in.size() + y_in.size() - 1);
  seq.push_back(cfg_.tokenizer.bos());
  for (size_t i = 1; i < x_in.size(); ++i) {
    seq.push_back(x_in[i]);
    seq.push_back(y_in[i]);
  }
  return decoder_.forward_interleaved(seq, ctx);
}

Trajectory ParkingModel::generate(const SampleInput& in, std::vector<GenerationStep>* trace,
                                  std::vector<WeightMap>* step_maps) const {
  const EncoderContext ctx = encode_context(in);
  std::vector<GenerationStep> local_trace;
  std::vector<GenerationStep>* tr = trace ? trace : (step_maps ? &local_trace : nullptr);

  // re-run with map capture when requested
  std::vector<int64_t> xs, ys;
  if (step_maps && cfg_.dual_decoder && cfg_.refinement) {
    const int64_t bos = cfg_.tokenizer.bos();
    const int64_t n_coord = cfg_.tokenizer.n_tokens;
    std::vector<int64_t> xin = {bos}, yin = {bos};
    for (int64_t step = 0; step < cfg_.tokenizer.horizon; ++step) {
      const DecoderOutput out = decoder_.forward(xin, yin, ctx);
      const int64_t last = out.x_logits.size(0) - 1;
      const int64_t vocab = out.x_logits.size(1);
      auto argmax = [&](const Tensor& t) {
        const double* d = t.data().data() + last * vocab;
        int64_t best = 0;
        for (int64_t j = 1; j < vocab; ++j) {
          if (d[j] > d[best]) best = j;
        }
        return best;
      };
      const int64_t tx = argmax(out.x_logits);
      const int64_t ty = argmax(out.y_logits);
      WeightMap m;
      m.grid = ctx.refine_grid;
      m.normalized = true;
      const int64_t cells = out.maps.size(1);
      m.values.assign(out.maps.data().begin() + last * cells,
                      out.maps.data().begin() + (last + 1) * cells);
      step_maps->push_back(std::move(m));
      if (tr) {
        GenerationStep gs;
        gs.x_token = tx;
        gs.y_token = ty;
        gs.center_row = out.centers.at({last, 0});
        gs.center_col = out.centers.at({last, 1});
        tr->push_back(gs);
      }
      if (tx >= n_coord || ty >= n_coord) break;
      xin.push_back(tx);
      yin.push_back(ty);
      xs.push_back(tx);
      ys.push_back(ty);
    }
  } else {
    auto pair = decoder_.generate_tokens(ctx, tr);
    xs = std::move(pair.first);
    ys = std::move(pair.second);
  }

  Trajectory traj;
  traj.points.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    TrajectoryPoint p;
    p.t = static_cast<double>(i);
    p.x = deserialize_token(xs[i], cfg_.tokenizer.range_x, cfg_.tokenizer.n_tokens);
    p.y = deserialize_token(ys[i], cfg_.tokenizer.range_y, cfg_.tokenizer.n_tokens);
    traj.points.push_back(p);
  }
  return traj;
}

void ParkingModel::save(const std::string& path) const { save_checkpoint(path, params_); }

void ParkingModel::load(const std::string& path) { load_checkpoint(path, params_); }

}  // namespace parknet
