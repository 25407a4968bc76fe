#include "parknet/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "parknet/checkpoint.hpp"
#include "parknet/ops.hpp"
#include "parknet/tokenizer.hpp"

namespace parknet {

SampleInput Sample::input() const {
  SampleInput in;
  in.slot_x = slot_x;
  in.slot_y = slot_y;
  const Tensor sensor = traj->sensors[static_cast<size_t>(step)].to_tensor();
  if (traj->mode == InputMode::DirectBev) {
    in.bev = sensor;
  } else {
    in.images = sensor;
  }
  return in;
}

std::vector<WeightMap> Sample::maps(const ModelConfig& cfg) const {
  return ground_truth_maps(future_x, future_y, cfg.tokenizer.horizon, cfg.gt_map_sigma,
                           cfg.refine_grid());
}

Sample make_sample(const DatasetTrajectory& traj, int64_t step, const ModelConfig& cfg) {
  const int64_t n = static_cast<int64_t>(traj.steps());
  if (step < 0 || step >= n) {
    throw std::out_of_range("make_sample: step " + std::to_string(step) +
                            " outside trajectory of " + std::to_string(n) + " points");
  }
  Sample s;
  s.traj = &traj;
  s.step = step;

  const double c = std::cos(traj.headings[static_cast<size_t>(step)]);
  const double sn = std::sin(traj.headings[static_cast<size_t>(step)]);
  const double px = traj.xs[static_cast<size_t>(step)];
  const double py = traj.ys[static_cast<size_t>(step)];
  auto to_frame = [&](double wx, double wy, double& lx, double& ly) {
    const double dx = wx - px, dy = wy - py;
    lx = c * dx + sn * dy;
    ly = -sn * dx + c * dy;
  };
  to_frame(traj.scenario.slot.x, traj.scenario.slot.y, s.slot_x, s.slot_y);

  const TokenizerConfig& tok = cfg.tokenizer;
  s.future_x.reserve(static_cast<size_t>(tok.horizon));
  s.future_y.reserve(static_cast<size_t>(tok.horizon));
  s.x_in.push_back(tok.bos());
  s.y_in.push_back(tok.bos());
  for (int64_t b = 1; b <= tok.horizon; ++b) {
    const int64_t idx = std::min(step + b, n - 1);
    double lx, ly;
    to_frame(traj.xs[static_cast<size_t>(idx)], traj.ys[static_cast<size_t>(idx)], lx, ly);
    s.future_x.push_back(lx);
    s.future_y.push_back(ly);
    const int64_t tx = serialize_coord(lx, tok.range_x, tok.n_tokens);
    const int64_t ty = serialize_coord(ly, tok.range_y, tok.n_tokens);
    s.x_in.push_back(tx);
    s.y_in.push_back(ty);
    s.x_tgt.push_back(tx);
    s.y_tgt.push_back(ty);
  }
  s.x_tgt.push_back(tok.eos());
  s.y_tgt.push_back(tok.eos());
  return s;
}

std::vector<Sample> reorganize(const Dataset& data, const ModelConfig& cfg) {
  std::vector<Sample> samples;
  for (size_t i = 0; i < data.size(); ++i) {
    const DatasetTrajectory& traj = data[i];
    if (traj.sensors.size() != traj.steps()) {
      throw std::runtime_error("reorganize: trajectory " + std::to_string(i) + " (seed " +
                               std::to_string(traj.seed) + ") has " +
                               std::to_string(traj.sensors.size()) + " sensor records for " +
                               std::to_string(traj.steps()) + " points");
    }
    for (int64_t j = 0; j < static_cast<int64_t>(traj.steps()); ++j) {
      samples.push_back(make_sample(traj, j, cfg));
    }
  }
  return samples;
}

LossGraph compute_loss(const ModelConfig& cfg, const DecoderOutput& out, const Sample& sample,
                       double lambda_map) {
  const int64_t pad = cfg.tokenizer.pad();
  LossGraph result;

  if (!cfg.dual_decoder) {
    std::vector<int64_t> targets;
    for (size_t i = 0; i + 1 < sample.x_tgt.size(); ++i) {
      targets.push_back(sample.x_tgt[i]);
      targets.push_back(sample.y_tgt[i]);
    }
    targets.push_back(cfg.tokenizer.eos());
    Tensor ce = cross_entropy(out.interleaved_logits, targets, pad);
    result.values.loss_x = ce.item();
    result.values.total = result.values.loss_x;
    result.total = ce;
    return result;
  }

  Tensor lx = cross_entropy(out.x_logits, sample.x_tgt, pad);
  Tensor ly = cross_entropy(out.y_logits, sample.y_tgt, pad);
  Tensor total = add(lx, ly);
  result.values.loss_x = lx.item();
  result.values.loss_y = ly.item();

  if (cfg.refinement && out.maps.defined() && lambda_map != 0.0) {
    const auto gt = sample.maps(cfg);
    const int64_t q = cfg.tokenizer.horizon;
    const int64_t cells = out.maps.size(1);
    if (static_cast<int64_t>(gt.size()) != q || gt[0].grid.cells() != cells) {
      throw std::logic_error("compute_loss: supervision maps do not match the predicted grid");
    }
    std::vector<double> gt_flat;
    gt_flat.reserve(static_cast<size_t>(q * cells));
    double entropy_term = 0.0;  // sum of g ln g with 0 ln 0 = 0
    for (const auto& m : gt) {
      for (double v : m.values) {
        gt_flat.push_back(v);
        if (v > 0.0) entropy_term += v * std::log(v);
      }
    }
    Tensor gt_tensor = Tensor::from_data({q, cells}, std::move(gt_flat));
    Tensor pred = slice(out.maps, 0, 0, q);  // rows predicting coordinates
    Tensor cross = reduce_sum(mul(gt_tensor, log(add_scalar(pred, 1e-12))));
    // KL(gt || pred) summed over steps = entropy_term - cross; mean over steps
    Tensor lm = mul_scalar(sub(Tensor::scalar(entropy_term), cross),
                           1.0 / static_cast<double>(q));
    result.values.loss_map = lm.item();
    total = add(total, mul_scalar(lm, lambda_map));
  }

  result.values.total = total.item();
  result.total = total;
  return result;
}

std::pair<std::vector<size_t>, std::vector<size_t>> split_by_trajectory(size_t count,
                                                                        double val_fraction,
                                                                        uint64_t seed) {
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(seed ^ 0x7331c0dec0ffee11ULL);
  for (size_t i = count; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  const size_t val = std::min(count > 1 ? count - 1 : 0,
                              static_cast<size_t>(std::llround(val_fraction * count)));
  std::vector<size_t> train(order.begin(), order.end() - static_cast<int64_t>(val));
  std::vector<size_t> held(order.end() - static_cast<int64_t>(val), order.end());
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

TrainResult train_model(ParkingModel& model, const std::vector<Sample>& samples,
                        const TrainConfig& cfg, const std::string& checkpoint_path,
                        const std::string& metrics_csv, Adam* optimizer) {
  if (samples.empty()) throw std::invalid_argument("train: empty sample set");
  Adam local_opt(model.params(), AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  Adam& opt = optimizer ? *optimizer : local_opt;

  Rng shuffle_rng(cfg.seed ^ 0x51e9a7d2b4c6f801ULL);
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto reshuffle = [&] {
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j =
          static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
  };
  reshuffle();
  size_t cursor = 0;

  const int64_t batch = std::max<int64_t>(1, std::min<int64_t>(cfg.batch_size,
                                                               static_cast<int64_t>(samples.size())));
  TrainResult result;
  result.best_total = std::numeric_limits<double>::infinity();
  std::vector<NamedArray> best_params;

  // resumed runs continue the global step counter and schedule phase
  const int64_t base = opt.steps_taken();
  const int64_t last = base + cfg.steps;
  for (int64_t step = base + 1; step <= last; ++step) {
    if (cfg.cosine_decay) {
      const double frac = static_cast<double>(step - 1) / static_cast<double>(last);
      opt.set_lr(cfg.learning_rate * 0.5 * (1.0 + std::cos(M_PI * frac)));
    }
    opt.zero_grad();

    Tensor total;
    LossBreakdown sums;
    for (int64_t b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        reshuffle();
        cursor = 0;
      }
      const Sample& sample = samples[order[cursor++]];
      const EncoderContext ctx = model.encode_context(sample.input());
      const DecoderOutput out = model.forward_teacher(ctx, sample.x_in, sample.y_in);
      LossGraph lg = compute_loss(model.config(), out, sample, cfg.lambda_map);
      sums.loss_x += lg.values.loss_x;
      sums.loss_y += lg.values.loss_y;
      sums.loss_map += lg.values.loss_map;
      total = total.defined() ? add(total, lg.total) : lg.total;
    }
    total = mul_scalar(total, 1.0 / static_cast<double>(batch));

    LossBreakdown mean;
    mean.loss_x = sums.loss_x / static_cast<double>(batch);
    mean.loss_y = sums.loss_y / static_cast<double>(batch);
    mean.loss_map = sums.loss_map / static_cast<double>(batch);
    mean.total = total.item();
    if (!std::isfinite(mean.total)) {
      throw std::runtime_error("train: diverged at step " + std::to_string(step) +
                               " (total=" + std::to_string(mean.total) + ")");
    }

    total.backward();
    opt.step();

    if (step % cfg.log_every == 0 || step == last || step == base + 1) {
      result.log.push_back(TrainLogRow{step, mean, opt.lr()});
    }
    if (mean.total < result.best_total) {
      result.best_total = mean.total;
      if (!checkpoint_path.empty()) {
        best_params.clear();
        for (const auto& [name, t] : model.params()) {
          best_params.push_back({name, t.shape(), t.data()});
        }
      }
    }
    result.final_loss = mean;
  }

  if (!checkpoint_path.empty()) {
    if (best_params.empty()) {
      for (const auto& [name, t] : model.params()) {
        best_params.push_back({name, t.shape(), t.data()});
      }
    }
    save_arrays(checkpoint_path, best_params);
  }
  if (!metrics_csv.empty()) {
    std::ofstream os(metrics_csv, std::ios::trunc);
    if (!os) throw std::runtime_error("train: cannot open metrics log " + metrics_csv);
    os << "step,loss_x,loss_y,loss_map,total\n" << std::setprecision(12);
    for (const auto& row : result.log) {
      os << row.step << "," << row.loss.loss_x << "," << row.loss.loss_y << ","
         << row.loss.loss_map << "," << row.loss.total << "\n";
    }
  }
  return result;
}

Trajectory ground_truth_window(const DatasetTrajectory& traj, int64_t step, int64_t horizon) {
  const int64_t n = static_cast<int64_t>(traj.steps());
  const double c = std::cos(traj.headings[static_cast<size_t>(step)]);
  const double sn = std::sin(traj.headings[static_cast<size_t>(step)]);
  const double px = traj.xs[static_cast<size_t>(step)];
  const double py = traj.ys[static_cast<size_t>(step)];
  Trajectory out;
  for (int64_t b = 1; b <= horizon; ++b) {
    const int64_t idx = std::min(step + b, n - 1);
    const double dx = traj.xs[static_cast<size_t>(idx)] - px;
    const double dy = traj.ys[static_cast<size_t>(idx)] - py;
    TrajectoryPoint p;
    p.t = static_cast<double>(b - 1);
    p.x = c * dx + sn * dy;
    p.y = -sn * dx + c * dy;
    out.points.push_back(p);
  }
  return out;
}

MetricSummary evaluate_model(const ParkingModel& model, const Dataset& data,
                             const std::vector<size_t>& indices) {
  MetricSummary sum;
  for (size_t idx : indices) {
    const DatasetTrajectory& traj = data[idx];
    const Sample s = make_sample(traj, 0, model.config());
    Trajectory pred = model.generate(s.input());
    if (pred.empty()) {
      pred.points.push_back(TrajectoryPoint{0.0, 0.0, 0.0});
    }
    const Trajectory gt = ground_truth_window(traj, 0, model.config().tokenizer.horizon);
    const MetricReport r = compare_trajectories(pred, gt);
    sum.l2 += r.l2;
    sum.hausdorff += r.hausdorff;
    sum.fourier += r.fourier_diff;
    ++sum.count;
  }
  if (sum.count > 0) {
    sum.l2 /= static_cast<double>(sum.count);
    sum.hausdorff /= static_cast<double>(sum.count);
    sum.fourier /= static_cast<double>(sum.count);
  }
  return sum;
}

namespace {

struct Variant {
  std::string name;
  void (*apply)(ModelConfig&);
};

const Variant kVariants[] = {
    {"interleaved", [](ModelConfig& m) {
       m.dual_decoder = false;
       m.query_type = QueryType::Binary;
       m.dual_stream = false;
       m.refinement = false;
     }},
    {"decoder-binary", [](ModelConfig& m) {
       m.query_type = QueryType::Binary;
       m.dual_stream = false;
       m.refinement = false;
     }},
    {"decoder-gaussian", [](ModelConfig& m) {
       m.query_type = QueryType::Gaussian;
       m.dual_stream = false;
       m.refinement = false;
     }},
    {"decoder-gaussian-dual", [](ModelConfig& m) {
       m.query_type = QueryType::Gaussian;
       m.dual_stream = true;
       m.refinement = false;
     }},
    {"decoder-gaussian-refinement", [](ModelConfig& m) {
       m.query_type = QueryType::Gaussian;
       m.dual_stream = false;
       m.refinement = true;
     }},
    {"complete", [](ModelConfig& m) {
       m.query_type = QueryType::Gaussian;
       m.dual_stream = true;
       m.refinement = true;
     }},
};

}  // namespace

std::vector<AblationRow> run_ablation_matrix(const Dataset& data, const ExperimentConfig& base,
                                             const std::string& out_dir) {
  const auto [train_idx, held_idx] =
      split_by_trajectory(data.size(), base.train.val_fraction, base.train.seed);
  if (held_idx.empty()) {
    throw std::invalid_argument("ablation: held-out split is empty; raise val_fraction");
  }
  Dataset train_set;
  for (size_t i : train_idx) train_set.push_back(data[i]);

  std::vector<AblationRow> rows;
  for (const Variant& variant : kVariants) {
    ModelConfig mc = base.model;
    variant.apply(mc);
    mc.validate();

    std::vector<Sample> samples = reorganize(train_set, mc);
    if (base.train.window_stride > 1) {
      std::vector<Sample> strided;
      for (size_t i = 0; i < samples.size(); i += static_cast<size_t>(base.train.window_stride)) {
        strided.push_back(std::move(samples[i]));
      }
      samples = std::move(strided);
    }

    ParkingModel model(mc, base.train.seed);
    std::string ckpt, log;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      ckpt = out_dir + "/" + variant.name + ".ckpt";
      log = out_dir + "/" + variant.name + "_loss.csv";
    }
    train_model(model, samples, base.train, ckpt, log);

    AblationRow row;
    row.variant = variant.name;
    row.metrics = evaluate_model(model, data, held_idx);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("ablation: cannot open " + path);
  os << "variant,hausdorff_m,l2_m,fourier_diff\n" << std::setprecision(12);
  for (const auto& r : rows) {
    os << r.variant << "," << r.metrics.hausdorff << "," << r.metrics.l2 << ","
       << r.metrics.fourier << "\n";
  }
}

}  // namespace parknet
