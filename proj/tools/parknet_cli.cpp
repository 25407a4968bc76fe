// parknet: camera-to-trajectory parking prediction pipeline.
// Subcommands: generate, train, eval, infer, simulate, ablate.
// Exit codes: 0 success, 1 runtime error, 2 usage error, 3 non-converged
// simulation.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "parknet/checkpoint.hpp"
#include "parknet/config.hpp"
#include "parknet/control.hpp"
#include "parknet/dataset.hpp"
#include "parknet/grid.hpp"
#include "parknet/metrics.hpp"
#include "parknet/model.hpp"
#include "parknet/training.hpp"

#ifndef PARKNET_VERSION
#define PARKNET_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace parknet;

namespace {

std::string resolve_out(const std::string& out) {
  const char* root = std::getenv("PARKNET_OUT_ROOT");
  if (root && *root && !fs::path(out).is_absolute()) {
    return (fs::path(root) / out).string();
  }
  return out;
}

// Written into the output directory before any artifact.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, uint64_t seed) {
  fs::create_directories(out_dir);
  json m;
  m["command"] = command;
  m["config"] = config_path;
  m["seed"] = seed;
  m["output_dir"] = out_dir;
  m["version"] = PARKNET_VERSION;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  m["timestamp_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  std::ofstream os(out_dir + "/manifest.json", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest in " + out_dir);
  os << m.dump(2) << "\n";
}

ExperimentConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  return load_experiment_config(path);
}

std::string variant_name(const ModelConfig& m) {
  if (!m.dual_decoder) return "interleaved";
  std::string name = to_string(m.query_type);
  if (m.dual_stream) name += "-dual";
  if (m.refinement) name += "-refinement";
  return name;
}

int cmd_generate(const std::string& config_path, ExperimentConfig cfg, std::string out) {
  out = resolve_out(out);
  write_manifest(out, "generate", config_path, cfg.data.seed);
  save_experiment_config(cfg, out + "/config.json");

  CameraRig rig;
  const CameraRig* rig_ptr = nullptr;
  if (cfg.data.mode == InputMode::Cameras) {
    rig = make_default_rig(cfg.model.image_size);
    save_rig_json(rig, out + "/rig.json");
    rig_ptr = &rig;
  }
  int64_t total_steps = 0;
  for (int64_t i = 0; i < cfg.data.count; ++i) {
    const DatasetTrajectory traj =
        generate_trajectory(cfg.data.seed, i, cfg.data.mode, cfg.model, rig_ptr);
    std::ostringstream dir;
    dir << out << "/traj_" << std::setw(6) << std::setfill('0') << i;
    write_trajectory_dir(traj, dir.str(), rig_ptr);
    total_steps += static_cast<int64_t>(traj.steps());
  }
  std::cout << "generated " << cfg.data.count << " trajectories (" << total_steps
            << " steps) in " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, ExperimentConfig cfg, const std::string& data_dir,
              std::string out, bool resume) {
  out = resolve_out(out);
  write_manifest(out, "train", config_path, cfg.train.seed);
  save_experiment_config(cfg, out + "/config.json");

  const Dataset data = load_dataset(data_dir);
  const auto [train_idx, val_idx] =
      split_by_trajectory(data.size(), cfg.train.val_fraction, cfg.train.seed);
  Dataset train_set;
  for (size_t i : train_idx) train_set.push_back(data[i]);

  std::vector<Sample> samples = reorganize(train_set, cfg.model);
  if (cfg.train.window_stride > 1) {
    std::vector<Sample> strided;
    for (size_t i = 0; i < samples.size(); i += static_cast<size_t>(cfg.train.window_stride)) {
      strided.push_back(std::move(samples[i]));
    }
    samples = std::move(strided);
  }

  ParkingModel model(cfg.model, cfg.train.seed);
  if (cfg.model.input_mode == InputMode::Cameras && fs::exists(data_dir + "/rig.json")) {
    model.set_rig(load_rig_json(data_dir + "/rig.json"));
  }
  Adam opt(model.params(), AdamConfig{cfg.train.learning_rate, 0.9, 0.999, 1e-8});
  if (resume) {
    model.load(out + "/model.ckpt");
    opt.load_state(out + "/optimizer.bin");
    std::cout << "resuming from step " << opt.steps_taken() << "\n";
  }

  const TrainResult result = train_model(model, samples, cfg.train, out + "/model.ckpt",
                                         out + "/metrics.csv", &opt);
  opt.save_state(out + "/optimizer.bin");
  std::cout << "trained " << cfg.train.steps << " steps on " << samples.size()
            << " samples; final total loss " << result.final_loss.total << " (best "
            << result.best_total << ")\n";
  std::cout << "checkpoint: " << out << "/model.ckpt\n";
  return 0;
}

int cmd_eval(const std::string& config_path, ExperimentConfig cfg,
             const std::string& checkpoint, const std::string& data_dir, std::string out_csv,
             const std::string& split) {
  const Dataset data = load_dataset(data_dir);
  auto [train_idx, val_idx] =
      split_by_trajectory(data.size(), cfg.train.val_fraction, cfg.train.seed);
  std::vector<size_t> chosen;
  if (split == "val") {
    chosen = val_idx;
  } else if (split == "train") {
    chosen = train_idx;
  } else if (split == "all") {
    for (size_t i = 0; i < data.size(); ++i) chosen.push_back(i);
  } else {
    throw CLI::ValidationError("--split must be val, train or all");
  }
  if (chosen.empty()) throw std::runtime_error("eval: selected split is empty");

  ParkingModel model(cfg.model, cfg.train.seed);
  if (cfg.model.input_mode == InputMode::Cameras && fs::exists(data_dir + "/rig.json")) {
    model.set_rig(load_rig_json(data_dir + "/rig.json"));
  }
  model.load(checkpoint);
  const MetricSummary m = evaluate_model(model, data, chosen);

  out_csv = resolve_out(out_csv);
  if (const auto parent = fs::path(out_csv).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  std::ofstream os(out_csv, std::ios::trunc);
  if (!os) throw std::runtime_error("eval: cannot open " + out_csv);
  os << "variant,hausdorff_m,l2_m,fourier_diff\n" << std::setprecision(12);
  os << variant_name(cfg.model) << "," << m.hausdorff << "," << m.l2 << "," << m.fourier
     << "\n";
  std::cout << "evaluated " << m.count << " trajectories (" << split << " split): hausdorff "
            << m.hausdorff << " m, l2 " << m.l2 << " m, fourier " << m.fourier << "\n";
  return 0;
}

int cmd_infer(const std::string& config_path, ExperimentConfig cfg,
              const std::string& checkpoint, const std::string& sample_dir, int64_t step,
              double slot_x, double slot_y, std::string out_file,
              const std::string& dump_maps, const std::string& trace_file) {
  if (std::abs(slot_x) > cfg.model.grid.range_x || std::abs(slot_y) > cfg.model.grid.range_y) {
    throw CLI::ValidationError("--slot coordinates fall outside the BEV range of +-" +
                               std::to_string(cfg.model.grid.range_x) + " m");
  }
  CameraRig rig;
  const CameraRig* rig_ptr = nullptr;
  const fs::path sample_path(sample_dir);
  if (cfg.model.input_mode == InputMode::Cameras) {
    const fs::path rig_path = sample_path.parent_path() / "rig.json";
    rig = fs::exists(rig_path) ? load_rig_json(rig_path.string())
                               : make_default_rig(cfg.model.image_size);
    rig_ptr = &rig;
  }
  const DatasetTrajectory traj =
      load_trajectory_dir(sample_dir, cfg.model.input_mode, rig_ptr);
  if (step < 0 || step >= static_cast<int64_t>(traj.steps())) {
    throw CLI::ValidationError("--step outside the trajectory's recorded steps");
  }

  ParkingModel model(cfg.model, cfg.train.seed);
  if (rig_ptr) model.set_rig(rig);
  model.load(checkpoint);

  SampleInput input;
  const Tensor sensor = traj.sensors[static_cast<size_t>(step)].to_tensor();
  if (cfg.model.input_mode == InputMode::DirectBev) {
    input.bev = sensor;
  } else {
    input.images = sensor;
  }
  input.slot_x = slot_x;
  input.slot_y = slot_y;

  std::vector<GenerationStep> trace;
  std::vector<WeightMap> maps;
  const bool want_maps = !dump_maps.empty();
  Trajectory pred = model.generate(input, &trace, want_maps ? &maps : nullptr);

  out_file = resolve_out(out_file);
  if (const auto parent = fs::path(out_file).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  write_trajectory_csv(pred, out_file);
  std::cout << "predicted " << pred.size() << " points -> " << out_file << "\n";

  if (want_maps) {
    if (!cfg.model.refinement) {
      throw CLI::ValidationError("--dump-maps requires a refinement-enabled model config");
    }
    const std::string dir = resolve_out(dump_maps);
    fs::create_directories(dir);
    for (size_t i = 0; i < maps.size(); ++i) {
      std::ostringstream name;
      name << dir << "/map_" << std::setw(3) << std::setfill('0') << i << ".pgm";
      write_pgm(maps[i], name.str());
    }
    std::cout << "wrote " << maps.size() << " weight maps to " << dir << "\n";
  }
  if (!trace_file.empty()) {
    std::ofstream os(resolve_out(trace_file), std::ios::trunc);
    if (!os) throw std::runtime_error("infer: cannot open trace file");
    for (size_t i = 0; i < trace.size(); ++i) {
      json row;
      row["step"] = i;
      row["x_token"] = trace[i].x_token;
      row["y_token"] = trace[i].y_token;
      if (trace[i].center_row >= 0.0) {
        row["center_row"] = trace[i].center_row;
        row["center_col"] = trace[i].center_col;
        row["map_argmax"] = trace[i].map_argmax;
      }
      os << row.dump() << "\n";
    }
  }
  return 0;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& traj_file,
                 std::string out_trace) {
  const Trajectory path = read_trajectory_csv(traj_file);
  VehicleState initial;  // t0 ego frame: origin, heading 0, at rest
  std::vector<TraceRow> trace;
  const SimReport report = simulate_parking(path, initial, cfg.control, &trace);
  if (!out_trace.empty()) {
    out_trace = resolve_out(out_trace);
    if (const auto parent = fs::path(out_trace).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    write_trace_csv(trace, out_trace);
  }
  std::cout << (report.converged ? "converged" : "timeout") << ": position error "
            << report.position_error << " m, heading error "
            << report.heading_error * 180.0 / M_PI << " deg, sim time " << report.sim_time
            << " s\n";
  return report.converged ? 0 : 3;
}

int cmd_ablate(const std::string& config_path, ExperimentConfig cfg,
               const std::string& data_dir, std::string out) {
  out = resolve_out(out);
  write_manifest(out, "ablate", config_path, cfg.train.seed);
  save_experiment_config(cfg, out + "/config.json");
  const Dataset data = load_dataset(data_dir);
  const auto rows = run_ablation_matrix(data, cfg, out);
  write_ablation_csv(rows, out + "/ablation.csv");
  std::cout << "variant,hausdorff_m,l2_m,fourier_diff\n";
  for (const auto& r : rows) {
    std::cout << r.variant << "," << r.metrics.hausdorff << "," << r.metrics.l2 << ","
              << r.metrics.fourier << "\n";
  }
  std::cout << "results: " << out << "/ablation.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"camera-to-trajectory parking predictor pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PARKNET_VERSION);

  std::string config_path, data_dir, out, checkpoint, sample_dir, split = "val";
  std::string traj_file, out_trace, dump_maps, trace_file;
  int64_t count = -1, steps = -1, step = 0;
  int64_t seed = -1;
  std::string mode;
  std::vector<double> slot;
  bool resume = false;

  auto* gen = app.add_subcommand("generate", "synthesize a parking dataset");
  gen->add_option("--config", config_path, "experiment config JSON");
  gen->add_option("--count", count, "number of trajectories");
  gen->add_option("--seed", seed, "dataset seed");
  gen->add_option("--mode", mode, "direct-bev|cameras");
  gen->add_option("--out", out, "output dataset directory")->required();

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--config", config_path, "experiment config JSON");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--steps", steps, "optimization steps");
  train->add_option("--seed", seed, "training seed");
  train->add_flag("--resume", resume, "continue from the checkpoint in --out");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  eval->add_option("--config", config_path, "experiment config JSON");
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--split", split, "val|train|all");
  eval->add_option("--out", out, "output CSV path")->required();

  auto* infer = app.add_subcommand("infer", "predict a trajectory for one sample");
  infer->add_option("--config", config_path, "experiment config JSON");
  infer->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  infer->add_option("--sample", sample_dir, "trajectory directory")->required();
  infer->add_option("--step", step, "step index within the trajectory");
  infer->add_option("--slot", slot, "target slot ego coordinates: X Y")
      ->expected(2)
      ->required();
  infer->add_option("--out", out, "output trajectory CSV")->required();
  infer->add_option("--dump-maps", dump_maps, "directory for per-step PGM weight maps");
  infer->add_option("--trace", trace_file, "JSON-lines generation trace");

  auto* sim = app.add_subcommand("simulate", "closed-loop trajectory execution");
  sim->add_option("--config", config_path, "experiment config JSON");
  sim->add_option("--trajectory", traj_file, "trajectory CSV to track")->required();
  sim->add_option("--out-trace", out_trace, "trace CSV path");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate the ablation matrix");
  ablate->add_option("--config", config_path, "experiment config JSON");
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--out", out, "output directory")->required();
  ablate->add_option("--seed", seed, "shared seed for every variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2; --help/--version exit 0
  }

  try {
    ExperimentConfig cfg = load_config_or_default(config_path);
    if (count > 0) cfg.data.count = count;
    if (seed >= 0) {
      cfg.data.seed = static_cast<uint64_t>(seed);
      cfg.train.seed = static_cast<uint64_t>(seed);
    }
    if (!mode.empty()) {
      cfg.data.mode = parse_input_mode(mode);
      cfg.model.input_mode = cfg.data.mode;
    }
    if (steps > 0) cfg.train.steps = steps;

    if (gen->parsed()) return cmd_generate(config_path, cfg, out);
    if (train->parsed()) return cmd_train(config_path, cfg, data_dir, out, resume);
    if (eval->parsed()) return cmd_eval(config_path, cfg, checkpoint, data_dir, out, split);
    if (infer->parsed()) {
      return cmd_infer(config_path, cfg, checkpoint, sample_dir, step, slot[0], slot[1], out,
                       dump_maps, trace_file);
    }
    if (sim->parsed()) return cmd_simulate(cfg, traj_file, out_trace);
    if (ablate->parsed()) return cmd_ablate(config_path, cfg, data_dir, out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
