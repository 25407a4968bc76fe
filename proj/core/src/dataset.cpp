#include "parknet/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "parknet/pngio.hpp"
#include "parknet/render.hpp"
#include "parknet/rng.hpp"

namespace parknet {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor SensorBlob::to_tensor() const {
  std::vector<double> d(data.begin(), data.end());
  return Tensor::from_data(shape, std::move(d));
}

SensorBlob SensorBlob::from_tensor(const Tensor& t) {
  SensorBlob b;
  b.shape = t.shape();
  b.data.assign(t.data().begin(), t.data().end());
  return b;
}

uint64_t derive_seed(uint64_t dataset_seed, int64_t index) {
  uint64_t x = dataset_seed + 0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(index) + 1);
  return splitmix64(x);
}

DatasetTrajectory generate_trajectory(uint64_t dataset_seed, int64_t index, InputMode mode,
                                      const ModelConfig& cfg, const CameraRig* rig) {
  ScenarioSamplerConfig sampler;
  sampler.range_x = cfg.grid.range_x;
  sampler.range_y = cfg.grid.range_y;

  DatasetTrajectory traj;
  traj.seed = derive_seed(dataset_seed, index);
  traj.mode = mode;
  traj.scenario = sample_scenario(traj.seed, sampler);
  const ExpertTrajectory expert = plan_expert(traj.scenario, sampler.planner);

  const double nominal_speed = 1.0;  // m/s, fixes the timestamp spacing
  traj.ts.reserve(expert.waypoints.size());
  for (size_t j = 0; j < expert.waypoints.size(); ++j) {
    const auto& w = expert.waypoints[j];
    traj.ts.push_back(static_cast<double>(j) * expert.spacing / nominal_speed);
    traj.xs.push_back(w.x);
    traj.ys.push_back(w.y);
    traj.headings.push_back(w.heading);
  }

  traj.sensors.reserve(expert.waypoints.size());
  for (size_t j = 0; j < expert.waypoints.size(); ++j) {
    const Pose2d pose{traj.xs[j], traj.ys[j], traj.headings[j]};
    if (mode == InputMode::DirectBev) {
      traj.sensors.push_back(SensorBlob::from_tensor(render_bev(traj.scenario, pose, cfg.grid)));
    } else {
      if (!rig) throw std::invalid_argument("generate_trajectory: camera mode needs a rig");
      traj.sensors.push_back(SensorBlob::from_tensor(render_scene(traj.scenario, pose, *rig)));
    }
  }
  return traj;
}

Dataset generate_dataset(int64_t count, uint64_t seed, InputMode mode, const ModelConfig& cfg,
                         const CameraRig* rig) {
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  Dataset data;
  data.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    data.push_back(generate_trajectory(seed, i, mode, cfg, rig));
  }
  return data;
}

void write_f32_array(const std::string& path, const std::vector<int64_t>& shape,
                     const std::vector<float>& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("dataset: cannot open for writing: " + path);
  os.write("F32A", 4);
  const uint32_t ndim = static_cast<uint32_t>(shape.size());
  os.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
  for (int64_t d : shape) os.write(reinterpret_cast<const char*>(&d), sizeof(d));
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!os) throw std::runtime_error("dataset: write failed: " + path);
}

std::pair<std::vector<int64_t>, std::vector<float>> read_f32_array(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "F32A", 4) != 0) {
    throw std::runtime_error("dataset: bad magic in " + path);
  }
  uint32_t ndim = 0;
  is.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
  std::vector<int64_t> shape(ndim);
  int64_t n = 1;
  for (uint32_t d = 0; d < ndim; ++d) {
    is.read(reinterpret_cast<char*>(&shape[d]), sizeof(int64_t));
    n *= shape[d];
  }
  std::vector<float> data(static_cast<size_t>(n));
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!is) throw std::runtime_error("dataset: truncated array in " + path);
  return {std::move(shape), std::move(data)};
}

namespace {

json segment_json(const LineSegment& l) {
  return json{{"x0", l.x0}, {"y0", l.y0}, {"x1", l.x1}, {"y1", l.y1}};
}

LineSegment segment_from_json(const json& j) {
  return {j.at("x0"), j.at("y0"), j.at("x1"), j.at("y1")};
}

std::string step_stem(size_t j) {
  std::ostringstream os;
  os << "step_" << std::setw(3) << std::setfill('0') << j;
  return os.str();
}

}  // namespace

void write_trajectory_dir(const DatasetTrajectory& traj, const std::string& dir,
                          const CameraRig* rig) {
  fs::create_directories(dir);

  json meta;
  meta["seed"] = traj.seed;
  meta["mode"] = to_string(traj.mode);
  meta["slot"] = json{{"x", traj.scenario.slot.x},
                      {"y", traj.scenario.slot.y},
                      {"heading", traj.scenario.slot.heading}};
  meta["gear"] = traj.scenario.gear == Gear::Reverse ? "reverse" : "forward";
  meta["steps"] = traj.steps();
  meta["obstacles"] = json::array();
  for (const auto& o : traj.scenario.obstacles) {
    meta["obstacles"].push_back(json{{"x", o.x},
                                     {"y", o.y},
                                     {"half_length", o.half_length},
                                     {"half_width", o.half_width},
                                     {"heading", o.heading}});
  }
  meta["slot_lines"] = json::array();
  for (const auto& l : traj.scenario.slot_lines) meta["slot_lines"].push_back(segment_json(l));
  meta["lane_lines"] = json::array();
  for (const auto& l : traj.scenario.lane_lines) meta["lane_lines"].push_back(segment_json(l));
  {
    std::ofstream os(dir + "/meta.json", std::ios::trunc);
    if (!os) throw std::runtime_error("dataset: cannot write " + dir + "/meta.json");
    os << meta.dump(2) << "\n";
  }

  {
    std::ofstream os(dir + "/points.csv", std::ios::trunc);
    if (!os) throw std::runtime_error("dataset: cannot write " + dir + "/points.csv");
    os << "t,x,y,heading\n" << std::setprecision(17);
    for (size_t j = 0; j < traj.steps(); ++j) {
      os << traj.ts[j] << "," << traj.xs[j] << "," << traj.ys[j] << "," << traj.headings[j]
         << "\n";
    }
  }

  for (size_t j = 0; j < traj.sensors.size(); ++j) {
    const SensorBlob& blob = traj.sensors[j];
    if (traj.mode == InputMode::DirectBev) {
      write_f32_array(dir + "/" + step_stem(j) + ".f32", blob.shape, blob.data);
    } else {
      if (!rig) throw std::invalid_argument("dataset: camera mode needs a rig to write");
      const Tensor stack = blob.to_tensor();  // (cams, 3, h, w)
      for (int64_t c = 0; c < stack.size(0); ++c) {
        Tensor img = Tensor::zeros({3, stack.size(2), stack.size(3)});
        const size_t plane = static_cast<size_t>(3 * stack.size(2) * stack.size(3));
        std::copy_n(stack.data().begin() + static_cast<size_t>(c) * plane, plane,
                    img.data().begin());
        write_png_rgb(img, dir + "/" + step_stem(j) + "_" +
                               rig->cameras[static_cast<size_t>(c)].name + ".png");
      }
    }
  }
}

void write_dataset(const Dataset& data, const std::string& dir, const CameraRig* rig) {
  fs::create_directories(dir);
  if (!data.empty() && data[0].mode == InputMode::Cameras) {
    if (!rig) throw std::invalid_argument("dataset: camera mode needs a rig to write");
    save_rig_json(*rig, dir + "/rig.json");
  }
  for (size_t i = 0; i < data.size(); ++i) {
    std::ostringstream os;
    os << dir << "/traj_" << std::setw(6) << std::setfill('0') << i;
    write_trajectory_dir(data[i], os.str(), rig);
  }
}

DatasetTrajectory load_trajectory_dir(const std::string& dir, InputMode mode,
                                      const CameraRig* rig) {
  DatasetTrajectory traj;
  traj.mode = mode;

  std::ifstream ms(dir + "/meta.json");
  if (!ms) throw std::runtime_error("dataset: missing meta.json in " + dir);
  json meta;
  ms >> meta;
  traj.seed = meta.at("seed").get<uint64_t>();
  traj.scenario.seed = traj.seed;
  traj.scenario.slot.x = meta.at("slot").at("x");
  traj.scenario.slot.y = meta.at("slot").at("y");
  traj.scenario.slot.heading = meta.at("slot").at("heading");
  traj.scenario.gear = meta.at("gear") == "reverse" ? Gear::Reverse : Gear::Forward;
  for (const auto& oj : meta.value("obstacles", json::array())) {
    ObstacleRect o;
    o.x = oj.at("x");
    o.y = oj.at("y");
    o.half_length = oj.at("half_length");
    o.half_width = oj.at("half_width");
    o.heading = oj.at("heading");
    traj.scenario.obstacles.push_back(o);
  }
  for (const auto& lj : meta.value("slot_lines", json::array())) {
    traj.scenario.slot_lines.push_back(segment_from_json(lj));
  }
  for (const auto& lj : meta.value("lane_lines", json::array())) {
    traj.scenario.lane_lines.push_back(segment_from_json(lj));
  }

  std::ifstream ps(dir + "/points.csv");
  if (!ps) throw std::runtime_error("dataset: missing points.csv in " + dir);
  std::string line;
  std::getline(ps, line);
  while (std::getline(ps, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double t, x, y, h;
    char c1, c2, c3;
    if (!(row >> t >> c1 >> x >> c2 >> y >> c3 >> h)) {
      throw std::runtime_error("dataset: malformed points.csv row in " + dir + ": " + line);
    }
    traj.ts.push_back(t);
    traj.xs.push_back(x);
    traj.ys.push_back(y);
    traj.headings.push_back(h);
  }

  const size_t steps = meta.at("steps").get<size_t>();
  if (steps != traj.xs.size()) {
    throw std::runtime_error("dataset: meta/points step count mismatch in " + dir);
  }
  for (size_t j = 0; j < steps; ++j) {
    if (mode == InputMode::DirectBev) {
      const std::string path = dir + "/" + step_stem(j) + ".f32";
      if (!fs::exists(path)) {
        throw std::runtime_error("dataset: record " + dir + " step " + std::to_string(j) +
                                 " is missing its BEV grid (" + path + ")");
      }
      auto [shape, data] = read_f32_array(path);
      traj.sensors.push_back(SensorBlob{std::move(shape), std::move(data)});
    } else {
      if (!rig) throw std::invalid_argument("dataset: camera mode needs a rig to load");
      SensorBlob blob;
      const int64_t cams = static_cast<int64_t>(rig->cameras.size());
      for (int64_t c = 0; c < cams; ++c) {
        const std::string path =
            dir + "/" + step_stem(j) + "_" + rig->cameras[static_cast<size_t>(c)].name + ".png";
        if (!fs::exists(path)) {
          throw std::runtime_error("dataset: record " + dir + " step " + std::to_string(j) +
                                   " is missing camera image " + path);
        }
        Tensor img = read_png_rgb(path);
        if (blob.shape.empty()) {
          blob.shape = {cams, 3, img.size(1), img.size(2)};
          blob.data.reserve(static_cast<size_t>(cams) * img.numel());
        }
        blob.data.insert(blob.data.end(), img.data().begin(), img.data().end());
      }
      traj.sensors.push_back(std::move(blob));
    }
  }
  return traj;
}

Dataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("dataset: not a directory: " + dir);
  }
  std::vector<std::string> traj_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("traj_", 0) == 0) {
      traj_dirs.push_back(entry.path().string());
    }
  }
  std::sort(traj_dirs.begin(), traj_dirs.end());
  if (traj_dirs.empty()) {
    throw std::runtime_error("dataset: no traj_* directories under " + dir);
  }

  CameraRig rig;
  const CameraRig* rig_ptr = nullptr;
  if (fs::exists(dir + "/rig.json")) {
    rig = load_rig_json(dir + "/rig.json");
    rig_ptr = &rig;
  }

  Dataset data;
  data.reserve(traj_dirs.size());
  for (const auto& td : traj_dirs) {
    std::ifstream ms(td + "/meta.json");
    if (!ms) throw std::runtime_error("dataset: missing meta.json in " + td);
    json meta;
    ms >> meta;
    const InputMode mode = parse_input_mode(meta.at("mode"));
    data.push_back(load_trajectory_dir(td, mode, rig_ptr));
  }
  return data;
}

}  // namespace parknet
