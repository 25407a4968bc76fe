#include "parknet/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace parknet {

using nlohmann::json;

InputMode parse_input_mode(const std::string& s) {
  if (s == "direct-bev") return InputMode::DirectBev;
  if (s == "cameras") return InputMode::Cameras;
  throw std::invalid_argument("unknown input mode '" + s + "' (direct-bev|cameras)");
}
std::string to_string(InputMode m) {
  return m == InputMode::DirectBev ? "direct-bev" : "cameras";
}

QueryType parse_query_type(const std::string& s) {
  if (s == "gaussian") return QueryType::Gaussian;
  if (s == "binary") return QueryType::Binary;
  throw std::invalid_argument("unknown query type '" + s + "' (gaussian|binary)");
}
std::string to_string(QueryType q) { return q == QueryType::Gaussian ? "gaussian" : "binary"; }

KvSource parse_kv_source(const std::string& s) {
  if (s == "fused") return KvSource::Fused;
  if (s == "bev") return KvSource::Bev;
  throw std::invalid_argument("unknown kv source '" + s + "' (fused|bev)");
}
std::string to_string(KvSource k) { return k == KvSource::Fused ? "fused" : "bev"; }

GridSpec ModelConfig::refine_grid() const {
  GridSpec g = grid;
  g.height = grid.height / refine_pool;
  g.width = grid.width / refine_pool;
  g.resolution = grid.resolution * static_cast<double>(refine_pool);
  return g;
}

void ModelConfig::validate() const {
  tokenizer.validate();
  grid.validate();
  if (refine_pool < 1 || grid.height % refine_pool != 0 || grid.width % refine_pool != 0) {
    throw std::invalid_argument("model: refine_pool must divide the grid extents");
  }
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("model: d_model must be divisible by n_heads");
  }
  if (n_layers < 1) throw std::invalid_argument("model: n_layers must be >= 1");
  if (!(refine_sigma > 0.0) || !(gt_map_sigma > 0.0) || !(query_sigma > 0.0)) {
    throw std::invalid_argument("model: sigmas must be positive");
  }
  if (input_mode == InputMode::Cameras) {
    if (image_size % 8 != 0) {
      throw std::invalid_argument("model: image_size must be divisible by 8");
    }
    if (depth_bins < 1 || !(depth_max > depth_min) || !(depth_min > 0.0)) {
      throw std::invalid_argument("model: invalid depth bin range");
    }
  }
}

namespace {

json model_to_json(const ModelConfig& m) {
  return json{{"range_x", m.tokenizer.range_x},
              {"range_y", m.tokenizer.range_y},
              {"n_tokens", m.tokenizer.n_tokens},
              {"horizon", m.tokenizer.horizon},
              {"grid_height", m.grid.height},
              {"grid_width", m.grid.width},
              {"grid_resolution", m.grid.resolution},
              {"input_mode", to_string(m.input_mode)},
              {"query_type", to_string(m.query_type)},
              {"query_sigma", m.query_sigma},
              {"binary_half_extent", m.binary_half_extent},
              {"image_size", m.image_size},
              {"bev_channels", m.bev_channels},
              {"depth_bins", m.depth_bins},
              {"depth_min", m.depth_min},
              {"depth_max", m.depth_max},
              {"d_model", m.d_model},
              {"n_heads", m.n_heads},
              {"n_layers", m.n_layers},
              {"dual_decoder", m.dual_decoder},
              {"dual_stream", m.dual_stream},
              {"refinement", m.refinement},
              {"refine_sigma", m.refine_sigma},
              {"refine_pool", m.refine_pool},
              {"gt_map_sigma", m.gt_map_sigma},
              {"kv_source", to_string(m.kv_source)}};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  maybe(j, "range_x", m.tokenizer.range_x);
  maybe(j, "range_y", m.tokenizer.range_y);
  maybe(j, "n_tokens", m.tokenizer.n_tokens);
  maybe(j, "horizon", m.tokenizer.horizon);
  maybe(j, "grid_height", m.grid.height);
  maybe(j, "grid_width", m.grid.width);
  maybe(j, "grid_resolution", m.grid.resolution);
  m.grid.range_x = m.tokenizer.range_x;
  m.grid.range_y = m.tokenizer.range_y;
  if (j.contains("input_mode")) m.input_mode = parse_input_mode(j.at("input_mode"));
  if (j.contains("query_type")) m.query_type = parse_query_type(j.at("query_type"));
  maybe(j, "query_sigma", m.query_sigma);
  maybe(j, "binary_half_extent", m.binary_half_extent);
  maybe(j, "image_size", m.image_size);
  maybe(j, "bev_channels", m.bev_channels);
  maybe(j, "depth_bins", m.depth_bins);
  maybe(j, "depth_min", m.depth_min);
  maybe(j, "depth_max", m.depth_max);
  maybe(j, "d_model", m.d_model);
  maybe(j, "n_heads", m.n_heads);
  maybe(j, "n_layers", m.n_layers);
  maybe(j, "dual_decoder", m.dual_decoder);
  maybe(j, "dual_stream", m.dual_stream);
  maybe(j, "refinement", m.refinement);
  maybe(j, "refine_sigma", m.refine_sigma);
  maybe(j, "refine_pool", m.refine_pool);
  maybe(j, "gt_map_sigma", m.gt_map_sigma);
  if (j.contains("kv_source")) m.kv_source = parse_kv_source(j.at("kv_source"));
  return m;
}

}  // namespace

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json j;
  j["model"] = model_to_json(cfg.model);
  j["train"] = json{{"batch_size", cfg.train.batch_size},
                    {"learning_rate", cfg.train.learning_rate},
                    {"cosine_decay", cfg.train.cosine_decay},
                    {"steps", cfg.train.steps},
                    {"lambda_map", cfg.train.lambda_map},
                    {"val_fraction", cfg.train.val_fraction},
                    {"window_stride", cfg.train.window_stride},
                    {"log_every", cfg.train.log_every},
                    {"seed", cfg.train.seed}};
  j["data"] = json{{"count", cfg.data.count},
                   {"seed", cfg.data.seed},
                   {"mode", to_string(cfg.data.mode)}};
  j["control"] = json{{"k_e", cfg.control.k_e},
                      {"k_theta", cfg.control.k_theta},
                      {"speed_pid", {{"kp", cfg.control.speed_pid.kp},
                                     {"ki", cfg.control.speed_pid.ki},
                                     {"kd", cfg.control.speed_pid.kd},
                                     {"integral_limit", cfg.control.speed_pid.integral_limit}}},
                      {"steer_pid", {{"kp", cfg.control.steer_pid.kp},
                                     {"ki", cfg.control.steer_pid.ki},
                                     {"kd", cfg.control.steer_pid.kd},
                                     {"integral_limit", cfg.control.steer_pid.integral_limit}}},
                      {"target_speed", cfg.control.target_speed},
                      {"wheelbase", cfg.control.wheelbase},
                      {"timestep", cfg.control.timestep},
                      {"max_steer", cfg.control.max_steer},
                      {"max_accel", cfg.control.max_accel},
                      {"max_steer_rate", cfg.control.max_steer_rate},
                      {"timeout", cfg.control.timeout},
                      {"stop_distance", cfg.control.stop_distance},
                      {"slow_radius", cfg.control.slow_radius},
                      {"creep_fraction", cfg.control.creep_fraction}};
  return j.dump(2);
}

void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("config: cannot open for writing: " + path);
  os << experiment_config_json(cfg) << "\n";
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open: " + path);
  json j;
  is >> j;
  ExperimentConfig cfg;
  if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
  if (j.contains("train")) {
    const json& t = j.at("train");
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "learning_rate", cfg.train.learning_rate);
    maybe(t, "cosine_decay", cfg.train.cosine_decay);
    maybe(t, "steps", cfg.train.steps);
    maybe(t, "lambda_map", cfg.train.lambda_map);
    maybe(t, "val_fraction", cfg.train.val_fraction);
    maybe(t, "window_stride", cfg.train.window_stride);
    maybe(t, "log_every", cfg.train.log_every);
    maybe(t, "seed", cfg.train.seed);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    maybe(d, "count", cfg.data.count);
    maybe(d, "seed", cfg.data.seed);
    if (d.contains("mode")) cfg.data.mode = parse_input_mode(d.at("mode"));
  }
  if (j.contains("control")) {
    const json& c = j.at("control");
    maybe(c, "k_e", cfg.control.k_e);
    maybe(c, "k_theta", cfg.control.k_theta);
    auto read_pid = [&](const char* key, PidGains& g) {
      if (!c.contains(key)) return;
      const json& p = c.at(key);
      maybe(p, "kp", g.kp);
      maybe(p, "ki", g.ki);
      maybe(p, "kd", g.kd);
      maybe(p, "integral_limit", g.integral_limit);
    };
    read_pid("speed_pid", cfg.control.speed_pid);
    read_pid("steer_pid", cfg.control.steer_pid);
    maybe(c, "target_speed", cfg.control.target_speed);
    maybe(c, "wheelbase", cfg.control.wheelbase);
    maybe(c, "timestep", cfg.control.timestep);
    maybe(c, "max_steer", cfg.control.max_steer);
    maybe(c, "max_accel", cfg.control.max_accel);
    maybe(c, "max_steer_rate", cfg.control.max_steer_rate);
    maybe(c, "timeout", cfg.control.timeout);
    maybe(c, "stop_distance", cfg.control.stop_distance);
    maybe(c, "slow_radius", cfg.control.slow_radius);
    maybe(c, "creep_fraction", cfg.control.creep_fraction);
  }
  cfg.model.validate();
  return cfg;
}

}  // namespace parknet
