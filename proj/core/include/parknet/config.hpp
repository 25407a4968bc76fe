#pragma once

#include <cstdint>
#include <string>

#include "parknet/control.hpp"
#include "parknet/grid.hpp"
#include "parknet/tokenizer.hpp"

namespace parknet {

enum class InputMode { DirectBev, Cameras };
enum class QueryType { Gaussian, Binary };
enum class KvSource { Fused, Bev };

InputMode parse_input_mode(const std::string& s);
std::string to_string(InputMode m);
QueryType parse_query_type(const std::string& s);
std::string to_string(QueryType q);
KvSource parse_kv_source(const std::string& s);
std::string to_string(KvSource k);

// Everything the network needs to be constructed. Grid extents must be
// divisible by refine_pool; the token stacks handle any size via strided
// convolution arithmetic.
struct ModelConfig {
  TokenizerConfig tokenizer;  // half-ranges, N_t, horizon Q
  GridSpec grid;              // BEV grid (defaults: 100x100 at 0.2 m over +-10 m)

  InputMode input_mode = InputMode::DirectBev;
  QueryType query_type = QueryType::Gaussian;
  double query_sigma = 5.0;          // cells, slot soft query
  double binary_half_extent = 5.0;   // cells, ablation baseline window

  // camera path
  int64_t image_size = 64;
  int64_t bev_channels = 16;  // C of the splatted BEV feature map
  int64_t depth_bins = 16;
  double depth_min = 0.5;   // meters
  double depth_max = 12.0;

  // decoder
  int64_t d_model = 64;
  int64_t n_heads = 4;
  int64_t n_layers = 2;
  bool dual_decoder = true;  // false = interleaved single-decoder baseline
  bool dual_stream = true;
  bool refinement = true;
  double refine_sigma = 3.0;  // cells on the refinement grid
  int64_t refine_pool = 4;    // BEV -> refinement grid pooling factor
  double gt_map_sigma = 2.0;  // supervision map sigma, refinement grid cells
  KvSource kv_source = KvSource::Fused;

  GridSpec refine_grid() const;
  void validate() const;
};

struct TrainConfig {
  int64_t batch_size = 16;
  double learning_rate = 1e-3;
  bool cosine_decay = true;
  int64_t steps = 2000;
  double lambda_map = 1.0;
  double val_fraction = 0.1;   // split by whole trajectory
  int64_t window_stride = 1;   // take every k-th reorganized window
  int64_t log_every = 50;
  uint64_t seed = 0;
};

struct DataConfig {
  int64_t count = 100;
  uint64_t seed = 7;
  InputMode mode = InputMode::DirectBev;
};

// One JSON file carries every knob; CLI flags mirror these keys.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  ControllerConfig control;
};

ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);
std::string experiment_config_json(const ExperimentConfig& cfg);

}  // namespace parknet
