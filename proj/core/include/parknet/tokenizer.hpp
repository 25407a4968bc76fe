#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace parknet {

// Discretization of metric trajectory coordinates into a dense token
// vocabulary. Coordinate tokens occupy [0, n_tokens); the three control
// tokens sit above them so the vocabulary stays contiguous.
struct TokenizerConfig {
  double range_x = 10.0;  // half-range in meters, x
  double range_y = 10.0;  // half-range in meters, y
  int64_t n_tokens = 1200;
  int64_t horizon = 30;  // predicted points per sample

  int64_t bos() const { return n_tokens; }
  int64_t eos() const { return n_tokens + 1; }
  int64_t pad() const { return n_tokens + 2; }
  int64_t vocab_size() const { return n_tokens + 3; }

  void validate() const;
};

enum class Axis { X, Y };

struct TokenSequence {
  Axis axis = Axis::X;
  std::vector<int64_t> tokens;  // [BOS, coordinate tokens..., EOS]
};

// Bin index of a coordinate: floor(((p + R) / 2R) * n_tokens), clamped into
// [0, n_tokens - 1]. Out-of-range p clamps to the boundary bins; non-finite
// p is an error.
int64_t serialize_coord(double p, double half_range, int64_t n_tokens);

// Bin-center coordinate of a token: (t + 0.5) * (2R / n_tokens) - R.
// Control tokens (BOS/EOS/PAD) are not coordinates and are rejected.
double deserialize_token(int64_t token, double half_range, int64_t n_tokens);

// Per-axis [BOS, Ser(p_1) ... Ser(p_N), EOS]; both outputs have equal length.
std::pair<TokenSequence, TokenSequence> build_sequences(const std::vector<double>& traj_x,
                                                        const std::vector<double>& traj_y,
                                                        const TokenizerConfig& cfg);

}  // namespace parknet
