#include "parknet/tokenizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace parknet {

void TokenizerConfig::validate() const {
  if (!(range_x > 0.0) || !(range_y > 0.0)) {
    throw std::invalid_argument("tokenizer: half-ranges must be positive");
  }
  if (n_tokens < 2) throw std::invalid_argument("tokenizer: n_tokens must be >= 2");
  if (horizon < 1) throw std::invalid_argument("tokenizer: horizon must be >= 1");
}

int64_t serialize_coord(double p, double half_range, int64_t n_tokens) {
  if (!std::isfinite(p)) {
    throw std::invalid_argument("serialize: coordinate is not finite");
  }
  if (!(half_range > 0.0) || n_tokens < 2) {
    throw std::invalid_argument("serialize: invalid tokenizer settings");
  }
  const double scaled = (p + half_range) / (2.0 * half_range) * static_cast<double>(n_tokens);
  int64_t t = static_cast<int64_t>(std::floor(scaled));
  if (t < 0) t = 0;
  if (t > n_tokens - 1) t = n_tokens - 1;  // p == +R lands on n_tokens before the clamp
  return t;
}

double deserialize_token(int64_t token, double half_range, int64_t n_tokens) {
  if (token < 0 || token >= n_tokens) {
    throw std::logic_error("deserialize: token " + std::to_string(token) +
                           " is not a coordinate token (valid range [0, " +
                           std::to_string(n_tokens - 1) + "])");
  }
  const double bin = 2.0 * half_range / static_cast<double>(n_tokens);
  return (static_cast<double>(token) + 0.5) * bin - half_range;
}

std::pair<TokenSequence, TokenSequence> build_sequences(const std::vector<double>& traj_x,
                                                        const std::vector<double>& traj_y,
                                                        const TokenizerConfig& cfg) {
  cfg.validate();
  if (traj_x.empty() || traj_y.empty()) {
    throw std::invalid_argument("build_sequences: empty trajectory");
  }
  if (traj_x.size() != traj_y.size()) {
    throw std::invalid_argument("build_sequences: axis lengths differ: " +
                                std::to_string(traj_x.size()) + " vs " +
                                std::to_string(traj_y.size()));
  }
  TokenSequence sx{Axis::X, {}};
  TokenSequence sy{Axis::Y, {}};
  sx.tokens.reserve(traj_x.size() + 2);
  sy.tokens.reserve(traj_y.size() + 2);
  sx.tokens.push_back(cfg.bos());
  sy.tokens.push_back(cfg.bos());
  for (size_t i = 0; i < traj_x.size(); ++i) {
    sx.tokens.push_back(serialize_coord(traj_x[i], cfg.range_x, cfg.n_tokens));
    sy.tokens.push_back(serialize_coord(traj_y[i], cfg.range_y, cfg.n_tokens));
  }
  sx.tokens.push_back(cfg.eos());
  sy.tokens.push_back(cfg.eos());
  return {std::move(sx), std::move(sy)};
}

}  // namespace parknet
