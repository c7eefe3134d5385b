#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "magnet/random.hpp"
#include "magnet/token_grid.hpp"

namespace magnet {

struct SynthConfig {
  int levels = 4;
  int length = 64;
  int vocab = 32;
  int cond_count = 4;
  int dep_window = 2;     // level k > 0 depends on level k-1 within +-dep_window
  int branching = 2;      // likely successors per level-0 state
  double noise = 0.01;    // transition mass spread uniformly over all states
  std::uint64_t seed = 1;

  void validate() const;
};

/// Synthetic stand-in for residual-quantized token streams with a known
/// local dependency structure.
///
/// Level 0 follows a per-condition Markov chain with a few likely successors
/// per state. Every higher level is a deterministic function of the level
/// below it inside a +-dep_window neighbourhood: bit b of the level-k token is
/// a salted hash bit of the level-(k-1) token at window offset b (offsets
/// cycle when the window is shorter than the bit width), XORed with a
/// per-level salt. Boundaries reflect.
class SynthTask {
 public:
  explicit SynthTask(const SynthConfig& config);

  const SynthConfig& config() const { return config_; }
  /// Row-stochastic N x N transition matrix of a condition, row-major.
  std::span<const double> transitions(int cond) const;
  double transition(int cond, TokenId from, TokenId to) const;
  /// Level-k token produced from a window of 2*dep_window+1 level-(k-1) tokens.
  TokenId residual(int level, std::span<const TokenId> window) const;
  /// Level-k token at time t computed from `lower`, the level-(k-1) row.
  TokenId residual_at(int level, std::span<const TokenId> lower, int t) const;

  /// Stationary entropy rate (nats per step) of a condition's chain.
  double entropy_rate(int cond) const;

 private:
  SynthConfig config_;
  int bits_;
  std::vector<double> transitions_;             // C x N x N
  std::vector<std::uint64_t> bit_salts_;        // (K-1) x bits
  std::vector<TokenId> level_salts_;            // K
};

TokenGrid generate(const SynthTask& task, int cond, Rng& rng);

/// Fraction of cells at levels > 0 equal to the residual of the grid's own
/// level below. Returns 1 when the grid has a single level.
double consistency_score(const TokenGrid& grid, const SynthTask& task);

/// Mean negative log-likelihood per level-0 (coarsest) transition under the condition's
/// true chain.
double coarse_level_nll(const TokenGrid& grid, const SynthTask& task, int cond);

}  // namespace magnet
