#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "magnet/training.hpp"

namespace magnet {

/// A training batch plus per-example switch times in 1..T. Leave t_switches
/// empty to have hybrid_train_step draw them.
struct HybridBatch {
  TrainBatch batch;
  std::vector<int> t_switches;

  void validate(const ModelConfig& config) const;
};

/// One hybrid example over the delayed layout of a T-step grid.
///
/// Times before t_switch form the prompt and are trained autoregressively:
/// head j at row t + j predicts (j, t) wherever that row is causal under the
/// mask. The rest is the masked-span region for `level`: lower levels are
/// given, `level` is span-masked and higher levels are MASK.
struct HybridExample {
  int level = 0;
  int t_switch = 0;
  TokenGrid input;  // undelayed, with MASK cells in the region
  AttnMask mask;    // over delayed rows
  std::vector<std::vector<TokenId>> targets;       // per level, per delayed row
  std::vector<std::vector<std::uint8_t>> ar_rows;  // per level, per delayed row
  std::vector<std::uint8_t> nar_rows;              // rows of head `level`

  int ar_count() const;
  int nar_count() const;
};

/// `region_mask` marks masked cells of `level` over [t_switch, T).
HybridExample make_hybrid_example(const TokenGrid& truth, int level, int t_switch,
                                  std::span<const std::uint8_t> region_mask, int window);

struct HybridLosses {
  double loss_ar = 0.0;
  std::optional<double> loss_nar;  // absent when the region is empty
};

/// Per-level delayed-row logits of one example, with its two losses.
struct HybridEvaluation {
  std::vector<Matrix<float>> logits;
  HybridLosses losses;
};

HybridEvaluation evaluate_hybrid(const ToyModel& model, const HybridExample& example, int cond);
/// Losses from given per-level logits (lets tests perturb logits directly).
HybridLosses hybrid_losses(const std::vector<Matrix<float>>& logits, const HybridExample& example);

/// Joint step: autoregressive loss on the prompt plus masked-span loss on the
/// region, summed with equal weight and applied in one update. Returns batch
/// means; loss_nar averages the examples that have a region.
HybridLosses hybrid_train_step(ToyModel& model, Adam<float>& optimizer, const HybridBatch& batch,
                               const NarTrainOptions& options, Rng& rng);

}  // namespace magnet
