#pragma once

#include <cstdint>
#include <vector>

#include "magnet/random.hpp"
#include "magnet/toy_model.hpp"

namespace magnet {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Plain Adam over a model's parameter list.
template <typename Real>
class Adam {
 public:
  Adam(const BasicToyModel<Real>& model, AdamConfig config = {});

  /// Applies one update from the accumulated gradients, then zeroes them.
  void step(BasicToyModel<Real>& model);
  std::int64_t steps_taken() const { return step_; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Matrix<Real>> m_;
  std::vector<Matrix<Real>> v_;
};

/// One batch of ground-truth grids with their condition labels and the
/// (0-based) codebook level each example trains.
struct TrainBatch {
  std::vector<TokenGrid> grids;
  std::vector<int> conds;
  std::vector<int> levels;

  std::size_t size() const { return grids.size(); }
  void validate(const ModelConfig& config) const;
};

struct NarTrainOptions {
  int span_len = 3;
  /// Masking rates are drawn as gamma(i; s) with i uniform in 1..s.
  int schedule_steps = 20;
};

/// Per-example masking drawn for one non-autoregressive step.
struct NarMasking {
  int step = 1;
  double rate = 1.0;
  int num_spans = 0;
  std::vector<std::uint8_t> row;
};

/// Samples the masked positions of one example: a decode step, its cosine
/// rate, the span count matching that rate, and a span placement. When the
/// span count saturates the rate (rate == 1) the whole row is masked.
NarMasking sample_nar_masking(int length, const NarTrainOptions& options, Rng& rng);

/// Masked-span training step. Levels below each example's level are teacher
/// forced, its level is span-masked, levels above are masked out, and the
/// condition is dropped to NULL with the model's cond_dropout. Returns the
/// batch-mean loss before the update.
double train_step_nar(ToyModel& model, Adam<float>& optimizer, const TrainBatch& batch,
                      const NarTrainOptions& options, Rng& rng);

/// Next-step cross-entropy over every non-padding cell of the delayed layout
/// under a causal mask. Returns the batch-mean loss before the update.
double train_step_ar(ToyModel& model, Adam<float>& optimizer, const TrainBatch& batch, Rng& rng);

/// Batch-mean masked-span loss without touching parameters (fixed masking).
template <typename Real>
double nar_loss(const BasicToyModel<Real>& model, const TrainBatch& batch,
                const std::vector<std::vector<std::uint8_t>>& mask_rows);

struct GradCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
};

/// Compares analytic gradients of the masked-span loss against central finite
/// differences on `samples` randomly chosen parameters. `analytic_scale`
/// multiplies the analytic side (1 for a real check; other values exercise
/// the checker itself). The relative error uses max(|a| + |n|, 1e-6) as the
/// denominator so that vanishing gradients compare absolutely.
GradCheckResult grad_check(BasicToyModel<double>& model, const TrainBatch& batch,
                           const std::vector<std::vector<std::uint8_t>>& mask_rows, int samples,
                           std::uint64_t seed, double step = 1e-5, double analytic_scale = 1.0);

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace magnet
