#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "magnet/random.hpp"
#include "magnet/schedules.hpp"
#include "magnet/toy_model.hpp"

namespace magnet {

struct DecodeConfig {
  int length = 64;
  std::vector<int> steps_per_level{20, 10, 10, 10};
  int span_len = 3;
  /// total_steps is ignored here; each level uses its own entry of steps_per_level.
  ScheduleParams schedule;
  /// Fixed guidance and temperature for autoregressive steps.
  double ar_lambda = 3.0;
  double ar_temperature = 1.0;
  /// Weight of the model's probability in the fused confidence.
  double rescorer_weight = 1.0;
  const ToyModel* rescorer = nullptr;
  std::uint64_t seed = 0;

  void validate(const ModelConfig& model) const;
  /// The unconditional pass is elided only when lambda0 == lambda1 == 1.
  bool cfg_enabled() const { return !(schedule.lambda0 == 1.0 && schedule.lambda1 == 1.0); }
  bool ar_cfg_enabled() const { return ar_lambda != 1.0; }
};

struct TraceIteration {
  int level = 0;
  int iteration = 1;  // 1-based
  double gamma = 0.0;
  double lambda = 0.0;
  double tau = 0.0;
  /// Masked cells of the level row going into this iteration.
  std::vector<std::uint8_t> mask;
  std::vector<int> remasked_spans;
  /// Level row after sampling.
  std::vector<TokenId> tokens;
  /// Per time step; zero where nothing was sampled this iteration.
  std::vector<double> model_probs;
  std::vector<double> rescorer_probs;
  std::vector<double> fused_probs;
};

struct DecodeTrace {
  std::vector<TraceIteration> iterations;

  /// Iterations of one level in order.
  std::vector<const TraceIteration*> level(int level) const;
};

struct StepReport {
  int ar_forwards = 0;
  int nar_forwards = 0;
  int rescorer_forwards = 0;
  double wall_ms = 0.0;
  std::vector<int> masked_spans;  // per NAR iteration, in decode order

  int model_forwards() const { return ar_forwards + nar_forwards; }
};

struct DecodeResult {
  TokenGrid grid;
  DecodeTrace trace;
  StepReport report;
};

/// lambda * cond + (1 - lambda) * uncond, in logit space.
std::vector<double> cfg_combine(std::span<const double> cond, std::span<const double> uncond,
                                double lambda);

struct NucleusSample {
  TokenId token = 0;
  double probability = 0.0;  // after truncation and renormalization
};

/// Nucleus probabilities of a logit row: tempered softmax restricted to the
/// smallest descending-probability prefix with mass >= top_p, renormalized.
std::vector<double> nucleus_distribution(std::span<const double> logits, double top_p, double temperature);
NucleusSample nucleus_sample(std::span<const double> logits, double top_p, double temperature, Rng& rng);

/// w * p_model + (1 - w) * p_rescorer, elementwise.
std::vector<double> rescore_fuse(std::span<const double> p_model, std::span<const double> p_rescorer,
                                 double w);

/// Attention used to predict `level` non-autoregressively: the plain-layout
/// level mask, or for the delayed layout the hybrid mask with causal prompt
/// rows before t_switch.
AttnMask prediction_mask(const ModelConfig& config, int level, int length, int t_switch = 0);

/// Iterative span decoding of one level over [region_start, T). Lower levels
/// must be complete there and the level itself fully masked.
void decode_level(const ToyModel& model, TokenGrid& grid, int level, int cond, const DecodeConfig& config,
                  Rng& rng, DecodeTrace& trace, StepReport& report, int region_start = 0);

/// Non-autoregressive decode of every level in order.
DecodeResult decode(const ToyModel& model, int cond, const DecodeConfig& config);

/// Left-to-right sampling over the delayed layout, one uncached forward per
/// delayed step.
DecodeResult decode_ar(const ToyModel& model, int cond, const DecodeConfig& config);

/// Autoregressive prompt for times < t_switch, then span decoding of the rest
/// with the prompt frozen. Needs a delayed-layout model.
DecodeResult decode_hybrid(const ToyModel& model, int cond, int t_switch, const DecodeConfig& config);

/// Seed of batch item `index`.
std::uint64_t item_seed(std::uint64_t seed, std::uint64_t index);

/// Worker count: hardware concurrency capped by MAGNET_THREADS when set.
int worker_threads();

enum class DecodeMode { kNar, kAr, kHybrid };

/// Decodes conds.size() items in parallel; item i uses item_seed(config.seed, i).
std::vector<DecodeResult> decode_batch(const ToyModel& model, std::span<const int> conds,
                                       const DecodeConfig& config, DecodeMode mode = DecodeMode::kNar,
                                       int t_switch = 0, int threads = 0);

/// CSV columns: level, iter, gamma, lambda, tau, masked_spans, remasked_span_ids.
void write_trace_csv(std::ostream& out, const DecodeTrace& trace);

}  // namespace magnet
