#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "magnet/synth_data.hpp"
#include "magnet/training.hpp"

namespace magnet {

/// Validation failure naming the offending field or flag.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TrainMode { kNar, kAr, kHybrid };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& text);
/// Layout a training mode needs.
Layout layout_for(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kNar;
  int steps = 2000;
  int batch = 32;
  double learning_rate = 1e-3;
  int span_len = 3;
  int schedule_steps = 20;
  int log_every = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Checks that a task produces grids the model accepts.
void check_compatible(const ModelConfig& model, const SynthConfig& synth);

/// Fresh batch: uniform conditions, generated grids, uniform levels.
TrainBatch sample_batch(const SynthTask& task, int size, Rng& rng);

/// Called every log_every steps and after the last one with the step count
/// and that step's loss (summed losses in hybrid mode).
using TrainLogger = std::function<void(int step, double loss)>;

/// Trains on freshly generated batches. The model layout must match the mode.
void train_on_task(ToyModel& model, const SynthTask& task, const TrainConfig& config,
                   const TrainLogger& log = {});

}  // namespace magnet
