#include "magnet/trainer.hpp"

#include "magnet/errors.hpp"
#include "magnet/hybrid_training.hpp"

namespace magnet {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kAr: return "ar";
    case TrainMode::kHybrid: return "hybrid";
    case TrainMode::kNar: break;
  }
  return "nar";
}

TrainMode parse_train_mode(const std::string& text) {
  if (text == "nar") return TrainMode::kNar;
  if (text == "ar") return TrainMode::kAr;
  if (text == "hybrid") return TrainMode::kHybrid;
  throw ConfigError("train.mode must be nar, ar or hybrid (got '" + text + "')");
}

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train.steps must be >= 0");
  if (batch < 1) throw ConfigError("train.batch must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (span_len < 1) throw ConfigError("train.span_len must be >= 1");
  if (schedule_steps < 1) throw ConfigError("train.schedule_steps must be >= 1");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
}

Layout layout_for(TrainMode mode) { return mode == TrainMode::kNar ? Layout::kPlain : Layout::kDelayed; }

void check_compatible(const ModelConfig& model, const SynthConfig& synth) {
  if (model.levels != synth.levels) throw ConfigError("model.levels must equal synth.levels");
  if (model.vocab != synth.vocab) throw ConfigError("model.vocab must equal synth.vocab");
  if (model.cond_count != synth.cond_count) throw ConfigError("model.cond_count must equal synth.cond_count");
  if (model.max_length < synth.length) throw ConfigError("model.max_length must be >= synth.length");
}

TrainBatch sample_batch(const SynthTask& task, int size, Rng& rng) {
  const SynthConfig& sc = task.config();
  std::uniform_int_distribution<int> cond_dist(0, sc.cond_count - 1);
  std::uniform_int_distribution<int> level_dist(0, sc.levels - 1);
  TrainBatch batch;
  for (int i = 0; i < size; ++i) {
    const int cond = cond_dist(rng);
    batch.grids.push_back(generate(task, cond, rng));
    batch.conds.push_back(cond);
    batch.levels.push_back(level_dist(rng));
  }
  return batch;
}

void train_on_task(ToyModel& model, const SynthTask& task, const TrainConfig& config, const TrainLogger& log) {
  config.validate();
  check_compatible(model.config(), task.config());
  if (model.config().layout != layout_for(config.mode)) {
    throw InvalidState(to_string(config.mode) + " training needs a " + to_string(layout_for(config.mode)) +
                       "-layout model");
  }
  Adam<float> optimizer(model, AdamConfig{.learning_rate = config.learning_rate});
  const NarTrainOptions options{.span_len = config.span_len, .schedule_steps = config.schedule_steps};
  Rng rng(config.seed);
  for (int step = 1; step <= config.steps; ++step) {
    const TrainBatch batch = sample_batch(task, config.batch, rng);
    double loss = 0.0;
    switch (config.mode) {
      case TrainMode::kNar: loss = train_step_nar(model, optimizer, batch, options, rng); break;
      case TrainMode::kAr: loss = train_step_ar(model, optimizer, batch, rng); break;
      case TrainMode::kHybrid: {
        const HybridLosses l = hybrid_train_step(model, optimizer, HybridBatch{batch, {}}, options, rng);
        loss = l.loss_ar + l.loss_nar.value_or(0.0);
        break;
      }
    }
    if (log && (step % config.log_every == 0 || step == config.steps)) log(step, loss);
  }
}

}  // namespace magnet
