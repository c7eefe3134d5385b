#include "magnet/hybrid_training.hpp"

#include <stdexcept>
#include <string>

#include "magnet/errors.hpp"

namespace magnet {

void HybridBatch::validate(const ModelConfig& config) const {
  batch.validate(config);
  if (t_switches.empty()) return;
  if (t_switches.size() != batch.size()) throw std::invalid_argument("one t_switch per example required");
  const int length = batch.grids.front().length();
  for (int t : t_switches) {
    if (t < 1 || t > length) {
      throw std::invalid_argument("t_switch " + std::to_string(t) + " outside [1, " + std::to_string(length) + "]");
    }
  }
}

int HybridExample::ar_count() const {
  int n = 0;
  for (const auto& rows : ar_rows)
    for (auto r : rows) n += r;
  return n;
}

int HybridExample::nar_count() const {
  int n = 0;
  for (auto r : nar_rows) n += r;
  return n;
}

HybridExample make_hybrid_example(const TokenGrid& truth, int level, int t_switch,
                                  std::span<const std::uint8_t> region_mask, int window) {
  const int levels = truth.levels();
  const int length = truth.length();
  if (level < 0 || level >= levels) throw std::invalid_argument("hybrid example: level out of range");
  if (t_switch < 0 || t_switch > length) throw std::invalid_argument("hybrid example: t_switch out of range");
  if (static_cast<int>(region_mask.size()) != length - t_switch) {
    throw std::invalid_argument("hybrid example: region mask must cover [t_switch, T)");
  }
  HybridExample ex;
  ex.level = level;
  ex.t_switch = t_switch;
  ex.input = truth;
  for (int t = t_switch; t < length; ++t) {
    if (region_mask[t - t_switch]) ex.input.set(level, t, truth.mask_id());
    for (int k = level + 1; k < levels; ++k) ex.input.set(k, t, truth.mask_id());
  }
  const DelayLayout layout(levels, length);
  ex.mask = hybrid_mask(layout, t_switch, level, false, level > 0 ? window : -1);

  const int rows = layout.total_steps();
  ex.targets.assign(levels, std::vector<TokenId>(rows, 0));
  ex.ar_rows.assign(levels, std::vector<std::uint8_t>(rows, 0));
  ex.nar_rows.assign(rows, 0);
  for (int j = 0; j < levels; ++j) {
    for (int t = 0; t < length; ++t) {
      const int row = output_row(Layout::kDelayed, j, t);
      ex.targets[j][row] = truth.at(j, t);
      // Causal rows only; a prompt cell whose row is bidirectional for this
      // level would see its own token.
      if (t < t_switch && row - level < t_switch) ex.ar_rows[j][row] = 1;
    }
  }
  for (int t = t_switch; t < length; ++t)
    if (region_mask[t - t_switch]) ex.nar_rows[output_row(Layout::kDelayed, level, t)] = 1;
  return ex;
}

HybridLosses hybrid_losses(const std::vector<Matrix<float>>& logits, const HybridExample& example) {
  const int levels = static_cast<int>(example.targets.size());
  if (static_cast<int>(logits.size()) != levels) throw std::invalid_argument("hybrid_losses: one logit block per level");
  HybridLosses out;
  const int ar_total = example.ar_count();
  if (ar_total > 0) {
    for (int j = 0; j < levels; ++j) {
      int n = 0;
      for (auto r : example.ar_rows[j]) n += r;
      if (n == 0) continue;
      out.loss_ar += masked_ce_loss(logits[j], example.targets[j], example.ar_rows[j]) * n / ar_total;
    }
  }
  if (example.nar_count() > 0) {
    out.loss_nar = masked_ce_loss(logits[example.level], example.targets[example.level], example.nar_rows);
  }
  return out;
}

HybridEvaluation evaluate_hybrid(const ToyModel& model, const HybridExample& example, int cond) {
  if (model.config().layout != Layout::kDelayed) throw InvalidState("hybrid training needs a delayed-layout model");
  const auto acts = model.run(model_input(example.input, Layout::kDelayed), cond, example.mask);
  HybridEvaluation ev;
  for (int j = 0; j < model.config().levels; ++j) ev.logits.push_back(model.head_logits(acts, j));
  ev.losses = hybrid_losses(ev.logits, example);
  return ev;
}

HybridLosses hybrid_train_step(ToyModel& model, Adam<float>& optimizer, const HybridBatch& batch,
                               const NarTrainOptions& options, Rng& rng) {
  const ModelConfig& config = model.config();
  if (config.layout != Layout::kDelayed) throw InvalidState("hybrid_train_step needs a delayed-layout model");
  batch.validate(config);
  model.zero_grad();
  const std::size_t n = batch.batch.size();
  const double scale = 1.0 / static_cast<double>(n);
  HybridLosses out;
  double nar_sum = 0.0;
  int nar_examples = 0;
  for (std::size_t b = 0; b < n; ++b) {
    const TokenGrid& grid = batch.batch.grids[b];
    const int length = grid.length();
    const int t_switch = batch.t_switches.empty() ? std::uniform_int_distribution<int>(1, length)(rng)
                                                  : batch.t_switches[b];
    std::vector<std::uint8_t> region;
    if (t_switch < length) region = sample_nar_masking(length - t_switch, options, rng).row;
    const int level = batch.batch.levels[b];
    const HybridExample ex = make_hybrid_example(grid, level, t_switch, region, config.window);
    int cond = batch.batch.conds[b];
    if (config.cond_dropout > 0.0 && uniform01(rng) < config.cond_dropout) cond = kNullCondition;

    const auto acts = model.run(model_input(ex.input, Layout::kDelayed), cond, ex.mask);
    std::vector<Matrix<float>> logits;
    for (int j = 0; j < config.levels; ++j) logits.push_back(model.head_logits(acts, j));
    const HybridLosses losses = hybrid_losses(logits, ex);

    std::vector<Matrix<float>> dlogits(config.levels);
    const int ar_total = ex.ar_count();
    for (int j = 0; j < config.levels; ++j) {
      int count = 0;
      for (auto r : ex.ar_rows[j]) count += r;
      if (count > 0) {
        dlogits[j] = masked_ce_grad(logits[j], ex.targets[j], ex.ar_rows[j],
                                    scale * count / static_cast<double>(ar_total));
      }
    }
    if (losses.loss_nar) {
      Matrix<float> g = masked_ce_grad(logits[level], ex.targets[level], ex.nar_rows, scale);
      if (dlogits[level].size() == 0) {
        dlogits[level] = std::move(g);
      } else {
        dlogits[level] += g;
      }
      nar_sum += *losses.loss_nar;
      ++nar_examples;
    }
    model.backward(acts, dlogits);
    out.loss_ar += losses.loss_ar * scale;
  }
  optimizer.step(model);
  if (nar_examples > 0) out.loss_nar = nar_sum / nar_examples;
  return out;
}

}  // namespace magnet
