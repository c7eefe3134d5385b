#include "magnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "magnet/errors.hpp"
#include "magnet/schedules.hpp"
#include "magnet/span_math.hpp"

namespace magnet {

template <typename Real>
Adam<Real>::Adam(const BasicToyModel<Real>& model, AdamConfig config) : config_(config) {
  for (const auto& p : model.parameters()) {
    m_.push_back(Matrix<Real>::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix<Real>::Zero(p.value.rows(), p.value.cols()));
  }
}

template <typename Real>
void Adam<Real>::step(BasicToyModel<Real>& model) {
  auto& params = model.parameters();
  if (params.size() != m_.size()) throw std::invalid_argument("optimizer was built for a different model");
  ++step_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const Real lr = static_cast<Real>(config_.learning_rate * std::sqrt(bias2) / bias1);
  const Real b1 = static_cast<Real>(config_.beta1);
  const Real b2 = static_cast<Real>(config_.beta2);
  const Real eps = static_cast<Real>(config_.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    m_[i] = b1 * m_[i] + (Real(1) - b1) * p.grad;
    v_[i] = b2 * v_[i] + (Real(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * m_[i].array() / (v_[i].array().sqrt() + eps);
    p.grad.setZero();
  }
}

void TrainBatch::validate(const ModelConfig& config) const {
  if (grids.empty()) throw std::invalid_argument("empty training batch");
  if (conds.size() != grids.size() || levels.size() != grids.size()) {
    throw std::invalid_argument("training batch fields have inconsistent sizes");
  }
  for (std::size_t b = 0; b < grids.size(); ++b) {
    const auto& g = grids[b];
    if (g.levels() != config.levels || g.vocab() != config.vocab || g.length() > config.max_length) {
      throw std::invalid_argument("training grid " + std::to_string(b) + " does not fit the model");
    }
    if (g.length() != grids.front().length()) throw std::invalid_argument("training grids differ in length");
    if (levels[b] < 0 || levels[b] >= config.levels) {
      throw std::invalid_argument("training level " + std::to_string(levels[b]) + " out of range");
    }
    if (g.count(g.mask_id()) != 0) throw std::invalid_argument("training targets contain MASK cells");
  }
}

NarMasking sample_nar_masking(int length, const NarTrainOptions& options, Rng& rng) {
  if (options.schedule_steps < 1) throw std::invalid_argument("schedule_steps must be >= 1");
  const int span_len = std::min(options.span_len, length);
  NarMasking out;
  out.step = std::uniform_int_distribution<int>(1, options.schedule_steps)(rng);
  out.rate = gamma(out.step, options.schedule_steps);
  out.num_spans = solve_num_spans(length, span_len, out.rate);
  if (expected_mask_rate(length, span_len, out.num_spans) >= 1.0) {
    out.row.assign(length, 1);
  } else {
    out.row = sample_training_spans(length, span_len, out.num_spans, rng);
  }
  return out;
}

namespace {

template <typename Real>
TokenGrid nar_input(const TokenGrid& grid, int level, std::span<const std::uint8_t> row) {
  TokenGrid input = grid;
  for (int t = 0; t < grid.length(); ++t)
    if (row[t]) input.set(level, t, grid.mask_id());
  for (int k = level + 1; k < grid.levels(); ++k)
    for (int t = 0; t < grid.length(); ++t) input.set(k, t, grid.mask_id());
  return input;
}

// Forward state of one plain-layout masked-span example. The mask lives on
// the heap so the activations' pointer to it survives moves.
template <typename Real>
struct NarPass {
  std::unique_ptr<AttnMask> mask;
  Activations<Real> acts;
  Matrix<Real> logits;
  double loss = 0.0;
};

template <typename Real>
NarPass<Real> nar_pass(const BasicToyModel<Real>& model, const TokenGrid& grid, int level, int cond,
                       std::span<const std::uint8_t> row) {
  NarPass<Real> pass;
  pass.mask = std::make_unique<AttnMask>(level_attention(model.config(), level, grid.length()));
  pass.acts = model.run(nar_input<Real>(grid, level, row), cond, *pass.mask);
  pass.logits = model.head_logits(pass.acts, level);
  pass.loss = masked_ce_loss(pass.logits, grid.row(level), row);
  return pass;
}

// Runs one example and accumulates its gradient scaled by `scale`.
template <typename Real>
double nar_backward(BasicToyModel<Real>& model, const TokenGrid& grid, int level, int cond,
                    std::span<const std::uint8_t> row, double scale) {
  const auto pass = nar_pass(model, grid, level, cond, row);
  std::vector<Matrix<Real>> dlogits(model.config().levels);
  dlogits[level] = masked_ce_grad(pass.logits, grid.row(level), row, scale);
  model.backward(pass.acts, dlogits);
  return pass.loss;
}

void require_layout(const ModelConfig& config, Layout layout, const char* what) {
  if (config.layout != layout) {
    throw InvalidState(std::string(what) + " needs a " + to_string(layout) + "-layout model, got " +
                       to_string(config.layout));
  }
}

int maybe_drop(int cond, double dropout, Rng& rng) {
  if (dropout <= 0.0) return cond;
  return uniform01(rng) < dropout ? kNullCondition : cond;
}

}  // namespace

double train_step_nar(ToyModel& model, Adam<float>& optimizer, const TrainBatch& batch,
                      const NarTrainOptions& options, Rng& rng) {
  const ModelConfig& config = model.config();
  require_layout(config, Layout::kPlain, "train_step_nar");
  batch.validate(config);
  model.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& grid = batch.grids[b];
    const NarMasking masking = sample_nar_masking(grid.length(), options, rng);
    const int cond = maybe_drop(batch.conds[b], config.cond_dropout, rng);
    total += nar_backward(model, grid, batch.levels[b], cond, masking.row, scale);
  }
  optimizer.step(model);
  return total * scale;
}

double train_step_ar(ToyModel& model, Adam<float>& optimizer, const TrainBatch& batch, Rng& rng) {
  const ModelConfig& config = model.config();
  require_layout(config, Layout::kDelayed, "train_step_ar");
  batch.validate(config);
  model.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size() * config.levels);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& grid = batch.grids[b];
    const int cond = maybe_drop(batch.conds[b], config.cond_dropout, rng);
    const TokenGrid input = model_input(grid, Layout::kDelayed);
    const int rows = input.length();
    const AttnMask mask = causal_mask(rows);
    const auto acts = model.run(input, cond, mask);
    std::vector<Matrix<float>> dlogits(config.levels);
    for (int k = 0; k < config.levels; ++k) {
      std::vector<TokenId> targets(rows, 0);
      std::vector<std::uint8_t> selected(rows, 0);
      for (int t = 0; t < grid.length(); ++t) {
        targets[output_row(Layout::kDelayed, k, t)] = grid.at(k, t);
        selected[output_row(Layout::kDelayed, k, t)] = 1;
      }
      const Matrix<float> logits = model.head_logits(acts, k);
      total += masked_ce_loss(logits, targets, selected) / config.levels;
      dlogits[k] = masked_ce_grad(logits, targets, selected, scale);
    }
    model.backward(acts, dlogits);
  }
  optimizer.step(model);
  return total / static_cast<double>(batch.size());
}

template <typename Real>
double nar_loss(const BasicToyModel<Real>& model, const TrainBatch& batch,
                const std::vector<std::vector<std::uint8_t>>& mask_rows) {
  batch.validate(model.config());
  if (mask_rows.size() != batch.size()) throw std::invalid_argument("one mask row per example required");
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    total += nar_pass(model, batch.grids[b], batch.levels[b], batch.conds[b], mask_rows[b]).loss;
  }
  return total / static_cast<double>(batch.size());
}

GradCheckResult grad_check(BasicToyModel<double>& model, const TrainBatch& batch,
                           const std::vector<std::vector<std::uint8_t>>& mask_rows, int samples,
                           std::uint64_t seed, double step, double analytic_scale) {
  batch.validate(model.config());
  if (mask_rows.size() != batch.size()) throw std::invalid_argument("one mask row per example required");
  model.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    nar_backward(model, batch.grids[b], batch.levels[b], batch.conds[b], mask_rows[b], scale);
  }

  auto& params = model.parameters();
  std::vector<std::size_t> offsets{0};
  for (const auto& p : params) offsets.push_back(offsets.back() + static_cast<std::size_t>(p.value.size()));
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, offsets.back() - 1);

  GradCheckResult result;
  for (int s = 0; s < samples; ++s) {
    const std::size_t flat = pick(rng);
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
    const std::size_t pi = static_cast<std::size_t>(it - offsets.begin()) - 1;
    double& value = params[pi].value.data()[flat - offsets[pi]];
    const double analytic = params[pi].grad.data()[flat - offsets[pi]] * analytic_scale;
    const double original = value;
    value = original + step;
    const double plus = nar_loss(model, batch, mask_rows);
    value = original - step;
    const double minus = nar_loss(model, batch, mask_rows);
    value = original;
    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.checked;
  }
  return result;
}

template class Adam<float>;
template class Adam<double>;
template double nar_loss(const BasicToyModel<float>&, const TrainBatch&,
                         const std::vector<std::vector<std::uint8_t>>&);
template double nar_loss(const BasicToyModel<double>&, const TrainBatch&,
                         const std::vector<std::vector<std::uint8_t>>&);

}  // namespace magnet
