#include "magnet/decoder.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

#include "magnet/errors.hpp"
#include "magnet/span_math.hpp"

namespace magnet {

void DecodeConfig::validate(const ModelConfig& model) const {
  if (length < 1 || length > model.max_length) {
    throw std::invalid_argument("decode.length must be in [1, " + std::to_string(model.max_length) + "]");
  }
  if (static_cast<int>(steps_per_level.size()) != model.levels) {
    throw std::invalid_argument("decode.steps_per_level needs " + std::to_string(model.levels) + " entries");
  }
  for (int s : steps_per_level)
    if (s < 1) throw std::invalid_argument("decode.steps_per_level entries must be >= 1");
  if (span_len < 1) throw std::invalid_argument("decode.span_len must be >= 1");
  schedule.validate();
  if (!std::isfinite(ar_lambda)) throw std::invalid_argument("decode.ar_lambda must be finite");
  if (!(ar_temperature > 0.0)) throw std::invalid_argument("decode.ar_temperature must be > 0");
  if (!(rescorer_weight >= 0.0 && rescorer_weight <= 1.0)) {
    throw std::invalid_argument("decode.rescorer_weight must be in [0, 1]");
  }
  if (rescorer != nullptr) {
    const ModelConfig& r = rescorer->config();
    if (r.levels != model.levels || r.vocab != model.vocab || r.max_length < length) {
      throw std::invalid_argument("decode.rescorer does not match the model geometry");
    }
  }
}

std::vector<const TraceIteration*> DecodeTrace::level(int level) const {
  std::vector<const TraceIteration*> out;
  for (const auto& it : iterations)
    if (it.level == level) out.push_back(&it);
  return out;
}

std::vector<double> cfg_combine(std::span<const double> cond, std::span<const double> uncond,
                                double lambda) {
  if (cond.size() != uncond.size()) throw std::invalid_argument("cfg_combine: shape mismatch");
  std::vector<double> out(cond.size());
  for (std::size_t i = 0; i < cond.size(); ++i) out[i] = lambda * cond[i] + (1.0 - lambda) * uncond[i];
  return out;
}

std::vector<double> nucleus_distribution(std::span<const double> logits, double top_p, double temperature) {
  if (logits.empty()) throw std::invalid_argument("nucleus: empty logits");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("nucleus: top_p must be in (0, 1]");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("nucleus: temperature must be positive");
  }
  for (double v : logits)
    if (!std::isfinite(v)) throw std::invalid_argument("nucleus: non-finite logit");
  const double temp = std::max(temperature, kMinTemperature);
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp((logits[i] - peak) / temp);
    total += probs[i];
  }
  for (double& p : probs) p /= total;

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> kept(probs.size(), 0.0);
  double mass = 0.0;
  for (std::size_t i : order) {
    kept[i] = probs[i];
    mass += probs[i];
    if (mass >= top_p) break;
  }
  for (double& p : kept) p /= mass;
  return kept;
}

NucleusSample nucleus_sample(std::span<const double> logits, double top_p, double temperature, Rng& rng) {
  const std::vector<double> probs = nucleus_distribution(logits, top_p, temperature);
  const double u = uniform01(rng);
  double cum = 0.0;
  std::size_t pick = probs.size();
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    cum += probs[i];
    if (u < cum) {
      pick = i;
      break;
    }
  }
  if (pick == probs.size()) pick = last;  // rounding left u above the final sum
  return {static_cast<TokenId>(pick), probs[pick]};
}

std::vector<double> rescore_fuse(std::span<const double> p_model, std::span<const double> p_rescorer,
                                 double w) {
  if (p_model.size() != p_rescorer.size()) throw std::invalid_argument("rescore_fuse: shape mismatch");
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("rescore_fuse: w must be in [0, 1]");
  std::vector<double> out(p_model.size());
  for (std::size_t i = 0; i < p_model.size(); ++i) out[i] = w * p_model[i] + (1.0 - w) * p_rescorer[i];
  return out;
}

AttnMask prediction_mask(const ModelConfig& config, int level, int length, int t_switch) {
  if (config.layout == Layout::kPlain) return level_attention(config, level, length);
  const int window = (level > 0 && config.window >= 0) ? config.window : -1;
  return hybrid_mask(DelayLayout(config.levels, length), t_switch, level, false, window);
}

namespace {

std::vector<double> row_of(const Matrix<float>& m, int r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (int c = 0; c < m.cols(); ++c) out[c] = m(r, c);
  return out;
}

double softmax_at(const Matrix<float>& m, int r, TokenId token) {
  double peak = m(r, 0);
  for (int c = 1; c < m.cols(); ++c) peak = std::max(peak, static_cast<double>(m(r, c)));
  double total = 0.0;
  for (int c = 0; c < m.cols(); ++c) total += std::exp(m(r, c) - peak);
  return std::exp(m(r, token) - peak) / total;
}

void check_level_ready(const TokenGrid& grid, int level, int region_start) {
  for (int k = 0; k < grid.levels(); ++k) {
    for (int t = region_start; t < grid.length(); ++t) {
      const bool masked = grid.is_masked(k, t);
      if (k < level && masked) {
        throw InvalidState("decode_level " + std::to_string(level) + ": level " + std::to_string(k) +
                           " is not decoded yet");
      }
      if (k == level && !masked) {
        throw InvalidState("decode_level " + std::to_string(level) + ": level is not fully masked");
      }
    }
  }
}

// Samples every undelayed cell with time < t_switch, one delayed step per
// forward. Cells at or after t_switch stay MASK.
void run_ar_phase(const ToyModel& model, TokenGrid& grid, int cond, int t_switch, const DecodeConfig& config,
                  Rng& rng, StepReport& report) {
  if (t_switch == 0) return;
  const int levels = grid.levels();
  const int steps = t_switch + levels - 1;
  const bool cfg = config.ar_cfg_enabled();
  for (int s = 0; s < steps; ++s) {
    const TokenGrid full = model_input(grid, Layout::kDelayed);
    TokenGrid prefix(levels, s + 1, grid.vocab(), grid.pad_id());
    for (int k = 0; k < levels; ++k)
      for (int p = 0; p <= s; ++p) prefix.set(k, p, full.at(k, p));
    const AttnMask mask = causal_mask(s + 1);
    const auto acts = model.run(prefix, cond, mask);
    ++report.ar_forwards;
    Activations<float> uncond_acts;
    if (cfg) {
      uncond_acts = model.run(prefix, kNullCondition, mask);
      ++report.ar_forwards;
    }
    for (int k = 0; k < levels; ++k) {
      const int t = s - k;
      if (t < 0 || t >= t_switch) continue;
      std::vector<double> logits = row_of(model.head_logits(acts, k), s);
      if (cfg) logits = cfg_combine(logits, row_of(model.head_logits(uncond_acts, k), s), config.ar_lambda);
      grid.set(k, t, nucleus_sample(logits, config.schedule.top_p, config.ar_temperature, rng).token);
    }
  }
}

DecodeResult decode_impl(const ToyModel& model, int cond, int t_switch, const DecodeConfig& config) {
  const ModelConfig& mc = model.config();
  config.validate(mc);
  if (cond != kNullCondition && (cond < 0 || cond >= mc.cond_count)) {
    throw std::invalid_argument("condition " + std::to_string(cond) + " out of range");
  }
  if (t_switch < 0 || t_switch > config.length) {
    throw std::invalid_argument("t_switch must be in [0, " + std::to_string(config.length) + "]");
  }
  const auto start = std::chrono::steady_clock::now();
  DecodeResult out;
  out.grid = TokenGrid::fully_masked(mc.levels, config.length, mc.vocab);
  Rng rng(config.seed);
  run_ar_phase(model, out.grid, cond, t_switch, config, rng, out.report);
  if (t_switch < config.length) {
    for (int k = 0; k < mc.levels; ++k) {
      decode_level(model, out.grid, k, cond, config, rng, out.trace, out.report, t_switch);
    }
  }
  out.report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void require_delayed(const ToyModel& model, const char* what) {
  if (model.config().layout != Layout::kDelayed) {
    throw InvalidState(std::string(what) + " needs a delayed-layout model");
  }
}

}  // namespace

void decode_level(const ToyModel& model, TokenGrid& grid, int level, int cond, const DecodeConfig& config,
                  Rng& rng, DecodeTrace& trace, StepReport& report, int region_start) {
  const ModelConfig& mc = model.config();
  if (grid.levels() != mc.levels || grid.vocab() != mc.vocab) {
    throw std::invalid_argument("decode_level: grid does not match the model");
  }
  if (level < 0 || level >= mc.levels) throw std::invalid_argument("decode_level: level out of range");
  const int length = grid.length();
  if (region_start < 0 || region_start > length) throw std::invalid_argument("decode_level: bad region start");
  if (mc.layout == Layout::kPlain && region_start != 0) {
    throw InvalidState("decode_level: plain-layout models decode whole rows");
  }
  check_level_ready(grid, level, region_start);
  const int region = length - region_start;
  if (region == 0) return;

  const int steps = config.steps_per_level.at(static_cast<std::size_t>(level));
  const SpanPartition partition(region, std::min(config.span_len, region), region_start);
  const int n_spans = partition.size();
  std::vector<double> scores(n_spans, 0.0);
  std::vector<std::uint8_t> fixed(n_spans, 0);
  const AttnMask mask = prediction_mask(mc, level, length, region_start);
  AttnMask rescorer_mask;
  if (config.rescorer != nullptr) rescorer_mask = prediction_mask(config.rescorer->config(), level, length, region_start);
  const bool cfg = config.cfg_enabled();
  const double w = config.rescorer_weight;

  for (int i = 1; i <= steps; ++i) {
    TraceIteration it;
    it.level = level;
    it.iteration = i;
    it.gamma = gamma(i, steps);
    it.lambda = cfg_coeff(it.gamma, config.schedule.lambda0, config.schedule.lambda1);
    it.tau = temperature(i, steps, config.schedule.tau0);
    const int n_mask = std::max(static_cast<int>(std::floor(it.gamma * n_spans)), 1);
    it.remasked_spans = select_spans_to_mask(scores, fixed, n_mask);

    std::vector<std::uint8_t> chosen(n_spans, 0);
    for (int j : it.remasked_spans) chosen[j] = 1;
    for (int j = 0; j < n_spans; ++j)
      if (!chosen[j]) fixed[j] = 1;
    for (int j : it.remasked_spans)
      for (int t = partition.begin(j); t < partition.end(j); ++t) grid.set(level, t, grid.mask_id());
    it.mask.assign(length, 0);
    for (int t = 0; t < length; ++t) it.mask[t] = grid.is_masked(level, t) ? 1 : 0;

    const Matrix<float> cond_logits = forward(model, grid, level, cond, mask);
    ++report.nar_forwards;
    Matrix<float> uncond_logits;
    if (cfg) {
      uncond_logits = forward(model, grid, level, kNullCondition, mask);
      ++report.nar_forwards;
    }

    it.model_probs.assign(length, 0.0);
    for (int j : it.remasked_spans) {
      for (int t = partition.begin(j); t < partition.end(j); ++t) {
        std::vector<double> logits = row_of(cond_logits, t);
        if (cfg) logits = cfg_combine(logits, row_of(uncond_logits, t), it.lambda);
        const NucleusSample sample = nucleus_sample(logits, config.schedule.top_p, it.tau, rng);
        grid.set(level, t, sample.token);
        it.model_probs[t] = sample.probability;
      }
    }

    it.rescorer_probs.assign(length, 0.0);
    if (config.rescorer != nullptr) {
      const Matrix<float> r_logits = forward(*config.rescorer, grid, level, cond, rescorer_mask);
      ++report.rescorer_forwards;
      for (int j : it.remasked_spans)
        for (int t = partition.begin(j); t < partition.end(j); ++t)
          it.rescorer_probs[t] = softmax_at(r_logits, t, grid.at(level, t));
      it.fused_probs = rescore_fuse(it.model_probs, it.rescorer_probs, w);
    } else {
      it.fused_probs = it.model_probs;
    }

    const std::vector<double> region_probs(it.fused_probs.begin() + region_start, it.fused_probs.end());
    const std::vector<double> span_conf = span_scores(region_probs, partition);
    for (int j : it.remasked_spans) scores[j] = span_conf[j];

    it.tokens.assign(grid.row(level).begin(), grid.row(level).end());
    report.masked_spans.push_back(n_mask);
    trace.iterations.push_back(std::move(it));
  }
}

DecodeResult decode(const ToyModel& model, int cond, const DecodeConfig& config) {
  return decode_impl(model, cond, 0, config);
}

DecodeResult decode_ar(const ToyModel& model, int cond, const DecodeConfig& config) {
  require_delayed(model, "decode_ar");
  return decode_impl(model, cond, config.length, config);
}

DecodeResult decode_hybrid(const ToyModel& model, int cond, int t_switch, const DecodeConfig& config) {
  require_delayed(model, "decode_hybrid");
  return decode_impl(model, cond, t_switch, config);
}

std::uint64_t item_seed(std::uint64_t seed, std::uint64_t index) { return derive_rng(seed, index)(); }

int worker_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("MAGNET_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (*end != '\0' || cap < 1) throw std::invalid_argument("MAGNET_THREADS must be a positive integer");
    n = std::min<long>(n, cap);
  }
  return n;
}

std::vector<DecodeResult> decode_batch(const ToyModel& model, std::span<const int> conds,
                                       const DecodeConfig& config, DecodeMode mode, int t_switch,
                                       int threads) {
  std::vector<DecodeResult> results(conds.size());
  const int workers = std::max(1, std::min<int>(threads > 0 ? threads : worker_threads(),
                                                static_cast<int>(conds.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < conds.size(); i = next++) {
      try {
        DecodeConfig item = config;
        item.seed = item_seed(config.seed, i);
        switch (mode) {
          case DecodeMode::kNar: results[i] = decode(model, conds[i], item); break;
          case DecodeMode::kAr: results[i] = decode_ar(model, conds[i], item); break;
          case DecodeMode::kHybrid: results[i] = decode_hybrid(model, conds[i], t_switch, item); break;
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

void write_trace_csv(std::ostream& out, const DecodeTrace& trace) {
  const auto precision = out.precision(10);
  out << "level,iter,gamma,lambda,tau,masked_spans,remasked_span_ids\n";
  for (const auto& it : trace.iterations) {
    out << it.level << ',' << it.iteration << ',' << it.gamma << ',' << it.lambda << ',' << it.tau << ','
        << it.remasked_spans.size() << ',';
    for (std::size_t j = 0; j < it.remasked_spans.size(); ++j) out << (j ? ";" : "") << it.remasked_spans[j];
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace magnet
