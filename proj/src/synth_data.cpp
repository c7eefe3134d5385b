#include "magnet/synth_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "magnet/errors.hpp"

namespace magnet {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int reflect(int t, int length) {
  if (length == 1) return 0;
  const int period = 2 * (length - 1);
  t %= period;
  if (t < 0) t += period;
  return t < length ? t : period - t;
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("synth." + field + ": " + why);
  };
  if (levels < 1) fail("levels", "must be positive");
  if (length < 1) fail("length", "must be positive");
  if (vocab < 2) fail("vocab", "must be at least 2");
  if (cond_count < 1) fail("cond_count", "must be positive");
  if (dep_window < 0) fail("dep_window", "must be non-negative");
  if (branching < 1 || branching > vocab) fail("branching", "must lie in [1, vocab]");
  if (!(noise >= 0.0 && noise <= 1.0)) fail("noise", "must lie in [0, 1]");
}

SynthTask::SynthTask(const SynthConfig& config) : config_(config) {
  config_.validate();
  const int n = config_.vocab;
  bits_ = std::bit_width(static_cast<unsigned>(n)) - 1;  // floor(log2 N)
  Rng rng(config_.seed);

  transitions_.assign(static_cast<std::size_t>(config_.cond_count) * n * n, 0.0);
  std::vector<int> states(n);
  std::gamma_distribution<double> dirichlet_part(2.0, 1.0);
  for (int c = 0; c < config_.cond_count; ++c) {
    for (int from = 0; from < n; ++from) {
      double* row = &transitions_[(static_cast<std::size_t>(c) * n + from) * n];
      std::iota(states.begin(), states.end(), 0);
      std::shuffle(states.begin(), states.end(), rng);
      std::vector<double> weights(config_.branching);
      for (auto& w : weights) w = dirichlet_part(rng);
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      for (int to = 0; to < n; ++to) row[to] = config_.noise / n;
      for (int j = 0; j < config_.branching; ++j) row[states[j]] += (1.0 - config_.noise) * weights[j] / total;
      const double sum = std::accumulate(row, row + n, 0.0);
      for (int to = 0; to < n; ++to) row[to] /= sum;
    }
  }
  for (int k = 1; k < config_.levels; ++k) {
    for (int b = 0; b < bits_; ++b) bit_salts_.push_back(rng());
  }
  level_salts_.push_back(0);
  for (int k = 1; k < config_.levels; ++k) {
    level_salts_.push_back(static_cast<TokenId>(rng() & ((1u << bits_) - 1u)));
  }
}

std::span<const double> SynthTask::transitions(int cond) const {
  if (cond < 0 || cond >= config_.cond_count) {
    throw std::invalid_argument("condition " + std::to_string(cond) + " outside [0, " +
                                std::to_string(config_.cond_count) + ")");
  }
  const std::size_t n = static_cast<std::size_t>(config_.vocab);
  return std::span<const double>(transitions_).subspan(static_cast<std::size_t>(cond) * n * n, n * n);
}

double SynthTask::transition(int cond, TokenId from, TokenId to) const {
  return transitions(cond)[static_cast<std::size_t>(from) * config_.vocab + to];
}

TokenId SynthTask::residual(int level, std::span<const TokenId> window) const {
  const int width = 2 * config_.dep_window + 1;
  if (level < 1 || level >= config_.levels) throw std::invalid_argument("residual level out of range");
  if (static_cast<int>(window.size()) != width) throw std::invalid_argument("residual window has wrong width");
  TokenId value = 0;
  for (int b = 0; b < bits_; ++b) {
    const auto salt = bit_salts_[static_cast<std::size_t>(level - 1) * bits_ + b];
    const auto token = static_cast<std::uint64_t>(window[b % width]);
    value |= static_cast<TokenId>((mix64(salt ^ token) >> 17) & 1u) << b;
  }
  return value ^ level_salts_[level];
}

TokenId SynthTask::residual_at(int level, std::span<const TokenId> lower, int t) const {
  const int width = 2 * config_.dep_window + 1;
  std::vector<TokenId> window(width);
  const int length = static_cast<int>(lower.size());
  for (int j = 0; j < width; ++j) window[j] = lower[reflect(t - config_.dep_window + j, length)];
  return residual(level, window);
}

double SynthTask::entropy_rate(int cond) const {
  const auto p = transitions(cond);
  const int n = config_.vocab;
  std::vector<double> pi(n, 1.0 / n), next(n);
  for (int iter = 0; iter < 10000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) next[j] += pi[i] * p[static_cast<std::size_t>(i) * n + j];
    double delta = 0.0;
    for (int j = 0; j < n; ++j) delta += std::abs(next[j] - pi[j]);
    pi.swap(next);
    if (delta < 1e-14) break;
  }
  double h = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double q = p[static_cast<std::size_t>(i) * n + j];
      if (q > 0.0) h -= pi[i] * q * std::log(q);
    }
  }
  return h;
}

TokenGrid generate(const SynthTask& task, int cond, Rng& rng) {
  const auto& c = task.config();
  const auto p = task.transitions(cond);
  TokenGrid grid(c.levels, c.length, c.vocab, 0);
  TokenId state = std::uniform_int_distribution<TokenId>(0, c.vocab - 1)(rng);
  for (int t = 0; t < c.length; ++t) {
    grid.set(0, t, state);
    const double* row = &p[static_cast<std::size_t>(state) * c.vocab];
    std::discrete_distribution<TokenId> next(row, row + c.vocab);
    state = next(rng);
  }
  for (int k = 1; k < c.levels; ++k) {
    const auto lower = grid.row(k - 1);
    for (int t = 0; t < c.length; ++t) grid.set(k, t, task.residual_at(k, lower, t));
  }
  return grid;
}

double consistency_score(const TokenGrid& grid, const SynthTask& task) {
  if (grid.count(grid.mask_id()) != 0 || grid.count(grid.pad_id()) != 0) {
    throw InvalidState("consistency_score needs a complete grid");
  }
  if (grid.levels() > task.config().levels) throw std::invalid_argument("grid has more levels than the task");
  if (grid.levels() == 1) return 1.0;
  std::size_t hits = 0;
  for (int k = 1; k < grid.levels(); ++k) {
    const auto lower = grid.row(k - 1);
    for (int t = 0; t < grid.length(); ++t) hits += grid.at(k, t) == task.residual_at(k, lower, t) ? 1 : 0;
  }
  return static_cast<double>(hits) / (static_cast<double>(grid.levels() - 1) * grid.length());
}

double coarse_level_nll(const TokenGrid& grid, const SynthTask& task, int cond) {
  if (grid.count(grid.mask_id(), 0) != 0) throw InvalidState("coarse_level_nll needs a complete level 0");
  if (grid.length() < 2) throw std::invalid_argument("coarse_level_nll needs at least two steps");
  double nll = 0.0;
  for (int t = 1; t < grid.length(); ++t) nll -= std::log(task.transition(cond, grid.at(0, t - 1), grid.at(0, t)));
  return nll / (grid.length() - 1);
}

}  // namespace magnet
