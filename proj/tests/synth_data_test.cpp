#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "magnet/errors.hpp"
#include "magnet/synth_data.hpp"

using namespace magnet;

TEST(SynthTask, TransitionRowsAreStochastic) {
  const SynthTask task{SynthConfig{}};
  const int n = task.config().vocab;
  for (int c = 0; c < task.config().cond_count; ++c) {
    const auto p = task.transitions(c);
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        EXPECT_GE(p[i * n + j], 0.0);
        sum += p[i * n + j];
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(SynthTask, ConfigValidation) {
  SynthConfig c;
  c.noise = 1.5;
  EXPECT_THROW(SynthTask{c}, std::invalid_argument);
  c = {};
  c.branching = 0;
  EXPECT_THROW(SynthTask{c}, std::invalid_argument);
}

TEST(Generate, DeterministicAndConsistent) {
  const SynthTask task{SynthConfig{}};
  Rng a(9), b(9);
  const TokenGrid ga = generate(task, 1, a);
  EXPECT_EQ(ga, generate(task, 1, b));
  EXPECT_EQ(ga.count(ga.mask_id()), 0u);
  EXPECT_EQ(consistency_score(ga, task), 1.0);
  Rng r(1);
  EXPECT_THROW(generate(task, 4, r), std::invalid_argument);
}

TEST(Generate, BigramFrequenciesMatchTransitions) {
  SynthConfig c;
  c.levels = 1;
  c.length = 10000;
  c.vocab = 8;
  c.cond_count = 1;
  c.noise = 0.05;
  const SynthTask task(c);
  Rng rng(4);
  const TokenGrid g = generate(task, 0, rng);
  std::vector<double> counts(64, 0.0), from(8, 0.0);
  for (int t = 0; t + 1 < c.length; ++t) {
    counts[g.at(0, t) * 8 + g.at(0, t + 1)] += 1.0;
    from[g.at(0, t)] += 1.0;
  }
  double chi2 = 0.0;
  int dof = 0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const double expected = from[i] * task.transition(0, i, j);
      if (expected < 5.0) continue;
      chi2 += (counts[i * 8 + j] - expected) * (counts[i * 8 + j] - expected) / expected;
      ++dof;
    }
    --dof;
  }
  // Generous bound: mean dof, plus five standard deviations.
  EXPECT_LT(chi2, dof + 5.0 * std::sqrt(2.0 * dof));
}

TEST(ConsistencyScore, RandomUpperLevelsScoreNearChance) {
  const SynthTask task{SynthConfig{}};
  Rng rng(3);
  double total = 0.0;
  const int grids = 200;
  for (int i = 0; i < grids; ++i) {
    TokenGrid g = generate(task, i % 4, rng);
    for (int k = 1; k < 4; ++k)
      for (int t = 0; t < g.length(); ++t) g.set(k, t, std::uniform_int_distribution<int>(0, 31)(rng));
    total += consistency_score(g, task);
  }
  EXPECT_NEAR(total / grids, 1.0 / 32.0, 0.01);
}

TEST(ConsistencyScore, CorruptionStaysLocal) {
  SynthConfig c;
  c.length = 100;
  const SynthTask task(c);
  Rng rng(8);
  const TokenGrid g = generate(task, 2, rng);
  int total = 0;
  for (int t : {0, 50, 99}) {
    std::vector<TokenId> lower(g.row(1).begin(), g.row(1).end());
    lower[t] = (lower[t] + 1) % 32;
    int changed = 0;
    for (int u = 0; u < c.length; ++u) {
      if (task.residual_at(2, lower, u) != g.at(2, u)) {
        ++changed;
        EXPECT_LE(std::abs(u - t), c.dep_window);
      }
    }
    EXPECT_LE(changed, 2 * c.dep_window + 1);
    total += changed;
  }
  // A single flip can leave every hashed bit unchanged, three in a row cannot plausibly.
  EXPECT_GE(total, 1);
}

TEST(ConsistencyScore, RejectsMaskedGrids) {
  const SynthTask task{SynthConfig{}};
  Rng rng(2);
  TokenGrid g = generate(task, 0, rng);
  g.set(2, 3, g.mask_id());
  EXPECT_THROW(consistency_score(g, task), InvalidState);
}

TEST(CoarseNll, ApproachesEntropyRateOnLongSamples) {
  SynthConfig c;
  c.levels = 1;
  c.length = 20000;
  const SynthTask task(c);
  Rng rng(5);
  const TokenGrid g = generate(task, 3, rng);
  EXPECT_NEAR(coarse_level_nll(g, task, 3), task.entropy_rate(3), 0.05);
}
