#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "magnet/decoder.hpp"
#include "magnet/errors.hpp"

using namespace magnet;

namespace {

ModelConfig tiny(Layout layout = Layout::kPlain, std::uint64_t seed = 0) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.ffn_mult = 2.0;
  c.levels = 2;
  c.vocab = 8;
  c.max_length = 16;
  c.cond_count = 2;
  c.window = 2;
  c.layout = layout;
  c.seed = seed;
  return c;
}

DecodeConfig small_decode(std::uint64_t seed = 1) {
  DecodeConfig d;
  d.length = 14;
  d.steps_per_level = {5, 3};
  d.span_len = 3;
  d.seed = seed;
  return d;
}

std::vector<double> logs(std::initializer_list<double> p) {
  std::vector<double> out;
  for (double v : p) out.push_back(std::log(v));
  return out;
}

}  // namespace

TEST(CfgCombine, EndpointsAndFixedPoint) {
  const std::vector<double> c{1.0, -2.0, 0.5};
  const std::vector<double> u{0.0, 1.0, 2.0};
  EXPECT_EQ(cfg_combine(c, u, 1.0), c);
  EXPECT_EQ(cfg_combine(c, u, 0.0), u);
  EXPECT_EQ(cfg_combine(c, c, 7.5), c);
  EXPECT_DOUBLE_EQ(cfg_combine(c, u, 3.0)[1], 3.0 * -2.0 - 2.0 * 1.0);
  EXPECT_THROW(cfg_combine(c, std::vector<double>{1.0}, 1.0), std::invalid_argument);
}

TEST(Nucleus, TruncatesToSmallestSufficientPrefix) {
  const auto p = nucleus_distribution(logs({0.5, 0.3, 0.15, 0.05}), 0.9, 1.0);
  EXPECT_NEAR(p[0], 0.5 / 0.95, 1e-12);
  EXPECT_NEAR(p[1], 0.3 / 0.95, 1e-12);
  EXPECT_NEAR(p[2], 0.15 / 0.95, 1e-12);
  EXPECT_EQ(p[3], 0.0);
  EXPECT_NEAR(p[0], 0.526315789, 1e-9);
}

TEST(Nucleus, OneHotAndZeroTemperature) {
  Rng rng(1);
  const std::vector<double> peaked{-1e3, 50.0, -1e3};
  for (double top_p : {0.1, 0.9, 1.0}) {
    const NucleusSample s = nucleus_sample(peaked, top_p, 1.0, rng);
    EXPECT_EQ(s.token, 1);
    EXPECT_EQ(s.probability, 1.0);
  }
  const std::vector<double> flat{0.3, 0.31, 0.29, 0.305};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(nucleus_sample(flat, 1.0, kMinTemperature, rng).token, 1);
}

TEST(Nucleus, SampleFrequenciesMatchDistribution) {
  Rng rng(7);
  const auto logits = logs({0.5, 0.3, 0.15, 0.05});
  std::vector<int> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const NucleusSample s = nucleus_sample(logits, 0.9, 1.0, rng);
    ++counts[s.token];
    EXPECT_NEAR(s.probability, nucleus_distribution(logits, 0.9, 1.0)[s.token], 1e-15);
  }
  EXPECT_EQ(counts[3], 0);
  EXPECT_NEAR(counts[0] / double(n), 0.5 / 0.95, 0.01);
  EXPECT_NEAR(counts[2] / double(n), 0.15 / 0.95, 0.01);
}

TEST(Nucleus, RejectsBadInput) {
  Rng rng(1);
  const std::vector<double> bad{0.0, std::nan("")};
  EXPECT_THROW(nucleus_sample(bad, 0.9, 1.0, rng), std::invalid_argument);
  const std::vector<double> ok{0.0, 1.0};
  EXPECT_THROW(nucleus_sample(ok, 0.0, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(nucleus_sample(ok, 0.9, 0.0, rng), std::invalid_argument);
}

TEST(RescoreFuse, ConvexCombination) {
  const std::vector<double> m{0.4, 0.1}, r{0.8, 0.9};
  EXPECT_EQ(rescore_fuse(m, r, 1.0), m);
  EXPECT_EQ(rescore_fuse(m, r, 0.0), r);
  EXPECT_DOUBLE_EQ(rescore_fuse(m, r, 0.5)[0], 0.6);
  for (double w : {0.0, 0.25, 0.7, 1.0})
    for (double v : rescore_fuse(m, r, w)) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  EXPECT_THROW(rescore_fuse(m, std::vector<double>{0.1}, 0.5), std::invalid_argument);
  EXPECT_THROW(rescore_fuse(m, r, 1.5), std::invalid_argument);
}

TEST(Decode, CompletesWithExactForwardCount) {
  const ToyModel model(tiny());
  const DecodeResult r = decode(model, 0, small_decode());
  EXPECT_EQ(r.grid.count(r.grid.mask_id()), 0u);
  EXPECT_EQ(r.report.nar_forwards, 2 * (5 + 3));
  EXPECT_EQ(r.report.ar_forwards, 0);
  EXPECT_EQ(r.report.rescorer_forwards, 0);
  EXPECT_EQ(r.trace.level(0).size(), 5u);
  EXPECT_EQ(r.trace.level(1).size(), 3u);
  EXPECT_EQ(r.report.masked_spans.size(), 8u);
  EXPECT_EQ(r.report.masked_spans.front(), 5);  // ceil(14 / 3) spans, all masked
}

TEST(Decode, UnconditionalPassElidedWithoutGuidance) {
  const ToyModel model(tiny());
  DecodeConfig d = small_decode();
  d.schedule.lambda0 = 1.0;
  d.schedule.lambda1 = 1.0;
  EXPECT_EQ(decode(model, 1, d).report.nar_forwards, 8);
}

TEST(Decode, TraceAuditAcrossSeeds) {
  const ToyModel model(tiny());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DecodeResult r = decode(model, static_cast<int>(seed % 2), small_decode(seed));
    for (int level = 0; level < 2; ++level) {
      const auto its = r.trace.level(level);
      for (std::size_t i = 1; i < its.size(); ++i) {
        for (int t = 0; t < 14; ++t) {
          // Monotone unmasking: masked now implies masked before.
          if (its[i]->mask[t]) EXPECT_TRUE(its[i - 1]->mask[t]);
          // A cell left unmasked keeps its token from then on.
          if (!its[i]->mask[t]) EXPECT_EQ(its[i]->tokens[t], its[i - 1]->tokens[t]);
        }
        EXPECT_LE(its[i]->remasked_spans.size(), its[i - 1]->remasked_spans.size());
      }
      EXPECT_EQ(its.front()->remasked_spans.size(), 5u);
      EXPECT_GE(its.back()->remasked_spans.size(), 1u);
      for (int t = 0; t < 14; ++t) EXPECT_EQ(its.back()->tokens[t], r.grid.at(level, t));
    }
  }
}

TEST(Decode, BitwiseDeterministicPerSeed) {
  const ToyModel model(tiny());
  const DecodeResult a = decode(model, 1, small_decode(5));
  const DecodeResult b = decode(model, 1, small_decode(5));
  EXPECT_EQ(a.grid, b.grid);
  ASSERT_EQ(a.trace.iterations.size(), b.trace.iterations.size());
  for (std::size_t i = 0; i < a.trace.iterations.size(); ++i) {
    EXPECT_EQ(a.trace.iterations[i].fused_probs, b.trace.iterations[i].fused_probs);
    EXPECT_EQ(a.trace.iterations[i].remasked_spans, b.trace.iterations[i].remasked_spans);
  }
  EXPECT_NE(decode(model, 1, small_decode(6)).grid, a.grid);
}

TEST(Decode, SingleStepSchedule) {
  const ToyModel model(tiny());
  DecodeConfig d = small_decode();
  d.steps_per_level = {1, 1};
  const DecodeResult r = decode(model, 0, d);
  EXPECT_EQ(r.grid.count(r.grid.mask_id()), 0u);
  for (const auto& it : r.trace.iterations) {
    EXPECT_EQ(it.gamma, 1.0);
    EXPECT_EQ(std::accumulate(it.mask.begin(), it.mask.end(), 0), 14);
  }
}

TEST(Decode, ConfigValidation) {
  const ToyModel model(tiny());
  DecodeConfig d = small_decode();
  d.steps_per_level = {5};
  EXPECT_THROW(decode(model, 0, d), std::invalid_argument);
  d = small_decode();
  d.rescorer_weight = 1.2;
  EXPECT_THROW(decode(model, 0, d), std::invalid_argument);
  d = small_decode();
  d.length = 17;
  EXPECT_THROW(decode(model, 0, d), std::invalid_argument);
  EXPECT_THROW(decode(model, 5, small_decode()), std::invalid_argument);
}

TEST(DecodeLevel, EnforcesLevelOrder) {
  const ToyModel model(tiny());
  TokenGrid grid = TokenGrid::fully_masked(2, 14, 8);
  Rng rng(1);
  DecodeTrace trace;
  StepReport report;
  EXPECT_THROW(decode_level(model, grid, 1, 0, small_decode(), rng, trace, report), InvalidState);
  grid.set(0, 0, 3);
  EXPECT_THROW(decode_level(model, grid, 0, 0, small_decode(), rng, trace, report), InvalidState);
}

TEST(DecodeAr, ForwardCountFollowsDelayedLength) {
  const ToyModel model(tiny(Layout::kDelayed));
  DecodeConfig d = small_decode();
  const DecodeResult r = decode_ar(model, 0, d);
  EXPECT_EQ(r.grid.count(r.grid.mask_id()), 0u);
  EXPECT_EQ(r.report.ar_forwards, 2 * (14 + 2 - 1));
  EXPECT_EQ(r.report.nar_forwards, 0);
  d.ar_lambda = 1.0;
  EXPECT_EQ(decode_ar(model, 0, d).report.ar_forwards, 15);
  EXPECT_EQ(decode_ar(model, 0, d).grid, decode_ar(model, 0, d).grid);
}

TEST(DecodeAr, SingleLevelTakesOneForwardPerStep) {
  ModelConfig c = tiny(Layout::kDelayed);
  c.levels = 1;
  const ToyModel model(c);
  DecodeConfig d;
  d.length = 5;
  d.steps_per_level = {3};
  d.ar_lambda = 1.0;
  EXPECT_EQ(decode_ar(model, 0, d).report.ar_forwards, 5);
}

TEST(DecodeAr, NeedsDelayedLayout) {
  const ToyModel model(tiny());
  EXPECT_THROW(decode_ar(model, 0, small_decode()), InvalidState);
  EXPECT_THROW(decode_hybrid(model, 0, 3, small_decode()), InvalidState);
}

TEST(DecodeHybrid, BoundaryEquivalences) {
  const ToyModel model(tiny(Layout::kDelayed));
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const DecodeConfig d = small_decode(seed);
    EXPECT_EQ(decode_hybrid(model, 1, 0, d).grid, decode(model, 1, d).grid);
    EXPECT_EQ(decode_hybrid(model, 1, 14, d).grid, decode_ar(model, 1, d).grid);
  }
}

TEST(DecodeHybrid, PromptIsFrozenAndCountsSplit) {
  const ToyModel model(tiny(Layout::kDelayed));
  const int t_switch = 5;
  const DecodeResult r = decode_hybrid(model, 0, t_switch, small_decode(4));
  EXPECT_EQ(r.grid.count(r.grid.mask_id()), 0u);
  EXPECT_EQ(r.report.ar_forwards, 2 * (t_switch + 2 - 1));
  EXPECT_EQ(r.report.nar_forwards, 2 * (5 + 3));
  for (const auto& it : r.trace.iterations) {
    for (int t = 0; t < t_switch; ++t) {
      EXPECT_EQ(it.mask[t], 0);
      EXPECT_EQ(it.tokens[t], r.grid.at(it.level, t));
    }
  }
  // The region after the prompt is 9 steps: 3 spans.
  EXPECT_EQ(r.trace.iterations.front().remasked_spans.size(), 3u);
}

TEST(Rescorer, WeightOneMatchesNoRescorer) {
  const ToyModel model(tiny());
  const ToyModel rescorer(tiny(Layout::kPlain, 99));
  DecodeConfig plain = small_decode(3);
  DecodeConfig with = plain;
  with.rescorer = &rescorer;
  with.rescorer_weight = 1.0;
  const DecodeResult a = decode(model, 0, plain);
  const DecodeResult b = decode(model, 0, with);
  EXPECT_EQ(a.grid, b.grid);
  EXPECT_EQ(b.report.rescorer_forwards, 8);
}

TEST(Rescorer, WeightZeroScoresByRescorerAlone) {
  const ToyModel model(tiny());
  const ToyModel rescorer(tiny(Layout::kPlain, 99));
  DecodeConfig d = small_decode(3);
  d.rescorer = &rescorer;
  d.rescorer_weight = 0.0;
  const DecodeResult r = decode(model, 0, d);
  for (const auto& it : r.trace.iterations) {
    EXPECT_EQ(it.fused_probs, it.rescorer_probs);
    for (int t = 0; t < 14; ++t) {
      if (!it.mask[t]) continue;
      EXPECT_GT(it.rescorer_probs[t], 0.0);
      EXPECT_LT(it.rescorer_probs[t], 1.0);
    }
  }
}

TEST(DecodeBatch, ThreadCountDoesNotChangeResults) {
  const ToyModel model(tiny());
  const std::vector<int> conds{0, 1, 0, 1, 1};
  const auto one = decode_batch(model, conds, small_decode(8), DecodeMode::kNar, 0, 1);
  const auto three = decode_batch(model, conds, small_decode(8), DecodeMode::kNar, 0, 3);
  ASSERT_EQ(one.size(), 5u);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one[i].grid, three[i].grid);
  EXPECT_NE(one[0].grid, one[2].grid);
}

TEST(TraceCsv, HeaderAndRows) {
  const ToyModel model(tiny());
  DecodeConfig d = small_decode();
  d.steps_per_level = {2, 1};
  std::ostringstream out;
  write_trace_csv(out, decode(model, 0, d).trace);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "level,iter,gamma,lambda,tau,masked_spans,remasked_span_ids");
  std::getline(in, line);
  EXPECT_EQ(line, "0,1,1,10,3,5,0;1;2;3;4");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
