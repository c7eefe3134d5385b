#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "magnet/decoder.hpp"
#include "magnet/synth_data.hpp"

namespace magnet {

struct BenchVariant {
  DecodeMode mode = DecodeMode::kNar;
  std::vector<int> steps_per_level;  // kNar and kHybrid; empty keeps the base config's
  int t_switch = 0;                  // kHybrid

  /// "nar:20-10-10-10", "ar" or "hybrid:16:20-10-10-10".
  std::string name() const;
  static BenchVariant parse(const std::string& text);
};

struct BenchConfig {
  std::vector<int> batch_sizes{1, 4};
  std::vector<int> lengths{64};
  std::vector<BenchVariant> variants;
  int repetitions = 3;
  int warmup = 1;
  int threads = 0;  // 0 = worker_threads()
  DecodeConfig decode;

  void validate() const;
};

struct BenchRow {
  std::string variant;
  int batch = 0;
  int length = 0;
  int steps = 0;
  double wall_ms_median = 0.0;
  double throughput_items_per_s = 0.0;
};

/// Times whole-batch decodes of every variant, batch size and length. AR and
/// hybrid variants need a delayed-layout model.
std::vector<BenchRow> run_bench(const ToyModel& model, const BenchConfig& config);

struct SweepRow {
  std::string variant;
  int steps = 0;
  double wall_ms = 0.0;  // mean per sample
  double consistency_score = 0.0;
  double coarse_nll = 0.0;
};

/// Decodes `samples` items per schedule (non-autoregressive) and per switch
/// time (hybrid, using base.steps_per_level), cycling through conditions.
std::vector<SweepRow> sweep_quality_latency(const ToyModel& model, const SynthTask& task,
                                            const std::vector<std::vector<int>>& schedules,
                                            const std::vector<int>& t_switches, int samples,
                                            const DecodeConfig& base, int threads = 0);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// P2 image: one row per traced iteration, one column per time step, masked
/// cells black.
void write_trace_heatmap(std::ostream& out, const DecodeTrace& trace);
void export_trace_heatmap(const DecodeTrace& trace, const std::filesystem::path& path);

std::string join_steps(const std::vector<int>& steps, char sep = '-');
std::vector<int> parse_steps(const std::string& text);

}  // namespace magnet
