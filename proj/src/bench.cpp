#include "magnet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace magnet {

std::string join_steps(const std::vector<int>& steps, char sep) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(steps[i]);
  }
  return out;
}

std::vector<int> parse_steps(const std::string& text) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, text.find(',') != std::string::npos ? ',' : '-')) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("bad step list '" + text + "'");
    out.push_back(value);
  }
  if (out.empty()) throw std::invalid_argument("empty step list");
  return out;
}

std::string BenchVariant::name() const {
  switch (mode) {
    case DecodeMode::kAr: return "ar";
    case DecodeMode::kHybrid: return "hybrid:" + std::to_string(t_switch) + ":" + join_steps(steps_per_level);
    case DecodeMode::kNar: break;
  }
  return "nar:" + join_steps(steps_per_level);
}

BenchVariant BenchVariant::parse(const std::string& text) {
  BenchVariant v;
  if (text == "ar") {
    v.mode = DecodeMode::kAr;
    return v;
  }
  if (text.rfind("nar:", 0) == 0) {
    v.steps_per_level = parse_steps(text.substr(4));
    return v;
  }
  if (text.rfind("hybrid:", 0) == 0) {
    v.mode = DecodeMode::kHybrid;
    const std::string rest = text.substr(7);
    const auto colon = rest.find(':');
    try {
      v.t_switch = std::stoi(rest.substr(0, colon));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad bench variant '" + text + "'");
    }
    if (colon != std::string::npos) v.steps_per_level = parse_steps(rest.substr(colon + 1));
    return v;
  }
  throw std::invalid_argument("bad bench variant '" + text + "' (expected nar:S-S-.., ar or hybrid:T[:S-S-..])");
}

void BenchConfig::validate() const {
  if (repetitions < 3) throw std::invalid_argument("bench.repetitions must be >= 3");
  if (warmup < 1) throw std::invalid_argument("bench.warmup must be >= 1");
  if (batch_sizes.empty() || lengths.empty() || variants.empty()) {
    throw std::invalid_argument("bench needs batch sizes, lengths and variants");
  }
  for (int b : batch_sizes)
    if (b < 1) throw std::invalid_argument("bench.batch_sizes entries must be >= 1");
  for (int t : lengths)
    if (t < 1) throw std::invalid_argument("bench.lengths entries must be >= 1");
}

namespace {

DecodeConfig variant_config(const DecodeConfig& base, const BenchVariant& v, int length) {
  DecodeConfig c = base;
  c.length = length;
  if (!v.steps_per_level.empty()) c.steps_per_level = v.steps_per_level;
  return c;
}

std::vector<int> cycle_conds(int count, int cond_count) {
  std::vector<int> conds(count);
  for (int i = 0; i < count; ++i) conds[i] = cond_count > 0 ? i % cond_count : kNullCondition;
  return conds;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchRow> run_bench(const ToyModel& model, const BenchConfig& config) {
  config.validate();
  std::vector<BenchRow> rows;
  for (const auto& variant : config.variants) {
    for (int length : config.lengths) {
      const DecodeConfig dc = variant_config(config.decode, variant, length);
      for (int batch : config.batch_sizes) {
        const std::vector<int> conds = cycle_conds(batch, model.config().cond_count);
        int steps = 0;
        for (int w = 0; w < config.warmup; ++w) {
          steps = decode_batch(model, conds, dc, variant.mode, variant.t_switch, config.threads)
                      .front()
                      .report.model_forwards();
        }
        std::vector<double> times;
        for (int r = 0; r < config.repetitions; ++r) {
          const auto start = std::chrono::steady_clock::now();
          decode_batch(model, conds, dc, variant.mode, variant.t_switch, config.threads);
          times.push_back(
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
        }
        BenchRow row;
        row.variant = variant.name();
        row.batch = batch;
        row.length = length;
        row.steps = steps;
        row.wall_ms_median = median(times);
        row.throughput_items_per_s = batch / (row.wall_ms_median / 1000.0);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<SweepRow> sweep_quality_latency(const ToyModel& model, const SynthTask& task,
                                            const std::vector<std::vector<int>>& schedules,
                                            const std::vector<int>& t_switches, int samples,
                                            const DecodeConfig& base, int threads) {
  if (samples < 1) throw std::invalid_argument("sweep.samples must be >= 1");
  std::vector<BenchVariant> variants;
  for (const auto& s : schedules) variants.push_back({DecodeMode::kNar, s, 0});
  for (int t : t_switches) variants.push_back({DecodeMode::kHybrid, base.steps_per_level, t});
  const std::vector<int> conds = cycle_conds(samples, task.config().cond_count);
  std::vector<SweepRow> rows;
  for (const auto& v : variants) {
    const DecodeConfig dc = variant_config(base, v, base.length);
    const auto results = decode_batch(model, conds, dc, v.mode, v.t_switch, threads);
    SweepRow row;
    row.variant = v.name();
    row.steps = results.front().report.model_forwards();
    for (std::size_t i = 0; i < results.size(); ++i) {
      row.wall_ms += results[i].report.wall_ms;
      row.consistency_score += consistency_score(results[i].grid, task);
      row.coarse_nll += coarse_level_nll(results[i].grid, task, conds[i]);
    }
    row.wall_ms /= samples;
    row.consistency_score /= samples;
    row.coarse_nll /= samples;
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "variant,batch,T,steps,wall_ms_median,throughput_items_per_s\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.batch << ',' << r.length << ',' << r.steps << ',' << r.wall_ms_median << ','
        << r.throughput_items_per_s << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "variant,steps,wall_ms,consistency_score,coarse_nll\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.steps << ',' << r.wall_ms << ',' << r.consistency_score << ',' << r.coarse_nll
        << '\n';
  }
}

void write_trace_heatmap(std::ostream& out, const DecodeTrace& trace) {
  const int width = trace.iterations.empty() ? 0 : static_cast<int>(trace.iterations.front().mask.size());
  out << "P2\n" << width << ' ' << trace.iterations.size() << "\n255\n";
  for (const auto& it : trace.iterations) {
    if (static_cast<int>(it.mask.size()) != width) throw std::invalid_argument("trace rows differ in width");
    for (int t = 0; t < width; ++t) out << (t ? " " : "") << (it.mask[t] ? 0 : 255);
    out << '\n';
  }
}

void export_trace_heatmap(const DecodeTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trace_heatmap(out, trace);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace magnet
