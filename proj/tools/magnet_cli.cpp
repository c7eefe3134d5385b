// Command-line entry point: train, decode, bench, sweep, synth,
// verify-span-math and visualize.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "magnet/bench.hpp"
#include "magnet/decoder.hpp"
#include "magnet/run_config.hpp"
#include "magnet/span_oracle.hpp"
#include "magnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace magnet;

namespace {

// Flag values are only applied when the flag was given, so that
// defaults < config file < flags.
template <typename T>
struct Flag {
  T value{};
  CLI::Option* option = nullptr;

  bool given() const { return option != nullptr && option->count() > 0; }
  void apply(T& target) const {
    if (given()) target = value;
  }
};

template <typename T>
CLI::Option* add(CLI::App* app, Flag<T>& flag, const std::string& name, const std::string& help) {
  flag.option = app->add_option(name, flag.value, help);
  return flag.option;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": '" + text + "' is not a comma-separated number list");
    }
  }
  return out;
}

std::vector<int> parse_ints(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  for (double v : parse_doubles(text, flag)) {
    if (v != static_cast<int>(v)) throw ConfigError(flag + ": '" + text + "' must hold integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Writes to a file, or stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  bool is_stdout() const { return file_ == nullptr; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

// The effective config goes to stdout unless stdout carries the data.
void echo_config(const RunConfig& config, bool stdout_busy) {
  (stdout_busy ? std::cerr : std::cout) << to_json(config, -1) << '\n';
}

struct Common {
  std::string config_path;
  RunConfig load() const { return config_path.empty() ? RunConfig{} : load_run_config(config_path); }
};

void add_config_flag(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "JSON config file (defaults < file < flags)")
      ->check(CLI::ExistingFile);
}

// Decoding flags shared by decode, visualize and sweep.
struct DecodeFlags {
  Flag<std::string> steps, cfg;
  Flag<int> span, length;
  Flag<double> topp, temp, ar_cfg, ar_temp, w;
  Flag<std::uint64_t> seed;

  void add_to(CLI::App* app, bool with_seed) {
    add(app, steps, "--steps", "Steps per level, e.g. 20,10,10,10");
    add(app, span, "--span", "Span length")->check(CLI::PositiveNumber);
    add(app, length, "--length", "Sequence length T")->check(CLI::PositiveNumber);
    add(app, topp, "--topp", "Nucleus mass in (0, 1]")->check(CLI::Range(0.0, 1.0));
    add(app, temp, "--temp", "Initial temperature, annealed linearly per level")->check(CLI::NonNegativeNumber);
    add(app, cfg, "--cfg", "Guidance at the first and last iteration, e.g. 10,1");
    add(app, ar_cfg, "--ar-cfg", "Fixed guidance for autoregressive steps");
    add(app, ar_temp, "--ar-temp", "Temperature for autoregressive steps")->check(CLI::PositiveNumber);
    add(app, w, "--w", "Weight of the model probability when fusing with a rescorer")->check(CLI::Range(0.0, 1.0));
    if (with_seed) add(app, seed, "--seed", "Random seed");
  }

  void apply(DecodeSettings& d) const {
    if (steps.given()) d.steps_per_level = parse_ints(steps.value, "--steps");
    span.apply(d.span_len);
    length.apply(d.length);
    topp.apply(d.top_p);
    temp.apply(d.tau0);
    if (cfg.given()) {
      const auto v = parse_doubles(cfg.value, "--cfg");
      if (v.size() != 2) throw ConfigError("--cfg needs two values: lambda0,lambda1");
      d.lambda0 = v[0];
      d.lambda1 = v[1];
    }
    ar_cfg.apply(d.ar_lambda);
    ar_temp.apply(d.ar_temperature);
    w.apply(d.rescorer_weight);
    seed.apply(d.seed);
  }
};

// Wraps library validation errors so that they exit with status 1.
DecodeConfig checked_decode_config(const DecodeSettings& settings, const ModelConfig& model) {
  DecodeConfig d = settings.to_decode_config();
  try {
    d.validate(model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return d;
}

DecodeMode parse_mode(const std::string& text) {
  if (text == "nar") return DecodeMode::kNar;
  if (text == "ar") return DecodeMode::kAr;
  if (text == "hybrid") return DecodeMode::kHybrid;
  throw ConfigError("--mode must be nar, ar or hybrid (got '" + text + "')");
}

DecodeResult run_decode(const ToyModel& model, int cond, const DecodeConfig& d, DecodeMode mode, int t_switch) {
  switch (mode) {
    case DecodeMode::kAr: return decode_ar(model, cond, d);
    case DecodeMode::kHybrid: return decode_hybrid(model, cond, t_switch, d);
    case DecodeMode::kNar: break;
  }
  return decode(model, cond, d);
}

// ---- train ----

struct TrainArgs {
  Common common;
  Flag<std::string> mode;
  Flag<int> steps, batch, span, schedule_steps, log_every, window, d_model, layers, heads;
  Flag<double> lr, noise;
  Flag<std::uint64_t> seed, model_seed, synth_seed;
  std::string out;
};

void setup_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train a model on freshly generated synthetic grids");
  add_config_flag(cmd, a.common);
  add(cmd, a.mode, "--mode", "nar, ar or hybrid (nar trains the plain layout, the others the delayed one)");
  add(cmd, a.steps, "--steps", "Optimizer steps")->check(CLI::NonNegativeNumber);
  add(cmd, a.batch, "--batch", "Examples per step")->check(CLI::PositiveNumber);
  add(cmd, a.lr, "--lr", "Adam learning rate")->check(CLI::PositiveNumber);
  add(cmd, a.span, "--span", "Training span length")->check(CLI::PositiveNumber);
  add(cmd, a.schedule_steps, "--schedule-steps", "Steps of the cosine schedule masking rates are drawn from")
      ->check(CLI::PositiveNumber);
  add(cmd, a.log_every, "--log-every", "Loss report interval")->check(CLI::PositiveNumber);
  add(cmd, a.window, "--window", "Restricted attention radius for levels > 0 (-1 = full)");
  add(cmd, a.d_model, "--d-model", "Model width")->check(CLI::PositiveNumber);
  add(cmd, a.layers, "--layers", "Transformer layers")->check(CLI::PositiveNumber);
  add(cmd, a.heads, "--heads", "Attention heads")->check(CLI::PositiveNumber);
  add(cmd, a.noise, "--noise", "Synthetic transition noise")->check(CLI::Range(0.0, 1.0));
  add(cmd, a.seed, "--seed", "Training seed (batches, masks, dropout)");
  add(cmd, a.model_seed, "--model-seed", "Parameter initialization seed");
  add(cmd, a.synth_seed, "--synth-seed", "Synthetic task seed");
  cmd->add_option("--out", a.out, "Checkpoint path (writes PATH and PATH.bin)")->required();
}

int run_train(const TrainArgs& a) {
  RunConfig c = a.common.load();
  if (a.mode.given()) c.train.mode = parse_train_mode(a.mode.value);
  a.steps.apply(c.train.steps);
  a.batch.apply(c.train.batch);
  a.lr.apply(c.train.learning_rate);
  a.span.apply(c.train.span_len);
  a.schedule_steps.apply(c.train.schedule_steps);
  a.log_every.apply(c.train.log_every);
  a.seed.apply(c.train.seed);
  a.window.apply(c.model.window);
  a.d_model.apply(c.model.d_model);
  a.layers.apply(c.model.n_layers);
  a.heads.apply(c.model.n_heads);
  a.model_seed.apply(c.model.seed);
  a.noise.apply(c.synth.noise);
  a.synth_seed.apply(c.synth.seed);
  c.model.layout = layout_for(c.train.mode);
  c.train.validate();
  check_compatible(c.model, c.synth);
  echo_config(c, false);

  ToyModel model(c.model);
  const SynthTask task(c.synth);
  train_on_task(model, task, c.train, [](int step, double loss) {
    std::cout << "step " << step << " loss " << std::setprecision(6) << loss << '\n' << std::flush;
  });
  save_checkpoint(model, a.out);
  return 0;
}

// ---- decode ----

struct DecodeArgs {
  Common common;
  std::string ckpt, rescorer, out, trace, heatmap, mode = "nar";
  int cond = 0;
  int t_switch = 0;
  DecodeFlags flags;
};

void setup_decode(CLI::App& app, DecodeArgs& a) {
  auto* cmd = app.add_subcommand("decode", "Generate one grid from a checkpoint");
  add_config_flag(cmd, a.common);
  cmd->add_option("--ckpt", a.ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--cond", a.cond, "Condition label (-1 = unconditional)");
  cmd->add_option("--mode", a.mode, "nar, ar or hybrid")->check(CLI::IsMember({"nar", "ar", "hybrid"}));
  cmd->add_option("--t-switch", a.t_switch, "Hybrid switch time")->check(CLI::NonNegativeNumber);
  cmd->add_option("--rescorer", a.rescorer, "Rescorer checkpoint")->check(CLI::ExistingFile);
  a.flags.add_to(cmd, true);
  cmd->add_option("--out", a.out, "Grid output (default stdout)");
  cmd->add_option("--trace", a.trace, "Trace CSV output");
  cmd->add_option("--heatmap", a.heatmap, "Trace heatmap PGM output");
}

int run_decode_cmd(const DecodeArgs& a) {
  RunConfig c = a.common.load();
  a.flags.apply(c.decode);
  const ToyModel model = load_checkpoint(a.ckpt);
  c.model = model.config();
  std::optional<ToyModel> rescorer;
  DecodeConfig d = checked_decode_config(c.decode, model.config());
  if (!a.rescorer.empty()) {
    rescorer.emplace(load_checkpoint(a.rescorer));
    d.rescorer = &*rescorer;
    d = [&] {
      try {
        d.validate(model.config());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--rescorer: ") + e.what());
      }
      return d;
    }();
  }
  Output out(a.out);
  echo_config(c, out.is_stdout());
  const DecodeResult r = run_decode(model, a.cond, d, parse_mode(a.mode), a.t_switch);
  write_grid(out.stream(), r.grid);
  if (!a.trace.empty()) {
    Output trace(a.trace);
    write_trace_csv(trace.stream(), r.trace);
  }
  if (!a.heatmap.empty()) export_trace_heatmap(r.trace, a.heatmap);
  std::cerr << "forwards: ar " << r.report.ar_forwards << ", nar " << r.report.nar_forwards << ", rescorer "
            << r.report.rescorer_forwards << "; " << r.report.wall_ms << " ms\n";
  return 0;
}

// ---- bench ----

struct BenchArgs {
  Common common;
  std::string ckpt, out, batches, lengths, variants;
  Flag<int> reps, warmup;
  int threads = 0;
};

void setup_bench(CLI::App& app, BenchArgs& a) {
  auto* cmd = app.add_subcommand("bench", "Time batch decoding across variants, batch sizes and lengths");
  add_config_flag(cmd, a.common);
  cmd->add_option("--ckpt", a.ckpt, "Model checkpoint (delayed layout for ar/hybrid variants)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--batch", a.batches, "Batch sizes, e.g. 1,4,16");
  cmd->add_option("--lengths", a.lengths, "Sequence lengths, e.g. 32,64");
  cmd->add_option("--variants", a.variants, "Variants, e.g. nar:20-10-10-10,ar,hybrid:16:20-10-10-10");
  add(cmd, a.reps, "--reps", "Timed repetitions (>= 3)");
  add(cmd, a.warmup, "--warmup", "Untimed warmup runs (>= 1)");
  cmd->add_option("--threads", a.threads, "Worker threads (0 = hardware, capped by MAGNET_THREADS)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", a.out, "CSV output (default stdout)");
}

int run_bench_cmd(const BenchArgs& a) {
  RunConfig c = a.common.load();
  if (!a.batches.empty()) c.bench.batch_sizes = parse_ints(a.batches, "--batch");
  if (!a.lengths.empty()) c.bench.lengths = parse_ints(a.lengths, "--lengths");
  if (!a.variants.empty()) c.bench.variants = split(a.variants, ',');
  a.reps.apply(c.bench.repetitions);
  a.warmup.apply(c.bench.warmup);
  const ToyModel model = load_checkpoint(a.ckpt);
  c.model = model.config();

  BenchConfig b;
  b.batch_sizes = c.bench.batch_sizes;
  b.lengths = c.bench.lengths;
  b.repetitions = c.bench.repetitions;
  b.warmup = c.bench.warmup;
  b.threads = a.threads;
  b.decode = c.decode.to_decode_config();
  try {
    for (const auto& v : c.bench.variants) b.variants.push_back(BenchVariant::parse(v));
    b.validate();
    for (int length : b.lengths) {
      DecodeConfig probe = b.decode;
      probe.length = length;
      probe.validate(model.config());
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Output out(a.out);
  echo_config(c, out.is_stdout());
  write_bench_csv(out.stream(), run_bench(model, b));
  return 0;
}

// ---- sweep ----

struct SweepArgs {
  Common common;
  std::string ckpt, out, schedules = "20-10-10-10,20-1-1-1,10-1-1-1", t_switches;
  int samples = 16;
  int threads = 0;
};

void setup_sweep(CLI::App& app, SweepArgs& a) {
  auto* cmd = app.add_subcommand("sweep", "Quality and latency per decoding schedule and switch time");
  add_config_flag(cmd, a.common);
  cmd->add_option("--ckpt", a.ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--schedules", a.schedules, "Comma-separated schedules, e.g. 20-10-10-10,20-1-1-1");
  cmd->add_option("--t-switch", a.t_switches, "Comma-separated hybrid switch times (delayed models)");
  cmd->add_option("--samples", a.samples, "Samples per configuration")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", a.threads, "Worker threads (0 = hardware, capped by MAGNET_THREADS)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", a.out, "CSV output (default stdout)");
}

int run_sweep_cmd(const SweepArgs& a) {
  RunConfig c = a.common.load();
  const ToyModel model = load_checkpoint(a.ckpt);
  c.model = model.config();
  check_compatible(model.config(), c.synth);
  std::vector<std::vector<int>> schedules;
  for (const auto& s : split(a.schedules, ',')) {
    try {
      schedules.push_back(parse_steps(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--schedules: ") + e.what());
    }
  }
  const std::vector<int> t_switches = a.t_switches.empty() ? std::vector<int>{} : parse_ints(a.t_switches, "--t-switch");
  DecodeConfig d = checked_decode_config(c.decode, model.config());
  for (const auto& s : schedules) {
    DecodeConfig probe = d;
    probe.steps_per_level = s;
    try {
      probe.validate(model.config());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--schedules: ") + e.what());
    }
  }
  Output out(a.out);
  echo_config(c, out.is_stdout());
  const SynthTask task(c.synth);
  write_sweep_csv(out.stream(), sweep_quality_latency(model, task, schedules, t_switches, a.samples, d, a.threads));
  return 0;
}

// ---- synth ----

struct SynthArgs {
  Common common;
  std::string out;
  int count = 16;
  Flag<std::uint64_t> seed, task_seed;
  Flag<int> length;
  Flag<double> noise;
};

void setup_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Write synthetic grids and their condition labels");
  add_config_flag(cmd, a.common);
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--count", a.count, "Number of grids")->check(CLI::PositiveNumber);
  add(cmd, a.seed, "--seed", "Sampling seed");
  add(cmd, a.task_seed, "--task-seed", "Seed of the task's transition tables and hashes");
  add(cmd, a.length, "--length", "Grid length T")->check(CLI::PositiveNumber);
  add(cmd, a.noise, "--noise", "Transition noise")->check(CLI::Range(0.0, 1.0));
}

int run_synth_cmd(const SynthArgs& a) {
  RunConfig c = a.common.load();
  a.task_seed.apply(c.synth.seed);
  a.length.apply(c.synth.length);
  a.noise.apply(c.synth.noise);
  std::uint64_t seed = 0;
  a.seed.apply(seed);
  try {
    c.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  echo_config(c, false);
  const SynthTask task(c.synth);
  fs::create_directories(a.out);
  std::ofstream labels(fs::path(a.out) / "labels.csv");
  if (!labels) throw std::runtime_error("cannot write labels.csv in " + a.out);
  labels << "file,cond\n";
  Rng rng(seed);
  std::uniform_int_distribution<int> cond_dist(0, c.synth.cond_count - 1);
  for (int i = 0; i < a.count; ++i) {
    const int cond = cond_dist(rng);
    std::ostringstream name;
    name << "grid_" << std::setw(5) << std::setfill('0') << i << ".txt";
    std::ofstream g(fs::path(a.out) / name.str());
    write_grid(g, generate(task, cond, rng));
    if (!g) throw std::runtime_error("failed writing " + name.str());
    labels << name.str() << ',' << cond << '\n';
  }
  return 0;
}

// ---- verify-span-math ----

struct VerifyArgs {
  int tmax = 12;
  int lmax = 6;
  std::string out;
};

void setup_verify(CLI::App& app, VerifyArgs& a) {
  auto* cmd = app.add_subcommand("verify-span-math", "Compare the masking-rate formula with exhaustive enumeration");
  cmd->add_option("--tmax", a.tmax, "Largest sequence length")->check(CLI::Range(1, 20));
  cmd->add_option("--lmax", a.lmax, "Largest span length")->check(CLI::PositiveNumber);
  cmd->add_option("--out", a.out, "CSV output (default stdout)");
}

int run_verify_cmd(const VerifyArgs& a) {
  const auto rows = verify_span_math(a.tmax, a.lmax);
  Output out(a.out);
  auto& s = out.stream();
  s << "T,l,u,formula,oracle,abs_error\n" << std::setprecision(17);
  int bad = 0;
  for (const auto& r : rows) {
    s << r.length << ',' << r.span_len << ',' << r.num_spans << ',' << r.formula << ',' << r.oracle << ','
      << r.abs_error << '\n';
    if (r.abs_error > 1e-12) ++bad;
  }
  std::cerr << rows.size() << " cases, " << bad << " discrepancies above 1e-12\n";
  return bad == 0 ? 0 : 2;
}

// ---- visualize ----

struct VisualizeArgs {
  Common common;
  std::string what = "mask", kind = "restricted", ckpt, out, mode = "nar";
  int length = 64, window = 5, levels = 4, level = 0, t_switch = 0, cond = 0;
  DecodeFlags flags;
};

void setup_visualize(CLI::App& app, VisualizeArgs& a) {
  auto* cmd = app.add_subcommand("visualize", "Render attention masks or decoding traces as PGM images");
  add_config_flag(cmd, a.common);
  cmd->add_option("--what", a.what, "mask or trace")->check(CLI::IsMember({"mask", "trace"}));
  cmd->add_option("--kind", a.kind, "Mask kind: full, causal, restricted or hybrid")
      ->check(CLI::IsMember({"full", "causal", "restricted", "hybrid"}));
  cmd->add_option("--mask-length", a.length, "Mask length T")->check(CLI::PositiveNumber);
  cmd->add_option("--window", a.window, "Restricted radius (-1 = none for hybrid)");
  cmd->add_option("--levels", a.levels, "Levels of the delay pattern (hybrid)")->check(CLI::PositiveNumber);
  cmd->add_option("--level", a.level, "Level whose hybrid mask is drawn")->check(CLI::NonNegativeNumber);
  cmd->add_option("--t-switch", a.t_switch, "Switch time (hybrid mask or hybrid trace)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--ckpt", a.ckpt, "Checkpoint to decode for a trace")->check(CLI::ExistingFile);
  cmd->add_option("--cond", a.cond, "Condition label for a trace");
  cmd->add_option("--mode", a.mode, "Decode mode for a trace: nar or hybrid")->check(CLI::IsMember({"nar", "hybrid"}));
  a.flags.add_to(cmd, true);
  cmd->add_option("--out", a.out, "PGM output")->required();
}

int run_visualize_cmd(const VisualizeArgs& a) {
  Output out(a.out);
  if (a.what == "mask") {
    AttnMask mask;
    if (a.kind == "full") {
      mask = full_mask(a.length);
    } else if (a.kind == "causal") {
      mask = causal_mask(a.length);
    } else if (a.kind == "restricted") {
      if (a.window < 0) throw ConfigError("--window must be >= 0 for a restricted mask");
      mask = restricted_mask(a.length, a.window);
    } else {
      if (a.level >= a.levels) throw ConfigError("--level must be below --levels");
      if (a.t_switch > a.length) throw ConfigError("--t-switch must be <= --mask-length");
      mask = hybrid_mask(DelayLayout(a.levels, a.length), a.t_switch, a.level, false, a.window);
    }
    write_pgm(out.stream(), mask);
    return 0;
  }
  if (a.ckpt.empty()) throw ConfigError("--ckpt is required for --what trace");
  RunConfig c = a.common.load();
  a.flags.apply(c.decode);
  const ToyModel model = load_checkpoint(a.ckpt);
  const DecodeConfig d = checked_decode_config(c.decode, model.config());
  const DecodeResult r = run_decode(model, a.cond, d, parse_mode(a.mode), a.t_switch);
  write_trace_heatmap(out.stream(), r.trace);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked span generation over multi-stream token grids"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  TrainArgs train;
  DecodeArgs dec;
  BenchArgs bench;
  SweepArgs sweep;
  SynthArgs synth;
  VerifyArgs verify;
  VisualizeArgs vis;
  setup_train(app, train);
  setup_decode(app, dec);
  setup_bench(app, bench);
  setup_sweep(app, sweep);
  setup_synth(app, synth);
  setup_verify(app, verify);
  setup_visualize(app, vis);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("train")) return run_train(train);
    if (app.got_subcommand("decode")) return run_decode_cmd(dec);
    if (app.got_subcommand("bench")) return run_bench_cmd(bench);
    if (app.got_subcommand("sweep")) return run_sweep_cmd(sweep);
    if (app.got_subcommand("synth")) return run_synth_cmd(synth);
    if (app.got_subcommand("verify-span-math")) return run_verify_cmd(verify);
    if (app.got_subcommand("visualize")) return run_visualize_cmd(vis);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
