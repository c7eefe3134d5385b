#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "magnet/bench.hpp"
#include "magnet/synth_data.hpp"
#include "magnet/toy_model.hpp"
#include "magnet/trainer.hpp"

namespace magnet {

/// Decoding settings as they appear in config files (no rescorer handle).
struct DecodeSettings {
  int length = 64;
  std::vector<int> steps_per_level{20, 10, 10, 10};
  int span_len = 3;
  double top_p = 0.9;
  double tau0 = 3.0;
  double lambda0 = 10.0;
  double lambda1 = 1.0;
  double ar_lambda = 3.0;
  double ar_temperature = 1.0;
  double rescorer_weight = 1.0;
  std::uint64_t seed = 0;

  DecodeConfig to_decode_config() const;
};

struct BenchSettings {
  std::vector<int> batch_sizes{1, 4};
  std::vector<int> lengths{64};
  std::vector<std::string> variants{"nar:20-10-10-10", "nar:10-1-1-1"};
  int repetitions = 3;
  int warmup = 1;
};

/// Everything a CLI run can be configured with. Config files are JSON objects
/// with the sections "model", "train", "decode", "synth" and "bench"; every
/// key is optional and unknown keys are errors.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeSettings decode;
  SynthConfig synth;
  BenchSettings bench;
};

/// Overlays a JSON document onto `config`.
void apply_json(RunConfig& config, const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string to_json(const RunConfig& config, int indent = 2);

}  // namespace magnet
