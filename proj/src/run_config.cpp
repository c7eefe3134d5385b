#include "magnet/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <type_traits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace magnet {

using nlohmann::json;

DecodeConfig DecodeSettings::to_decode_config() const {
  DecodeConfig c;
  c.length = length;
  c.steps_per_level = steps_per_level;
  c.span_len = span_len;
  c.schedule.top_p = top_p;
  c.schedule.tau0 = tau0;
  c.schedule.lambda0 = lambda0;
  c.schedule.lambda1 = lambda1;
  c.ar_lambda = ar_lambda;
  c.ar_temperature = ar_temperature;
  c.rescorer_weight = rescorer_weight;
  c.seed = seed;
  return c;
}

namespace {

// Reads the keys of one section into typed fields, rejecting unknown keys
// and type mismatches with the dotted field name.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    node_ = &doc.at(name_);
    if (!node_->is_object()) throw ConfigError(name_ + " must be an object");
  }

  template <typename T>
  Section& field(const char* key, T& target) {
    known_.emplace_back(key);
    if (node_ == nullptr || !node_->contains(key)) return *this;
    const json& value = node_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!value.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!value.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) throw ConfigError("");
      }
      target = value.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(name_ + "." + key + " has the wrong type");
    }
    return *this;
  }

  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& item : node_->items()) {
      if (std::find(known_.begin(), known_.end(), item.key()) == known_.end()) {
        throw ConfigError("unknown config key '" + name_ + "." + item.key() + "'");
      }
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::vector<std::string> known_;
};

}  // namespace

void apply_json(RunConfig& config, const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : doc.items()) {
    const std::string& k = item.key();
    if (k != "model" && k != "train" && k != "decode" && k != "synth" && k != "bench") {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }

  auto& m = config.model;
  std::string layout = to_string(m.layout);
  Section(doc, "model")
      .field("d_model", m.d_model)
      .field("n_heads", m.n_heads)
      .field("n_layers", m.n_layers)
      .field("ffn_mult", m.ffn_mult)
      .field("levels", m.levels)
      .field("vocab", m.vocab)
      .field("max_length", m.max_length)
      .field("cond_count", m.cond_count)
      .field("cond_dropout", m.cond_dropout)
      .field("window", m.window)
      .field("layout", layout)
      .field("seed", m.seed)
      .finish();
  try {
    m.layout = parse_layout(layout);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.layout: ") + e.what());
  }

  auto& t = config.train;
  std::string mode = to_string(t.mode);
  Section(doc, "train")
      .field("mode", mode)
      .field("steps", t.steps)
      .field("batch", t.batch)
      .field("learning_rate", t.learning_rate)
      .field("span_len", t.span_len)
      .field("schedule_steps", t.schedule_steps)
      .field("log_every", t.log_every)
      .field("seed", t.seed)
      .finish();
  t.mode = parse_train_mode(mode);

  auto& d = config.decode;
  Section(doc, "decode")
      .field("length", d.length)
      .field("steps_per_level", d.steps_per_level)
      .field("span_len", d.span_len)
      .field("top_p", d.top_p)
      .field("tau0", d.tau0)
      .field("lambda0", d.lambda0)
      .field("lambda1", d.lambda1)
      .field("ar_lambda", d.ar_lambda)
      .field("ar_temperature", d.ar_temperature)
      .field("rescorer_weight", d.rescorer_weight)
      .field("seed", d.seed)
      .finish();

  auto& s = config.synth;
  Section(doc, "synth")
      .field("levels", s.levels)
      .field("length", s.length)
      .field("vocab", s.vocab)
      .field("cond_count", s.cond_count)
      .field("dep_window", s.dep_window)
      .field("branching", s.branching)
      .field("noise", s.noise)
      .field("seed", s.seed)
      .finish();

  auto& b = config.bench;
  Section(doc, "bench")
      .field("batch_sizes", b.batch_sizes)
      .field("lengths", b.lengths)
      .field("variants", b.variants)
      .field("repetitions", b.repetitions)
      .field("warmup", b.warmup)
      .finish();
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_json(base, text.str());
  return base;
}

std::string to_json(const RunConfig& c, int indent) {
  json doc;
  doc["model"] = {{"d_model", c.model.d_model},       {"n_heads", c.model.n_heads},
                  {"n_layers", c.model.n_layers},     {"ffn_mult", c.model.ffn_mult},
                  {"levels", c.model.levels},         {"vocab", c.model.vocab},
                  {"max_length", c.model.max_length}, {"cond_count", c.model.cond_count},
                  {"cond_dropout", c.model.cond_dropout}, {"window", c.model.window},
                  {"layout", to_string(c.model.layout)}, {"seed", c.model.seed}};
  doc["train"] = {{"mode", to_string(c.train.mode)}, {"steps", c.train.steps},
                  {"batch", c.train.batch},           {"learning_rate", c.train.learning_rate},
                  {"span_len", c.train.span_len},     {"schedule_steps", c.train.schedule_steps},
                  {"log_every", c.train.log_every},   {"seed", c.train.seed}};
  doc["decode"] = {{"length", c.decode.length},
                   {"steps_per_level", c.decode.steps_per_level},
                   {"span_len", c.decode.span_len},
                   {"top_p", c.decode.top_p},
                   {"tau0", c.decode.tau0},
                   {"lambda0", c.decode.lambda0},
                   {"lambda1", c.decode.lambda1},
                   {"ar_lambda", c.decode.ar_lambda},
                   {"ar_temperature", c.decode.ar_temperature},
                   {"rescorer_weight", c.decode.rescorer_weight},
                   {"seed", c.decode.seed}};
  doc["synth"] = {{"levels", c.synth.levels},       {"length", c.synth.length},
                  {"vocab", c.synth.vocab},         {"cond_count", c.synth.cond_count},
                  {"dep_window", c.synth.dep_window}, {"branching", c.synth.branching},
                  {"noise", c.synth.noise},         {"seed", c.synth.seed}};
  doc["bench"] = {{"batch_sizes", c.bench.batch_sizes}, {"lengths", c.bench.lengths},
                  {"variants", c.bench.variants},       {"repetitions", c.bench.repetitions},
                  {"warmup", c.bench.warmup}};
  return doc.dump(indent);
}

}  // namespace magnet
