#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "magnet/run_config.hpp"

using namespace magnet;

TEST(RunConfig, DefaultsRoundTripThroughJson) {
  RunConfig a;
  RunConfig b;
  b.model.d_model = 8;
  apply_json(b, to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
}

TEST(RunConfig, FileValuesOverrideDefaults) {
  RunConfig c;
  apply_json(c, R"({"model": {"layout": "delayed", "window": -1}, "decode": {"steps_per_level": [10, 1, 1, 1]}})");
  EXPECT_EQ(c.model.layout, Layout::kDelayed);
  EXPECT_EQ(c.model.window, -1);
  EXPECT_EQ(c.decode.steps_per_level, (std::vector<int>{10, 1, 1, 1}));
  EXPECT_EQ(c.model.d_model, 64);
}

TEST(RunConfig, UnknownKeysNameTheField) {
  RunConfig c;
  try {
    apply_json(c, R"({"model": {"dmodel": 3}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.dmodel"), std::string::npos);
  }
  EXPECT_THROW(apply_json(c, R"({"optimizer": {}})"), ConfigError);
}

TEST(RunConfig, TypeMismatchNamesTheField) {
  RunConfig c;
  try {
    apply_json(c, R"({"train": {"steps": "many"}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.steps"), std::string::npos);
  }
  EXPECT_THROW(apply_json(c, R"({"train": {"mode": "beam"}})"), ConfigError);
  EXPECT_THROW(apply_json(c, "{not json"), ConfigError);
}

TEST(RunConfig, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "magnet_run_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"train": {"steps": 12, "mode": "hybrid"}})";
  }
  const RunConfig c = load_run_config(path);
  EXPECT_EQ(c.train.steps, 12);
  EXPECT_EQ(c.train.mode, TrainMode::kHybrid);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(RunConfig, DecodeSettingsConvert) {
  DecodeSettings s;
  s.lambda0 = 4.0;
  s.top_p = 0.8;
  const DecodeConfig d = s.to_decode_config();
  EXPECT_EQ(d.schedule.lambda0, 4.0);
  EXPECT_EQ(d.schedule.top_p, 0.8);
  EXPECT_EQ(d.rescorer, nullptr);
}
