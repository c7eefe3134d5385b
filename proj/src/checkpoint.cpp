#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "magnet/toy_model.hpp"

namespace magnet {

namespace {

constexpr int kFormatVersion = 1;

std::filesystem::path blob_path(const std::filesystem::path& path) {
  auto blob = path;
  blob += ".bin";
  return blob;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},       {"n_heads", c.n_heads},       {"n_layers", c.n_layers},
          {"ffn_mult", c.ffn_mult},     {"levels", c.levels},         {"vocab", c.vocab},
          {"max_length", c.max_length}, {"cond_count", c.cond_count}, {"cond_dropout", c.cond_dropout},
          {"window", c.window},         {"layout", to_string(c.layout)}, {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model");
  c.n_heads = j.at("n_heads");
  c.n_layers = j.at("n_layers");
  c.ffn_mult = j.at("ffn_mult");
  c.levels = j.at("levels");
  c.vocab = j.at("vocab");
  c.max_length = j.at("max_length");
  c.cond_count = j.at("cond_count");
  c.cond_dropout = j.at("cond_dropout");
  c.window = j.at("window");
  c.layout = parse_layout(j.at("layout"));
  c.seed = j.at("seed");
  return c;
}

void put_le32(std::ostream& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  const std::array<char, 4> bytes{static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                  static_cast<char>((bits >> 16) & 0xff),
                                  static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes.data(), bytes.size());
}

float get_le32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                             static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["format"] = "magnet-checkpoint";
  manifest["version"] = kFormatVersion;
  manifest["dtype"] = "float32-le";
  manifest["config"] = config_to_json(model.config());
  manifest["blob"] = blob_path(path).filename().string();

  std::ofstream blob(blob_path(path), std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + blob_path(path).string());
  std::size_t offset = 0;
  auto& tensors = manifest["tensors"];
  tensors = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", offset}});
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put_le32(blob, p.value.data()[i]);
    offset += static_cast<std::size_t>(p.value.size()) * 4;
  }
  manifest["blob_bytes"] = offset;
  if (!blob) throw std::runtime_error("failed writing " + blob_path(path).string());

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != "magnet-checkpoint" || manifest.value("version", 0) != kFormatVersion) {
    throw std::runtime_error(path.string() + " is not a version-1 magnet checkpoint");
  }
  ToyModel model(config_from_json(manifest.at("config")));

  const auto blob_file = path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream blob(blob_file, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open checkpoint blob " + blob_file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
  if (bytes.size() != manifest.at("blob_bytes").get<std::size_t>()) {
    throw std::runtime_error("checkpoint blob size does not match manifest");
  }

  auto& params = model.parameters();
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) throw std::runtime_error("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = tensors[i];
    auto& p = params[i];
    const auto shape = entry.at("shape");
    if (entry.at("name") != p.name || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw std::runtime_error("checkpoint tensor " + entry.at("name").get<std::string>() +
                               " does not match the model built from its config");
    }
    const auto offset = entry.at("offset").get<std::size_t>();
    if (offset + static_cast<std::size_t>(p.value.size()) * 4 > bytes.size()) {
      throw std::runtime_error("checkpoint tensor " + p.name + " runs past the blob");
    }
    for (Eigen::Index j = 0; j < p.value.size(); ++j) p.value.data()[j] = get_le32(&bytes[offset + 4 * j]);
  }
  return model;
}

}  // namespace magnet
