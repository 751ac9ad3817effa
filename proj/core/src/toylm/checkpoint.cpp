// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "loadlm/error.hpp"
#include "loadlm/toylm/model.hpp"

namespace loadlm::toylm {
namespace {

constexpr char kMagic[8] = {'L', 'O', 'A', 'D', 'L', 'M', 'T', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw Error(ErrorCode::kSchemaError,
                fmt::format("{}: truncated checkpoint", path.string()));
  }
  return v;
}

nlohmann::json ConfigToJson(const ToyLmConfig& c) {
  return {{"d_model", c.d_model},
          {"heads", c.heads},
          {"layers", c.layers},
          {"ffn_mult", c.ffn_mult},
          {"context_len", c.context_len},
          {"mode", c.mode == TrainMode::kLora ? "lora" : "full"},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"lora_rank", c.lora_rank},
          {"lora_alpha", c.lora_alpha},
          {"lora_dropout", c.lora_dropout}};
}

ToyLmConfig ConfigFromJson(const nlohmann::json& j) {
  ToyLmConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  c.context_len = j.at("context_len").get<std::size_t>();
  c.mode = j.at("mode").get<std::string>() == "lora" ? TrainMode::kLora : TrainMode::kFull;
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.lora_rank = j.at("lora_rank").get<std::size_t>();
  c.lora_alpha = j.at("lora_alpha").get<double>();
  c.lora_dropout = j.at("lora_dropout").get<double>();
  return c;
}

}  // namespace

void ToyLm::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  }
  nlohmann::json header = ConfigToJson(cfg_);
  header["adapters"] = {{"rank", lora_rank_},
                        {"scale", lora_scale_},
                        {"dropout", lora_dropout_}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kVersion);
  Put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  Put<std::uint64_t>(out, params_.size());
  for (const auto& p : params_) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    Put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    Put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    Put<std::uint8_t>(out, p.trainable ? 1 : 0);
    Put<std::uint8_t>(out, p.adapter ? 1 : 0);
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) {
    throw Error(ErrorCode::kIoError, fmt::format("write failed for {}", path.string()));
  }
}

ToyLm ToyLm::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  }
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kSchemaError,
                fmt::format("{}: not a toy LM checkpoint", path.string()));
  }
  const auto version = Get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw Error(ErrorCode::kSchemaError,
                fmt::format("{}: unsupported checkpoint version {}", path.string(), version));
  }
  const auto header_len = Get<std::uint64_t>(in, path);
  if (header_len > (1u << 20)) {
    throw Error(ErrorCode::kSchemaError, fmt::format("{}: header too large", path.string()));
  }
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json header;
  ToyLmConfig cfg;
  try {
    header = nlohmann::json::parse(text);
    cfg = ConfigFromJson(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError,
                fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
  ToyLm model(cfg);
  std::vector<Parameter> expected = std::move(model.params_);
  model.params_.clear();
  const auto count = Get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = Get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = Get<std::uint64_t>(in, path);
    const auto cols = Get<std::uint64_t>(in, path);
    const bool trainable = Get<std::uint8_t>(in, path) != 0;
    const bool adapter = Get<std::uint8_t>(in, path) != 0;
    if (rows * cols > (1ull << 28)) {
      throw Error(ErrorCode::kSchemaError,
                  fmt::format("{}: tensor '{}' too large", path.string(), name));
    }
    Mat value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(value.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) {
      throw Error(ErrorCode::kSchemaError,
                  fmt::format("{}: truncated tensor '{}'", path.string(), name));
    }
    model.Add(std::move(name), std::move(value), trainable, adapter);
  }
  for (const auto& want : expected) {
    const Parameter* got = model.Find(want.name);
    if (got != nullptr && (got->value.rows() != want.value.rows() ||
                           got->value.cols() != want.value.cols())) {
      throw Error(ErrorCode::kSchemaError,
                  fmt::format("{}: tensor '{}' has shape {}x{}, expected {}x{}",
                              path.string(), want.name, got->value.rows(),
                              got->value.cols(), want.value.rows(), want.value.cols()));
    }
  }
  const auto& adapters = header.at("adapters");
  model.lora_rank_ = adapters.at("rank").get<std::size_t>();
  model.lora_scale_ = adapters.at("scale").get<double>();
  model.lora_dropout_ = adapters.at("dropout").get<double>();
  model.Rebuild();
  return model;
}

}  // namespace loadlm::toylm
