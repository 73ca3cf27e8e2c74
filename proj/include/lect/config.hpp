#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lect/encoders.hpp"
#include "lect/graph.hpp"
#include "lect/oodgen.hpp"
#include "lect/trainer.hpp"

namespace lect {

struct EncoderSettings {
  std::string kind = "hash";  // "hash" or "remote"
  std::size_t dim = 384;
  std::uint64_t seed = 0;
  RemoteEncoderConfig remote;  // used when kind == "remote"
};

struct LlmSettings {
  RemoteChatConfig remote;  // used when oodgen.generator == remote-llm
  unsigned concurrency = 4;
};

struct ExperimentSettings {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::size_t> pair_grid = {0, 100, 300};
  std::vector<std::size_t> triplet_grid = {0, 100};
};

/// Every module's settings in one document. The single run seed is applied
/// to all stages at run time.
struct AppConfig {
  std::uint64_t seed = 0;
  SplitSpec split{{}, 0.6, 0.2, 0};
  OodGenConfig oodgen;
  EncoderSettings encoder;
  LlmSettings llm;
  TrainConfig train;
  ExperimentSettings experiment;

  /// Raises on the first invalid value.
  void validate() const;
};

/// Parses a JSON config; every object rejects keys it does not know.
AppConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const AppConfig& cfg);
AppConfig load_config(const std::filesystem::path& path);

/// Builds the configured encoder. Remote encoders read their token from
/// LECT_EMBED_TOKEN when none is set.
std::unique_ptr<TextEncoder> make_encoder(const EncoderSettings& settings);

/// Builds the configured pseudo-text generator. Only the remote-llm kind
/// touches the network.
std::unique_ptr<TextGenerator> make_generator(GeneratorKind kind, const LlmSettings& settings);

}  // namespace lect
