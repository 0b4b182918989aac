#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavmec/env/config.hpp"
#include "uavmec/gat/encoder.hpp"
#include "uavmec/ppo/learner.hpp"

namespace uavmec::run {

struct RunConfig {
  env::EnvConfig env;
  gat::EncoderConfig encoder;  // max_neighbors and grid are derived from env
  ppo::PpoConfig ppo;
  std::size_t episodes = 900;
  std::uint64_t seed = 1;
  std::size_t checkpoint_interval = 25;
  std::size_t update_every = 0;  // slots between learner rounds; 0 means once per episode
  std::size_t eval_episodes = 20;
  std::size_t calibration_episodes = 4;  // rollouts used to standardize encoder outputs

  /// Copies derived sizes into the encoder and validates every section.
  void finalize();
};

/// One documented configuration key.
struct ConfigKey {
  std::string name;
  std::string description;
  std::function<void(RunConfig&, const nlohmann::json&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

/// Applies a JSON object on top of `base`. Unknown keys and wrong types are
/// configuration errors.
RunConfig apply_json(RunConfig base, const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Sets one key from command-line text such as "25" or "true".
void set_key(RunConfig& config, const std::string& key, const std::string& text);

/// Human-readable listing of every key with its default.
std::string describe_keys();

}  // namespace uavmec::run
