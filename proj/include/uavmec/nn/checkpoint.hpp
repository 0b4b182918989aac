#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "uavmec/nn/parameters.hpp"

namespace uavmec::nn {

/// Binary checkpoint container.
///
///   offset 0   8 bytes   magic "UAVMECCK"
///   offset 8   8 bytes   header length H, unsigned little-endian
///   offset 16  H bytes   UTF-8 JSON header
///   then       payload   every tensor listed in header["tensors"], in that
///                        order, as IEEE-754 binary64 little-endian values
///
/// The header holds "format_version", "seed", "episode", a free-form "meta"
/// object, per-store versions under "stores", and the tensor table (store,
/// name, shape). Writing then reading reproduces every value bit for bit.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint64_t seed = 0;
  std::int64_t episode = 0;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, ParameterStore> stores;

  bool operator==(const Checkpoint& other) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace uavmec::nn
