#include "uavmec/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "uavmec/errors.hpp"

namespace uavmec::nn {

namespace {

constexpr char kMagic[8] = {'U', 'A', 'V', 'M', 'E', 'C', 'C', 'K'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& other) const {
  return seed == other.seed && episode == other.episode && meta == other.meta && stores == other.stores;
}

std::string encode_checkpoint(const Checkpoint& ck) {
  nlohmann::json header;
  header["format_version"] = Checkpoint::kFormatVersion;
  header["seed"] = ck.seed;
  header["episode"] = ck.episode;
  header["meta"] = ck.meta;
  header["stores"] = nlohmann::json::object();
  header["tensors"] = nlohmann::json::array();
  for (const auto& [store_name, store] : ck.stores) {
    header["stores"][store_name] = {{"version", store.version()}};
    for (const auto& [name, array] : store.entries()) {
      header["tensors"].push_back({{"store", store_name}, {"name", name}, {"shape", array.shape}});
    }
  }
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  for (const auto& [_, store] : ck.stores) {
    for (const auto& [__, array] : store.entries()) {
      for (Real v : array.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw CheckpointError("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (header.value("format_version", 0u) != Checkpoint::kFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version");
  }

  Checkpoint ck;
  ck.seed = header.at("seed").get<std::uint64_t>();
  ck.episode = header.at("episode").get<std::int64_t>();
  ck.meta = header.value("meta", nlohmann::json::object());
  std::size_t at = 16 + header_len;
  for (const auto& t : header.at("tensors")) {
    Shape shape = t.at("shape").get<Shape>();
    const std::size_t count = element_count(shape);
    if (at + 8 * count > bytes.size()) throw CheckpointError("truncated checkpoint payload");
    std::vector<Real> data(count);
    for (std::size_t i = 0; i < count; ++i, at += 8) data[i] = std::bit_cast<Real>(get_u64(bytes, at));
    ck.stores[t.at("store").get<std::string>()].set(t.at("name").get<std::string>(),
                                                     RealArray(std::move(shape), std::move(data)));
  }
  if (at != bytes.size()) throw CheckpointError("trailing bytes after checkpoint payload");
  for (const auto& [store_name, info] : header.at("stores").items()) {
    ck.stores[store_name].set_version(info.at("version").get<std::uint64_t>());
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  const std::string bytes = encode_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace uavmec::nn
