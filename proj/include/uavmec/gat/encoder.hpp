#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "uavmec/comm/graph.hpp"
#include "uavmec/env/world.hpp"
#include "uavmec/nn/parameters.hpp"
#include "uavmec/nn/tape.hpp"

namespace uavmec::gat {

struct EncoderConfig {
  std::size_t max_neighbors = 4;
  std::size_t max_obs_users = 10;
  std::size_t grid = 25;  // map cells per side
  std::size_t conv1_channels = 8;
  std::size_t conv1_kernel = 5;
  std::size_t conv1_stride = 2;
  std::size_t conv2_channels = 16;
  std::size_t conv2_kernel = 3;
  std::size_t conv2_stride = 2;
  std::size_t cnn_out = 64;
  std::size_t mlp_hidden = 64;
  std::size_t mlp_out = 64;
  std::size_t gat_dim = 128;
  std::size_t heads = 4;

  static constexpr std::size_t kOwnFields = 5;
  static constexpr std::size_t kNeighborFields = 5;
  static constexpr std::size_t kUserFields = 4;
  static constexpr std::size_t kMapChannels = 2;

  std::size_t status_dim() const {
    return kOwnFields + kNeighborFields * max_neighbors + kUserFields * max_obs_users;
  }
  std::size_t feature_dim() const { return cnn_out + mlp_out; }
  std::size_t z_dim() const { return feature_dim() + gat_dim; }
  /// Spatial side of the second convolution's output.
  std::size_t conv_out_side() const;
  /// Throws ConfigError when the map is too small for the kernels.
  void validate() const;
};

/// What one UAV sees before any message passing.
struct LocalObservation {
  std::vector<double> status;      // own, neighbor slots, user slots
  nn::RealArray map;               // [2, grid, grid]: merged visited cells, own cell
  std::vector<int> user_ids;       // user id per filled user slot
  std::vector<std::uint8_t> user_mask;  // one per user slot
};

/// Builds UAV m's observation. Users are the covered ones with tasks left,
/// nearest first; neighbor slots follow the order of neighbors[m].
LocalObservation observe(const env::WorldState& world, std::size_t m, const comm::NeighborSet& neighbors,
                         const env::GridMap& merged_map, const EncoderConfig& config);

/// Encoder and both GAT layers of one UAV.
nn::NetworkSpec encoder_spec(const EncoderConfig& config);

using ParamNodes = std::map<std::string, nn::NodeId>;

/// g = [CNN(map) || MLP(status)].
nn::NodeId encode_observation(nn::Tape& tape, const ParamNodes& params, const LocalObservation& obs,
                              const EncoderConfig& config);

/// One multi-head attention layer for a node whose neighborhood features are
/// `features` (self first). `layer` is the parameter prefix, e.g. "gat1".
nn::NodeId gat_layer(nn::Tape& tape, const ParamNodes& params, const std::string& layer,
                     std::span<const nn::NodeId> features, std::size_t heads);

/// Attention weights of one head, exposed for inspection.
nn::NodeId gat_attention(nn::Tape& tape, const ParamNodes& params, const std::string& layer,
                         std::size_t head, std::span<const nn::NodeId> features);

/// z_m = [g_m || layer2_m] for every UAV. `params[m]` are UAV m's registered
/// encoder parameters; UAV m applies its own weights at both layers.
std::vector<nn::NodeId> encode_graph(nn::Tape& tape, std::span<const ParamNodes> params,
                                     std::span<const LocalObservation> observations,
                                     const comm::NeighborSet& neighbors, const EncoderConfig& config);

/// Forward-only convenience over plain stores.
std::vector<std::vector<double>> encode_all(std::span<const nn::ParameterStore> stores,
                                            std::span<const LocalObservation> observations,
                                            const comm::NeighborSet& neighbors, const EncoderConfig& config);

}  // namespace uavmec::gat
