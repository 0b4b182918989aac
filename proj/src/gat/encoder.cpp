#include "uavmec/gat/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "uavmec/env/environment.hpp"
#include "uavmec/errors.hpp"

namespace uavmec::gat {

namespace {

constexpr double kLeakySlope = 0.01;

std::size_t conv_side(std::size_t in, std::size_t kernel, std::size_t stride) {
  return in < kernel ? 0 : (in - kernel) / stride + 1;
}

std::string head_name(const std::string& layer, const char* kind, std::size_t k) {
  return layer + "." + kind + std::to_string(k);
}

nn::NodeId param(const ParamNodes& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("encoder parameter '" + name + "' is not registered");
  return it->second;
}

}  // namespace

std::size_t EncoderConfig::conv_out_side() const {
  return conv_side(conv_side(grid, conv1_kernel, conv1_stride), conv2_kernel, conv2_stride);
}

void EncoderConfig::validate() const {
  if (conv1_stride == 0 || conv2_stride == 0) throw ConfigError("convolution strides must be positive");
  if (conv_out_side() == 0)
    throw ConfigError("grid of " + std::to_string(grid) + " cells is too small for the map encoder kernels");
  if (heads == 0 || gat_dim == 0 || cnn_out == 0 || mlp_out == 0 || mlp_hidden == 0 ||
      conv1_channels == 0 || conv2_channels == 0)
    throw ConfigError("encoder widths and head count must be positive");
}

LocalObservation observe(const env::WorldState& world, std::size_t m, const comm::NeighborSet& neighbors,
                         const env::GridMap& merged_map, const EncoderConfig& config) {
  const env::EnvConfig& ec = world.config;
  const env::UavState& self = world.uavs.at(m);
  LocalObservation obs;
  obs.status.assign(config.status_dim(), 0.0);
  double* s = obs.status.data();
  s[0] = self.position.x / ec.area_size;
  s[1] = self.position.y / ec.area_size;
  s[2] = self.battery_j / ec.initial_battery_j;
  s[3] = std::min(1.0, ec.coverage_radius / ec.area_size);
  s[4] = std::min(1.0, ec.comm_radius / ec.area_size);

  double* ns = s + EncoderConfig::kOwnFields;
  std::size_t slot = 0;
  for (std::size_t k = 1; k < neighbors.at(m).size() && slot < config.max_neighbors; ++k, ++slot) {
    const env::UavState& other = world.uavs.at(neighbors[m][k]);
    const env::Vec2 rel = other.position - self.position;
    double* f = ns + slot * EncoderConfig::kNeighborFields;
    f[0] = other.battery_j / ec.initial_battery_j;
    f[1] = std::min(1.0, rel.norm() / ec.comm_radius);
    f[2] = std::clamp(rel.x / ec.comm_radius, -1.0, 1.0);
    f[3] = std::clamp(rel.y / ec.comm_radius, -1.0, 1.0);
    f[4] = 1.0;
  }

  std::vector<std::pair<double, int>> visible;
  for (const env::UserState& u : world.users)
    if (u.remaining() > 0 && env::covers(u.position, self.position, ec))
      visible.emplace_back((u.position - self.position).norm(), u.id);
  std::sort(visible.begin(), visible.end());
  if (visible.size() > config.max_obs_users) visible.resize(config.max_obs_users);

  double* us = ns + EncoderConfig::kNeighborFields * config.max_neighbors;
  obs.user_mask.assign(config.max_obs_users, 0);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    const env::UserState& u = world.users.at(static_cast<std::size_t>(visible[i].second));
    const env::Vec2 rel = u.position - self.position;
    us[i * 4 + 0] = std::clamp(rel.x / ec.coverage_radius, -1.0, 1.0);
    us[i * 4 + 1] = std::clamp(rel.y / ec.coverage_radius, -1.0, 1.0);
    us[i * 4 + 2] = static_cast<double>(u.remaining()) / static_cast<double>(ec.tasks_per_user);
    us[i * 4 + 3] = 1.0;
    obs.user_ids.push_back(u.id);
    obs.user_mask[i] = 1;
  }

  const std::size_t g = config.grid;
  if (merged_map.cells != g) throw ContractError("merged map does not match the encoder grid size");
  obs.map = nn::RealArray({EncoderConfig::kMapChannels, g, g}, 0.0);
  for (std::size_t i = 0; i < g * g; ++i) obs.map.data[i] = merged_map.bits[i];
  const auto [row, col] = env::grid_cell_of(self.position, ec);
  obs.map.data[g * g + row * g + col] = 1.0;
  return obs;
}

nn::NetworkSpec encoder_spec(const EncoderConfig& c) {
  c.validate();
  const std::size_t side = c.conv_out_side();
  nn::NetworkSpec spec{
      {"cnn.conv1", nn::LayerKind::Conv2d, EncoderConfig::kMapChannels, c.conv1_channels, c.conv1_kernel},
      {"cnn.conv2", nn::LayerKind::Conv2d, c.conv1_channels, c.conv2_channels, c.conv2_kernel},
      {"cnn.dense", nn::LayerKind::Dense, c.conv2_channels * side * side, c.cnn_out},
      {"mlp.hidden", nn::LayerKind::Dense, c.status_dim(), c.mlp_hidden},
      {"mlp.out", nn::LayerKind::Dense, c.mlp_hidden, c.mlp_out},
  };
  const std::size_t dims[2][2] = {{c.feature_dim(), c.gat_dim}, {c.gat_dim, c.gat_dim}};
  for (std::size_t layer = 0; layer < 2; ++layer) {
    const std::string prefix = "gat" + std::to_string(layer + 1);
    for (std::size_t k = 0; k < c.heads; ++k) {
      spec.push_back({head_name(prefix, "W", k), nn::LayerKind::Matrix, dims[layer][0], dims[layer][1]});
      spec.push_back({head_name(prefix, "a", k), nn::LayerKind::AttentionVector, dims[layer][1], 1});
    }
  }
  return spec;
}

nn::NodeId encode_observation(nn::Tape& tape, const ParamNodes& p, const LocalObservation& obs,
                              const EncoderConfig& c) {
  const nn::NodeId map = tape.input(obs.map);
  nn::NodeId x = tape.conv2d(map, param(p, "cnn.conv1.weight"), param(p, "cnn.conv1.bias"), c.conv1_stride);
  x = tape.leaky_relu(x, kLeakySlope);
  x = tape.conv2d(x, param(p, "cnn.conv2.weight"), param(p, "cnn.conv2.bias"), c.conv2_stride);
  x = tape.leaky_relu(x, kLeakySlope);
  const nn::NodeId cnn = tape.tanh(tape.dense(x, param(p, "cnn.dense.weight"), param(p, "cnn.dense.bias")));

  const nn::NodeId status = tape.input(nn::RealArray::vector(obs.status));
  nn::NodeId h = tape.leaky_relu(tape.dense(status, param(p, "mlp.hidden.weight"), param(p, "mlp.hidden.bias")),
                                 kLeakySlope);
  const nn::NodeId mlp = tape.tanh(tape.dense(h, param(p, "mlp.out.weight"), param(p, "mlp.out.bias")));
  const nn::NodeId parts[] = {cnn, mlp};
  return tape.concat(parts);
}

namespace {

struct HeadResult {
  nn::NodeId weights;
  nn::NodeId output;
};

HeadResult attention_head(nn::Tape& tape, const ParamNodes& p, const std::string& layer, std::size_t k,
                          std::span<const nn::NodeId> features) {
  if (features.empty()) throw ContractError("attention over an empty neighborhood");
  const nn::NodeId w = param(p, head_name(layer, "W", k));
  const nn::NodeId a = param(p, head_name(layer, "a", k));
  std::vector<nn::NodeId> projected, scores;
  projected.reserve(features.size());
  scores.reserve(features.size());
  for (nn::NodeId g : features) {
    projected.push_back(tape.dense(g, w));
    scores.push_back(tape.leaky_relu(tape.dot(a, projected.back()), kLeakySlope));
  }
  const nn::NodeId alpha = tape.softmax(tape.concat(scores));
  return {alpha, tape.weighted_sum(alpha, projected)};
}

}  // namespace

nn::NodeId gat_attention(nn::Tape& tape, const ParamNodes& params, const std::string& layer, std::size_t head,
                         std::span<const nn::NodeId> features) {
  return attention_head(tape, params, layer, head, features).weights;
}

nn::NodeId gat_layer(nn::Tape& tape, const ParamNodes& params, const std::string& layer,
                     std::span<const nn::NodeId> features, std::size_t heads) {
  if (features.empty()) throw ContractError("attention over an empty neighborhood");
  if (heads == 0) throw ContractError("attention needs at least one head");
  nn::NodeId sum = nn::kNoNode;
  for (std::size_t k = 0; k < heads; ++k) {
    const nn::NodeId out = attention_head(tape, params, layer, k, features).output;
    sum = k == 0 ? out : tape.add(sum, out);
  }
  return tape.tanh(tape.scale(sum, 1.0 / static_cast<double>(heads)));
}

std::vector<nn::NodeId> encode_graph(nn::Tape& tape, std::span<const ParamNodes> params,
                                     std::span<const LocalObservation> observations,
                                     const comm::NeighborSet& neighbors, const EncoderConfig& config) {
  const std::size_t n = observations.size();
  if (params.size() != n || neighbors.size() != n)
    throw ContractError("encode_graph needs one parameter set and neighbor list per observation");
  std::vector<nn::NodeId> g(n), layer1(n), z(n);
  for (std::size_t m = 0; m < n; ++m) g[m] = encode_observation(tape, params[m], observations[m], config);

  auto gather = [&](const std::vector<nn::NodeId>& source, std::size_t m) {
    std::vector<nn::NodeId> out;
    for (std::size_t j : neighbors[m]) out.push_back(source.at(j));
    return out;
  };
  for (std::size_t m = 0; m < n; ++m) layer1[m] = gat_layer(tape, params[m], "gat1", gather(g, m), config.heads);
  for (std::size_t m = 0; m < n; ++m) {
    const nn::NodeId layer2 = gat_layer(tape, params[m], "gat2", gather(layer1, m), config.heads);
    const nn::NodeId parts[] = {g[m], layer2};
    z[m] = tape.concat(parts);
  }
  return z;
}

std::vector<std::vector<double>> encode_all(std::span<const nn::ParameterStore> stores,
                                            std::span<const LocalObservation> observations,
                                            const comm::NeighborSet& neighbors, const EncoderConfig& config) {
  nn::Tape tape;
  std::vector<ParamNodes> params;
  params.reserve(stores.size());
  for (std::size_t m = 0; m < stores.size(); ++m)
    params.push_back(nn::register_parameters(tape, stores[m], "uav" + std::to_string(m) + "/"));
  const std::vector<nn::NodeId> z = encode_graph(tape, params, observations, neighbors, config);
  std::vector<std::vector<double>> out;
  out.reserve(z.size());
  for (nn::NodeId id : z) out.push_back(tape.value(id).data);
  return out;
}

}  // namespace uavmec::gat
