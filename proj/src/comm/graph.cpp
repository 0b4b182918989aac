#include "uavmec/comm/graph.hpp"

#include <algorithm>
#include <limits>
#include <queue>

#include "uavmec/errors.hpp"

namespace uavmec::comm {

NeighborSet build_neighbors(std::span<const env::Vec2> positions, double comm_radius,
                            std::size_t max_neighbors) {
  NeighborSet out(positions.size());
  for (std::size_t m = 0; m < positions.size(); ++m) {
    std::vector<std::pair<double, std::size_t>> in_range;
    for (std::size_t j = 0; j < positions.size(); ++j) {
      if (j == m) continue;
      const double d = (positions[j] - positions[m]).norm();
      if (d <= comm_radius) in_range.emplace_back(d, j);
    }
    std::sort(in_range.begin(), in_range.end());
    if (in_range.size() > max_neighbors) in_range.resize(max_neighbors);
    out[m].push_back(m);
    for (const auto& [d, j] : in_range) out[m].push_back(j);
  }
  return out;
}

NeighborSet build_neighbors(const env::WorldState& world, double comm_radius,
                            std::size_t max_neighbors) {
  std::vector<env::Vec2> positions;
  positions.reserve(world.uavs.size());
  for (const env::UavState& u : world.uavs) positions.push_back(u.position);
  return build_neighbors(positions, comm_radius, max_neighbors);
}

std::vector<env::GridMap> merge_maps(std::span<const env::GridMap> maps, const NeighborSet& neighbors) {
  if (maps.size() != neighbors.size()) throw ContractError("one map per UAV is required");
  std::vector<env::GridMap> out;
  out.reserve(maps.size());
  for (std::size_t m = 0; m < maps.size(); ++m) {
    env::GridMap merged = maps[m];
    for (std::size_t j : neighbors[m]) {
      if (maps[j].cells != merged.cells) throw ContractError("grid maps differ in shape");
      for (std::size_t k = 0; k < merged.bits.size(); ++k) merged.bits[k] |= maps[j].bits[k];
    }
    out.push_back(std::move(merged));
  }
  return out;
}

std::vector<std::vector<ppo::Transition>> union_buffers(std::span<const ppo::ReplayBuffer> buffers,
                                                        const NeighborSet& neighbors) {
  if (buffers.size() != neighbors.size()) throw ContractError("one buffer per UAV is required");
  std::size_t dim = 0;
  bool have_dim = false;
  for (const ppo::ReplayBuffer& b : buffers)
    for (const ppo::Transition& t : b) {
      if (!have_dim) {
        dim = t.z.size();
        have_dim = true;
      } else if (t.z.size() != dim) {
        throw ContractError("transitions disagree on encoded-state dimension");
      }
    }
  std::vector<std::vector<ppo::Transition>> pools(buffers.size());
  for (std::size_t m = 0; m < buffers.size(); ++m)
    for (std::size_t j : neighbors[m]) pools[m].insert(pools[m].end(), buffers[j].begin(), buffers[j].end());
  return pools;
}

std::vector<nn::ParameterStore> average_parameters(std::span<const nn::ParameterStore> stores,
                                                   const NeighborSet& neighbors) {
  if (stores.size() != neighbors.size()) throw ContractError("one store per UAV is required");
  for (const nn::ParameterStore& s : stores)
    if (!s.same_layout(stores.front())) throw ContractError("parameter stores differ in layout");
  std::vector<nn::ParameterStore> out;
  out.reserve(stores.size());
  for (std::size_t m = 0; m < stores.size(); ++m) {
    nn::ParameterStore avg = stores[m];
    const double inv = 1.0 / static_cast<double>(neighbors[m].size());
    for (auto& [name, value] : avg.entries()) {
      std::fill(value.data.begin(), value.data.end(), 0.0);
      for (std::size_t j : neighbors[m]) {
        const auto& src = stores[j].at(name).data;
        for (std::size_t k = 0; k < src.size(); ++k) value.data[k] += src[k];
      }
      for (double& v : value.data) v *= inv;
    }
    avg.bump_version();
    out.push_back(std::move(avg));
  }
  return out;
}

std::vector<std::vector<std::size_t>> hop_distances(const NeighborSet& neighbors) {
  const std::size_t n = neighbors.size();
  std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, std::numeric_limits<std::size_t>::max()));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> frontier;
    dist[s][s] = 0;
    frontier.push(s);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : neighbors[u])
        if (dist[s][v] == std::numeric_limits<std::size_t>::max()) {
          dist[s][v] = dist[s][u] + 1;
          frontier.push(v);
        }
    }
  }
  return dist;
}

}  // namespace uavmec::comm
