#pragma once

#include <span>
#include <vector>

#include "uavmec/env/world.hpp"
#include "uavmec/nn/parameters.hpp"
#include "uavmec/ppo/transition.hpp"

namespace uavmec::comm {

/// neighbors[m] lists UAV indices reachable from m, starting with m itself,
/// then the others by ascending distance (lower index first on ties).
using NeighborSet = std::vector<std::vector<std::size_t>>;

NeighborSet build_neighbors(std::span<const env::Vec2> positions, double comm_radius,
                            std::size_t max_neighbors);
NeighborSet build_neighbors(const env::WorldState& world, double comm_radius,
                            std::size_t max_neighbors);

/// Element-wise OR of each UAV's neighborhood maps.
std::vector<env::GridMap> merge_maps(std::span<const env::GridMap> maps, const NeighborSet& neighbors);

/// Each UAV's training pool: copies of every transition held by its neighborhood.
std::vector<std::vector<ppo::Transition>> union_buffers(std::span<const ppo::ReplayBuffer> buffers,
                                                        const NeighborSet& neighbors);

/// Synchronous neighborhood mean, self included, computed from the input snapshot.
std::vector<nn::ParameterStore> average_parameters(std::span<const nn::ParameterStore> stores,
                                                   const NeighborSet& neighbors);

/// Graph hop distance between every pair of UAVs; unreachable pairs get SIZE_MAX.
std::vector<std::vector<std::size_t>> hop_distances(const NeighborSet& neighbors);

}  // namespace uavmec::comm
