#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "uavmec/env/config.hpp"
#include "uavmec/env/world.hpp"

namespace uavmec::env {

/// Fresh episode. Users, tasks and UAV positions are drawn from streams
/// derived from `seed`.
WorldState reset(const EnvConfig& config, std::uint64_t seed);

/// Moves one user by v dt with reflection at the borders, then optionally
/// resamples its velocity.
void advance_user(UserState& user, const EnvConfig& config, Rng& rng);
void step_users(WorldState& world);

struct MoveResult {
  Vec2 position;
  double displacement = 0.0;
  bool boundary_violation = false;
};

/// Clips the request to the speed ball; a target outside the area leaves the
/// UAV in place and is reported as a violation.
MoveResult move_uav(Vec2 position, double dx, double dy, const EnvConfig& config);

bool covers(Vec2 user, Vec2 uav, const EnvConfig& config);
BinaryMatrix coverage(const WorldState& world);

double channel_gain(double distance, double g0);
double data_rate(double gain, double tx_power_w, double noise_w, double bandwidth_hz);
/// Distance-based rate between a user and a UAV at altitude H.
double link_rate(Vec2 user, Vec2 uav, const EnvConfig& config);

/// Energy for one UAV in one slot. `task` is the served task, if any.
EnergyBreakdown slot_energy(const EnvConfig& config, const Task* task, double rate,
                            double moved_distance);

double objective_psi(const SlotOutcome& outcome, const EnvConfig& config);

/// Grid cell that contains a horizontal position.
std::pair<std::size_t, std::size_t> grid_cell_of(Vec2 position, const EnvConfig& config);

SlotOutcome execute_slot(WorldState& world, std::span<const UavAction> actions);

}  // namespace uavmec::env
