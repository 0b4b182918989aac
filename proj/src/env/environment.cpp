#include "uavmec/env/environment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uavmec/errors.hpp"

namespace uavmec::env {

std::size_t BinaryMatrix::row_sum(std::size_t r) const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < cols; ++c) s += at(r, c);
  return s;
}

std::size_t BinaryMatrix::col_sum(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t r = 0; r < rows; ++r) s += at(r, c);
  return s;
}

std::size_t BinaryMatrix::ones() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

constexpr std::size_t kPlacementRetries = 10000;

Vec2 uniform_point(Rng& rng, double side) {
  std::uniform_real_distribution<double> d(0.0, side);
  const double x = d(rng);
  return {x, d(rng)};
}

Vec2 uniform_velocity(Rng& rng, double bound) {
  std::uniform_real_distribution<double> d(-bound, bound);
  const double x = d(rng);
  return {x, d(rng)};
}

bool far_from_all(Vec2 p, const std::vector<UavState>& placed, double min_distance) {
  for (const UavState& u : placed)
    if ((u.position - p).norm() < min_distance) return false;
  return true;
}

void reflect(double& coordinate, double& velocity, double side) {
  while (coordinate < 0.0 || coordinate > side) {
    if (coordinate < 0.0) coordinate = -coordinate;
    if (coordinate > side) coordinate = 2.0 * side - coordinate;
    velocity = -velocity;
  }
}

bool inside(Vec2 p, double side) { return p.x >= 0.0 && p.x <= side && p.y >= 0.0 && p.y <= side; }

void mark_visited(UavState& uav, const EnvConfig& config) {
  const auto [row, col] = grid_cell_of(uav.position, config);
  uav.visited.mark(row, col);
}

}  // namespace

std::pair<std::size_t, std::size_t> grid_cell_of(Vec2 position, const EnvConfig& config) {
  const std::size_t n = config.grid_size();
  auto index = [&](double v) {
    const double cell = std::floor(std::max(v, 0.0) / config.grid_cell);
    return std::min(static_cast<std::size_t>(cell), n - 1);
  };
  return {index(position.y), index(position.x)};
}

WorldState reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState world;
  world.config = config;
  world.mobility_rng = make_rng(seed, "mobility");

  Rng user_rng = make_rng(seed, "users");
  Rng task_rng = make_rng(seed, "tasks");
  std::uniform_real_distribution<double> size_dist(config.task_size_min_kbit * 1e3,
                                                   config.task_size_max_kbit * 1e3);
  std::uniform_real_distribution<double> cycle_dist(config.task_cycles_min, config.task_cycles_max);
  world.users.reserve(config.num_users);
  for (std::size_t n = 0; n < config.num_users; ++n) {
    UserState user;
    user.id = static_cast<int>(n);
    user.position = uniform_point(user_rng, config.area_size);
    user.velocity = uniform_velocity(user_rng, config.user_speed_max);
    for (std::size_t u = 0; u < config.tasks_per_user; ++u) {
      const double s = size_dist(task_rng);
      user.tasks.push_back(Task{s, cycle_dist(task_rng), false});
    }
    world.users.push_back(std::move(user));
  }
  world.total_tasks = config.num_users * config.tasks_per_user;

  Rng uav_rng = make_rng(seed, "uavs");
  if (config.reject_close_placement) {
    const double needed = static_cast<double>(config.num_uavs) * config.min_distance * config.min_distance;
    if (needed > config.area_size * config.area_size)
      throw ConfigError("cannot place " + std::to_string(config.num_uavs) +
                        " UAVs at min_distance apart in the area");
  }
  world.uavs.reserve(config.num_uavs);
  for (std::size_t m = 0; m < config.num_uavs; ++m) {
    UavState uav;
    uav.id = static_cast<int>(m);
    uav.position = uniform_point(uav_rng, config.area_size);
    if (config.reject_close_placement) {
      std::size_t tries = 0;
      while (!far_from_all(uav.position, world.uavs, config.min_distance)) {
        if (++tries > kPlacementRetries)
          throw ConfigError("UAV placement with min_distance rejection did not converge");
        uav.position = uniform_point(uav_rng, config.area_size);
      }
    }
    uav.battery_j = config.initial_battery_j;
    uav.visited = GridMap(config.grid_size());
    mark_visited(uav, config);
    world.uavs.push_back(std::move(uav));
  }
  return world;
}

void advance_user(UserState& user, const EnvConfig& config, Rng& rng) {
  user.position = user.position + user.velocity * config.slot_duration;
  reflect(user.position.x, user.velocity.x, config.area_size);
  reflect(user.position.y, user.velocity.y, config.area_size);
  if (config.resample_user_velocity) user.velocity = uniform_velocity(rng, config.user_speed_max);
}

void step_users(WorldState& world) {
  for (UserState& user : world.users) advance_user(user, world.config, world.mobility_rng);
}

MoveResult move_uav(Vec2 position, double dx, double dy, const EnvConfig& config) {
  if (!std::isfinite(dx) || !std::isfinite(dy)) throw ContractError("UAV move request is not finite");
  Vec2 step{dx, dy};
  const double length = step.norm();
  const double limit = config.max_step();
  if (length > limit) step = step * (limit / length);
  const Vec2 target = position + step;
  if (!inside(target, config.area_size)) return {position, 0.0, true};
  return {target, step.norm(), false};
}

bool covers(Vec2 user, Vec2 uav, const EnvConfig& config) {
  const Vec2 d = user - uav;
  double squared = d.x * d.x + d.y * d.y;
  if (config.coverage_3d) squared += config.altitude * config.altitude;
  return squared <= config.coverage_radius * config.coverage_radius;
}

BinaryMatrix coverage(const WorldState& world) {
  BinaryMatrix delta(world.users.size(), world.uavs.size());
  for (std::size_t n = 0; n < world.users.size(); ++n)
    for (std::size_t m = 0; m < world.uavs.size(); ++m)
      delta.set(n, m, covers(world.users[n].position, world.uavs[m].position, world.config) ? 1 : 0);
  return delta;
}

double channel_gain(double distance, double g0) {
  if (!(distance > 0.0)) throw DomainError("channel gain needs a positive distance");
  return g0 / (distance * distance);
}

double data_rate(double gain, double tx_power_w, double noise_w, double bandwidth_hz) {
  return bandwidth_hz * std::log2(1.0 + tx_power_w * gain / noise_w);
}

double link_rate(Vec2 user, Vec2 uav, const EnvConfig& config) {
  const Vec2 d = user - uav;
  const double distance = std::sqrt(d.x * d.x + d.y * d.y + config.altitude * config.altitude);
  return data_rate(channel_gain(distance, config.power_gain()), config.user_tx_power_w,
                   config.noise_power_w(), config.bandwidth_hz);
}

EnergyBreakdown slot_energy(const EnvConfig& config, const Task* task, double rate,
                            double moved_distance) {
  EnergyBreakdown e;
  e.hover = config.hover_power_w * config.slot_duration;
  e.flying = config.flying_power_w * (moved_distance / config.max_step()) * config.slot_duration;
  if (task != nullptr) {
    if (!(rate > 0.0)) throw ContractError("cannot serve a task over a zero-rate link");
    e.receive = config.uav_rx_power_w * task->size_bits / rate;
    e.processing = config.energy_per_cycle_j * task->size_bits * task->cycles_per_bit;
  }
  return e;
}

double objective_psi(const SlotOutcome& outcome, const EnvConfig& config) {
  double total = 0.0;
  for (const EnergyBreakdown& e : outcome.energy) total += e.total();
  return config.w1 * total / config.energy_scale() -
         config.w2 * static_cast<double>(outcome.processed);
}

SlotOutcome execute_slot(WorldState& world, std::span<const UavAction> actions) {
  if (world.done) throw ContractError("execute_slot called on a finished episode");
  const EnvConfig& cfg = world.config;
  const std::size_t m_count = world.uavs.size();
  if (actions.size() != m_count)
    throw ContractError("expected " + std::to_string(m_count) + " actions, got " +
                        std::to_string(actions.size()));

  SlotOutcome out;
  out.slot = world.slot;
  out.displacement.assign(m_count, 0.0);
  std::vector<bool> violated(m_count, false);

  for (std::size_t m = 0; m < m_count; ++m) {
    const MoveResult r = move_uav(world.uavs[m].position, actions[m].dx, actions[m].dy, cfg);
    world.uavs[m].position = r.position;
    out.displacement[m] = r.displacement;
    if (r.boundary_violation) {
      out.boundary_violators.push_back(world.uavs[m].id);
      violated[m] = true;
    }
  }

  for (std::size_t i = 0; i < m_count; ++i)
    for (std::size_t j = i + 1; j < m_count; ++j)
      if ((world.uavs[i].position - world.uavs[j].position).norm() < cfg.min_distance) {
        out.collisions.emplace_back(world.uavs[i].id, world.uavs[j].id);
        violated[i] = violated[j] = true;
      }

  out.coverage = coverage(world);
  out.assignment = BinaryMatrix(world.users.size(), m_count);
  std::vector<std::optional<Task>> served(m_count);
  std::vector<double> rates(m_count, 0.0);
  for (std::size_t m = 0; m < m_count; ++m) {
    if (!actions[m].user) continue;
    const int choice = *actions[m].user;
    if (choice < 0 || static_cast<std::size_t>(choice) >= world.users.size()) continue;
    const auto n = static_cast<std::size_t>(choice);
    UserState& user = world.users[n];
    if (!out.coverage.at(n, m) || user.remaining() == 0 || out.assignment.row_sum(n) > 0) continue;
    out.assignment.set(n, m, 1);
    Task& task = user.tasks[user.next_task++];
    task.done = true;
    served[m] = task;
    rates[m] = link_rate(user.position, world.uavs[m].position, cfg);
  }
  out.processed = out.assignment.ones();
  world.processed_tasks += out.processed;

  out.energy.reserve(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const EnergyBreakdown e =
        slot_energy(cfg, served[m] ? &*served[m] : nullptr, rates[m], out.displacement[m]);
    out.energy.push_back(e);
    out.energy_total += e.total();
  }
  out.psi = objective_psi(out, cfg);

  const bool any_violation = std::find(violated.begin(), violated.end(), true) != violated.end();
  out.rewards.resize(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const bool penalized = cfg.cooperative_penalty ? any_violation : violated[m];
    out.rewards[m] = -out.psi - (penalized ? cfg.penalty : 0.0);
  }

  step_users(world);

  for (std::size_t m = 0; m < m_count; ++m) {
    UavState& uav = world.uavs[m];
    uav.battery_j = std::max(0.0, uav.battery_j - out.energy[m].total());
    if (uav.battery_j <= 0.0) uav.battery_exhausted = true;
    mark_visited(uav, cfg);
  }

  ++world.slot;
  world.done = world.slot >= cfg.num_slots || world.processed_tasks == world.total_tasks;
  return out;
}

}  // namespace uavmec::env
