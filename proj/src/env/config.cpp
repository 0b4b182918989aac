#include "uavmec/env/config.hpp"

#include <cmath>
#include <string>

#include "uavmec/errors.hpp"

namespace uavmec::env {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw ConfigError(std::string(name) + " must be a positive finite number");
}

}  // namespace

void EnvConfig::validate() const {
  if (num_uavs == 0) throw ConfigError("num_uavs must be at least 1");
  if (num_users == 0) throw ConfigError("num_users must be at least 1");
  if (num_slots == 0) throw ConfigError("num_slots must be at least 1");
  if (tasks_per_user == 0) throw ConfigError("tasks_per_user must be at least 1");
  require_positive(area_size, "area_size");
  require_positive(altitude, "altitude");
  require_positive(task_size_min_kbit, "task_size_min_kbit");
  require_positive(task_size_max_kbit, "task_size_max_kbit");
  require_positive(task_cycles_min, "task_cycles_min");
  require_positive(task_cycles_max, "task_cycles_max");
  require_positive(min_distance, "min_distance");
  require_positive(coverage_radius, "coverage_radius");
  require_positive(comm_radius, "comm_radius");
  require_positive(bandwidth_hz, "bandwidth_hz");
  require_positive(user_tx_power_w, "user_tx_power_w");
  require_positive(uav_rx_power_w, "uav_rx_power_w");
  require_positive(initial_battery_j, "initial_battery_j");
  require_positive(energy_per_cycle_j, "energy_per_cycle_j");
  require_positive(max_speed, "max_speed");
  require_positive(hover_power_w, "hover_power_w");
  require_positive(flying_power_w, "flying_power_w");
  require_positive(penalty, "penalty");
  require_positive(slot_duration, "slot_duration");
  require_positive(grid_cell, "grid_cell");
  if (!std::isfinite(power_gain_db)) throw ConfigError("power_gain_db must be finite");
  if (!std::isfinite(noise_power_dbm)) throw ConfigError("noise_power_dbm must be finite");
  if (!(user_speed_max >= 0.0) || !std::isfinite(user_speed_max))
    throw ConfigError("user_speed_max must be non-negative");
  if (!(w1 >= 0.0) || !(w2 >= 0.0) || !std::isfinite(w1) || !std::isfinite(w2))
    throw ConfigError("w1 and w2 must be non-negative");
  if (task_size_min_kbit > task_size_max_kbit)
    throw ConfigError("task_size_min_kbit exceeds task_size_max_kbit");
  if (task_cycles_min > task_cycles_max)
    throw ConfigError("task_cycles_min exceeds task_cycles_max");
  if (min_distance >= area_size) throw ConfigError("min_distance must be smaller than area_size");
  if (grid_cell > area_size) throw ConfigError("grid_cell must not exceed area_size");
}

double EnvConfig::power_gain() const { return std::pow(10.0, power_gain_db / 10.0); }

double EnvConfig::noise_power_w() const { return std::pow(10.0, (noise_power_dbm - 30.0) / 10.0); }

std::size_t EnvConfig::grid_size() const {
  return static_cast<std::size_t>(std::ceil(area_size / grid_cell - 1e-9));
}

double EnvConfig::energy_scale() const {
  if (!normalize_energy) return 1.0;
  return static_cast<double>(num_uavs) * (hover_power_w + flying_power_w) * slot_duration;
}

}  // namespace uavmec::env
