#pragma once

#include <cstddef>

namespace uavmec::env {

/// Physical and reward constants of one scenario. Defaults are the full-scale
/// simulation parameter table; see configs/ for the desk-scale profile.
struct EnvConfig {
  std::size_t num_uavs = 10;           // M
  std::size_t num_users = 50;          // N
  std::size_t num_slots = 80;          // T
  double area_size = 250.0;            // L [m]
  double altitude = 100.0;             // H [m]
  double task_size_min_kbit = 100.0;   // S lower bound [Kb]
  double task_size_max_kbit = 200.0;   // S upper bound [Kb]
  double task_cycles_min = 150.0;      // C lower bound [cycles/bit]
  double task_cycles_max = 200.0;      // C upper bound [cycles/bit]
  std::size_t tasks_per_user = 3;      // U_n
  double min_distance = 10.0;          // d_min [m]
  double coverage_radius = 25.0;       // R_cov [m]
  double comm_radius = 60.0;           // R_com [m]
  double bandwidth_hz = 10e6;          // B
  double power_gain_db = -50.0;        // G0
  double noise_power_dbm = -90.0;      // sigma^2
  double user_tx_power_w = 0.1;        // P_n
  double uav_rx_power_w = 0.1;         // P_m^r
  double initial_battery_j = 100e3;
  double energy_per_cycle_j = 1e-27;   // kappa_m
  double max_speed = 2.0;              // V_max [m/s]
  double hover_power_w = 1.0;          // P^h
  double flying_power_w = 10.0;        // P^f at V_max
  double penalty = 500.0;              // lambda_m
  std::size_t max_neighbors = 4;       // K (neighbors kept per UAV)
  double w1 = 0.5;
  double w2 = 0.5;
  double slot_duration = 1.0;          // Delta t [s]
  double user_speed_max = 1.0;         // per-axis velocity bound [m/s]
  bool resample_user_velocity = true;
  double grid_cell = 10.0;             // visited-map cell edge [m]
  bool coverage_3d = false;            // literal slant-range coverage test
  bool reject_close_placement = false; // resample UAVs placed closer than d_min
  bool cooperative_penalty = false;    // every UAV pays when any UAV violates
  bool normalize_energy = false;       // divide slot energy by M (P^h + P^f) dt

  /// Throws ConfigError on any non-positive constant or inconsistent value.
  void validate() const;

  double power_gain() const;       // linear G0
  double noise_power_w() const;    // linear sigma^2
  double max_step() const { return max_speed * slot_duration; }
  std::size_t grid_size() const;   // cells per side
  /// Divisor applied to slot energy inside the objective.
  double energy_scale() const;
};

}  // namespace uavmec::env
