#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "uavmec/env/config.hpp"
#include "uavmec/random.hpp"

namespace uavmec::env {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

struct Task {
  double size_bits = 0.0;
  double cycles_per_bit = 0.0;
  bool done = false;
  bool operator==(const Task&) const = default;
};

struct UserState {
  int id = 0;
  Vec2 position;
  Vec2 velocity;
  std::vector<Task> tasks;
  std::size_t next_task = 0;  // tasks are served strictly in queue order

  std::size_t remaining() const { return tasks.size() - next_task; }
  bool operator==(const UserState&) const = default;
};

/// Row-major cells x cells binary map of visited grid cells.
struct GridMap {
  std::size_t cells = 0;
  std::vector<std::uint8_t> bits;

  GridMap() = default;
  explicit GridMap(std::size_t n) : cells(n), bits(n * n, 0) {}
  std::uint8_t at(std::size_t row, std::size_t col) const { return bits[row * cells + col]; }
  void mark(std::size_t row, std::size_t col) { bits[row * cells + col] = 1; }
  std::size_t ones_count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
  }
  bool operator==(const GridMap&) const = default;
};

struct UavState {
  int id = 0;
  Vec2 position;  // altitude is the constant H
  double battery_j = 0.0;
  bool battery_exhausted = false;
  GridMap visited;
  bool operator==(const UavState&) const = default;
};

/// Rows are users, columns are UAVs.
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), bits(r * c, 0) {}
  std::uint8_t at(std::size_t r, std::size_t c) const { return bits[r * cols + c]; }
  void set(std::size_t r, std::size_t c, std::uint8_t v) { bits[r * cols + c] = v; }
  std::size_t row_sum(std::size_t r) const;
  std::size_t col_sum(std::size_t c) const;
  std::size_t ones() const;
};

struct WorldState {
  EnvConfig config;
  std::size_t slot = 0;
  bool done = false;
  std::vector<UserState> users;
  std::vector<UavState> uavs;
  std::size_t total_tasks = 0;
  std::size_t processed_tasks = 0;
  Rng mobility_rng;

  std::size_t remaining_tasks() const { return total_tasks - processed_tasks; }
};

struct UavAction {
  double dx = 0.0;
  double dy = 0.0;
  std::optional<int> user;  // user id to serve, or nobody
};

struct EnergyBreakdown {
  double hover = 0.0;
  double flying = 0.0;
  double receive = 0.0;
  double processing = 0.0;

  double total() const { return hover + flying + receive + processing; }
};

struct SlotOutcome {
  std::size_t slot = 0;  // index of the executed slot, 0-based
  std::vector<double> rewards;
  std::vector<EnergyBreakdown> energy;
  std::size_t processed = 0;  // L_pt
  BinaryMatrix assignment;    // alpha
  BinaryMatrix coverage;      // delta after the move
  std::vector<std::pair<int, int>> collisions;
  std::vector<int> boundary_violators;
  std::vector<double> displacement;  // executed move length per UAV
  double psi = 0.0;
  double energy_total = 0.0;
};

}  // namespace uavmec::env
