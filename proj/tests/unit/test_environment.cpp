#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "uavmec/env/environment.hpp"
#include "uavmec/errors.hpp"

using namespace uavmec;
using namespace uavmec::env;

namespace {

EnvConfig small_config(std::size_t m = 2, std::size_t n = 4) {
  EnvConfig c;
  c.num_uavs = m;
  c.num_users = n;
  c.num_slots = 20;
  return c;
}

std::vector<UavAction> hover_all(std::size_t m) { return std::vector<UavAction>(m); }

std::vector<UavAction> random_actions(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  std::uniform_real_distribution<double> move(-4.0, 4.0);
  std::uniform_int_distribution<int> pick(-1, static_cast<int>(n) - 1);
  std::vector<UavAction> a(m);
  for (UavAction& x : a) {
    x.dx = move(rng);
    x.dy = move(rng);
    const int u = pick(rng);
    if (u >= 0) x.user = u;
  }
  return a;
}

// Recomputes slot energy from raw constants without the library helpers.
double oracle_energy(const EnvConfig& c, double moved, const Task* task, double horizontal_sq) {
  double e = c.hover_power_w * c.slot_duration;
  e += c.flying_power_w * moved / (c.max_speed * c.slot_duration) * c.slot_duration;
  if (task != nullptr) {
    const double g0 = std::pow(10.0, c.power_gain_db / 10.0);
    const double noise = std::pow(10.0, c.noise_power_dbm / 10.0) / 1000.0;
    const double h = g0 / (horizontal_sq + c.altitude * c.altitude);
    const double r = c.bandwidth_hz * std::log2(1.0 + c.user_tx_power_w * h / noise);
    e += c.uav_rx_power_w * task->size_bits / r;
    e += c.energy_per_cycle_j * task->size_bits * task->cycles_per_bit;
  }
  return e;
}

}  // namespace

TEST_CASE("config validation rejects non-positive constants") {
  EnvConfig c;
  CHECK_NOTHROW(c.validate());
  c.coverage_radius = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EnvConfig{};
  c.min_distance = 300.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EnvConfig{};
  c.num_uavs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(EnvConfig{}.grid_size() == 25);
}

TEST_CASE("reset is deterministic and respects the area and task ranges") {
  EnvConfig c;  // L = 250, M = 10, N = 50
  const WorldState a = reset(c, 42);
  const WorldState b = reset(c, 42);
  CHECK(a.users == b.users);
  CHECK(a.uavs == b.uavs);
  const WorldState other = reset(c, 43);
  CHECK_FALSE(a.users == other.users);
  CHECK(a.users.size() == 50);
  CHECK(a.uavs.size() == 10);
  CHECK(a.total_tasks == 150);
  for (const UserState& u : a.users) {
    CHECK(u.position.x >= 0.0);
    CHECK(u.position.x <= 250.0);
    CHECK(u.position.y >= 0.0);
    CHECK(u.position.y <= 250.0);
    for (const Task& t : u.tasks) {
      CHECK(t.size_bits >= 100e3);
      CHECK(t.size_bits <= 200e3);
      CHECK(t.cycles_per_bit >= 150.0);
      CHECK(t.cycles_per_bit <= 200.0);
      CHECK_FALSE(t.done);
    }
  }
  for (const UavState& m : a.uavs) {
    CHECK(m.position.x >= 0.0);
    CHECK(m.position.x <= 250.0);
    CHECK(m.battery_j == c.initial_battery_j);
    CHECK(m.visited.ones_count() == 1);
  }
}

TEST_CASE("rejection placement keeps UAVs apart and fails on infeasible configs") {
  EnvConfig c;
  c.reject_close_placement = true;
  c.num_uavs = 20;
  c.min_distance = 30.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WorldState w = reset(c, seed);
    for (std::size_t i = 0; i < w.uavs.size(); ++i)
      for (std::size_t j = i + 1; j < w.uavs.size(); ++j)
        CHECK((w.uavs[i].position - w.uavs[j].position).norm() >= 30.0);
  }
  c.num_uavs = 100;
  CHECK_THROWS_AS(reset(c, 1), ConfigError);
}

TEST_CASE("user mobility") {
  EnvConfig c;
  c.resample_user_velocity = false;
  std::mt19937_64 rng(3);

  UserState still;
  still.position = {10.0, 20.0};
  advance_user(still, c, rng);
  CHECK(still.position == Vec2{10.0, 20.0});

  UserState edge;
  edge.position = {249.0, 100.0};
  edge.velocity = {2.0, 0.0};
  advance_user(edge, c, rng);
  CHECK(edge.position.x == doctest::Approx(249.0));
  CHECK(edge.position.y == doctest::Approx(100.0));
  CHECK(edge.velocity.x == -2.0);

  UserState low;
  low.position = {0.5, 3.0};
  low.velocity = {-2.0, -4.0};
  advance_user(low, c, rng);
  CHECK(low.position.x == doctest::Approx(1.5));
  CHECK(low.position.y == doctest::Approx(1.0));
  CHECK(low.velocity == Vec2{2.0, 4.0});
}

TEST_CASE("users stay inside the area over many random steps") {
  EnvConfig c;
  c.user_speed_max = 7.0;
  WorldState w = reset(c, 9);
  for (int step = 0; step < 10000; ++step) {
    step_users(w);
    for (const UserState& u : w.users) {
      REQUIRE(u.position.x >= 0.0);
      REQUIRE(u.position.x <= c.area_size);
      REQUIRE(u.position.y >= 0.0);
      REQUIRE(u.position.y <= c.area_size);
      REQUIRE(std::fabs(u.velocity.x) <= 7.0);
    }
  }
}

TEST_CASE("UAV movement clipping and the remain-still rule") {
  EnvConfig c;
  const MoveResult none = move_uav({50.0, 50.0}, 0.0, 0.0, c);
  CHECK(none.position == Vec2{50.0, 50.0});
  CHECK(none.displacement == 0.0);

  const MoveResult clipped = move_uav({50.0, 50.0}, 3.0, 4.0, c);
  CHECK(clipped.displacement == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(clipped.position.x == doctest::Approx(51.2));
  CHECK(clipped.position.y == doctest::Approx(51.6));
  CHECK_FALSE(clipped.boundary_violation);

  const MoveResult border = move_uav({1.0, 1.0}, -3.0, 0.0, c);
  CHECK(border.position == Vec2{1.0, 1.0});
  CHECK(border.boundary_violation);
  CHECK(border.displacement == 0.0);

  CHECK_THROWS_AS(move_uav({1.0, 1.0}, std::nan(""), 0.0, c), ContractError);
}

TEST_CASE("coverage geometry") {
  EnvConfig c;
  CHECK(covers({10.0, 10.0}, {10.0, 10.0}, c));
  CHECK(covers({10.0, 35.0}, {10.0, 10.0}, c));
  CHECK_FALSE(covers({10.0, 35.1}, {10.0, 10.0}, c));

  WorldState w = reset(small_config(10, 50), 1);
  w.config.coverage_3d = true;  // H = 100 exceeds R_cov = 25
  w.uavs[0].position = w.users[0].position;
  CHECK(coverage(w).ones() == 0);

  // Shrinking the radius never adds coverage.
  EnvConfig wide;
  wide.coverage_radius = 60.0;
  WorldState world = reset(wide, 5);
  BinaryMatrix previous = coverage(world);
  for (double r : {40.0, 25.0, 10.0, 1.0}) {
    world.config.coverage_radius = r;
    const BinaryMatrix now = coverage(world);
    for (std::size_t i = 0; i < now.bits.size(); ++i) CHECK(now.bits[i] <= previous.bits[i]);
    previous = now;
  }
}

TEST_CASE("channel gain and data rate") {
  const double g0 = std::pow(10.0, -5.0);
  CHECK(channel_gain(100.0, g0) == doctest::Approx(1e-9).epsilon(1e-12));
  CHECK(channel_gain(1.0, g0) == g0);
  CHECK(channel_gain(20.0, g0) == doctest::Approx(channel_gain(10.0, g0) / 4.0).epsilon(1e-14));
  CHECK_THROWS_AS(channel_gain(0.0, g0), DomainError);

  EnvConfig c;
  CHECK(c.power_gain() == doctest::Approx(1e-5).epsilon(1e-14));
  CHECK(c.noise_power_w() == doctest::Approx(1e-12).epsilon(1e-12));
  const double r = data_rate(1e-9, 0.1, 1e-12, 1e7);
  CHECK(r == doctest::Approx(1e7 * std::log2(101.0)).epsilon(1e-14));
  CHECK(r == doctest::Approx(6.66e7).epsilon(1e-3));
  CHECK(data_rate(0.0, 0.1, 1e-12, 1e7) == 0.0);
  double last = 0.0;
  for (double h = 1e-12; h < 1e-6; h *= 3.0) {
    const double now = data_rate(h, 0.1, 1e-12, 1e7);
    CHECK(now > last);
    last = now;
  }
}

TEST_CASE("slot energy components") {
  EnvConfig c;
  const EnergyBreakdown idle = slot_energy(c, nullptr, 0.0, 0.0);
  CHECK(idle.hover == 1.0);
  CHECK(idle.flying == 0.0);
  CHECK(idle.receive == 0.0);
  CHECK(idle.processing == 0.0);

  const Task t{1e5, 150.0, false};
  const EnergyBreakdown served = slot_energy(c, &t, 6.66e7, 0.0);
  CHECK(served.receive == doctest::Approx(1.50e-4).epsilon(2e-3));
  CHECK(served.processing == doctest::Approx(1e-27 * 1e5 * 150.0));

  const EnergyBreakdown full = slot_energy(c, nullptr, 0.0, 2.0);
  CHECK(full.flying == doctest::Approx(10.0));
  CHECK_THROWS_AS(slot_energy(c, &t, 0.0, 0.0), ContractError);
}

TEST_CASE("hovering without service gives the pure hover reward") {
  EnvConfig c = small_config(2, 4);
  WorldState w = reset(c, 11);
  w.uavs[0].position = {50.0, 50.0};
  w.uavs[1].position = {150.0, 150.0};
  const SlotOutcome o = execute_slot(w, hover_all(2));
  CHECK(o.rewards[0] == doctest::Approx(-1.0));
  CHECK(o.rewards[1] == doctest::Approx(-1.0));
  CHECK(o.processed == 0);
  CHECK(o.collisions.empty());
  CHECK(w.slot == 1);
  CHECK(w.uavs[0].battery_j == doctest::Approx(c.initial_battery_j - 1.0));
}

TEST_CASE("close UAVs are both penalized and others are not") {
  EnvConfig c = small_config(3, 4);
  WorldState w = reset(c, 12);
  w.uavs[0].position = {100.0, 100.0};
  w.uavs[1].position = {105.0, 100.0};
  w.uavs[2].position = {200.0, 200.0};
  const SlotOutcome o = execute_slot(w, hover_all(3));
  REQUIRE(o.collisions.size() == 1);
  CHECK(o.collisions[0] == std::pair<int, int>{0, 1});
  CHECK(o.rewards[0] == doctest::Approx(-o.psi - 500.0));
  CHECK(o.rewards[1] == doctest::Approx(-o.psi - 500.0));
  CHECK(o.rewards[2] == doctest::Approx(-o.psi));

  WorldState shared = reset(c, 12);
  shared.config.cooperative_penalty = true;
  shared.uavs = w.uavs;
  shared.uavs[0].position = {100.0, 100.0};
  shared.uavs[1].position = {105.0, 100.0};
  const SlotOutcome so = execute_slot(shared, hover_all(3));
  CHECK(so.rewards[2] == doctest::Approx(-so.psi - 500.0));
}

TEST_CASE("boundary violation is penalized") {
  EnvConfig c = small_config(2, 2);
  WorldState w = reset(c, 13);
  w.uavs[0].position = {0.5, 100.0};
  w.uavs[1].position = {200.0, 100.0};
  std::vector<UavAction> a(2);
  a[0].dx = -2.0;
  const SlotOutcome o = execute_slot(w, a);
  CHECK(o.boundary_violators == std::vector<int>{0});
  CHECK(w.uavs[0].position == Vec2{0.5, 100.0});
  CHECK(o.rewards[0] == doctest::Approx(-o.psi - 500.0));
  CHECK(o.rewards[1] == doctest::Approx(-o.psi));
}

TEST_CASE("contested user is assigned to the lowest UAV id") {
  EnvConfig c = small_config(2, 3);
  WorldState w = reset(c, 14);
  w.users[1].position = {100.0, 100.0};
  w.uavs[0].position = {90.0, 100.0};
  w.uavs[1].position = {112.0, 100.0};
  std::vector<UavAction> a(2);
  a[0].user = 1;
  a[1].user = 1;
  const SlotOutcome o = execute_slot(w, a);
  CHECK(o.assignment.at(1, 0) == 1);
  CHECK(o.assignment.at(1, 1) == 0);
  CHECK(o.assignment.row_sum(1) == 1);
  CHECK(o.processed == 1);
  CHECK(w.users[1].next_task == 1);
  CHECK(w.users[1].tasks[0].done);
  CHECK(o.energy[0].receive > 0.0);
  CHECK(o.energy[1].receive == 0.0);
}

TEST_CASE("uncovered or exhausted choices are ignored") {
  EnvConfig c = small_config(1, 2);
  c.tasks_per_user = 1;
  WorldState w = reset(c, 15);
  w.users[0].position = {10.0, 10.0};
  w.users[1].position = {200.0, 200.0};
  w.uavs[0].position = {10.0, 10.0};
  w.config.resample_user_velocity = false;
  w.users[0].velocity = {};
  std::vector<UavAction> a(1);
  a[0].user = 1;  // out of coverage
  CHECK(execute_slot(w, a).processed == 0);
  a[0].user = 0;
  CHECK(execute_slot(w, a).processed == 1);
  CHECK(execute_slot(w, a).processed == 0);  // queue empty
  a[0].user = 7;  // no such user
  CHECK(execute_slot(w, a).processed == 0);
}

TEST_CASE("episode ends at the horizon or when all tasks are processed") {
  EnvConfig c = small_config(1, 1);
  c.num_slots = 3;
  WorldState w = reset(c, 16);
  for (int i = 0; i < 3; ++i) execute_slot(w, hover_all(1));
  CHECK(w.done);
  CHECK_THROWS_AS(execute_slot(w, hover_all(1)), ContractError);

  c.num_slots = 50;
  c.tasks_per_user = 2;
  c.resample_user_velocity = false;
  WorldState quick = reset(c, 17);
  quick.users[0].velocity = {};
  quick.uavs[0].position = quick.users[0].position;
  std::vector<UavAction> a(1);
  a[0].user = 0;
  execute_slot(quick, a);
  CHECK_FALSE(quick.done);
  execute_slot(quick, a);
  CHECK(quick.done);
  CHECK(quick.slot == 2);
}

TEST_CASE("wrong action count is a contract error") {
  WorldState w = reset(small_config(2, 2), 1);
  CHECK_THROWS_AS(execute_slot(w, hover_all(3)), ContractError);
}

TEST_CASE("objective psi") {
  EnvConfig c;
  SlotOutcome o;
  CHECK(objective_psi(o, c) == 0.0);
  o.processed = 3;
  o.energy = {EnergyBreakdown{1.0, 2.0, 0.0, 0.0}};
  c.w1 = 0.0;
  CHECK(objective_psi(o, c) == -0.5 * 3);
  c.w1 = 0.5;
  CHECK(objective_psi(o, c) == doctest::Approx(0.5 * 3.0 - 1.5));
  c.normalize_energy = true;
  c.num_uavs = 2;
  CHECK(objective_psi(o, c) == doctest::Approx(0.5 * 3.0 / 22.0 - 1.5));
}

TEST_CASE("visited grid tracks UAV positions monotonically") {
  EnvConfig c = small_config(1, 1);
  WorldState w = reset(c, 18);
  w.uavs[0].position = {5.0, 5.0};
  w.uavs[0].visited = GridMap(c.grid_size());
  std::vector<UavAction> a(1);
  a[0].dx = 2.0;
  for (int i = 0; i < 5; ++i) {
    const GridMap before = w.uavs[0].visited;
    execute_slot(w, a);
    for (std::size_t k = 0; k < before.bits.size(); ++k) CHECK(w.uavs[0].visited.bits[k] >= before.bits[k]);
  }
  CHECK(w.uavs[0].visited.at(0, 1) == 1);  // x = 15 after five moves
  CHECK(grid_cell_of({250.0, 0.0}, c) == std::pair<std::size_t, std::size_t>{0, 24});
}

TEST_CASE("random slots satisfy constraints, conservation and energy accounting") {
  EnvConfig c;
  c.num_uavs = 6;
  c.num_users = 20;
  c.num_slots = 40;
  c.coverage_radius = 40.0;
  std::mt19937_64 rng(77);
  for (std::uint64_t episode = 0; episode < 20; ++episode) {
    WorldState w = reset(c, episode);
    std::vector<double> battery(c.num_uavs, c.initial_battery_j);
    while (!w.done) {
      const std::vector<Vec2> before = [&] {
        std::vector<Vec2> p;
        for (const UavState& u : w.uavs) p.push_back(u.position);
        return p;
      }();
      const std::vector<UserState> users_before = w.users;
      const auto actions = random_actions(rng, c.num_uavs, c.num_users);
      const SlotOutcome o = execute_slot(w, actions);

      double energy_sum = 0.0;
      for (std::size_t m = 0; m < c.num_uavs; ++m) {
        REQUIRE(o.assignment.col_sum(m) <= 1);
        REQUIRE((w.uavs[m].position - before[m]).norm() <= c.max_step() + 1e-9);
        REQUIRE(w.uavs[m].position.x >= 0.0);
        REQUIRE(w.uavs[m].position.x <= c.area_size);
        REQUIRE(w.uavs[m].battery_j <= battery[m]);
        battery[m] = w.uavs[m].battery_j;
        const Task* task = nullptr;
        double horizontal_sq = 0.0;
        for (std::size_t n = 0; n < c.num_users; ++n)
          if (o.assignment.at(n, m)) {
            task = &users_before[n].tasks[users_before[n].next_task];
            const Vec2 d = users_before[n].position - w.uavs[m].position;
            horizontal_sq = d.x * d.x + d.y * d.y;
          }
        const double expected = oracle_energy(c, o.displacement[m], task, horizontal_sq);
        REQUIRE(o.energy[m].total() == doctest::Approx(expected).epsilon(1e-9));
        energy_sum += o.energy[m].total();
      }
      REQUIRE(o.energy_total == doctest::Approx(energy_sum).epsilon(1e-12));
      for (std::size_t n = 0; n < c.num_users; ++n) {
        REQUIRE(o.assignment.row_sum(n) <= 1);
        for (std::size_t m = 0; m < c.num_uavs; ++m) REQUIRE(o.assignment.at(n, m) <= o.coverage.at(n, m));
      }
      REQUIRE(o.processed == o.assignment.ones());
      REQUIRE(o.psi == doctest::Approx(c.w1 * energy_sum - c.w2 * o.processed).epsilon(1e-12));
      REQUIRE(w.remaining_tasks() + w.processed_tasks == c.num_users * c.tasks_per_user);
      std::size_t remaining = 0;
      for (const UserState& u : w.users) remaining += u.remaining();
      REQUIRE(remaining == w.remaining_tasks());
      if (o.collisions.empty() && o.boundary_violators.empty()) {
        double total = 0.0;
        for (double r : o.rewards) total += r + o.psi;
        REQUIRE(std::fabs(total) <= 1e-9);
      }
    }
  }
}

TEST_CASE("identical seeds and actions give identical trajectories") {
  EnvConfig c = small_config(4, 10);
  WorldState a = reset(c, 5), b = reset(c, 5);
  std::mt19937_64 ra(1), rb(1);
  while (!a.done) {
    execute_slot(a, random_actions(ra, 4, 10));
    execute_slot(b, random_actions(rb, 4, 10));
    REQUIRE(a.users == b.users);
    REQUIRE(a.uavs == b.uavs);
  }
  CHECK(b.done);
}
