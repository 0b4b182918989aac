#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "uavmec/errors.hpp"
#include "uavmec/ppo/learner.hpp"

using namespace uavmec;
using namespace uavmec::ppo;

namespace {

const HeadShape kShape{6, 3, 2.0};

PpoConfig small_config() {
  PpoConfig c;
  c.actor_hidden = 8;
  c.critic_hidden = 8;
  c.minibatch = 16;
  return c;
}

Learner make_learner(std::uint64_t seed, const PpoConfig& c = small_config()) {
  return {nn::init_parameters(actor_spec(kShape, c), seed), nn::init_parameters(critic_spec(kShape, c), seed), {}, {}};
}

void zero(nn::ParameterStore& s) {
  for (auto& [_, v] : s.entries()) std::fill(v.data.begin(), v.data.end(), 0.0);
}

std::vector<Transition> random_pool(std::mt19937_64& rng, const Learner& l, std::size_t n, int provenance = 0) {
  std::vector<Transition> pool;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.z = oracle::random_vector(rng, kShape.z_dim);
    t.serve_mask = {1, static_cast<std::uint8_t>(i % 2), 1, 1};
    const PolicyDist d = policy_dist(l.actor, t.z, t.serve_mask, kShape.max_step);
    auto [a, lp] = sample_action(d, rng);
    t.action = a;
    t.log_prob = lp;
    t.value = value_of(l.critic, t.z);
    t.reward = u(rng);
    t.advantage = u(rng);
    t.ret = u(rng);
    t.provenance = provenance;
    pool.push_back(t);
  }
  return pool;
}

ReplayBuffer to_buffer(const std::vector<Transition>& pool) {
  ReplayBuffer b;
  for (const auto& t : pool) b.push(t);
  return b;
}

// Direct double-sum GAE: A_t = sum_k (gamma lambda)^(k-t) delta_k, stopping at episode ends.
std::vector<double> brute_gae(const std::vector<double>& r, const std::vector<double>& v,
                              const std::vector<bool>& done, double g, double l) {
  std::vector<double> out(r.size(), 0.0);
  for (std::size_t t = 0; t < r.size(); ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < r.size(); ++k) {
      const double next = (k + 1 < r.size() && !done[k]) ? v[k + 1] : 0.0;
      out[t] += weight * (r[k] + g * next - v[k]);
      if (done[k]) break;
      weight *= g * l;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.clip_eps = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PpoConfig{};
  c.minibatch = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("policy head masking and zero weights") {
  Learner l = make_learner(1);
  std::mt19937_64 rng(2);
  const auto z = oracle::random_vector(rng, kShape.z_dim);

  const PolicyDist nobody = policy_dist(l.actor, z, serve_mask({0, 0, 0}), 2.0);
  CHECK(nobody.serve_log_probs[3] == doctest::Approx(0.0).epsilon(1e-15));
  for (int i = 0; i < 3; ++i) CHECK(std::isinf(nobody.serve_log_probs[i]));
  for (int i = 0; i < 50; ++i) CHECK(sample_action(nobody, rng).first.serve_index == 3);

  zero(l.actor);
  const PolicyDist flat = policy_dist(l.actor, z, serve_mask({1, 0, 1}), 2.0);
  CHECK(flat.mean == std::vector<double>{0.0, 0.0});
  CHECK(std::exp(flat.serve_log_probs[0]) == doctest::Approx(1.0 / 3.0));
  CHECK(std::exp(flat.serve_log_probs[2]) == doctest::Approx(1.0 / 3.0));
  CHECK(std::exp(flat.serve_log_probs[3]) == doctest::Approx(1.0 / 3.0));
  CHECK(std::isinf(flat.serve_log_probs[1]));
}

TEST_CASE("mean move stays inside the speed ball") {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Learner l = make_learner(seed);
    for (auto& [_, v] : l.actor.entries())
      for (double& x : v.data) x *= 50.0;  // push the tanh into saturation
    const auto z = oracle::random_vector(rng, kShape.z_dim, -10.0, 10.0);
    const PolicyDist d = policy_dist(l.actor, z, serve_mask({1, 1, 1}), 2.0);
    CHECK(std::hypot(d.mean[0], d.mean[1]) <= 2.0 + 1e-12);
  }
}

TEST_CASE("sampling: vanishing spread, masked slots and density") {
  Learner l = make_learner(4);
  std::mt19937_64 rng(5);
  const auto z = oracle::random_vector(rng, kShape.z_dim);

  PolicyDist sharp = policy_dist(l.actor, z, serve_mask({1, 1, 1}), 2.0);
  sharp.log_std = {-30.0, -30.0};
  const HybridAction a = sample_action(sharp, rng).first;
  CHECK(a.dx == doctest::Approx(sharp.mean[0]).epsilon(1e-9));
  CHECK(a.dy == doctest::Approx(sharp.mean[1]).epsilon(1e-9));

  const PolicyDist d = policy_dist(l.actor, z, serve_mask({1, 0, 1}), 2.0);
  std::size_t hits = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto [act, lp] = sample_action(d, rng);
    if (act.serve_index == 1) ++hits;
    REQUIRE(std::isfinite(lp));
  }
  CHECK(hits == 0);

  for (int i = 0; i < 200; ++i) {
    const auto [act, lp] = sample_action(d, rng);
    const double sx = std::exp(d.log_std[0]), sy = std::exp(d.log_std[1]);
    const double density = std::exp(-0.5 * std::pow((act.dx - d.mean[0]) / sx, 2)) / (sx * std::sqrt(2 * M_PI)) *
                           std::exp(-0.5 * std::pow((act.dy - d.mean[1]) / sy, 2)) / (sy * std::sqrt(2 * M_PI));
    double z_sum = 0.0;
    for (double v : d.serve_log_probs) z_sum += std::isinf(v) ? 0.0 : std::exp(v);
    CHECK(z_sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lp == doctest::Approx(std::log(density * std::exp(d.serve_log_probs[act.serve_index]))).epsilon(1e-10));
  }

  const HybridAction g = greedy_action(d);
  CHECK(g.dx == d.mean[0]);
  CHECK(d.serve_log_probs[g.serve_index] ==
        *std::max_element(d.serve_log_probs.begin(), d.serve_log_probs.end()));
}

TEST_CASE("advantage estimation") {
  const std::vector<double> r{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> v0(4, 0.0);
  const std::vector<bool> none(4, false);
  const GaeResult mc = compute_gae(r, v0, none, 0.9, 1.0);
  CHECK(mc.advantages[0] == doctest::Approx(1 + 0.9 * 2 + 0.81 * 3 + 0.729 * 4));
  CHECK(mc.advantages[3] == doctest::Approx(4.0));

  const std::vector<double> v{5.0, 4.0, 3.0, 2.0};
  std::vector<double> td(4);
  for (std::size_t t = 0; t < 4; ++t) td[t] = v[t] - 0.99 * (t + 1 < 4 ? v[t + 1] : 7.0);
  const GaeResult flat = compute_gae(td, v, none, 0.99, 0.95, 7.0);
  for (double a : flat.advantages) CHECK(std::fabs(a) < 1e-12);

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rr = oracle::random_vector(rng, 6);
    const auto vv = oracle::random_vector(rng, 6);
    std::vector<bool> dd(6);
    std::bernoulli_distribution b(0.3);
    for (std::size_t i = 0; i < 6; ++i) dd[i] = b(rng);
    dd[5] = true;
    const GaeResult got = compute_gae(rr, vv, dd, 0.99, 0.95);
    const auto want = brute_gae(rr, vv, dd, 0.99, 0.95);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(got.advantages[i] == doctest::Approx(want[i]).epsilon(1e-12));
      CHECK(got.returns[i] == doctest::Approx(want[i] + vv[i]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(compute_gae(r, std::vector<double>(3), none, 0.9, 0.9), ContractError);
}

TEST_CASE("advantage normalization") {
  std::mt19937_64 rng(7);
  for (std::size_t n : {2u, 5u, 64u, 1000u}) {
    auto v = oracle::random_vector(rng, n, -50.0, 300.0);
    normalize(v);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(std::fabs(std::sqrt(var / static_cast<double>(n)) - 1.0) < 1e-6);
  }
}

TEST_CASE("clipped surrogate") {
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_surrogate(0.5, 1.0, 0.2) == doctest::Approx(0.5));
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  CHECK(clipped_surrogate(1.0, 3.0, 0.2) == 3.0);

  // d surrogate / d rho vanishes in the clipped regions.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ratio(0.3, 2.0), adv(-3.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    const double rho = ratio(rng), a = adv(rng);
    nn::RealArray p = nn::RealArray::scalar(rho);
    nn::Tape t;
    const nn::NodeId r = t.param("rho", p);
    const nn::NodeId s = t.minimum(t.scale(r, a), t.scale(t.clip(r, 0.8, 1.2), a));
    CHECK(t.scalar(s) == doctest::Approx(clipped_surrogate(rho, a, 0.2)));
    const double g = t.backward(s).at("rho").data[0];
    if ((a > 0 && rho > 1.2) || (a < 0 && rho < 0.8)) CHECK(g == 0.0);
    else CHECK(g == doctest::Approx(a));
  }
}

TEST_CASE("at the old policy the surrogate gradient is the policy gradient") {
  Learner l = make_learner(9);
  std::mt19937_64 rng(10);
  const auto pool = random_pool(rng, l, 8);
  nn::Tape clipped, vanilla;
  const auto pc = nn::register_parameters(clipped, l.actor);
  const auto pv = nn::register_parameters(vanilla, l.actor);
  std::vector<nn::NodeId> sc, sv;
  for (const Transition& tr : pool) {
    auto logp = [&](nn::Tape& t, const std::map<std::string, nn::NodeId>& p) {
      const PolicyNodes pol = policy_forward(t, p, t.input(nn::RealArray::vector(tr.z)), tr.serve_mask, 2.0);
      return t.add(t.gaussian_log_prob(pol.mean, pol.log_std, nn::RealArray::vector({tr.action.dx, tr.action.dy})),
                   t.pick(pol.serve_log_probs, tr.action.serve_index));
    };
    const nn::NodeId ratio = clipped.exp(clipped.add_scalar(logp(clipped, pc), -tr.log_prob));
    CHECK(clipped.scalar(ratio) == doctest::Approx(1.0).epsilon(1e-12));
    sc.push_back(clipped.minimum(clipped.scale(ratio, tr.advantage),
                                 clipped.scale(clipped.clip(ratio, 0.8, 1.2), tr.advantage)));
    sv.push_back(vanilla.scale(logp(vanilla, pv), tr.advantage));
  }
  const auto gc = clipped.backward(clipped.sum(clipped.concat(sc)));
  const auto gv = vanilla.backward(vanilla.sum(vanilla.concat(sv)));
  for (const auto& [name, g] : gc)
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.data[k] == doctest::Approx(gv.at(name).data[k]).epsilon(1e-9));
}

TEST_CASE("zero advantages leave the actor untouched without entropy bonus") {
  PpoConfig c = small_config();
  c.entropy_coef = 0.0;
  Learner l = make_learner(11, c);
  std::mt19937_64 rng(12);
  auto pool = random_pool(rng, l, 40);
  for (auto& t : pool) t.advantage = 0.0;
  const nn::ParameterStore before = l.actor;
  const nn::ParameterStore critic_before = l.critic;
  Rng shuffle(1);
  const UpdateStats s = ppo_update(l, pool, kShape, c, shuffle);
  CHECK(l.actor.entries() == before.entries());
  CHECK(l.actor.version() > before.version());
  CHECK_FALSE(l.critic.entries() == critic_before.entries());
  CHECK(s.samples == 40);
  CHECK(s.mean_ratio == doctest::Approx(1.0));
  CHECK(s.clip_fraction == 0.0);

  CHECK_THROWS_AS(ppo_update(l, {}, kShape, c, shuffle), ContractError);
}

TEST_CASE("updates are deterministic and move toward advantaged actions") {
  PpoConfig c = small_config();
  c.lr = 3e-3;
  std::mt19937_64 rng(13);
  Learner a = make_learner(14, c), b = make_learner(14, c);
  const auto pool = random_pool(rng, a, 64);
  Rng ra(2), rb(2);
  const UpdateStats sa = ppo_update(a, pool, kShape, c, ra);
  const UpdateStats sb = ppo_update(b, pool, kShape, c, rb);
  CHECK(a.actor == b.actor);
  CHECK(sa.actor_loss == sb.actor_loss);
  CHECK(sa.critic_loss == sb.critic_loss);

  // Reward the first serve slot only and check its probability grows.
  Learner l = make_learner(15, c);
  const auto z = oracle::random_vector(rng, kShape.z_dim);
  const std::vector<std::uint8_t> mask{1, 1, 1, 1};
  const double p0 = std::exp(policy_dist(l.actor, z, mask, 2.0).serve_log_probs[0]);
  Rng shuffle(3);
  for (int round = 0; round < 20; ++round) {
    std::vector<Transition> batch;
    const PolicyDist d = policy_dist(l.actor, z, mask, 2.0);
    for (int i = 0; i < 64; ++i) {
      Transition t;
      t.z = z;
      t.serve_mask = mask;
      std::tie(t.action, t.log_prob) = sample_action(d, rng);
      t.advantage = t.action.serve_index == 0 ? 1.0 : -0.2;
      t.ret = 0.0;
      batch.push_back(t);
    }
    ppo_update(l, batch, kShape, c, shuffle);
  }
  CHECK(std::exp(policy_dist(l.actor, z, mask, 2.0).serve_log_probs[0]) > p0 + 0.2);
}

TEST_CASE("trajectory finishing applies reward scale and episode boundaries") {
  PpoConfig c = small_config();
  c.reward_scale = 0.5;
  c.gamma = 0.9;
  c.gae_lambda = 1.0;
  ReplayBuffer b;
  for (int i = 0; i < 3; ++i) {
    Transition t;
    t.reward = 2.0;
    t.done = i == 1;
    b.push(t);
  }
  finish_trajectory(b, c);
  CHECK(b[0].ret == doctest::Approx(1.0 + 0.9));
  CHECK(b[1].ret == doctest::Approx(1.0));
  CHECK(b[2].ret == doctest::Approx(1.0));
}

TEST_CASE("learner rounds") {
  PpoConfig c = small_config();
  std::mt19937_64 rng(16);
  const Learner seed_learner = make_learner(17, c);
  const auto pool_a = random_pool(rng, seed_learner, 30, 0);
  const auto pool_b = random_pool(rng, seed_learner, 30, 1);

  // One UAV: a round is a plain update.
  {
    std::vector<Learner> ls{seed_learner};
    std::vector<ReplayBuffer> bufs{to_buffer(pool_a)};
    std::vector<Rng> rngs{Rng(5)};
    learner_round(ls, bufs, comm::NeighborSet{{0}}, kShape, c, rngs);
    Learner plain = seed_learner;
    Rng r(5);
    ppo_update(plain, pool_a, kShape, c, r);
    CHECK(ls[0].actor.entries() == plain.actor.entries());
    CHECK(bufs[0].empty());
  }
  // Complete graph with identical pools and streams: identical results.
  {
    std::vector<Learner> ls{seed_learner, seed_learner, seed_learner};
    std::vector<ReplayBuffer> bufs{to_buffer(pool_a), to_buffer(pool_a), to_buffer(pool_a)};
    std::vector<Rng> rngs{Rng(6), Rng(6), Rng(6)};
    learner_round(ls, bufs, comm::NeighborSet{{0, 1, 2}, {1, 0, 2}, {2, 0, 1}}, kShape, c, rngs);
    CHECK(ls[0].actor.entries() == ls[1].actor.entries());
    CHECK(ls[1].critic.entries() == ls[2].critic.entries());
  }
  // Disconnected UAVs do not influence each other.
  {
    std::vector<Learner> ls{seed_learner, seed_learner};
    std::vector<ReplayBuffer> bufs{to_buffer(pool_a), to_buffer(pool_b)};
    std::vector<Rng> rngs{Rng(7), Rng(8)};
    learner_round(ls, bufs, comm::NeighborSet{{0}, {1}}, kShape, c, rngs);

    std::vector<Learner> ls2{seed_learner, make_learner(99, c)};
    std::vector<ReplayBuffer> bufs2{to_buffer(pool_a), to_buffer(pool_a)};
    std::vector<Rng> rngs2{Rng(7), Rng(9)};
    learner_round(ls2, bufs2, comm::NeighborSet{{0}, {1}}, kShape, c, rngs2);
    CHECK(ls[0].actor.entries() == ls2[0].actor.entries());
  }
}
