#include "uavmec/run/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "uavmec/errors.hpp"
#include "uavmec/gat/encoder.hpp"

namespace uavmec::run {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

constexpr double kMinFeatureStd = 1e-3;
constexpr const char* kNormStore = "input_norm";

std::string store_key(std::size_t m, const char* part) { return "uav" + std::to_string(m) + "." + part; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

void check_layout(const nn::ParameterStore& stored, const nn::ParameterStore& expected, const std::string& where) {
  for (const auto& [name, value] : expected.entries()) {
    if (!stored.contains(name))
      throw CheckpointError("checkpoint store '" + where + "' lacks tensor '" + name + "'");
    const auto& have = stored.at(name).shape;
    if (have != value.shape)
      throw CheckpointError("dimension mismatch in '" + where + "/" + name + "': checkpoint has " +
                            nn::shape_string(have) + ", config needs " + nn::shape_string(value.shape));
  }
  if (stored.entries().size() != expected.entries().size())
    throw CheckpointError("checkpoint store '" + where + "' has tensors the config does not use");
}

json vec2(env::Vec2 p) { return json::array({p.x, p.y}); }

}  // namespace

ppo::HeadShape head_shape(const RunConfig& config) {
  return {config.encoder.z_dim(), config.encoder.max_obs_users, config.env.max_step()};
}

namespace {

Fleet blank_fleet(const RunConfig& config) {
  const ppo::HeadShape shape = head_shape(config);
  const nn::ParameterStore encoder =
      nn::init_parameters(gat::encoder_spec(config.encoder), derive_seed(config.seed, "init-encoder"));
  const ppo::Learner learner{
      nn::init_parameters(ppo::actor_spec(shape, config.ppo), derive_seed(config.seed, "init-actor")),
      nn::init_parameters(ppo::critic_spec(shape, config.ppo), derive_seed(config.seed, "init-critic")), {}, {}};
  Fleet fleet;
  fleet.encoders.assign(config.env.num_uavs, encoder);
  fleet.learners.assign(config.env.num_uavs, learner);
  fleet.z_shift.assign(shape.z_dim, 0.0);
  fleet.z_scale.assign(shape.z_dim, 1.0);
  return fleet;
}

EpisodeMetrics episode_impl(const RunConfig& config, Fleet& fleet, std::uint64_t world_seed,
                            std::uint64_t policy_seed, const EpisodeOptions& options, LearningState* learning,
                            std::vector<std::vector<double>>* raw_z);

}  // namespace

Fleet init_fleet(const RunConfig& config) {
  Fleet fleet = blank_fleet(config);
  if (config.calibration_episodes == 0) return fleet;
  std::vector<std::vector<double>> samples;
  for (std::size_t ep = 0; ep < config.calibration_episodes; ++ep)
    episode_impl(config, fleet, derive_seed(config.seed, "calibration-episode", ep),
                 derive_seed(config.seed, "calibration-policy", ep), {}, nullptr, &samples);
  const std::size_t dim = fleet.z_shift.size();
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < dim; ++i) {
    double mean = 0.0, var = 0.0;
    for (const auto& z : samples) mean += z[i];
    mean /= n;
    for (const auto& z : samples) var += (z[i] - mean) * (z[i] - mean);
    fleet.z_shift[i] = mean;
    fleet.z_scale[i] = 1.0 / std::max(std::sqrt(var / n), kMinFeatureStd);
  }
  return fleet;
}

nn::Checkpoint make_checkpoint(const Fleet& fleet, const RunConfig& config, std::uint64_t episode) {
  nn::Checkpoint ck;
  ck.seed = config.seed;
  ck.episode = static_cast<std::int64_t>(episode);
  ck.meta = {{"num_uavs", fleet.learners.size()},
             {"z_dim", config.encoder.z_dim()},
             {"status_dim", config.encoder.status_dim()},
             {"grid", config.encoder.grid},
             {"serve_slots", config.encoder.max_obs_users},
             {"config", to_json(config)}};
  nn::ParameterStore norm;
  norm.set("shift", nn::RealArray::vector(fleet.z_shift));
  norm.set("scale", nn::RealArray::vector(fleet.z_scale));
  ck.stores[kNormStore] = norm;
  for (std::size_t m = 0; m < fleet.learners.size(); ++m) {
    ck.stores[store_key(m, "encoder")] = fleet.encoders[m];
    ck.stores[store_key(m, "actor")] = fleet.learners[m].actor;
    ck.stores[store_key(m, "critic")] = fleet.learners[m].critic;
  }
  return ck;
}

Fleet fleet_from_checkpoint(const nn::Checkpoint& ck, const RunConfig& config) {
  if (!ck.meta.contains("num_uavs") || !ck.meta["num_uavs"].is_number_unsigned())
    throw CheckpointError("checkpoint metadata lacks the UAV count");
  const auto stored = ck.meta["num_uavs"].get<std::size_t>();
  if (stored == 0) throw CheckpointError("checkpoint holds no UAVs");
  Fleet fleet = blank_fleet(config);
  auto norm = ck.stores.find(kNormStore);
  if (norm == ck.stores.end()) throw CheckpointError("checkpoint lacks store 'input_norm'");
  nn::ParameterStore expected_norm;
  expected_norm.set("shift", nn::RealArray::vector(fleet.z_shift));
  expected_norm.set("scale", nn::RealArray::vector(fleet.z_scale));
  check_layout(norm->second, expected_norm, kNormStore);
  fleet.z_shift = norm->second.at("shift").data;
  fleet.z_scale = norm->second.at("scale").data;
  for (std::size_t m = 0; m < config.env.num_uavs; ++m) {
    const std::size_t src = m % stored;
    for (const char* part : {"encoder", "actor", "critic"}) {
      const std::string key = store_key(src, part);
      auto it = ck.stores.find(key);
      if (it == ck.stores.end()) throw CheckpointError("checkpoint lacks store '" + key + "'");
      nn::ParameterStore& target = std::string(part) == "encoder" ? fleet.encoders[m]
                                   : std::string(part) == "actor" ? fleet.learners[m].actor
                                                                  : fleet.learners[m].critic;
      check_layout(it->second, target, key);
      target = it->second;
    }
  }
  return fleet;
}

LearningState init_learning(const RunConfig& config) {
  LearningState s;
  for (std::size_t m = 0; m < config.env.num_uavs; ++m) {
    s.buffers.emplace_back(config.ppo.buffer_capacity);
    s.shuffle_rngs.push_back(make_rng(config.seed, "shuffle", m));
  }
  return s;
}

namespace {

void learn_round(const RunConfig& config, Fleet& fleet, LearningState& learning, const comm::NeighborSet& neighbors,
                 const std::vector<double>& bootstrap) {
  for (std::size_t m = 0; m < fleet.learners.size(); ++m)
    ppo::finish_trajectory(learning.buffers[m], config.ppo, bootstrap[m]);
  learning.rounds.push_back(ppo::learner_round(fleet.learners, learning.buffers, neighbors, head_shape(config),
                                               config.ppo, learning.shuffle_rngs));
}

}  // namespace

EpisodeMetrics run_episode(const RunConfig& config, Fleet& fleet, std::uint64_t world_seed, std::uint64_t policy_seed,
                           const EpisodeOptions& options, LearningState* learning) {
  return episode_impl(config, fleet, world_seed, policy_seed, options, learning, nullptr);
}

namespace {

EpisodeMetrics episode_impl(const RunConfig& config, Fleet& fleet, std::uint64_t world_seed,
                            std::uint64_t policy_seed, const EpisodeOptions& options, LearningState* learning,
                            std::vector<std::vector<double>>* raw_z) {
  const std::size_t M = config.env.num_uavs;
  if (fleet.learners.size() != M || fleet.encoders.size() != M)
    throw ContractError("fleet size does not match the configured UAV count");
  if (options.learn && learning == nullptr) throw ContractError("learning requested without learning state");
  if (learning) learning->rounds.clear();

  env::WorldState world = env::reset(config.env, world_seed);
  std::vector<Rng> policy_rngs;
  for (std::size_t m = 0; m < M; ++m) policy_rngs.push_back(make_rng(policy_seed, "uav", m));
  const ppo::HeadShape shape = head_shape(config);

  EpisodeMetrics metrics;
  metrics.discounted_reward.assign(M, 0.0);
  double discount = 1.0;
  std::size_t since_update = 0;

  while (!world.done) {
    const comm::NeighborSet neighbors = comm::build_neighbors(world, config.env.comm_radius, config.env.max_neighbors);
    std::vector<env::GridMap> maps;
    for (const env::UavState& u : world.uavs) maps.push_back(u.visited);
    const std::vector<env::GridMap> merged = comm::merge_maps(maps, neighbors);
    std::vector<gat::LocalObservation> obs;
    for (std::size_t m = 0; m < M; ++m) obs.push_back(gat::observe(world, m, neighbors, merged[m], config.encoder));
    auto z = gat::encode_all(fleet.encoders, obs, neighbors, config.encoder);
    for (auto& zm : z) {
      if (raw_z) raw_z->push_back(zm);
      for (std::size_t i = 0; i < zm.size(); ++i) zm[i] = (zm[i] - fleet.z_shift[i]) * fleet.z_scale[i];
    }

    if (options.learn && config.update_every > 0 && since_update == config.update_every) {
      std::vector<double> bootstrap(M);
      for (std::size_t m = 0; m < M; ++m) bootstrap[m] = ppo::value_of(fleet.learners[m].critic, z[m]);
      learn_round(config, fleet, *learning, neighbors, bootstrap);
      since_update = 0;
    }

    std::vector<env::UavAction> actions(M);
    std::vector<ppo::Transition> pending(M);
    for (std::size_t m = 0; m < M; ++m) {
      const auto mask = ppo::serve_mask(obs[m].user_mask);
      const ppo::PolicyDist dist = ppo::policy_dist(fleet.learners[m].actor, z[m], mask, shape.max_step);
      ppo::HybridAction a;
      double logp = 0.0;
      if (options.mode == ActionMode::Sample) std::tie(a, logp) = ppo::sample_action(dist, policy_rngs[m]);
      else a = ppo::greedy_action(dist);
      actions[m].dx = a.dx;
      actions[m].dy = a.dy;
      if (a.serve_index < obs[m].user_ids.size()) actions[m].user = obs[m].user_ids[a.serve_index];
      if (options.learn) {
        pending[m].z = z[m];
        pending[m].action = a;
        pending[m].serve_mask = mask;
        pending[m].log_prob = logp;
        pending[m].value = ppo::value_of(fleet.learners[m].critic, z[m]);
        pending[m].provenance = static_cast<int>(m);
      }
    }

    json record;
    if (options.trace) {
      json cells = json::array(), uavs = json::array(), users = json::array(), visited = json::array();
      for (const env::UavState& u : world.uavs) {
        const auto [r, c] = env::grid_cell_of(u.position, config.env);
        cells.push_back(json::array({r, c}));
        uavs.push_back(vec2(u.position));
      }
      for (const env::UserState& u : world.users) users.push_back(vec2(u.position));
      env::GridMap all(config.env.grid_size());
      for (const env::GridMap& g : merged)
        for (std::size_t k = 0; k < g.bits.size(); ++k) all.bits[k] |= g.bits[k];
      for (std::size_t r = 0; r < all.cells; ++r)
        for (std::size_t c = 0; c < all.cells; ++c)
          if (all.at(r, c)) visited.push_back(json::array({r, c}));
      json acts = json::array();
      for (const env::UavAction& a : actions)
        acts.push_back({{"dx", a.dx}, {"dy", a.dy}, {"user", a.user ? json(*a.user) : json(nullptr)}});
      record = {{"slot", world.slot}, {"uav_positions", uavs}, {"user_positions", users}, {"uav_cells", cells},
                {"visited", visited}, {"neighbors", neighbors}, {"actions", acts}};
    }

    const env::SlotOutcome out = env::execute_slot(world, actions);

    for (std::size_t m = 0; m < M; ++m) metrics.discounted_reward[m] += discount * out.rewards[m];
    discount *= config.ppo.gamma;
    metrics.processed += out.processed;
    metrics.collisions += out.collisions.size();
    metrics.boundary_violations += out.boundary_violators.size();
    metrics.energy_j += out.energy_total;
    metrics.psi.push_back(out.psi);
    ++metrics.slots;

    if (options.learn) {
      for (std::size_t m = 0; m < M; ++m) {
        pending[m].reward = out.rewards[m];
        pending[m].done = world.done;
        learning->buffers[m].push(std::move(pending[m]));
      }
      ++since_update;
    }

    if (options.trace) {
      json alpha = json::array(), energy = json::array(), collisions = json::array();
      for (std::size_t n = 0; n < out.assignment.rows; ++n)
        for (std::size_t m = 0; m < out.assignment.cols; ++m)
          if (out.assignment.at(n, m)) alpha.push_back(json::array({n, m}));
      for (const env::EnergyBreakdown& e : out.energy)
        energy.push_back(json::array({e.hover, e.flying, e.receive, e.processing}));
      for (const auto& [a, b] : out.collisions) collisions.push_back(json::array({a, b}));
      record["alpha"] = alpha;
      record["energy"] = energy;
      record["energy_total"] = out.energy_total;
      record["rewards"] = out.rewards;
      record["psi"] = out.psi;
      record["processed"] = out.processed;
      record["collisions"] = collisions;
      record["boundary_violators"] = out.boundary_violators;
      record["remaining_tasks"] = world.remaining_tasks();
      record["total_tasks"] = world.total_tasks;
      record["done"] = world.done;
      options.trace->push_back(std::move(record));
    }
  }

  if (options.learn && since_update > 0) {
    const comm::NeighborSet neighbors = comm::build_neighbors(world, config.env.comm_radius, config.env.max_neighbors);
    learn_round(config, fleet, *learning, neighbors, std::vector<double>(M, 0.0));
  }

  double sum = 0.0;
  for (double r : metrics.discounted_reward) sum += r;
  metrics.reward_mean = sum / static_cast<double>(M);
  metrics.task_pct = 100.0 * static_cast<double>(metrics.processed) / static_cast<double>(world.total_tasks);
  metrics.energy_per_task_j = metrics.processed > 0 ? metrics.energy_j / static_cast<double>(metrics.processed)
                                                    : std::numeric_limits<double>::quiet_NaN();
  return metrics;
}

}  // namespace

std::string metrics_header(std::size_t num_uavs) {
  std::string h = "episode,reward_mean,task_pct,processed,collisions,boundary_violations,energy_J,energy_per_task_J,slots,psi_sum";
  for (std::size_t m = 0; m < num_uavs; ++m) h += ",reward_uav" + std::to_string(m);
  return h;
}

std::string metrics_row(const EpisodeMetrics& m) {
  double psi = 0.0;
  for (double v : m.psi) psi += v;
  std::ostringstream row;
  row << m.episode << ',' << num(m.reward_mean) << ',' << num(m.task_pct) << ',' << m.processed << ','
      << m.collisions << ',' << m.boundary_violations << ',' << num(m.energy_j) << ',' << num(m.energy_per_task_j)
      << ',' << m.slots << ',' << num(psi);
  for (double r : m.discounted_reward) row << ',' << num(r);
  return row.str();
}

void write_metrics(const std::filesystem::path& path, const std::vector<EpisodeMetrics>& episodes,
                   std::size_t num_uavs) {
  std::ofstream out = open_out(path);
  out << metrics_header(num_uavs) << '\n';
  for (const EpisodeMetrics& m : episodes) out << metrics_row(m) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

TrainResult train(const RunConfig& input, const std::filesystem::path& out_dir, std::ostream* log) {
  RunConfig config = input;
  config.finalize();
  const std::filesystem::path ckpt_dir = out_dir / "checkpoints";
  std::error_code ec;
  std::filesystem::create_directories(ckpt_dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + ckpt_dir.string() + "': " + ec.message());

  {
    std::ofstream cfg = open_out(out_dir / "config.json");
    cfg << to_json(config).dump(2) << '\n';
  }
  std::ofstream metrics = open_out(out_dir / "metrics.csv");
  std::ofstream psi = open_out(out_dir / "psi.csv");
  std::ofstream stats = open_out(out_dir / "train_stats.csv");
  metrics << metrics_header(config.env.num_uavs) << '\n';
  psi << "episode,slot,psi\n";
  stats << "episode,round,uav,actor_loss,critic_loss,entropy,clip_fraction,mean_ratio,samples\n";

  Fleet fleet = init_fleet(config);
  LearningState learning = init_learning(config);
  TrainResult result;
  EpisodeOptions options;
  options.learn = true;
  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    EpisodeMetrics m = run_episode(config, fleet, derive_seed(config.seed, "episode", ep),
                                   derive_seed(config.seed, "policy", ep), options, &learning);
    m.episode = ep;
    metrics << metrics_row(m) << '\n';
    for (std::size_t t = 0; t < m.psi.size(); ++t) psi << ep << ',' << t << ',' << num(m.psi[t]) << '\n';
    for (std::size_t r = 0; r < learning.rounds.size(); ++r)
      for (std::size_t u = 0; u < learning.rounds[r].size(); ++u) {
        const ppo::UpdateStats& s = learning.rounds[r][u];
        stats << ep << ',' << r << ',' << u << ',' << num(s.actor_loss) << ',' << num(s.critic_loss) << ','
              << num(s.entropy) << ',' << num(s.clip_fraction) << ',' << num(s.mean_ratio) << ',' << s.samples
              << '\n';
      }
    if (!metrics || !psi || !stats) throw std::runtime_error("failed writing metrics under '" + out_dir.string() + "'");
    if ((ep + 1) % config.checkpoint_interval == 0) {
      char name[48];
      std::snprintf(name, sizeof name, "episode_%05zu.ckpt", ep + 1);
      nn::write_checkpoint(ckpt_dir / name, make_checkpoint(fleet, config, ep + 1));
    }
    if (log && ((ep + 1) % 10 == 0 || ep + 1 == config.episodes)) {
      *log << "episode " << ep + 1 << "/" << config.episodes << " task% " << num(m.task_pct) << " collisions "
           << m.collisions << " reward " << num(m.reward_mean) << '\n';
    }
    result.episodes.push_back(std::move(m));
  }
  result.final_checkpoint = ckpt_dir / "final.ckpt";
  nn::write_checkpoint(result.final_checkpoint, make_checkpoint(fleet, config, config.episodes));
  return result;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.std += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(values.size()));
  return s;
}

EvalResult evaluate(const Fleet& trained, const RunConfig& config, std::size_t episodes) {
  Fleet fleet = trained;
  EvalResult r;
  std::vector<double> task, coll, energy, per_task, reward;
  EpisodeOptions options;
  options.mode = ActionMode::Greedy;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    EpisodeMetrics m = run_episode(config, fleet, derive_seed(config.seed, "eval-episode", ep),
                                   derive_seed(config.seed, "eval-policy", ep), options, nullptr);
    m.episode = ep;
    task.push_back(m.task_pct);
    coll.push_back(static_cast<double>(m.collisions));
    energy.push_back(m.energy_j);
    if (m.processed > 0) per_task.push_back(m.energy_per_task_j);
    reward.push_back(m.reward_mean);
    r.episodes.push_back(std::move(m));
  }
  r.task_pct = summarize(task);
  r.collisions = summarize(coll);
  r.energy_j = summarize(energy);
  r.energy_per_task_j = summarize(per_task);
  r.reward_mean = summarize(reward);
  return r;
}

EvalResult evaluate(const nn::Checkpoint& checkpoint, const RunConfig& config, std::size_t episodes) {
  RunConfig c = config;
  c.finalize();
  return evaluate(fleet_from_checkpoint(checkpoint, c), c, episodes);
}

void write_eval_summary(const std::filesystem::path& path, const EvalResult& r) {
  std::ofstream out = open_out(path);
  out << "metric,mean,std\n";
  out << "task_pct," << num(r.task_pct.mean) << ',' << num(r.task_pct.std) << '\n';
  out << "collisions," << num(r.collisions.mean) << ',' << num(r.collisions.std) << '\n';
  out << "energy_J," << num(r.energy_j.mean) << ',' << num(r.energy_j.std) << '\n';
  out << "energy_per_task_J," << num(r.energy_per_task_j.mean) << ',' << num(r.energy_per_task_j.std) << '\n';
  out << "reward_mean," << num(r.reward_mean.mean) << ',' << num(r.reward_mean.std) << '\n';
}

std::vector<json> trace_episode(const RunConfig& input, std::uint64_t seed, const std::optional<nn::Checkpoint>& ck) {
  RunConfig config = input;
  config.seed = seed;
  config.finalize();
  Fleet fleet = ck ? fleet_from_checkpoint(*ck, config) : init_fleet(config);
  std::vector<json> trace;
  EpisodeOptions options;
  options.mode = ck ? ActionMode::Greedy : ActionMode::Sample;
  options.trace = &trace;
  run_episode(config, fleet, derive_seed(seed, "episode", 0), derive_seed(seed, "policy", 0), options, nullptr);
  return trace;
}

std::vector<std::vector<std::size_t>> emit_coverage_grid(const std::vector<json>& trace, std::size_t grid) {
  std::vector<std::vector<std::size_t>> counts(grid, std::vector<std::size_t>(grid, 0));
  for (const json& rec : trace)
    for (const json& cell : rec.at("uav_cells")) {
      const auto r = cell.at(0).get<std::size_t>(), c = cell.at(1).get<std::size_t>();
      if (r >= grid || c >= grid) throw ContractError("trace cell outside the coverage grid");
      ++counts[r][c];
    }
  return counts;
}

void write_coverage_csv(const std::filesystem::path& path, const std::vector<std::vector<std::size_t>>& counts) {
  std::ofstream out = open_out(path);
  out << "row";
  for (std::size_t c = 0; c < counts.size(); ++c) out << ",c" << c;
  out << '\n';
  for (std::size_t r = 0; r < counts.size(); ++r) {
    out << r;
    for (std::size_t v : counts[r]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace uavmec::run
