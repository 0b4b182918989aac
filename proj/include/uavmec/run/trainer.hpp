#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavmec/comm/graph.hpp"
#include "uavmec/env/environment.hpp"
#include "uavmec/nn/checkpoint.hpp"
#include "uavmec/ppo/learner.hpp"
#include "uavmec/run/config.hpp"

namespace uavmec::run {

/// Per-UAV networks. Encoder weights are fixed at their seeded values; the
/// learners hold the trainable actor and critic. Encoder outputs are
/// standardized with `z_shift` and `z_scale` before reaching the heads.
struct Fleet {
  std::vector<nn::ParameterStore> encoders;
  std::vector<ppo::Learner> learners;
  std::vector<double> z_shift;
  std::vector<double> z_scale;
};

ppo::HeadShape head_shape(const RunConfig& config);
/// Seeded networks plus standardization statistics measured over
/// `calibration_episodes` rollouts of the untrained policy.
Fleet init_fleet(const RunConfig& config);

nn::Checkpoint make_checkpoint(const Fleet& fleet, const RunConfig& config, std::uint64_t episode);
/// Builds a fleet of config.env.num_uavs UAVs; UAV m takes the stored
/// networks of UAV (m mod stored count). Throws CheckpointError when the
/// stored shapes do not match the config.
Fleet fleet_from_checkpoint(const nn::Checkpoint& checkpoint, const RunConfig& config);

struct EpisodeMetrics {
  std::size_t episode = 0;
  std::vector<double> discounted_reward;  // per UAV
  double reward_mean = 0.0;
  double task_pct = 0.0;
  std::size_t processed = 0;
  std::size_t collisions = 0;  // colliding pairs summed over slots
  std::size_t boundary_violations = 0;
  double energy_j = 0.0;
  double energy_per_task_j = 0.0;  // NaN when nothing was processed
  std::size_t slots = 0;
  std::vector<double> psi;  // per slot
};

enum class ActionMode { Sample, Greedy };

struct EpisodeOptions {
  ActionMode mode = ActionMode::Sample;
  bool learn = false;
  std::vector<nlohmann::json>* trace = nullptr;  // one record per slot when set
};

/// Training-side state kept across episodes.
struct LearningState {
  std::vector<ppo::ReplayBuffer> buffers;
  std::vector<Rng> shuffle_rngs;
  std::vector<std::vector<ppo::UpdateStats>> rounds;  // stats of rounds run in the last episode
};

LearningState init_learning(const RunConfig& config);

/// Runs one episode from the given world seed.
EpisodeMetrics run_episode(const RunConfig& config, Fleet& fleet, std::uint64_t world_seed,
                           std::uint64_t policy_seed, const EpisodeOptions& options, LearningState* learning);

struct TrainResult {
  std::vector<EpisodeMetrics> episodes;
  std::filesystem::path final_checkpoint;
};

/// Full training run writing config.json, metrics.csv, psi.csv,
/// train_stats.csv and checkpoints/ under `out_dir`.
TrainResult train(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct EvalResult {
  std::vector<EpisodeMetrics> episodes;
  Summary task_pct;
  Summary collisions;
  Summary energy_j;
  Summary energy_per_task_j;  // over episodes that processed tasks
  Summary reward_mean;
};

Summary summarize(const std::vector<double>& values);

EvalResult evaluate(const Fleet& fleet, const RunConfig& config, std::size_t episodes);
EvalResult evaluate(const nn::Checkpoint& checkpoint, const RunConfig& config, std::size_t episodes);

std::string metrics_header(std::size_t num_uavs);
std::string metrics_row(const EpisodeMetrics& m);
void write_metrics(const std::filesystem::path& path, const std::vector<EpisodeMetrics>& episodes,
                   std::size_t num_uavs);
void write_eval_summary(const std::filesystem::path& path, const EvalResult& result);

/// One-episode trace without learning. With a checkpoint the policy acts
/// greedily; without one a freshly initialized policy samples.
std::vector<nlohmann::json> trace_episode(const RunConfig& config, std::uint64_t seed,
                                          const std::optional<nn::Checkpoint>& checkpoint);

/// Visit counts per grid cell: each UAV contributes its cell at the start of
/// every executed slot.
std::vector<std::vector<std::size_t>> emit_coverage_grid(const std::vector<nlohmann::json>& trace,
                                                         std::size_t grid);
void write_coverage_csv(const std::filesystem::path& path, const std::vector<std::vector<std::size_t>>& counts);

}  // namespace uavmec::run
