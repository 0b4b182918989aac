#pragma once

#include <span>
#include <utility>
#include <vector>

#include "uavmec/comm/graph.hpp"
#include "uavmec/nn/parameters.hpp"
#include "uavmec/nn/tape.hpp"
#include "uavmec/ppo/transition.hpp"
#include "uavmec/random.hpp"

namespace uavmec::ppo {

struct PpoConfig {
  double clip_eps = 0.2;
  std::size_t epochs = 4;
  std::size_t minibatch = 64;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double max_grad_norm = 0.5;
  std::size_t buffer_capacity = 4096;
  double lr = 3e-4;
  std::size_t actor_hidden = 64;
  std::size_t critic_hidden = 64;
  double init_log_std = 0.0;
  double reward_scale = 1.0;  // applied to rewards before advantage estimation

  void validate() const;
};

/// Sizes shared by the actor and critic.
struct HeadShape {
  std::size_t z_dim = 0;
  std::size_t serve_slots = 0;  // user slots; the index serve_slots means nobody
  double max_step = 2.0;        // V_max dt
};

nn::NetworkSpec actor_spec(const HeadShape& shape, const PpoConfig& config);
nn::NetworkSpec critic_spec(const HeadShape& shape, const PpoConfig& config);

/// Full serve mask: user-slot validity followed by an always-valid "nobody".
std::vector<std::uint8_t> serve_mask(const std::vector<std::uint8_t>& user_mask);

struct PolicyNodes {
  nn::NodeId mean;
  nn::NodeId log_std;
  nn::NodeId serve_log_probs;
};

/// Actor graph on a tape; `params` come from register_parameters on the actor store.
PolicyNodes policy_forward(nn::Tape& tape, const std::map<std::string, nn::NodeId>& params, nn::NodeId z,
                           const std::vector<std::uint8_t>& mask, double max_step);
nn::NodeId value_forward(nn::Tape& tape, const std::map<std::string, nn::NodeId>& params, nn::NodeId z);

struct PolicyDist {
  std::vector<double> mean;
  std::vector<double> log_std;
  std::vector<double> serve_log_probs;  // -inf on masked indices
};

PolicyDist policy_dist(const nn::ParameterStore& actor, const std::vector<double>& z,
                       const std::vector<std::uint8_t>& mask, double max_step);
double value_of(const nn::ParameterStore& critic, const std::vector<double>& z);

/// Draws a move from the Gaussian (before any environment clipping) and a
/// serve index from the categorical. Returns the joint log density.
std::pair<HybridAction, double> sample_action(const PolicyDist& dist, Rng& rng);
/// Mean move and most likely serve index.
HybridAction greedy_action(const PolicyDist& dist);
/// Log density of an action under `dist`, evaluated independently of the tape.
double action_log_prob(const PolicyDist& dist, const HybridAction& action);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation over one trajectory. `bootstrap` is the
/// value after the last step when it is not terminal.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      const std::vector<bool>& dones, double gamma, double lambda, double bootstrap = 0.0);

/// Shifts and scales to zero mean and unit variance (left alone for size < 2).
void normalize(std::vector<double>& values);

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A).
double clipped_surrogate(double ratio, double advantage, double eps);

/// One UAV's learning state.
struct Learner {
  nn::ParameterStore actor;
  nn::ParameterStore critic;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;
};

struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  std::size_t samples = 0;
};

/// Fills advantage and return fields of one UAV's own buffer, in order.
void finish_trajectory(ReplayBuffer& buffer, const PpoConfig& config, double bootstrap = 0.0);

/// Clipped PPO on a pool whose advantages and returns are already filled.
UpdateStats ppo_update(Learner& learner, std::vector<Transition> pool, const HeadShape& shape,
                       const PpoConfig& config, Rng& rng);

/// Every UAV trains on its neighborhood pool, then actors and critics are
/// averaged over neighborhoods from the post-update snapshot. Buffers are
/// cleared afterwards.
std::vector<UpdateStats> learner_round(std::vector<Learner>& learners, std::vector<ReplayBuffer>& buffers,
                                       const comm::NeighborSet& neighbors, const HeadShape& shape,
                                       const PpoConfig& config, std::span<Rng> rngs);

}  // namespace uavmec::ppo
