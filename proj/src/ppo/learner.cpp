#include "uavmec/ppo/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uavmec/errors.hpp"

namespace uavmec::ppo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;

using ParamMap = std::map<std::string, nn::NodeId>;

nn::NodeId node(const ParamMap& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ContractError("policy parameter '" + name + "' is not registered");
  return it->second;
}

nn::NodeId dense(nn::Tape& t, const ParamMap& p, const std::string& layer, nn::NodeId x) {
  return t.dense(x, node(p, layer + ".weight"), node(p, layer + ".bias"));
}

std::vector<bool> to_bool(const std::vector<std::uint8_t>& mask) { return {mask.begin(), mask.end()}; }

}  // namespace

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must lie in (0, 1)");
  if (epochs == 0 || minibatch == 0 || buffer_capacity == 0)
    throw ConfigError("epochs, minibatch and buffer_capacity must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
  if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0)) throw ConfigError("loss coefficients must be non-negative");
  if (actor_hidden == 0 || critic_hidden == 0) throw ConfigError("hidden widths must be positive");
  if (!std::isfinite(init_log_std)) throw ConfigError("init_log_std must be finite");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
}

nn::NetworkSpec actor_spec(const HeadShape& s, const PpoConfig& c) {
  return {
      {"actor.hidden1", nn::LayerKind::Dense, s.z_dim, c.actor_hidden},
      {"actor.hidden2", nn::LayerKind::Dense, c.actor_hidden, c.actor_hidden},
      {"actor.mean", nn::LayerKind::Dense, c.actor_hidden, 2},
      {"actor.serve", nn::LayerKind::Dense, c.actor_hidden, s.serve_slots + 1},
      {"actor.log_std", nn::LayerKind::Constant, 0, 2, 0, c.init_log_std},
  };
}

nn::NetworkSpec critic_spec(const HeadShape& s, const PpoConfig& c) {
  return {
      {"critic.hidden1", nn::LayerKind::Dense, s.z_dim, c.critic_hidden},
      {"critic.hidden2", nn::LayerKind::Dense, c.critic_hidden, c.critic_hidden},
      {"critic.value", nn::LayerKind::Dense, c.critic_hidden, 1},
  };
}

std::vector<std::uint8_t> serve_mask(const std::vector<std::uint8_t>& user_mask) {
  std::vector<std::uint8_t> m = user_mask;
  m.push_back(1);
  return m;
}

PolicyNodes policy_forward(nn::Tape& t, const ParamMap& p, nn::NodeId z, const std::vector<std::uint8_t>& mask,
                           double max_step) {
  nn::NodeId h = t.tanh(dense(t, p, "actor.hidden1", z));
  h = t.tanh(dense(t, p, "actor.hidden2", h));
  // Each component is bounded by max_step / sqrt(2) so the mean stays inside the speed ball.
  const nn::NodeId mean = t.scale(t.tanh(dense(t, p, "actor.mean", h)), max_step * std::sqrt(0.5));
  const nn::NodeId logits = dense(t, p, "actor.serve", h);
  if (mask.size() != t.value(logits).size()) throw ContractError("serve mask does not match the serve head");
  return {mean, node(p, "actor.log_std"), t.masked_log_softmax(logits, to_bool(mask))};
}

nn::NodeId value_forward(nn::Tape& t, const ParamMap& p, nn::NodeId z) {
  nn::NodeId h = t.tanh(dense(t, p, "critic.hidden1", z));
  h = t.tanh(dense(t, p, "critic.hidden2", h));
  return t.sum(dense(t, p, "critic.value", h));
}

PolicyDist policy_dist(const nn::ParameterStore& actor, const std::vector<double>& z,
                       const std::vector<std::uint8_t>& mask, double max_step) {
  nn::Tape t;
  const ParamMap p = nn::register_parameters(t, actor);
  const PolicyNodes out = policy_forward(t, p, t.input(nn::RealArray::vector(z)), mask, max_step);
  return {t.value(out.mean).data, t.value(out.log_std).data, t.value(out.serve_log_probs).data};
}

double value_of(const nn::ParameterStore& critic, const std::vector<double>& z) {
  nn::Tape t;
  const ParamMap p = nn::register_parameters(t, critic);
  return t.scalar(value_forward(t, p, t.input(nn::RealArray::vector(z))));
}

std::pair<HybridAction, double> sample_action(const PolicyDist& dist, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  HybridAction a;
  a.dx = dist.mean[0] + std::exp(dist.log_std[0]) * normal(rng);
  a.dy = dist.mean[1] + std::exp(dist.log_std[1]) * normal(rng);

  std::vector<double> probs(dist.serve_log_probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(dist.serve_log_probs[i]);
  std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
  a.serve_index = pick(rng);
  return {a, action_log_prob(dist, a)};
}

HybridAction greedy_action(const PolicyDist& dist) {
  HybridAction a;
  a.dx = dist.mean[0];
  a.dy = dist.mean[1];
  const auto best = std::max_element(dist.serve_log_probs.begin(), dist.serve_log_probs.end());
  a.serve_index = static_cast<std::size_t>(best - dist.serve_log_probs.begin());
  return a;
}

double action_log_prob(const PolicyDist& dist, const HybridAction& action) {
  const double sample[2] = {action.dx, action.dy};
  double lp = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double z = (sample[i] - dist.mean[i]) / std::exp(dist.log_std[i]);
    lp += -0.5 * z * z - dist.log_std[i] - kHalfLog2Pi;
  }
  return lp + dist.serve_log_probs.at(action.serve_index);
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, const std::vector<bool>& dones,
                      double gamma, double lambda, double bootstrap) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw ContractError("GAE inputs differ in length");
  GaeResult r{std::vector<double>(n), std::vector<double>(n)};
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double next = k + 1 < n ? values[k + 1] : bootstrap;
    const double delta = rewards[k] + gamma * next * live - values[k];
    running = delta + gamma * lambda * live * running;
    r.advantages[k] = running;
    r.returns[k] = running + values[k];
  }
  return r;
}

void normalize(std::vector<double>& values) {
  if (values.size() < 2) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : values) v = sd > 1e-12 ? (v - mean) / sd : 0.0;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

void finish_trajectory(ReplayBuffer& buffer, const PpoConfig& config, double bootstrap) {
  std::vector<double> rewards, values;
  std::vector<bool> dones;
  for (const Transition& t : buffer) {
    rewards.push_back(t.reward * config.reward_scale);
    values.push_back(t.value);
    dones.push_back(t.done);
  }
  const GaeResult g = compute_gae(rewards, values, dones, config.gamma, config.gae_lambda, bootstrap);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    buffer[i].advantage = g.advantages[i];
    buffer[i].ret = g.returns[i];
  }
}

namespace {

nn::Gradients subset(const nn::Gradients& all, const nn::ParameterStore& store) {
  nn::Gradients out;
  for (const auto& [name, _] : store.entries()) out.emplace(name, all.at(name));
  return out;
}

}  // namespace

UpdateStats ppo_update(Learner& learner, std::vector<Transition> pool, const HeadShape& shape,
                       const PpoConfig& config, Rng& rng) {
  if (pool.empty()) throw ContractError("PPO update on an empty pool");
  std::vector<double> adv(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) adv[i] = pool[i].advantage;
  normalize(adv);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i].advantage = adv[i];

  const nn::AdamConfig adam{config.lr};
  const double gauss_entropy_const = 2.0 * (0.5 + kHalfLog2Pi);
  UpdateStats stats;
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.minibatch) {
      const std::size_t stop = std::min(order.size(), start + config.minibatch);
      const double inv = 1.0 / static_cast<double>(stop - start);
      nn::Tape t;
      const ParamMap ap = nn::register_parameters(t, learner.actor);
      const ParamMap cp = nn::register_parameters(t, learner.critic);
      std::vector<nn::NodeId> terms, ratios, surrogates, value_losses, entropies;
      for (std::size_t k = start; k < stop; ++k) {
        const Transition& tr = pool[order[k]];
        if (tr.z.size() != shape.z_dim) throw ContractError("transition state has the wrong dimension");
        const nn::NodeId z = t.input(nn::RealArray::vector(tr.z));
        const PolicyNodes pol = policy_forward(t, ap, z, tr.serve_mask, shape.max_step);
        const nn::NodeId cont = t.gaussian_log_prob(pol.mean, pol.log_std,
                                                    nn::RealArray::vector({tr.action.dx, tr.action.dy}));
        const nn::NodeId logp = t.add(cont, t.pick(pol.serve_log_probs, tr.action.serve_index));
        const nn::NodeId ratio = t.exp(t.add_scalar(logp, -tr.log_prob));
        const nn::NodeId surr = t.minimum(t.scale(ratio, tr.advantage),
                                          t.scale(t.clip(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps),
                                                  tr.advantage));
        const nn::NodeId value_err = t.square(t.add_scalar(value_forward(t, cp, z), -tr.ret));
        const nn::NodeId entropy = t.add_scalar(t.add(t.categorical_entropy(pol.serve_log_probs), t.sum(pol.log_std)),
                                                gauss_entropy_const);
        const nn::NodeId parts[] = {t.scale(surr, -1.0), t.scale(value_err, config.value_coef),
                                    t.scale(entropy, -config.entropy_coef)};
        terms.push_back(t.sum(t.concat(parts)));
        ratios.push_back(ratio);
        surrogates.push_back(surr);
        value_losses.push_back(value_err);
        entropies.push_back(entropy);
      }
      const nn::NodeId loss = t.scale(t.sum(t.concat(terms)), inv);
      nn::Gradients grads = t.backward(loss);
      nn::clip_grad_norm(grads, config.max_grad_norm, "actor.");
      nn::clip_grad_norm(grads, config.max_grad_norm, "critic.");
      nn::adam_step(learner.actor, subset(grads, learner.actor), learner.actor_opt, adam);
      nn::adam_step(learner.critic, subset(grads, learner.critic), learner.critic_opt, adam);

      for (std::size_t i = 0; i < terms.size(); ++i) {
        const double r = t.scalar(ratios[i]);
        stats.mean_ratio += r;
        stats.clip_fraction += std::fabs(r - 1.0) > config.clip_eps ? 1.0 : 0.0;
        stats.actor_loss -= t.scalar(surrogates[i]);
        stats.critic_loss += t.scalar(value_losses[i]);
        stats.entropy += t.scalar(entropies[i]);
      }
      stats.samples += terms.size();
    }
  }
  const double n = static_cast<double>(stats.samples);
  stats.mean_ratio /= n;
  stats.clip_fraction /= n;
  stats.actor_loss /= n;
  stats.critic_loss /= n;
  stats.entropy /= n;
  stats.samples = pool.size();
  return stats;
}

std::vector<UpdateStats> learner_round(std::vector<Learner>& learners, std::vector<ReplayBuffer>& buffers,
                                       const comm::NeighborSet& neighbors, const HeadShape& shape,
                                       const PpoConfig& config, std::span<Rng> rngs) {
  const std::size_t n = learners.size();
  if (buffers.size() != n || neighbors.size() != n || rngs.size() != n)
    throw ContractError("learner round needs one buffer, neighbor list and stream per UAV");
  const auto pools = comm::union_buffers(buffers, neighbors);
  std::vector<UpdateStats> stats(n);
  for (std::size_t m = 0; m < n; ++m)
    if (!pools[m].empty()) stats[m] = ppo_update(learners[m], pools[m], shape, config, rngs[m]);

  std::vector<nn::ParameterStore> actors, critics;
  for (const Learner& l : learners) {
    actors.push_back(l.actor);
    critics.push_back(l.critic);
  }
  const auto new_actors = comm::average_parameters(actors, neighbors);
  const auto new_critics = comm::average_parameters(critics, neighbors);
  for (std::size_t m = 0; m < n; ++m) {
    learners[m].actor = new_actors[m];
    learners[m].critic = new_critics[m];
    buffers[m].clear();
  }
  return stats;
}

}  // namespace uavmec::ppo
