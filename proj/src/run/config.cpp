#include "uavmec/run/config.hpp"

#include <fstream>
#include <sstream>

#include "uavmec/errors.hpp"

namespace uavmec::run {

using nlohmann::json;

namespace {

template <class T>
T read_as(const json& v, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("key '" + key + "' expects true or false");
    return v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (v.is_number_unsigned()) return v.get<T>();
    if (v.is_number_integer()) throw ConfigError("key '" + key + "' expects a non-negative integer");
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d == static_cast<double>(static_cast<T>(d))) return static_cast<T>(d);
    }
    throw ConfigError("key '" + key + "' expects a non-negative integer");
  } else {
    if (!v.is_number()) throw ConfigError("key '" + key + "' expects a number");
    return v.get<T>();
  }
}

template <class Access>
ConfigKey key(std::string name, std::string description, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  const std::string n = name;
  return ConfigKey{
      std::move(name), std::move(description),
      [access, n](RunConfig& c, const json& v) { access(c) = read_as<T>(v, n); },
      [access](const RunConfig& c) { return json(access(const_cast<RunConfig&>(c))); }};
}

ConfigKey range_key(std::string name, std::string description, double env::EnvConfig::*lo,
                    double env::EnvConfig::*hi) {
  const std::string n = name;
  return ConfigKey{std::move(name), std::move(description),
                   [lo, hi, n](RunConfig& c, const json& v) {
                     if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                       throw ConfigError("key '" + n + "' expects a two-element [low, high] array");
                     c.env.*lo = v[0].get<double>();
                     c.env.*hi = v[1].get<double>();
                   },
                   [lo, hi](const RunConfig& c) { return json::array({c.env.*lo, c.env.*hi}); }};
}

std::vector<ConfigKey> build_keys() {
  // Lambdas return references into the config so one table drives load, save and help.
#define FIELD(path) [](RunConfig& c) -> auto& { return c.path; }
  return {
      key("M", "number of UAVs", FIELD(env.num_uavs)),
      key("N", "number of users", FIELD(env.num_users)),
      key("T", "time slots per episode", FIELD(env.num_slots)),
      key("L", "horizontal area side length [m]", FIELD(env.area_size)),
      key("H", "UAV altitude [m]", FIELD(env.altitude)),
      range_key("S", "task size range [Kb]", &env::EnvConfig::task_size_min_kbit,
                &env::EnvConfig::task_size_max_kbit),
      range_key("C", "task CPU cycles range [cycles/bit]", &env::EnvConfig::task_cycles_min,
                &env::EnvConfig::task_cycles_max),
      key("U_n", "tasks per user at episode start", FIELD(env.tasks_per_user)),
      key("D_min", "minimum UAV separation [m]", FIELD(env.min_distance)),
      key("R_cov", "coverage radius [m]", FIELD(env.coverage_radius)),
      key("R_com", "communication radius [m]", FIELD(env.comm_radius)),
      key("B", "bandwidth [Hz]", FIELD(env.bandwidth_hz)),
      key("G0", "power gain at the reference distance [dB]", FIELD(env.power_gain_db)),
      key("sigma2", "noise power [dBm]", FIELD(env.noise_power_dbm)),
      key("P_n", "user transmit power [W]", FIELD(env.user_tx_power_w)),
      key("P_r", "UAV receiver power [W]", FIELD(env.uav_rx_power_w)),
      key("gamma", "discount factor", FIELD(ppo.gamma)),
      key("battery", "initial UAV battery [J]", FIELD(env.initial_battery_j)),
      key("kappa", "CPU energy per cycle [J]", FIELD(env.energy_per_cycle_j)),
      key("V_max", "maximum UAV speed [m/s]", FIELD(env.max_speed)),
      key("E_max", "number of training episodes", FIELD(episodes)),
      key("P_h", "hovering power [W]", FIELD(env.hover_power_w)),
      key("P_f", "flying power at V_max [W]", FIELD(env.flying_power_w)),
      key("lambda", "penalty for a collision or boundary violation", FIELD(env.penalty)),
      key("K", "neighbors kept per UAV", FIELD(env.max_neighbors)),
      key("w1", "energy weight in the slot objective", FIELD(env.w1)),
      key("w2", "processed-task weight in the slot objective", FIELD(env.w2)),
      key("dt", "slot duration [s]", FIELD(env.slot_duration)),
      key("v_user_max", "per-axis user speed bound [m/s]", FIELD(env.user_speed_max)),
      key("resample_user_velocity", "draw a new user velocity every slot", FIELD(env.resample_user_velocity)),
      key("grid_cell", "visited-map cell edge [m]", FIELD(env.grid_cell)),
      key("coverage_3d", "use slant range (including H) for coverage", FIELD(env.coverage_3d)),
      key("reject_close_placement", "resample initial UAV positions closer than D_min",
          FIELD(env.reject_close_placement)),
      key("cooperative_penalty", "penalize every UAV when any UAV violates", FIELD(env.cooperative_penalty)),
      key("normalize_energy", "divide slot energy by M (P_h + P_f) dt in the objective",
          FIELD(env.normalize_energy)),
      key("K_heads", "attention heads per layer", FIELD(encoder.heads)),
      key("max_obs_users", "user slots in each observation", FIELD(encoder.max_obs_users)),
      key("conv1_channels", "first convolution output channels", FIELD(encoder.conv1_channels)),
      key("conv1_kernel", "first convolution kernel size", FIELD(encoder.conv1_kernel)),
      key("conv1_stride", "first convolution stride", FIELD(encoder.conv1_stride)),
      key("conv2_channels", "second convolution output channels", FIELD(encoder.conv2_channels)),
      key("conv2_kernel", "second convolution kernel size", FIELD(encoder.conv2_kernel)),
      key("conv2_stride", "second convolution stride", FIELD(encoder.conv2_stride)),
      key("cnn_out", "map encoder output width", FIELD(encoder.cnn_out)),
      key("mlp_hidden", "status encoder hidden width", FIELD(encoder.mlp_hidden)),
      key("mlp_out", "status encoder output width", FIELD(encoder.mlp_out)),
      key("gat_dim", "attention layer width", FIELD(encoder.gat_dim)),
      key("actor_hidden", "actor hidden width", FIELD(ppo.actor_hidden)),
      key("critic_hidden", "critic hidden width", FIELD(ppo.critic_hidden)),
      key("init_log_std", "initial log standard deviation of the move head", FIELD(ppo.init_log_std)),
      key("clip_eps", "PPO clip range", FIELD(ppo.clip_eps)),
      key("epochs", "PPO epochs per update", FIELD(ppo.epochs)),
      key("minibatch", "PPO minibatch size", FIELD(ppo.minibatch)),
      key("c_v", "value loss coefficient", FIELD(ppo.value_coef)),
      key("c_e", "entropy bonus coefficient", FIELD(ppo.entropy_coef)),
      key("lambda_gae", "GAE lambda", FIELD(ppo.gae_lambda)),
      key("max_grad_norm", "gradient norm clip per network", FIELD(ppo.max_grad_norm)),
      key("buffer_capacity", "replay buffer capacity per UAV", FIELD(ppo.buffer_capacity)),
      key("lr", "Adam learning rate", FIELD(ppo.lr)),
      key("reward_scale", "factor applied to rewards before advantage estimation", FIELD(ppo.reward_scale)),
      key("update_every", "slots between learner rounds (0: once per episode)", FIELD(update_every)),
      key("checkpoint_interval", "episodes between checkpoints", FIELD(checkpoint_interval)),
      key("calibration_episodes", "untrained rollouts used to standardize encoder outputs (0: none)",
          FIELD(calibration_episodes)),
      key("eval_episodes", "default episode count for evaluation", FIELD(eval_episodes)),
      key("seed", "master seed", FIELD(seed)),
  };
#undef FIELD
}

const ConfigKey& find_key(const std::string& name) {
  for (const ConfigKey& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("unknown configuration key '" + name + "'");
}

}  // namespace

void RunConfig::finalize() {
  encoder.max_neighbors = env.max_neighbors;
  env.validate();
  encoder.grid = env.grid_size();
  encoder.validate();
  ppo.validate();
  if (episodes == 0) throw ConfigError("E_max must be at least 1");
  if (checkpoint_interval == 0) throw ConfigError("checkpoint_interval must be at least 1");
  if (encoder.max_obs_users == 0) throw ConfigError("max_obs_users must be at least 1");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

RunConfig apply_json(RunConfig base, const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [name, value] : doc.items()) find_key(name).set(base, value);
  base.finalize();
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return apply_json(RunConfig{}, doc);
}

json to_json(const RunConfig& config) {
  json out = json::object();
  for (const ConfigKey& k : config_keys()) out[k.name] = k.get(config);
  return out;
}

void set_key(RunConfig& config, const std::string& name, const std::string& text) {
  const ConfigKey& k = find_key(name);
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    throw ConfigError("value '" + text + "' for key '" + name + "' is not a number, boolean or array");
  }
  k.set(config, v);
}

std::string describe_keys() {
  const RunConfig defaults;
  std::ostringstream out;
  for (const ConfigKey& k : config_keys()) {
    std::string name = k.name;
    name.resize(std::max<std::size_t>(name.size(), 24), ' ');
    out << "  " << name << k.description << " (default " << k.get(defaults).dump() << ")\n";
  }
  return out.str();
}

}  // namespace uavmec::run
