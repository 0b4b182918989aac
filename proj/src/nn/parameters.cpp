#include "uavmec/nn/parameters.hpp"

#include <cmath>

#include "uavmec/errors.hpp"
#include "uavmec/random.hpp"

namespace uavmec::nn {

void ParameterStore::set(const std::string& name, RealArray value) {
  entries_[name] = std::move(value);
}

const RealArray& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

RealArray& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

bool ParameterStore::same_layout(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape != b->second.shape) return false;
  }
  return true;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : entries_) n += v.size();
  return n;
}

namespace {

RealArray glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const Real limit = std::sqrt(6.0 / static_cast<Real>(fan_in + fan_out));
  std::uniform_real_distribution<Real> dist(-limit, limit);
  RealArray a(std::move(shape), 0.0);
  for (Real& v : a.data) v = dist(rng);
  return a;
}

}  // namespace

ParameterStore init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  ParameterStore store;
  for (const LayerSpec& layer : spec) {
    Rng rng = make_rng(seed, layer.name);
    switch (layer.kind) {
      case LayerKind::Dense:
        if (layer.in == 0 || layer.out == 0) {
          throw ConfigError("layer '" + layer.name + "' has a zero dimension");
        }
        store.set(layer.name + ".weight", glorot(Shape{layer.out, layer.in}, layer.in, layer.out, rng));
        store.set(layer.name + ".bias", RealArray(Shape{layer.out}, 0.0));
        break;
      case LayerKind::Conv2d: {
        if (layer.in == 0 || layer.out == 0 || layer.kernel == 0) {
          throw ConfigError("layer '" + layer.name + "' has a zero dimension");
        }
        const std::size_t area = layer.kernel * layer.kernel;
        store.set(layer.name + ".weight",
                  glorot(Shape{layer.out, layer.in, layer.kernel, layer.kernel}, layer.in * area,
                         layer.out * area, rng));
        store.set(layer.name + ".bias", RealArray(Shape{layer.out}, 0.0));
        break;
      }
      case LayerKind::Matrix:
        if (layer.in == 0 || layer.out == 0) {
          throw ConfigError("layer '" + layer.name + "' has a zero dimension");
        }
        store.set(layer.name, glorot(Shape{layer.out, layer.in}, layer.in, layer.out, rng));
        break;
      case LayerKind::AttentionVector:
        if (layer.in == 0) throw ConfigError("layer '" + layer.name + "' has a zero dimension");
        store.set(layer.name, glorot(Shape{layer.in}, layer.in, 1, rng));
        break;
      case LayerKind::Constant:
        if (layer.out == 0) throw ConfigError("layer '" + layer.name + "' has a zero dimension");
        store.set(layer.name, RealArray(Shape{layer.out}, layer.fill));
        break;
    }
  }
  return store;
}

void adam_step(ParameterStore& params, const Gradients& grads, AdamState& state,
               const AdamConfig& config) {
  for (const auto& [name, value] : params.entries()) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ContractError("missing gradient for '" + name + "'");
    if (it->second.shape != value.shape) throw ShapeError("gradient shape mismatch for '" + name + "'");
  }
  if (grads.size() != params.entries().size()) {
    throw ContractError("gradient map names parameters that are not in the store");
  }

  ++state.steps;
  const Real t = static_cast<Real>(state.steps);
  const Real correction1 = 1.0 - std::pow(config.beta1, t);
  const Real correction2 = 1.0 - std::pow(config.beta2, t);
  for (auto& [name, value] : params.entries()) {
    const RealArray& g = grads.at(name);
    RealArray& m = state.first[name];
    RealArray& v = state.second[name];
    if (m.data.empty()) {
      m = RealArray(value.shape, 0.0);
      v = RealArray(value.shape, 0.0);
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const Real m_hat = m[i] / correction1;
      const Real v_hat = v[i] / correction2;
      value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
  params.bump_version();
}

Real clip_grad_norm(Gradients& grads, Real max_norm, std::string_view prefix) {
  auto selected = [&](const std::string& name) { return name.compare(0, prefix.size(), prefix) == 0; };
  Real sq = 0.0;
  for (const auto& [name, g] : grads) {
    if (!selected(name)) continue;
    for (Real v : g.data) sq += v * v;
  }
  const Real norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const Real factor = max_norm / norm;
    for (auto& [name, g] : grads) {
      if (!selected(name)) continue;
      for (Real& v : g.data) v *= factor;
    }
  }
  return norm;
}

std::map<std::string, NodeId> register_parameters(Tape& tape, const ParameterStore& store,
                                                  const std::string& prefix) {
  std::map<std::string, NodeId> ids;
  for (const auto& [name, value] : store.entries()) ids[name] = tape.param(prefix + name, value);
  return ids;
}

}  // namespace uavmec::nn
