#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "uavmec/nn/array.hpp"
#include "uavmec/nn/tape.hpp"

namespace uavmec::nn {

/// Named learnable arrays plus a version counter that moves on every update.
class ParameterStore {
 public:
  void set(const std::string& name, RealArray value);
  const RealArray& at(const std::string& name) const;
  RealArray& at(const std::string& name);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const std::map<std::string, RealArray>& entries() const { return entries_; }
  std::map<std::string, RealArray>& entries() { return entries_; }

  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }
  void bump_version() { ++version_; }

  /// Same names with the same shapes.
  bool same_layout(const ParameterStore& other) const;
  std::size_t scalar_count() const;

  bool operator==(const ParameterStore&) const = default;

 private:
  std::map<std::string, RealArray> entries_;
  std::uint64_t version_ = 0;
};

enum class LayerKind { Dense, Conv2d, Matrix, AttentionVector, Constant };

/// One block of parameters. Dense creates `<name>.weight` [out,in] and
/// `<name>.bias` [out]; Conv2d creates `<name>.weight` [out,in,k,k] and
/// `<name>.bias` [out]; Matrix creates a bias-free `<name>` [out,in];
/// AttentionVector creates `<name>` [in]; Constant
/// creates `<name>` [out] filled with `fill`.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Dense;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  Real fill = 0.0;
};

using NetworkSpec = std::vector<LayerSpec>;

/// Glorot-uniform weights, zero biases. Each block draws from its own stream
/// derived from (seed, name), so the result does not depend on block order.
ParameterStore init_parameters(const NetworkSpec& spec, std::uint64_t seed);

struct AdamConfig {
  Real lr = 3e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

struct AdamState {
  std::map<std::string, RealArray> first;
  std::map<std::string, RealArray> second;
  std::uint64_t steps = 0;
};

/// In-place Adam update of every entry in `params`. `grads` must cover
/// exactly the same names.
void adam_step(ParameterStore& params, const Gradients& grads, AdamState& state,
               const AdamConfig& config);

/// Rescales the gradients whose names start with `prefix` so that their joint
/// L2 norm is at most `max_norm`. Returns the norm before clipping.
Real clip_grad_norm(Gradients& grads, Real max_norm, std::string_view prefix = {});

/// Registers every entry of `store` on the tape under `<prefix><name>`.
std::map<std::string, NodeId> register_parameters(Tape& tape, const ParameterStore& store,
                                                  const std::string& prefix = {});

}  // namespace uavmec::nn
