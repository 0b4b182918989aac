#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "uavmec/nn/array.hpp"

namespace uavmec::nn {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Gradient of a scalar loss with respect to every named parameter on a tape.
using Gradients = std::map<std::string, RealArray>;

enum class Op : std::uint8_t {
  Input,
  Param,
  Dense,
  Conv2d,
  LeakyRelu,
  Tanh,
  Exp,
  Softmax,
  MaskedLogSoftmax,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Square,
  Sum,
  Dot,
  Concat,
  Slice,
  Pick,
  Clip,
  Minimum,
  WeightedSum,
  GaussianLogProb,
  CategoricalEntropy,
};

/// Records primitive operations in creation order (which is a topological
/// order) and differentiates a scalar result in reverse.
///
/// Parameters are registered by name and held by reference: the referenced
/// arrays must outlive the tape and stay unmodified while it is in use.
/// Registering the same name twice returns the existing node, so a weight
/// shared by several sub-graphs accumulates its gradient correctly.
class Tape {
 public:
  NodeId input(RealArray value);
  NodeId param(const std::string& name, const RealArray& value);

  /// y = W x + b. `x` may have any shape; it is read as a flat vector.
  NodeId dense(NodeId x, NodeId weight, NodeId bias = kNoNode);
  /// Valid cross-correlation of a [c,h,w] image with [o,c,kh,kw] kernels.
  NodeId conv2d(NodeId image, NodeId kernels, NodeId bias, std::size_t stride);
  NodeId leaky_relu(NodeId x, Real slope);
  NodeId tanh(NodeId x);
  NodeId exp(NodeId x);
  NodeId softmax(NodeId x);
  /// Log-softmax over the entries with `valid[i]`; other entries are -inf.
  NodeId masked_log_softmax(NodeId x, const std::vector<bool>& valid);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, Real factor);
  NodeId add_scalar(NodeId a, Real offset);
  NodeId square(NodeId a);
  NodeId sum(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId concat(std::span<const NodeId> parts);
  NodeId slice(NodeId a, std::size_t offset, std::size_t length);
  NodeId pick(NodeId a, std::size_t index);
  /// Clamp to [lo, hi]; the gradient is zero where clamping is active.
  NodeId clip(NodeId a, Real lo, Real hi);
  NodeId minimum(NodeId a, NodeId b);
  /// sum_j weights[j] * vectors[j].
  NodeId weighted_sum(NodeId weights, std::span<const NodeId> vectors);
  /// Diagonal Gaussian log density of a fixed sample.
  NodeId gaussian_log_prob(NodeId mean, NodeId log_std, const RealArray& sample);
  /// -sum p log p over the finite entries of a log-probability vector.
  NodeId categorical_entropy(NodeId log_probs);

  const RealArray& value(NodeId id) const;
  Real scalar(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  Op op(NodeId id) const { return nodes_.at(id).op; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }

  /// Replaces the value of an Input leaf; call replay() to refresh consumers.
  void set_input(NodeId id, RealArray value);
  /// Recomputes every non-leaf node from its recorded inputs.
  void replay();

  /// Reverse pass from a scalar node. Every registered parameter appears in
  /// the result; parameters the loss does not reach get zero gradients.
  Gradients backward(NodeId loss) const;
  /// Same reverse pass, returning the adjoint of every node.
  std::vector<RealArray> adjoints(NodeId loss) const;

 private:
  struct Node {
    Op op = Op::Input;
    std::vector<NodeId> inputs{};
    RealArray value{};
    const RealArray* external = nullptr;
    Real scalar = 0.0;
    Real scalar2 = 0.0;
    std::size_t index = 0;
    std::size_t length = 0;
    std::vector<Real> aux{};
    std::string name{};
  };

  NodeId push(Node node);
  const RealArray& val(NodeId id) const;
  void evaluate(Node& node) const;
  void propagate(const Node& node, const RealArray& grad, std::vector<RealArray>& adj) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeId> params_;
};

}  // namespace uavmec::nn
