#include "uavmec/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uavmec/errors.hpp"

namespace uavmec::nn {

namespace {

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void accumulate(RealArray& into, const RealArray& like, std::size_t i, Real v) {
  if (into.data.empty()) into = RealArray(like.shape, 0.0);
  into.data[i] += v;
}

RealArray& ensure(std::vector<RealArray>& adj, NodeId id, const RealArray& like) {
  if (adj[id].data.empty()) adj[id] = RealArray(like.shape, 0.0);
  return adj[id];
}

}  // namespace

NodeId Tape::push(Node node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) throw ContractError("tape input id out of range");
  }
  evaluate(node);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const RealArray& Tape::val(NodeId id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const RealArray& Tape::value(NodeId id) const {
  if (id >= nodes_.size()) throw ContractError("unknown tape node");
  return val(id);
}

Real Tape::scalar(NodeId id) const {
  const RealArray& v = value(id);
  if (v.size() != 1) throw ContractError("node is not a scalar");
  return v[0];
}

NodeId Tape::input(RealArray value) {
  Node n{Op::Input, {}, std::move(value)};
  return push(std::move(n));
}

NodeId Tape::param(const std::string& name, const RealArray& value) {
  if (auto it = params_.find(name); it != params_.end()) return it->second;
  Node n{Op::Param, {}, {}};
  n.external = &value;
  n.name = name;
  NodeId id = push(std::move(n));
  params_.emplace(name, id);
  return id;
}

NodeId Tape::dense(NodeId x, NodeId weight, NodeId bias) {
  const RealArray& w = value(weight);
  require(w.shape.size() == 2, "dense weight must be a matrix, got " + shape_string(w.shape));
  require(value(x).size() == w.shape[1], "dense input size " + std::to_string(value(x).size()) +
                                             " does not match weight " + shape_string(w.shape));
  Node n{Op::Dense, {x, weight}, {}};
  if (bias != kNoNode) {
    require(value(bias).size() == w.shape[0], "dense bias size does not match weight rows");
    n.inputs.push_back(bias);
  }
  return push(std::move(n));
}

NodeId Tape::conv2d(NodeId image, NodeId kernels, NodeId bias, std::size_t stride) {
  const RealArray& img = value(image);
  const RealArray& k = value(kernels);
  require(img.shape.size() == 3, "conv2d image must be [c,h,w]");
  require(k.shape.size() == 4, "conv2d kernels must be [o,c,kh,kw]");
  require(k.shape[1] == img.shape[0], "conv2d channel mismatch");
  require(k.shape[2] <= img.shape[1] && k.shape[3] <= img.shape[2],
          "conv2d kernel " + shape_string(k.shape) + " larger than image " + shape_string(img.shape));
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  Node n{Op::Conv2d, {image, kernels}, {}};
  if (bias != kNoNode) {
    require(value(bias).size() == k.shape[0], "conv2d bias size mismatch");
    n.inputs.push_back(bias);
  }
  n.index = stride;
  return push(std::move(n));
}

NodeId Tape::leaky_relu(NodeId x, Real slope) {
  Node n{Op::LeakyRelu, {x}, {}};
  n.scalar = slope;
  return push(std::move(n));
}

NodeId Tape::tanh(NodeId x) { return push(Node{Op::Tanh, {x}, {}}); }
NodeId Tape::exp(NodeId x) { return push(Node{Op::Exp, {x}, {}}); }

NodeId Tape::softmax(NodeId x) {
  require(value(x).size() >= 1, "softmax of an empty vector");
  return push(Node{Op::Softmax, {x}, {}});
}

NodeId Tape::masked_log_softmax(NodeId x, const std::vector<bool>& valid) {
  require(valid.size() == value(x).size(), "mask size does not match logits");
  require(std::find(valid.begin(), valid.end(), true) != valid.end(), "mask has no valid entry");
  Node n{Op::MaskedLogSoftmax, {x}, {}};
  n.aux.assign(valid.begin(), valid.end());
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "add size mismatch");
  return push(Node{Op::Add, {a, b}, {}});
}

NodeId Tape::sub(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "sub size mismatch");
  return push(Node{Op::Sub, {a, b}, {}});
}

NodeId Tape::mul(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "mul size mismatch");
  return push(Node{Op::Mul, {a, b}, {}});
}

NodeId Tape::scale(NodeId a, Real factor) {
  Node n{Op::Scale, {a}, {}};
  n.scalar = factor;
  return push(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, Real offset) {
  Node n{Op::AddScalar, {a}, {}};
  n.scalar = offset;
  return push(std::move(n));
}

NodeId Tape::square(NodeId a) { return push(Node{Op::Square, {a}, {}}); }
NodeId Tape::sum(NodeId a) { return push(Node{Op::Sum, {a}, {}}); }

NodeId Tape::dot(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "dot size mismatch");
  return push(Node{Op::Dot, {a, b}, {}});
}

NodeId Tape::concat(std::span<const NodeId> parts) {
  require(!parts.empty(), "concat of nothing");
  return push(Node{Op::Concat, {parts.begin(), parts.end()}, {}});
}

NodeId Tape::slice(NodeId a, std::size_t offset, std::size_t length) {
  require(offset + length <= value(a).size() && length > 0, "slice out of range");
  Node n{Op::Slice, {a}, {}};
  n.index = offset;
  n.length = length;
  return push(std::move(n));
}

NodeId Tape::pick(NodeId a, std::size_t index) {
  require(index < value(a).size(), "pick index out of range");
  Node n{Op::Pick, {a}, {}};
  n.index = index;
  return push(std::move(n));
}

NodeId Tape::clip(NodeId a, Real lo, Real hi) {
  if (!(lo <= hi)) throw ContractError("clip bounds reversed");
  Node n{Op::Clip, {a}, {}};
  n.scalar = lo;
  n.scalar2 = hi;
  return push(std::move(n));
}

NodeId Tape::minimum(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "minimum size mismatch");
  return push(Node{Op::Minimum, {a, b}, {}});
}

NodeId Tape::weighted_sum(NodeId weights, std::span<const NodeId> vectors) {
  require(!vectors.empty(), "weighted sum of nothing");
  require(value(weights).size() == vectors.size(), "weighted sum: one weight per vector");
  const std::size_t d = value(vectors[0]).size();
  Node n{Op::WeightedSum, {weights}, {}};
  for (NodeId v : vectors) {
    require(value(v).size() == d, "weighted sum: vectors differ in size");
    n.inputs.push_back(v);
  }
  return push(std::move(n));
}

NodeId Tape::gaussian_log_prob(NodeId mean, NodeId log_std, const RealArray& sample) {
  require(value(mean).size() == value(log_std).size() && sample.size() == value(mean).size(),
          "gaussian log prob size mismatch");
  Node n{Op::GaussianLogProb, {mean, log_std}, {}};
  n.aux = sample.data;
  return push(std::move(n));
}

NodeId Tape::categorical_entropy(NodeId log_probs) {
  return push(Node{Op::CategoricalEntropy, {log_probs}, {}});
}

void Tape::set_input(NodeId id, RealArray value) {
  Node& n = nodes_.at(id);
  if (n.op != Op::Input) throw ContractError("set_input on a non-input node");
  if (n.value.shape != value.shape) throw ShapeError("set_input shape change");
  n.value = std::move(value);
}

void Tape::replay() {
  for (Node& n : nodes_) evaluate(n);
}

void Tape::evaluate(Node& n) const {
  auto in = [&](std::size_t k) -> const RealArray& { return val(n.inputs[k]); };
  switch (n.op) {
    case Op::Input:
    case Op::Param:
      return;
    case Op::Dense: {
      const RealArray& x = in(0);
      const RealArray& w = in(1);
      const std::size_t rows = w.shape[0], cols = w.shape[1];
      n.value = RealArray(Shape{rows}, 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        const Real* wr = &w.data[i * cols];
        Real acc = n.inputs.size() > 2 ? in(2)[i] : 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * x.data[j];
        n.value.data[i] = acc;
      }
      return;
    }
    case Op::Conv2d: {
      const RealArray& img = in(0);
      const RealArray& k = in(1);
      const std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
      const std::size_t o = k.shape[0], kh = k.shape[2], kw = k.shape[3];
      const std::size_t s = n.index;
      const std::size_t oh = (h - kh) / s + 1, ow = (w - kw) / s + 1;
      n.value = RealArray(Shape{o, oh, ow}, 0.0);
      for (std::size_t oc = 0; oc < o; ++oc) {
        const Real b = n.inputs.size() > 2 ? in(2)[oc] : 0.0;
        for (std::size_t y = 0; y < oh; ++y) {
          for (std::size_t x = 0; x < ow; ++x) {
            Real acc = b;
            for (std::size_t ic = 0; ic < c; ++ic) {
              for (std::size_t ky = 0; ky < kh; ++ky) {
                const Real* row = &img.data[(ic * h + y * s + ky) * w + x * s];
                const Real* krow = &k.data[((oc * c + ic) * kh + ky) * kw];
                for (std::size_t kx = 0; kx < kw; ++kx) acc += krow[kx] * row[kx];
              }
            }
            n.value.data[(oc * oh + y) * ow + x] = acc;
          }
        }
      }
      return;
    }
    case Op::LeakyRelu: {
      n.value = in(0);
      for (Real& v : n.value.data) v = v >= 0.0 ? v : n.scalar * v;
      return;
    }
    case Op::Tanh: {
      n.value = in(0);
      for (Real& v : n.value.data) v = std::tanh(v);
      return;
    }
    case Op::Exp: {
      n.value = in(0);
      for (Real& v : n.value.data) v = std::exp(v);
      return;
    }
    case Op::Softmax: {
      n.value = in(0);
      const Real mx = *std::max_element(n.value.data.begin(), n.value.data.end());
      Real total = 0.0;
      for (Real& v : n.value.data) {
        v = std::exp(v - mx);
        total += v;
      }
      for (Real& v : n.value.data) v /= total;
      return;
    }
    case Op::MaskedLogSoftmax: {
      const RealArray& x = in(0);
      Real mx = kNegInf;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (n.aux[i] != 0.0) mx = std::max(mx, x[i]);
      }
      Real total = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (n.aux[i] != 0.0) total += std::exp(x[i] - mx);
      }
      const Real lse = mx + std::log(total);
      n.value = RealArray(x.shape, kNegInf);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (n.aux[i] != 0.0) n.value[i] = x[i] - lse;
      }
      return;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      n.value = in(0);
      const RealArray& b = in(1);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        if (n.op == Op::Add) n.value[i] += b[i];
        else if (n.op == Op::Sub) n.value[i] -= b[i];
        else n.value[i] *= b[i];
      }
      return;
    }
    case Op::Scale: {
      n.value = in(0);
      for (Real& v : n.value.data) v *= n.scalar;
      return;
    }
    case Op::AddScalar: {
      n.value = in(0);
      for (Real& v : n.value.data) v += n.scalar;
      return;
    }
    case Op::Square: {
      n.value = in(0);
      for (Real& v : n.value.data) v *= v;
      return;
    }
    case Op::Sum: {
      Real acc = 0.0;
      for (Real v : in(0).data) acc += v;
      n.value = RealArray::scalar(acc);
      return;
    }
    case Op::Dot: {
      const RealArray& a = in(0);
      const RealArray& b = in(1);
      Real acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      n.value = RealArray::scalar(acc);
      return;
    }
    case Op::Concat: {
      std::vector<Real> out;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const RealArray& part = in(k);
        out.insert(out.end(), part.data.begin(), part.data.end());
      }
      n.value = RealArray::vector(std::move(out));
      return;
    }
    case Op::Slice: {
      const RealArray& a = in(0);
      n.value = RealArray::vector(std::vector<Real>(a.data.begin() + n.index,
                                                    a.data.begin() + n.index + n.length));
      return;
    }
    case Op::Pick:
      n.value = RealArray::scalar(in(0)[n.index]);
      return;
    case Op::Clip: {
      n.value = in(0);
      for (Real& v : n.value.data) v = std::clamp(v, n.scalar, n.scalar2);
      return;
    }
    case Op::Minimum: {
      n.value = in(0);
      const RealArray& b = in(1);
      for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::min(n.value[i], b[i]);
      return;
    }
    case Op::WeightedSum: {
      const RealArray& w = in(0);
      n.value = RealArray(Shape{in(1).size()}, 0.0);
      for (std::size_t j = 1; j < n.inputs.size(); ++j) {
        const RealArray& v = in(j);
        const Real wj = w[j - 1];
        for (std::size_t i = 0; i < v.size(); ++i) n.value[i] += wj * v[i];
      }
      return;
    }
    case Op::GaussianLogProb: {
      const RealArray& mean = in(0);
      const RealArray& log_std = in(1);
      constexpr Real half_log_2pi = 0.91893853320467274178;
      Real acc = 0.0;
      for (std::size_t i = 0; i < mean.size(); ++i) {
        const Real z = (n.aux[i] - mean[i]) / std::exp(log_std[i]);
        acc += -0.5 * z * z - log_std[i] - half_log_2pi;
      }
      n.value = RealArray::scalar(acc);
      return;
    }
    case Op::CategoricalEntropy: {
      Real acc = 0.0;
      for (Real lp : in(0).data) {
        if (std::isfinite(lp)) acc -= std::exp(lp) * lp;
      }
      n.value = RealArray::scalar(acc);
      return;
    }
  }
}

void Tape::propagate(const Node& n, const RealArray& g, std::vector<RealArray>& adj) const {
  auto in = [&](std::size_t k) -> const RealArray& { return val(n.inputs[k]); };
  switch (n.op) {
    case Op::Input:
    case Op::Param:
      return;
    case Op::Dense: {
      const RealArray& x = in(0);
      const RealArray& w = in(1);
      const std::size_t rows = w.shape[0], cols = w.shape[1];
      RealArray& gx = ensure(adj, n.inputs[0], x);
      RealArray& gw = ensure(adj, n.inputs[1], w);
      for (std::size_t i = 0; i < rows; ++i) {
        const Real gi = g[i];
        if (gi == 0.0) continue;
        const Real* wr = &w.data[i * cols];
        Real* gwr = &gw.data[i * cols];
        for (std::size_t j = 0; j < cols; ++j) {
          gx.data[j] += wr[j] * gi;
          gwr[j] += gi * x.data[j];
        }
      }
      if (n.inputs.size() > 2) {
        RealArray& gb = ensure(adj, n.inputs[2], in(2));
        for (std::size_t i = 0; i < rows; ++i) gb[i] += g[i];
      }
      return;
    }
    case Op::Conv2d: {
      const RealArray& img = in(0);
      const RealArray& k = in(1);
      const std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
      const std::size_t o = k.shape[0], kh = k.shape[2], kw = k.shape[3];
      const std::size_t s = n.index;
      const std::size_t oh = n.value.shape[1], ow = n.value.shape[2];
      RealArray& gi = ensure(adj, n.inputs[0], img);
      RealArray& gk = ensure(adj, n.inputs[1], k);
      RealArray* gb = n.inputs.size() > 2 ? &ensure(adj, n.inputs[2], in(2)) : nullptr;
      for (std::size_t oc = 0; oc < o; ++oc) {
        for (std::size_t y = 0; y < oh; ++y) {
          for (std::size_t x = 0; x < ow; ++x) {
            const Real go = g.data[(oc * oh + y) * ow + x];
            if (gb) gb->data[oc] += go;
            if (go == 0.0) continue;
            for (std::size_t ic = 0; ic < c; ++ic) {
              for (std::size_t ky = 0; ky < kh; ++ky) {
                const std::size_t base = (ic * h + y * s + ky) * w + x * s;
                const std::size_t kbase = ((oc * c + ic) * kh + ky) * kw;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  gk.data[kbase + kx] += go * img.data[base + kx];
                  gi.data[base + kx] += go * k.data[kbase + kx];
                }
              }
            }
          }
        }
      }
      return;
    }
    case Op::LeakyRelu: {
      const RealArray& x = in(0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        accumulate(adj[n.inputs[0]], x, i, g[i] * (x[i] >= 0.0 ? 1.0 : n.scalar));
      }
      return;
    }
    case Op::Tanh: {
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        const Real y = n.value[i];
        accumulate(adj[n.inputs[0]], in(0), i, g[i] * (1.0 - y * y));
      }
      return;
    }
    case Op::Exp: {
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        accumulate(adj[n.inputs[0]], in(0), i, g[i] * n.value[i]);
      }
      return;
    }
    case Op::Softmax: {
      Real inner = 0.0;
      for (std::size_t i = 0; i < n.value.size(); ++i) inner += g[i] * n.value[i];
      RealArray& gx = ensure(adj, n.inputs[0], in(0));
      for (std::size_t i = 0; i < n.value.size(); ++i) gx[i] += n.value[i] * (g[i] - inner);
      return;
    }
    case Op::MaskedLogSoftmax: {
      Real total = 0.0;
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        if (n.aux[i] != 0.0) total += g[i];
      }
      RealArray& gx = ensure(adj, n.inputs[0], in(0));
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        if (n.aux[i] != 0.0) gx[i] += g[i] - std::exp(n.value[i]) * total;
      }
      return;
    }
    case Op::Add:
    case Op::Sub: {
      RealArray& ga = ensure(adj, n.inputs[0], in(0));
      RealArray& gb = ensure(adj, n.inputs[1], in(1));
      const Real sign = n.op == Op::Add ? 1.0 : -1.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += sign * g[i];
      }
      return;
    }
    case Op::Mul: {
      const RealArray& a = in(0);
      const RealArray& b = in(1);
      RealArray& ga = ensure(adj, n.inputs[0], a);
      RealArray& gb = ensure(adj, n.inputs[1], b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * b[i];
        gb[i] += g[i] * a[i];
      }
      return;
    }
    case Op::Scale: {
      RealArray& ga = ensure(adj, n.inputs[0], in(0));
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
      return;
    }
    case Op::AddScalar: {
      RealArray& ga = ensure(adj, n.inputs[0], in(0));
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }
    case Op::Square: {
      const RealArray& a = in(0);
      RealArray& ga = ensure(adj, n.inputs[0], a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * a[i] * g[i];
      return;
    }
    case Op::Sum: {
      RealArray& ga = ensure(adj, n.inputs[0], in(0));
      for (Real& v : ga.data) v += g[0];
      return;
    }
    case Op::Dot: {
      const RealArray& a = in(0);
      const RealArray& b = in(1);
      RealArray& ga = ensure(adj, n.inputs[0], a);
      RealArray& gb = ensure(adj, n.inputs[1], b);
      for (std::size_t i = 0; i < a.size(); ++i) {
        ga[i] += g[0] * b[i];
        gb[i] += g[0] * a[i];
      }
      return;
    }
    case Op::Concat: {
      std::size_t offset = 0;
      for (NodeId part : n.inputs) {
        const RealArray& p = val(part);
        RealArray& gp = ensure(adj, part, p);
        for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g[offset + i];
        offset += p.size();
      }
      return;
    }
    case Op::Slice: {
      RealArray& ga = ensure(adj, n.inputs[0], in(0));
      for (std::size_t i = 0; i < n.length; ++i) ga[n.index + i] += g[i];
      return;
    }
    case Op::Pick:
      accumulate(adj[n.inputs[0]], in(0), n.index, g[0]);
      return;
    case Op::Clip: {
      const RealArray& a = in(0);
      RealArray& ga = ensure(adj, n.inputs[0], a);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] >= n.scalar && a[i] <= n.scalar2) ga[i] += g[i];
      }
      return;
    }
    case Op::Minimum: {
      const RealArray& a = in(0);
      const RealArray& b = in(1);
      RealArray& ga = ensure(adj, n.inputs[0], a);
      RealArray& gb = ensure(adj, n.inputs[1], b);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] <= b[i]) ga[i] += g[i];
        else gb[i] += g[i];
      }
      return;
    }
    case Op::WeightedSum: {
      const RealArray& w = in(0);
      RealArray& gw = ensure(adj, n.inputs[0], w);
      for (std::size_t j = 1; j < n.inputs.size(); ++j) {
        const RealArray& v = in(j);
        RealArray& gv = ensure(adj, n.inputs[j], v);
        const Real wj = w[j - 1];
        Real acc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
          acc += g[i] * v[i];
          gv[i] += wj * g[i];
        }
        gw[j - 1] += acc;
      }
      return;
    }
    case Op::GaussianLogProb: {
      const RealArray& mean = in(0);
      const RealArray& log_std = in(1);
      RealArray& gm = ensure(adj, n.inputs[0], mean);
      RealArray& gs = ensure(adj, n.inputs[1], log_std);
      for (std::size_t i = 0; i < mean.size(); ++i) {
        const Real sd = std::exp(log_std[i]);
        const Real z = (n.aux[i] - mean[i]) / sd;
        gm[i] += g[0] * z / sd;
        gs[i] += g[0] * (z * z - 1.0);
      }
      return;
    }
    case Op::CategoricalEntropy: {
      const RealArray& lp = in(0);
      RealArray& gl = ensure(adj, n.inputs[0], lp);
      for (std::size_t i = 0; i < lp.size(); ++i) {
        if (std::isfinite(lp[i])) gl[i] += -g[0] * std::exp(lp[i]) * (lp[i] + 1.0);
      }
      return;
    }
  }
}

std::vector<RealArray> Tape::adjoints(NodeId loss) const {
  if (loss >= nodes_.size()) throw ContractError("unknown loss node");
  if (val(loss).size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(val(loss).shape));
  }
  std::vector<RealArray> adj(nodes_.size());
  adj[loss] = RealArray(val(loss).shape, 1.0);
  for (NodeId id = loss + 1; id-- > 0;) {
    if (adj[id].data.empty()) continue;
    propagate(nodes_[id], adj[id], adj);
  }
  return adj;
}

Gradients Tape::backward(NodeId loss) const {
  std::vector<RealArray> adj = adjoints(loss);
  Gradients grads;
  for (const auto& [name, id] : params_) {
    grads[name] = adj[id].data.empty() ? RealArray(val(id).shape, 0.0) : std::move(adj[id]);
  }
  return grads;
}

}  // namespace uavmec::nn
