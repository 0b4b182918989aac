#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

namespace uavmec::ppo {

struct HybridAction {
  double dx = 0.0;
  double dy = 0.0;
  std::size_t serve_index = 0;  // equal to the slot count means serve nobody
};

struct Transition {
  std::vector<double> z;
  HybridAction action;
  std::vector<std::uint8_t> serve_mask;  // 1 for every selectable serve index
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  int provenance = 0;  // UAV that generated the sample
  double advantage = 0.0;
  double ret = 0.0;
};

/// Bounded FIFO of transitions; the oldest entry is evicted when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 4096);

  void push(Transition t);
  void clear() { items_.clear(); }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  Transition& operator[](std::size_t i) { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

}  // namespace uavmec::ppo
