#include "uavmec/ppo/transition.hpp"

#include "uavmec/errors.hpp"

namespace uavmec::ppo {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

}  // namespace uavmec::ppo
