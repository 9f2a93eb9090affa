#include "qdpp/replay.hpp"

#include <stdexcept>

namespace qdpp {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::add(Episode episode) {
  if (episode.empty()) return;
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
  ++total_added_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (episodes_.empty()) throw std::logic_error("ReplayBuffer::sample on an empty buffer");
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = rng.uniform_index(episodes_.size());
  return idx;
}

std::vector<const Episode*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  std::vector<const Episode*> out;
  out.reserve(count);
  for (std::size_t i : sample_indices(count, rng)) out.push_back(&episodes_[i]);
  return out;
}

}  // namespace qdpp
