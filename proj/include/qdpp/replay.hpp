#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "qdpp/rng.hpp"

namespace qdpp {

struct Transition {
  std::vector<std::size_t> obs;
  std::vector<std::size_t> actions;
  double reward = 0.0;
  std::vector<std::size_t> next_obs;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

using Episode = std::vector<Transition>;

/// Bounded FIFO of whole episodes with uniform episode sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  // Appends an episode, evicting the oldest when full. Empty episodes are ignored.
  void add(Episode episode);

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_added() const { return total_added_; }
  const Episode& at(std::size_t i) const { return episodes_.at(i); }

  // `count` indices drawn independently and uniformly from [0, size()).
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

  // Pointers to `count` uniformly sampled episodes; valid until the next add().
  std::vector<const Episode*> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t total_added_ = 0;
  std::deque<Episode> episodes_;
};

}  // namespace qdpp
