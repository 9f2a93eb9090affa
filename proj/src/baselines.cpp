#include "qdpp/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace qdpp::baselines {

TabularQ::TabularQ(std::size_t n_agents, std::size_t n_obs, std::size_t n_actions)
    : n_agents_(n_agents), n_obs_(n_obs), n_actions_(n_actions),
      values_(n_agents * n_obs * n_actions, 0.0) {}

double& TabularQ::at(std::size_t agent, std::size_t obs, std::size_t action) {
  if (agent >= n_agents_ || obs >= n_obs_ || action >= n_actions_) {
    throw std::out_of_range("TabularQ::at: index out of range");
  }
  return values_[(agent * n_obs_ + obs) * n_actions_ + action];
}

double TabularQ::at(std::size_t agent, std::size_t obs, std::size_t action) const {
  return const_cast<TabularQ*>(this)->at(agent, obs, action);
}

std::size_t TabularQ::greedy(std::size_t agent, std::size_t obs) const {
  std::size_t best = 0;
  for (std::size_t a = 1; a < n_actions_; ++a) {
    if (at(agent, obs, a) > at(agent, obs, best)) best = a;
  }
  return best;
}

double TabularQ::max_value(std::size_t agent, std::size_t obs) const {
  return at(agent, obs, greedy(agent, obs));
}

TabularStepStats iql_train_step(TabularQ& q, std::span<const Transition* const> batch,
                                double learning_rate, double gamma) {
  TabularStepStats stats;
  for (const Transition* t : batch) {
    for (std::size_t i = 0; i < q.n_agents(); ++i) {
      double target = t->reward;
      if (!t->done) target += gamma * q.max_value(i, t->next_obs[i]);
      double& v = q.at(i, t->obs[i], t->actions[i]);
      const double err = target - v;
      v += learning_rate * err;
      stats.sq_td_error += err * err;
    }
    ++stats.transitions;
  }
  return stats;
}

TabularStepStats vdn_train_step(TabularQ& q, std::span<const Transition* const> batch,
                                double learning_rate, double gamma) {
  TabularStepStats stats;
  for (const Transition* t : batch) {
    double joint = 0.0;
    double next = 0.0;
    for (std::size_t i = 0; i < q.n_agents(); ++i) {
      joint += q.at(i, t->obs[i], t->actions[i]);
      if (!t->done) next += q.max_value(i, t->next_obs[i]);
    }
    const double err = t->reward + (t->done ? 0.0 : gamma * next) - joint;
    for (std::size_t i = 0; i < q.n_agents(); ++i) q.at(i, t->obs[i], t->actions[i]) += learning_rate * err;
    stats.sq_td_error += err * err;
    ++stats.transitions;
  }
  return stats;
}

QDppKernel tables_as_kernel(const TabularQ& q, std::size_t feature_dim) {
  if (feature_dim < q.n_agents()) {
    throw std::invalid_argument("tables_as_kernel: feature_dim must be at least the agent count");
  }
  QDppKernel k(GroundSet(q.n_agents(), q.n_obs(), q.n_actions()), feature_dim);
  std::copy(q.values().begin(), q.values().end(), k.log_quality().begin());
  const std::size_t part = k.ground_set().partition_size();
  for (std::size_t j = 0; j < k.size(); ++j) k.diversity()(j, j / part) = 1.0;
  return k;
}

TabularLearner::TabularLearner(Kind kind, const GroundSet& gs, const TrainConfig& config)
    : kind_(kind), config_(config), tables_(gs.n_agents(), gs.n_obs(), gs.n_actions()) {}

std::vector<std::size_t> TabularLearner::explore(std::span<const std::size_t> obs, double epsilon,
                                                 Rng& rng, SamplerStats*) {
  // Same coin as explore_action: one draw decides between random and greedy.
  if (rng.uniform() < epsilon) {
    std::vector<std::size_t> actions(obs.size());
    for (auto& a : actions) a = rng.uniform_index(tables_.n_actions());
    return actions;
  }
  return greedy(obs);
}

std::vector<std::size_t> TabularLearner::greedy(std::span<const std::size_t> obs) const {
  std::vector<std::size_t> actions(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) actions[i] = tables_.greedy(i, obs[i]);
  return actions;
}

TrainStepStats TabularLearner::train(std::span<const Transition* const> batch, std::size_t) {
  const TabularStepStats s = kind_ == Kind::kIql
                                 ? iql_train_step(tables_, batch, config_.learning_rate, config_.gamma)
                                 : vdn_train_step(tables_, batch, config_.learning_rate, config_.gamma);
  TrainStepStats out;
  out.td_loss = s.sq_td_error;
  out.transitions = s.transitions;
  return out;
}

std::optional<double> TabularLearner::joint_value(std::span<const std::size_t> obs,
                                                  std::span<const std::size_t> actions) const {
  if (kind_ == Kind::kIql) return std::nullopt;
  double v = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) v += tables_.at(i, obs[i], actions[i]);
  return v;
}

QDppKernel TabularLearner::export_kernel() const {
  return tables_as_kernel(tables_, std::max(config_.feature_dim, tables_.n_agents()));
}

}  // namespace qdpp::baselines
