#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qdpp/learner.hpp"

namespace qdpp::baselines {

// One |O| x |A| table per agent.
class TabularQ {
 public:
  TabularQ(std::size_t n_agents, std::size_t n_obs, std::size_t n_actions);

  std::size_t n_agents() const { return n_agents_; }
  std::size_t n_obs() const { return n_obs_; }
  std::size_t n_actions() const { return n_actions_; }

  double& at(std::size_t agent, std::size_t obs, std::size_t action);
  double at(std::size_t agent, std::size_t obs, std::size_t action) const;

  // Lowest action id among the maximizers, as in greedy_action.
  std::size_t greedy(std::size_t agent, std::size_t obs) const;
  double max_value(std::size_t agent, std::size_t obs) const;

  std::span<const double> values() const { return values_; }

  bool operator==(const TabularQ&) const = default;

 private:
  std::size_t n_agents_;
  std::size_t n_obs_;
  std::size_t n_actions_;
  std::vector<double> values_;
};

struct TabularStepStats {
  double sq_td_error = 0.0;  // summed over the batch (and agents for IQL)
  std::size_t transitions = 0;
};

/// Independent Q-learning on the team reward, one transition at a time:
///   Q_i(o_i, a_i) += lr (r + gamma max_a' Q_i(o_i', a') (1 - done) - Q_i(o_i, a_i)).
TabularStepStats iql_train_step(TabularQ& tables, std::span<const Transition* const> batch,
                                double learning_rate, double gamma);

/// Tabular VDN: Q = sum_i Q_i, target r + gamma sum_i max_a' Q_i(o_i', a'),
/// and each Q_i moves by lr times the joint TD error.
TabularStepStats vdn_train_step(TabularQ& tables, std::span<const Transition* const> batch,
                                double learning_rate, double gamma);

/// Tables as a kernel: D = Q and b_j = e_{agent(j)}, so joint_q is the
/// additive value and greedy_action matches TabularQ::greedy. Requires
/// feature_dim >= n_agents.
QDppKernel tables_as_kernel(const TabularQ& tables, std::size_t feature_dim);

class TabularLearner final : public Learner {
 public:
  enum class Kind { kIql, kVdn };

  TabularLearner(Kind kind, const GroundSet& gs, const TrainConfig& config);

  std::string algorithm() const override { return kind_ == Kind::kIql ? "iql" : "vdn"; }
  std::vector<std::size_t> explore(std::span<const std::size_t> obs, double epsilon, Rng& rng,
                                   SamplerStats* stats) override;
  std::vector<std::size_t> greedy(std::span<const std::size_t> obs) const override;
  TrainStepStats train(std::span<const Transition* const> batch, std::size_t episodes_seen) override;
  std::optional<double> joint_value(std::span<const std::size_t> obs,
                                    std::span<const std::size_t> actions) const override;
  std::optional<double> diversity_quality_ratio(std::span<const std::size_t>) const override {
    return std::nullopt;
  }
  QDppKernel export_kernel() const override;

  const TabularQ& tables() const { return tables_; }

 private:
  Kind kind_;
  TrainConfig config_;
  TabularQ tables_;
};

}  // namespace qdpp::baselines
