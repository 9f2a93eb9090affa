#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qdpp/config.hpp"
#include "qdpp/envs.hpp"
#include "qdpp/learner.hpp"

namespace qdpp {

/// One metrics interval. Optional fields print as "nan" when undefined.
struct MetricsRow {
  std::size_t step = 0;  // env steps so far
  std::size_t episode = 0;  // completed training episodes
  std::optional<double> mean_return;  // greedy evaluation at the interval end
  std::optional<double> td_loss;  // mean squared TD error per transition
  std::optional<double> penalty;  // mean balance penalty per update
  std::optional<double> dq_ratio;  // mean over the recent observation window
  std::optional<double> igm_rate;  // fraction of the window passing igm_check
  double epsilon = 0.0;  // exploration rate used at the last step
  std::size_t degenerate_samples = 0;  // sampler fallbacks in this interval
  double wallclock_s = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

// Builds the learner named by config.algo for the given environment shape.
std::unique_ptr<Learner> make_learner(const TrainConfig& config, const envs::EnvSpec& spec, Rng& init_rng);

using Policy = std::function<std::vector<std::size_t>(std::span<const std::size_t>)>;

struct EvalResult {
  std::vector<double> returns;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

/// Runs `episodes` episodes of `policy` on a fresh copy of `env`.
EvalResult evaluate_policy(const envs::Environment& env, const Policy& policy, std::size_t episodes, Rng& rng);

// Greedy per-agent execution of a kernel.
Policy kernel_policy(const QDppKernel& kernel);

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::unique_ptr<Learner> learner;
  std::size_t episodes = 0;
  std::size_t train_steps = 0;
};

/// Acts with epsilon-greedy (Q-DPP: orthogonalizing-sampler) exploration,
/// stores whole episodes, and runs one update per env step once the buffer
/// holds batch_size episodes. Exploration is 1 until then. A metrics row is
/// emitted every metrics_interval steps and after a final partial interval.
/// Deterministic given config.seed.
TrainResult run_training(const envs::Environment& env, const TrainConfig& config,
                         const std::function<void(const MetricsRow&)>& on_row = {});

}  // namespace qdpp
