#include "qdpp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "qdpp/baselines.hpp"
#include "qdpp/replay.hpp"

namespace qdpp {

std::string metrics_header() {
  return "step,episode,mean_return,td_loss,penalty,dq_ratio,igm_rate,epsilon,degenerate_samples,wallclock_s";
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

// Keeps the most recent distinct joint observations, oldest first.
class RecentObservations {
 public:
  explicit RecentObservations(std::size_t capacity) : capacity_(capacity) {}

  void push(const std::vector<std::size_t>& obs) {
    auto it = std::find(items_.begin(), items_.end(), obs);
    if (it != items_.end()) items_.erase(it);
    items_.push_back(obs);
    if (items_.size() > capacity_) items_.erase(items_.begin());
  }
  const std::vector<std::vector<std::size_t>>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::vector<std::vector<std::size_t>> items_;
};

struct IntervalAccumulator {
  double loss = 0.0;
  std::size_t transitions = 0;
  double penalty = 0.0;
  std::size_t penalty_updates = 0;
  std::size_t degenerate = 0;

  void reset() { *this = IntervalAccumulator{}; }
};

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  return std::to_string(r.step) + "," + std::to_string(r.episode) + "," + opt(r.mean_return) + "," +
         opt(r.td_loss) + "," + opt(r.penalty) + "," + opt(r.dq_ratio) + "," + opt(r.igm_rate) + "," +
         format_double(r.epsilon) + "," + std::to_string(r.degenerate_samples) + "," +
         format_double(r.wallclock_s);
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << metrics_header() << '\n';
  for (const MetricsRow& r : rows) out << format_metrics_row(r) << '\n';
}

std::unique_ptr<Learner> make_learner(const TrainConfig& config, const envs::EnvSpec& spec, Rng& init_rng) {
  const GroundSet gs(spec.n_agents, spec.n_obs, spec.n_actions);
  if (config.algo == "qdpp") return std::make_unique<QDppLearner>(gs, config, init_rng);
  if (config.algo == "iql") {
    return std::make_unique<baselines::TabularLearner>(baselines::TabularLearner::Kind::kIql, gs, config);
  }
  if (config.algo == "vdn") {
    return std::make_unique<baselines::TabularLearner>(baselines::TabularLearner::Kind::kVdn, gs, config);
  }
  throw ConfigError("unknown algorithm '" + config.algo + "'");
}

EvalResult evaluate_policy(const envs::Environment& env, const Policy& policy, std::size_t episodes, Rng& rng) {
  EvalResult r;
  auto e = env.clone();
  for (std::size_t k = 0; k < episodes; ++k) {
    auto obs = e->reset(rng);
    double total = 0.0;
    while (!e->done()) {
      const auto actions = policy(obs);
      auto step = e->step(actions, rng);
      total += step.reward;
      obs = std::move(step.next_obs);
    }
    r.returns.push_back(total);
  }
  if (!r.returns.empty()) {
    double sum = 0.0;
    for (double v : r.returns) sum += v;
    r.mean = sum / static_cast<double>(r.returns.size());
    double sq = 0.0;
    for (double v : r.returns) sq += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(sq / static_cast<double>(r.returns.size()));
  }
  return r;
}

Policy kernel_policy(const QDppKernel& kernel) {
  return [&kernel](std::span<const std::size_t> obs) { return greedy_joint_action(kernel, obs); };
}

TrainResult run_training(const envs::Environment& env_template, const TrainConfig& config,
                         const std::function<void(const MetricsRow&)>& on_row) {
  config.validate();
  const envs::EnvSpec spec = env_template.spec();

  Rng init_rng(config.seed, Stream::kInit);
  Rng env_rng(config.seed, Stream::kEnv);
  Rng sampler_rng(config.seed, Stream::kSampler);
  Rng replay_rng(config.seed, Stream::kReplay);
  Rng eval_rng(config.seed, Stream::kEval);

  TrainResult result;
  result.learner = make_learner(config, spec, init_rng);
  Learner& learner = *result.learner;

  auto env = env_template.clone();
  ReplayBuffer buffer(config.buffer_capacity);
  RecentObservations recent(config.igm_window);
  IntervalAccumulator acc;
  const auto start = std::chrono::steady_clock::now();

  auto emit = [&](std::size_t step, double epsilon) {
    MetricsRow row;
    row.step = step;
    row.episode = result.episodes;
    const Policy policy = [&learner](std::span<const std::size_t> o) { return learner.greedy(o); };
    if (config.eval_episodes > 0) {
      row.mean_return = evaluate_policy(*env, policy, config.eval_episodes, eval_rng).mean;
    }
    if (acc.transitions > 0) row.td_loss = acc.loss / static_cast<double>(acc.transitions);
    if (acc.penalty_updates > 0) row.penalty = acc.penalty / static_cast<double>(acc.penalty_updates);
    if (!recent.items().empty()) {
      const QDppKernel kernel = learner.export_kernel();
      std::size_t pass = 0;
      double ratio_sum = 0.0;
      std::size_t ratio_count = 0;
      for (const auto& o : recent.items()) {
        if (igm_check(kernel, o)) ++pass;
        if (auto q = learner.diversity_quality_ratio(o)) {
          ratio_sum += *q;
          ++ratio_count;
        }
      }
      row.igm_rate = static_cast<double>(pass) / static_cast<double>(recent.items().size());
      if (ratio_count > 0) row.dq_ratio = ratio_sum / static_cast<double>(ratio_count);
    }
    row.epsilon = epsilon;
    row.degenerate_samples = acc.degenerate;
    if (config.record_wallclock) {
      row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    acc.reset();
    result.rows.push_back(row);
    if (on_row) on_row(row);
  };

  std::vector<std::size_t> obs;
  Episode episode;
  double epsilon = config.epsilon_at(0);
  for (std::size_t step = 0; step < config.steps; ++step) {
    if (env->done()) {
      obs = env->reset(env_rng);
      episode.clear();
    }
    recent.push(obs);
    const bool warm = buffer.size() >= config.batch_size;
    epsilon = warm ? config.epsilon_at(step) : 1.0;
    SamplerStats stats;
    auto actions = learner.explore(obs, epsilon, sampler_rng, &stats);
    acc.degenerate += stats.degenerate_slices;

    auto out = env->step(actions, env_rng);
    episode.push_back(Transition{obs, std::move(actions), out.reward, out.next_obs, out.done});
    obs = std::move(out.next_obs);
    if (out.done) {
      buffer.add(std::move(episode));
      episode = Episode{};
      ++result.episodes;
    }

    if (buffer.size() >= config.batch_size) {
      const auto sampled = buffer.sample(config.batch_size, replay_rng);
      const auto batch = flatten(sampled);
      const TrainStepStats s = learner.train(batch, result.episodes);
      ++result.train_steps;
      if (!s.skipped) {
        acc.loss += s.td_loss;
        acc.transitions += s.transitions;
      }
      if (config.algo == "qdpp" && config.penalty_weight > 0.0 && !s.penalty_failed) {
        acc.penalty += s.penalty;
        ++acc.penalty_updates;
      }
    }

    if ((step + 1) % config.metrics_interval == 0) emit(step + 1, epsilon);
  }
  if (config.steps % config.metrics_interval != 0) emit(config.steps, epsilon);
  return result;
}

}  // namespace qdpp
