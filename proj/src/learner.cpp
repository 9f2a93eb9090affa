#include "qdpp/learner.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace qdpp {

KernelGradient::KernelGradient(const QDppKernel& shape)
    : d_log_quality(shape.size(), 0.0), d_diversity(shape.size(), shape.feature_dim()) {}

void KernelGradient::zero() {
  std::fill(d_log_quality.begin(), d_log_quality.end(), 0.0);
  std::fill(d_diversity.data().begin(), d_diversity.data().end(), 0.0);
}

bool KernelGradient::finite() const {
  for (double g : d_log_quality) {
    if (!std::isfinite(g)) return false;
  }
  for (double g : d_diversity.data()) {
    if (!std::isfinite(g)) return false;
  }
  return true;
}

TargetView::TargetView(const QDppKernel& kernel) : kernel_(kernel) { refresh(kernel); }

void TargetView::refresh(const QDppKernel& kernel) {
  kernel_ = kernel;
  scores_.resize(kernel_.size());
  for (std::size_t j = 0; j < kernel_.size(); ++j) scores_[j] = quality_score(kernel_, j);
}

std::size_t TargetView::greedy_action(std::size_t agent, std::size_t obs) const {
  const GroundSet& gs = kernel_.ground_set();
  const std::size_t first = gs.slice_begin(agent, obs);
  std::size_t best = 0;
  for (std::size_t a = 1; a < gs.n_actions(); ++a) {
    if (scores_[first + a] > scores_[first + best]) best = a;
  }
  return best;
}

double TargetView::greedy_value(std::span<const std::size_t> obs) const {
  const GroundSet& gs = kernel_.ground_set();
  std::array<std::size_t, kMaxAgents> idx{};
  for (std::size_t i = 0; i < obs.size(); ++i) idx[i] = gs.slice_begin(i, obs[i]) + greedy_action(i, obs[i]);
  return joint_q_raw(kernel_, std::span<const std::size_t>(idx.data(), obs.size()), nullptr, nullptr);
}

std::vector<const Transition*> flatten(std::span<const Episode* const> episodes) {
  std::vector<const Transition*> out;
  for (const Episode* e : episodes) {
    for (const Transition& t : *e) out.push_back(&t);
  }
  return out;
}

namespace {

// TD error Q(o, a) - y for one transition; d_diversity receives dQ/dB_Y.
double transition_error(const QDppKernel& online, const TargetView& target, const Transition& t,
                        double gamma, double* d_diversity, bool* degenerate,
                        std::array<std::size_t, kMaxAgents>& idx) {
  const GroundSet& gs = online.ground_set();
  const std::size_t n = gs.n_agents();
  if (t.obs.size() != n || t.actions.size() != n || t.next_obs.size() != n) {
    throw std::invalid_argument("transition does not match the ground set");
  }
  for (std::size_t i = 0; i < n; ++i) idx[i] = gs.index(i, t.obs[i], t.actions[i]);
  const double q = joint_q_raw(online, std::span<const std::size_t>(idx.data(), n), d_diversity, degenerate);
  double y = t.reward;
  if (!t.done) y += gamma * target.greedy_value(t.next_obs);
  return q - y;
}

void accumulate(KernelGradient& grad, const std::array<std::size_t, kMaxAgents>& idx, std::size_t n,
                std::size_t p, double err, const double* d_diversity) {
  const double scale = 2.0 * err;
  for (std::size_t k = 0; k < n; ++k) {
    grad.d_log_quality[idx[k]] += scale;
    auto row = grad.d_diversity.row(idx[k]);
    const double* src = d_diversity + k * p;
    for (std::size_t c = 0; c < p; ++c) row[c] += scale * src[c];
  }
}

}  // namespace

TdLossResult td_loss(const QDppKernel& online, const TargetView& target,
                     std::span<const Transition* const> batch, double gamma, KernelGradient* grad) {
  const std::size_t n = online.ground_set().n_agents();
  const std::size_t p = online.feature_dim();
  std::vector<double> local(n * p);
  std::array<std::size_t, kMaxAgents> idx{};
  TdLossResult r;
  for (const Transition* t : batch) {
    bool degenerate = false;
    const double err = transition_error(online, target, *t, gamma, grad ? local.data() : nullptr,
                                        &degenerate, idx);
    r.loss += err * err;
    ++r.transitions;
    if (degenerate) ++r.degenerate;
    if (grad != nullptr) accumulate(*grad, idx, n, p, err, local.data());
  }
  return r;
}

TdLossResult td_loss_parallel(const QDppKernel& online, const TargetView& target,
                              std::span<const Transition* const> batch, double gamma,
                              KernelGradient* grad) {
  const std::size_t n = online.ground_set().n_agents();
  const std::size_t p = online.feature_dim();
  const std::size_t count = batch.size();
  std::vector<double> errors(count);
  std::vector<std::uint8_t> degenerate(count);
  std::vector<double> local(grad ? count * n * p : 0);

  const auto total = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < total; ++k) {
    std::array<std::size_t, kMaxAgents> idx{};
    bool degen = false;
    errors[k] = transition_error(online, target, *batch[k], gamma,
                                 grad ? local.data() + k * n * p : nullptr, &degen, idx);
    degenerate[k] = degen;
  }

  // Serial reduction in batch order keeps the result identical to td_loss.
  TdLossResult r;
  std::array<std::size_t, kMaxAgents> idx{};
  const GroundSet& gs = online.ground_set();
  for (std::size_t k = 0; k < count; ++k) {
    const double err = errors[k];
    r.loss += err * err;
    ++r.transitions;
    if (degenerate[k]) ++r.degenerate;
    if (grad != nullptr) {
      const Transition& t = *batch[k];
      for (std::size_t i = 0; i < n; ++i) idx[i] = gs.index(i, t.obs[i], t.actions[i]);
      accumulate(*grad, idx, n, p, err, local.data() + k * n * p);
    }
  }
  return r;
}

RmsProp::RmsProp(std::size_t n, double learning_rate, double alpha, double eps)
    : lr_(learning_rate), alpha_(alpha), eps_(eps), square_avg_(n, 0.0) {}

void RmsProp::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != square_avg_.size() || grads.size() != square_avg_.size()) {
    throw std::invalid_argument("RmsProp::step: size mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    double& s = square_avg_[k];
    s = alpha_ * s + (1.0 - alpha_) * g * g;
    params[k] -= lr_ * g / (std::sqrt(s) + eps_);
  }
}

std::vector<std::size_t> joint_argmax(const QDppKernel& kernel, std::span<const std::size_t> obs) {
  const GroundSet& gs = kernel.ground_set();
  gs.check_joint_obs(obs);
  const std::size_t count = joint_outcome_count(gs);
  std::vector<std::size_t> actions(gs.n_agents(), 0);
  std::vector<std::size_t> best = actions;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < count; ++o) {
    std::size_t rest = o;
    for (std::size_t i = gs.n_agents(); i-- > 0;) {
      actions[i] = rest % gs.n_actions();
      rest /= gs.n_actions();
    }
    const double q = joint_q(kernel, make_selection(gs, obs, actions));
    if (q > best_q) {
      best_q = q;
      best = actions;
    }
  }
  return best;
}

bool igm_check(const QDppKernel& kernel, std::span<const std::size_t> obs) {
  return joint_argmax(kernel, obs) == greedy_joint_action(kernel, obs);
}

std::optional<double> dq_ratio(const QDppKernel& kernel, const JointSelection& y) {
  double denom = 0.0;
  for (std::size_t j : y.indices) denom += kernel.log_quality()[j];
  if (std::abs(denom) <= 1e-9) return std::nullopt;
  return log_det_diversity(kernel, y) / denom;
}

QDppTrainer::QDppTrainer(QDppKernel initial, const TrainConfig& config)
    : config_(config),
      kernel_(std::move(initial)),
      target_(kernel_),
      opt_quality_(kernel_.size(), config.learning_rate, config.rmsprop_alpha, config.rmsprop_eps),
      opt_diversity_(kernel_.size() * kernel_.feature_dim(), config.learning_rate, config.rmsprop_alpha,
                     config.rmsprop_eps),
      grad_(kernel_) {}

bool QDppTrainer::maybe_update_target(std::size_t episodes_seen) {
  const std::size_t block = episodes_seen / config_.target_update_interval;
  if (block <= target_block_) return false;
  target_block_ = block;
  target_.refresh(kernel_);
  ++target_updates_;
  return true;
}

TrainStepStats QDppTrainer::train_step(std::span<const Transition* const> batch, std::size_t episodes_seen) {
  TrainStepStats stats;
  grad_.zero();
  const TdLossResult td = td_loss_parallel(kernel_, target_, batch, config_.gamma, &grad_);
  stats.td_loss = td.loss;
  stats.transitions = td.transitions;
  stats.degenerate = td.degenerate;

  if (config_.penalty_weight > 0.0) {
    const PenaltyResult pen = sv_penalty(kernel_, config_.delta, &penalty_ws_);
    if (!pen.converged) {
      stats.penalty_failed = true;
      ++penalty_failures_;
    } else {
      stats.penalty = pen.value;
      const double w = config_.penalty_weight;
      for (std::size_t j = 0; j < kernel_.size(); ++j) grad_.d_log_quality[j] += w * pen.d_log_quality[j];
      auto dst = grad_.d_diversity.data();
      auto src = pen.d_diversity.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
    }
  }

  const double total = stats.td_loss + config_.penalty_weight * stats.penalty;
  if (!std::isfinite(total) || !grad_.finite()) {
    stats.skipped = true;
    ++skipped_steps_;
  } else {
    opt_quality_.step(kernel_.log_quality(), grad_.d_log_quality);
    opt_diversity_.step(kernel_.diversity().data(), grad_.d_diversity.data());
    kernel_.project_to_unit_ball();
  }
  stats.target_updated = maybe_update_target(episodes_seen);
  return stats;
}

QDppLearner::QDppLearner(const GroundSet& gs, const TrainConfig& config, Rng& init_rng)
    : trainer_(QDppKernel::random_init(gs, config.feature_dim, init_rng), config) {}

QDppLearner::QDppLearner(QDppKernel initial, const TrainConfig& config)
    : trainer_(std::move(initial), config) {}

std::vector<std::size_t> QDppLearner::explore(std::span<const std::size_t> obs, double epsilon, Rng& rng,
                                              SamplerStats* stats) {
  const JointSelection y = explore_action(trainer_.kernel(), obs, epsilon, rng, stats);
  std::vector<std::size_t> actions(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) actions[i] = trainer_.kernel().ground_set().action_of(y.indices[i]);
  return actions;
}

std::vector<std::size_t> QDppLearner::greedy(std::span<const std::size_t> obs) const {
  return greedy_joint_action(trainer_.kernel(), obs);
}

TrainStepStats QDppLearner::train(std::span<const Transition* const> batch, std::size_t episodes_seen) {
  return trainer_.train_step(batch, episodes_seen);
}

std::optional<double> QDppLearner::joint_value(std::span<const std::size_t> obs,
                                               std::span<const std::size_t> actions) const {
  return joint_q(trainer_.kernel(), make_selection(trainer_.kernel().ground_set(), obs, actions));
}

std::optional<double> QDppLearner::diversity_quality_ratio(std::span<const std::size_t> obs) const {
  const auto actions = greedy(obs);
  return dq_ratio(trainer_.kernel(), make_selection(trainer_.kernel().ground_set(), obs, actions));
}

}  // namespace qdpp
