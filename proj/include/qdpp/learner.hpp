#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdpp/config.hpp"
#include "qdpp/kernel.hpp"
#include "qdpp/replay.hpp"
#include "qdpp/rng.hpp"
#include "qdpp/sampler.hpp"

namespace qdpp {

// Dense gradient buffers shaped like a kernel's parameters.
struct KernelGradient {
  std::vector<double> d_log_quality;
  linalg::Matrix d_diversity;

  KernelGradient() = default;
  explicit KernelGradient(const QDppKernel& shape);
  void zero();
  bool finite() const;
};

/// Frozen copy of a kernel with cached quality scores for the greedy
/// bootstrap action.
class TargetView {
 public:
  explicit TargetView(const QDppKernel& kernel);

  void refresh(const QDppKernel& kernel);
  const QDppKernel& kernel() const { return kernel_; }

  std::size_t greedy_action(std::size_t agent, std::size_t obs) const;
  // joint_q at the per-agent greedy selection for `obs`.
  double greedy_value(std::span<const std::size_t> obs) const;

 private:
  QDppKernel kernel_;
  std::vector<double> scores_;
};

struct TdLossResult {
  double loss = 0.0;
  std::size_t transitions = 0;
  std::size_t degenerate = 0;  // online determinants below the floor
};

std::vector<const Transition*> flatten(std::span<const Episode* const> episodes);

/// Sum over the batch of (y - Q(o, a))^2 with y = r, or r + gamma * Q_target
/// at the target's greedy joint action when the transition is not terminal.
/// Gradients (online kernel only) are added into `grad` when given.
TdLossResult td_loss(const QDppKernel& online, const TargetView& target,
                     std::span<const Transition* const> batch, double gamma,
                     KernelGradient* grad);

// Same result as td_loss; per-transition work runs under OpenMP.
TdLossResult td_loss_parallel(const QDppKernel& online, const TargetView& target,
                              std::span<const Transition* const> batch, double gamma,
                              KernelGradient* grad);

/// RMSprop without momentum or weight decay:
///   s <- alpha s + (1 - alpha) g^2,  theta <- theta - lr g / (sqrt(s) + eps).
class RmsProp {
 public:
  RmsProp(std::size_t n, double learning_rate, double alpha, double eps);

  void step(std::span<double> params, std::span<const double> grads);
  std::span<const double> square_avg() const { return square_avg_; }

 private:
  double lr_;
  double alpha_;
  double eps_;
  std::vector<double> square_avg_;
};

// Brute-force argmax of joint_q over all joint actions (lexicographically first on ties).
std::vector<std::size_t> joint_argmax(const QDppKernel& kernel, std::span<const std::size_t> obs);

// Whether the per-agent greedy actions reach the joint argmax.
bool igm_check(const QDppKernel& kernel, std::span<const std::size_t> obs);

// log det(B_Y B_Y^T) / sum of D over Y; empty when the denominator is within 1e-9 of 0.
std::optional<double> dq_ratio(const QDppKernel& kernel, const JointSelection& y);

struct TrainStepStats {
  double td_loss = 0.0;
  double penalty = 0.0;
  std::size_t transitions = 0;
  std::size_t degenerate = 0;
  bool skipped = false;  // non-finite loss or gradient
  bool penalty_failed = false;  // eigen-decomposition did not converge
  bool target_updated = false;
};

/// Online kernel, target kernel and optimizer state of determinantal Q-learning.
class QDppTrainer {
 public:
  QDppTrainer(QDppKernel initial, const TrainConfig& config);

  /// One RMSprop update on td_loss + penalty_weight * sv_penalty, followed by
  /// the unit-ball projection of B and a target refresh when `episodes_seen`
  /// has crossed a multiple of target_update_interval.
  TrainStepStats train_step(std::span<const Transition* const> batch, std::size_t episodes_seen);

  // Copies the online kernel into the target when a new interval boundary was reached.
  bool maybe_update_target(std::size_t episodes_seen);

  const QDppKernel& kernel() const { return kernel_; }
  QDppKernel& kernel() { return kernel_; }
  const TargetView& target() const { return target_; }
  std::size_t target_updates() const { return target_updates_; }
  std::size_t skipped_steps() const { return skipped_steps_; }
  std::size_t penalty_failures() const { return penalty_failures_; }

 private:
  TrainConfig config_;
  QDppKernel kernel_;
  TargetView target_;
  RmsProp opt_quality_;
  RmsProp opt_diversity_;
  PenaltyWorkspace penalty_ws_;
  KernelGradient grad_;
  std::size_t target_block_ = 0;
  std::size_t target_updates_ = 0;
  std::size_t skipped_steps_ = 0;
  std::size_t penalty_failures_ = 0;
};

/// Common face of the Q-DPP learner and the tabular baselines so a single
/// training loop drives all of them.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string algorithm() const = 0;
  virtual std::vector<std::size_t> explore(std::span<const std::size_t> obs, double epsilon, Rng& rng,
                                           SamplerStats* stats) = 0;
  virtual std::vector<std::size_t> greedy(std::span<const std::size_t> obs) const = 0;
  virtual TrainStepStats train(std::span<const Transition* const> batch, std::size_t episodes_seen) = 0;

  // Centralized value of a joint action, when the algorithm defines one.
  virtual std::optional<double> joint_value(std::span<const std::size_t> obs,
                                            std::span<const std::size_t> actions) const = 0;
  virtual std::optional<double> diversity_quality_ratio(std::span<const std::size_t> obs) const = 0;

  // The learned values as a kernel (tabular learners export D = Q and
  // per-agent orthonormal diversity vectors).
  virtual QDppKernel export_kernel() const = 0;
};

class QDppLearner final : public Learner {
 public:
  QDppLearner(const GroundSet& gs, const TrainConfig& config, Rng& init_rng);
  QDppLearner(QDppKernel initial, const TrainConfig& config);

  std::string algorithm() const override { return "qdpp"; }
  std::vector<std::size_t> explore(std::span<const std::size_t> obs, double epsilon, Rng& rng,
                                   SamplerStats* stats) override;
  std::vector<std::size_t> greedy(std::span<const std::size_t> obs) const override;
  TrainStepStats train(std::span<const Transition* const> batch, std::size_t episodes_seen) override;
  std::optional<double> joint_value(std::span<const std::size_t> obs,
                                    std::span<const std::size_t> actions) const override;
  std::optional<double> diversity_quality_ratio(std::span<const std::size_t> obs) const override;
  QDppKernel export_kernel() const override { return trainer_.kernel(); }

  const QDppTrainer& trainer() const { return trainer_; }

 private:
  QDppTrainer trainer_;
};

}  // namespace qdpp
