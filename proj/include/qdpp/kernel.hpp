#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qdpp/linalg.hpp"
#include "qdpp/rng.hpp"

namespace qdpp {

// Lower clamp for Gram determinants before taking logs.
inline constexpr double kDetFloor = 1e-12;

// Hot-path routines keep per-call scratch on the stack for up to this many agents.
inline constexpr std::size_t kMaxAgents = 16;

/// All observation-action pairs of all agents. Pair (agent, obs, action) has
/// global index agent*|O||A| + obs*|A| + action, so each agent owns one
/// contiguous partition and each (agent, obs) one contiguous slice.
class GroundSet {
 public:
  GroundSet(std::size_t n_agents, std::size_t n_obs, std::size_t n_actions);

  std::size_t n_agents() const { return n_agents_; }
  std::size_t n_obs() const { return n_obs_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t size() const { return n_agents_ * n_obs_ * n_actions_; }
  std::size_t partition_size() const { return n_obs_ * n_actions_; }

  std::size_t index(std::size_t agent, std::size_t obs, std::size_t action) const;
  std::size_t partition(std::size_t index) const { return index / partition_size(); }
  std::size_t obs_of(std::size_t index) const { return (index % partition_size()) / n_actions_; }
  std::size_t action_of(std::size_t index) const { return index % n_actions_; }

  // First global index of the slice Y_agent(obs).
  std::size_t slice_begin(std::size_t agent, std::size_t obs) const { return index(agent, obs, 0); }
  std::vector<std::size_t> valid_slice(std::size_t agent, std::size_t obs) const;

  // Throws std::out_of_range unless obs has one in-range id per agent.
  void check_joint_obs(std::span<const std::size_t> obs) const;

  bool operator==(const GroundSet&) const = default;

 private:
  std::size_t n_agents_;
  std::size_t n_obs_;
  std::size_t n_actions_;
};

/// One observation-action pair per agent, as global ground-set indices in
/// agent order.
struct JointSelection {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  bool operator==(const JointSelection&) const = default;
};

JointSelection make_selection(const GroundSet& gs, std::span<const std::size_t> obs,
                              std::span<const std::size_t> actions);

// Throws std::invalid_argument unless Y has exactly one pair per partition in order.
void check_selection(const GroundSet& gs, const JointSelection& y);

/// Learnable Q-DPP parameters: log-quality D (one per ground-set item, equal
/// to that item's individual Q-value) and unit-ball diversity vectors B (M x P).
/// The implicit kernel row of item j is exp(D_j / 2) * b_j.
class QDppKernel {
 public:
  QDppKernel(GroundSet gs, std::size_t feature_dim);

  // D ~ U(-0.01, 0.01); b_j a uniformly random direction scaled to norm 0.99.
  static QDppKernel random_init(GroundSet gs, std::size_t feature_dim, Rng& rng);

  const GroundSet& ground_set() const { return gs_; }
  std::size_t feature_dim() const { return diversity_.cols(); }
  std::size_t size() const { return log_quality_.size(); }

  std::span<double> log_quality() { return log_quality_; }
  std::span<const double> log_quality() const { return log_quality_; }
  linalg::Matrix& diversity() { return diversity_; }
  const linalg::Matrix& diversity() const { return diversity_; }

  // Rows exp(D_j / 2) * b_j for every item.
  linalg::Matrix kernel_rows() const;
  linalg::Matrix kernel_rows(const JointSelection& y) const;
  linalg::Matrix diversity_rows(const JointSelection& y) const;

  // Rescales every b_j with norm above 1 back onto the unit sphere. Returns
  // the number of rows rescaled.
  std::size_t project_to_unit_ball();

  bool operator==(const QDppKernel&) const = default;

 private:
  GroundSet gs_;
  std::vector<double> log_quality_;
  linalg::Matrix diversity_;
};

// ||b_j||^2 * exp(D_j).
double quality_score(const QDppKernel& kernel, std::size_t j);

// argmax of quality_score over Y_agent(obs); ties go to the lowest action id.
std::size_t greedy_action(const QDppKernel& kernel, std::size_t agent, std::size_t obs);
std::vector<std::size_t> greedy_joint_action(const QDppKernel& kernel,
                                             std::span<const std::size_t> obs);

// log max(det(B_Y B_Y^T), kDetFloor).
double log_det_diversity(const QDppKernel& kernel, const JointSelection& y);

/// Centralized value: sum of D over Y plus the log-det diversity term.
double joint_q(const QDppKernel& kernel, const JointSelection& y);

/// The same value through the kernel rows directly, log det(W_Y W_Y^T)
/// (floored). Used to cross-check the quality/diversity split.
double joint_q_from_rows(const QDppKernel& kernel, const JointSelection& y);

struct JointQGradient {
  std::vector<std::size_t> indices;  // = Y
  std::vector<double> d_log_quality;  // all ones
  linalg::Matrix d_diversity;  // N x P; row k pairs with indices[k]
  bool degenerate = false;  // det below floor; d_diversity left at zero
};

/// Gradient of joint_q: dQ/dD_j = 1 on Y, dQ/dB_Y = 2 (B_Y B_Y^T)^{-1} B_Y.
JointQGradient grad_joint_q(const QDppKernel& kernel, const JointSelection& y);

/// joint_q for the selection given as raw indices, optionally writing
/// dQ/dB_Y (|Y| x P, row-major) into `d_diversity`. Returns false in
/// `*degenerate` when the Gram determinant is below the floor; the gradient
/// is zeroed in that case. This is the allocation-free path the learner uses.
double joint_q_raw(const QDppKernel& kernel, std::span<const std::size_t> indices,
                   double* d_diversity, bool* degenerate);

struct PenaltyResult {
  double value = 0.0;
  std::vector<double> d_log_quality;  // length M
  linalg::Matrix d_diversity;  // M x P
  bool converged = true;
  std::size_t active_terms = 0;
};

/// Keeps the previous eigenvectors of the full and per-partition Gram
/// matrices so the next decomposition starts nearly diagonal.
class PenaltyWorkspace {
 public:
  std::vector<linalg::Matrix> bases;  // [0] = full W, [1 + i] = partition i
};

/// Singular-value balance penalty
///   sum_i sum_j max(0, sigma_j^2 - sigma_hat_{i,j}^2 / delta)
/// with sigma from the full kernel rows W and sigma_hat from partition i's
/// rows. Squared singular values are taken as eigenvalues of the P x P Gram
/// matrices; the subgradient uses d(lambda_j)/dW = 2 W v_j v_j^T.
/// If an eigen-decomposition fails to converge the result is zero with
/// `converged` false.
PenaltyResult sv_penalty(const QDppKernel& kernel, double delta,
                         PenaltyWorkspace* workspace = nullptr);

/// Largest delta in (0, 1] for which the partition singular-value constraint
/// holds: min over partitions i and indices j with sigma_j > 0 of
/// sigma_hat_{i,j}^2 / sigma_j^2. Zero when some sigma_hat vanishes against
/// a positive sigma.
double balance_delta(const QDppKernel& kernel);

}  // namespace qdpp
