#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "qdpp/kernel.hpp"
#include "qdpp/rng.hpp"

namespace qdpp {

struct SamplerStats {
  std::size_t degenerate_slices = 0;  // slices that fell back to a uniform draw
};

// Scores below this count as a vanished residual span.
inline constexpr double kDegenerateScore = 1e-15;

/// One draw of the orthogonalizing sampler. Partitions are visited in agent
/// order; inside agent i's slice an action is drawn with probability
/// proportional to ||r_j||^2 exp(D_j), where r_j is b_j projected away from
/// the directions already selected. The selected residual then joins the
/// projection basis. If every score in a slice is below kDegenerateScore the
/// draw is uniform and `stats->degenerate_slices` is incremented.
JointSelection orthogonalizing_sample(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                                      Rng& rng, SamplerStats* stats = nullptr);

struct SampleTrace {
  JointSelection selection;
  // ||r_j||^2 exp(D_j) of the item chosen at each partition step. Their
  // running product equals det(W_Y W_Y^T) of the items chosen so far.
  std::vector<double> chosen_weights;
};

SampleTrace orthogonalizing_sample_traced(const QDppKernel& kernel,
                                          std::span<const std::size_t> joint_obs, Rng& rng,
                                          SamplerStats* stats = nullptr);

class OracleGuardError : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr std::size_t kOracleGuard = 1'000'000;

/// Probability of every joint action under the constrained DPP, ordered
/// lexicographically by (a_1, ..., a_N) with a_1 most significant.
struct JointDistribution {
  std::size_t n_agents = 0;
  std::size_t n_actions = 0;
  std::vector<double> probabilities;
  bool degenerate = false;  // every determinant was zero; uniform returned

  std::size_t outcome_count() const { return probabilities.size(); }
  std::vector<std::size_t> actions_of(std::size_t outcome) const;
  std::size_t outcome_of(std::span<const std::size_t> actions) const;
};

// |A|^N, or throws OracleGuardError above kOracleGuard.
std::size_t joint_outcome_count(const GroundSet& gs);

JointDistribution exact_distribution(const QDppKernel& kernel, std::span<const std::size_t> joint_obs);

// Unnormalized det(W_Y W_Y^T) for every outcome, in outcome order.
std::vector<double> outcome_determinants(const QDppKernel& kernel, std::span<const std::size_t> joint_obs);

struct BoundRow {
  std::vector<std::size_t> actions;
  double empirical = 0.0;
  double exact = 0.0;
  double bound = 0.0;  // exact / delta^N
  double std_error = 0.0;  // binomial standard error of `empirical`
  bool skipped = false;
  bool pass = false;
};

struct Theorem1Report {
  double delta = 0.0;
  std::size_t n_agents = 0;
  std::size_t draws = 0;
  bool skipped = false;  // delta == 0: the bound is vacuous
  std::vector<BoundRow> rows;

  // True when no row failed; skipped rows neither pass nor fail.
  bool all_pass() const;
};

/// Compares the sampler's empirical outcome frequencies with the bound
/// exact(Y) / delta^N, where delta is measured from the kernel. A row passes
/// when empirical <= bound + 5 standard errors.
Theorem1Report theorem1_check(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                              std::size_t n_draws, Rng& rng);

/// With probability epsilon an orthogonalizing sample, otherwise every
/// agent's greedy action. Always consumes one uniform draw first.
JointSelection explore_action(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                              double epsilon, Rng& rng, SamplerStats* stats = nullptr);

}  // namespace qdpp
