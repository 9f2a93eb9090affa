#include "qdpp/sampler.hpp"

#include <cmath>
#include <string>

#include "qdpp/parallel.hpp"

namespace qdpp {

namespace {

std::size_t categorical(std::span<const double> weights, double total, Rng& rng) {
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t a = 0; a < weights.size(); ++a) {
    acc += weights[a];
    if (u < acc) return a;
  }
  // Rounding left u at the top edge; return the last positive weight.
  for (std::size_t a = weights.size(); a-- > 0;) {
    if (weights[a] > 0.0) return a;
  }
  return weights.size() - 1;
}

}  // namespace

SampleTrace orthogonalizing_sample_traced(const QDppKernel& kernel,
                                          std::span<const std::size_t> joint_obs, Rng& rng,
                                          SamplerStats* stats) {
  const GroundSet& gs = kernel.ground_set();
  gs.check_joint_obs(joint_obs);
  const std::size_t n_actions = gs.n_actions();
  const std::size_t p = kernel.feature_dim();
  const linalg::Matrix& b = kernel.diversity();

  SampleTrace trace;
  trace.selection.indices.reserve(gs.n_agents());
  trace.chosen_weights.reserve(gs.n_agents());

  std::vector<linalg::Vector> basis;  // residuals of the items chosen so far
  std::vector<linalg::Vector> residuals(n_actions);
  std::vector<double> weights(n_actions);

  for (std::size_t agent = 0; agent < gs.n_agents(); ++agent) {
    const std::size_t first = gs.slice_begin(agent, joint_obs[agent]);
    double total = 0.0;
    bool any_live = false;
    for (std::size_t a = 0; a < n_actions; ++a) {
      residuals[a] = linalg::project_orthogonal(b.row(first + a), basis);
      weights[a] = linalg::squared_norm(residuals[a]) * std::exp(kernel.log_quality()[first + a]);
      total += weights[a];
      any_live = any_live || weights[a] >= kDegenerateScore;
    }
    std::size_t choice;
    if (!any_live || !std::isfinite(total)) {
      choice = rng.uniform_index(n_actions);
      if (stats != nullptr) ++stats->degenerate_slices;
    } else {
      choice = categorical(weights, total, rng);
    }
    trace.selection.indices.push_back(first + choice);
    trace.chosen_weights.push_back(weights[choice]);
    if (p > 0 && linalg::squared_norm(residuals[choice]) > 0.0) {
      basis.push_back(std::move(residuals[choice]));
    }
  }
  return trace;
}

JointSelection orthogonalizing_sample(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                                      Rng& rng, SamplerStats* stats) {
  return orthogonalizing_sample_traced(kernel, joint_obs, rng, stats).selection;
}

std::vector<std::size_t> JointDistribution::actions_of(std::size_t outcome) const {
  std::vector<std::size_t> actions(n_agents);
  for (std::size_t i = n_agents; i-- > 0;) {
    actions[i] = outcome % n_actions;
    outcome /= n_actions;
  }
  return actions;
}

std::size_t JointDistribution::outcome_of(std::span<const std::size_t> actions) const {
  std::size_t outcome = 0;
  for (std::size_t a : actions) outcome = outcome * n_actions + a;
  return outcome;
}

std::size_t joint_outcome_count(const GroundSet& gs) {
  std::size_t count = 1;
  for (std::size_t i = 0; i < gs.n_agents(); ++i) {
    if (count > kOracleGuard / gs.n_actions()) {
      throw OracleGuardError("joint action space exceeds the enumeration guard of " +
                             std::to_string(kOracleGuard));
    }
    count *= gs.n_actions();
  }
  return count;
}

std::vector<double> outcome_determinants(const QDppKernel& kernel, std::span<const std::size_t> joint_obs) {
  return parallel::outcome_determinants_serial(kernel, joint_obs);
}

JointDistribution exact_distribution(const QDppKernel& kernel, std::span<const std::size_t> joint_obs) {
  return parallel::normalize_determinants(kernel.ground_set(),
                                          parallel::outcome_determinants_serial(kernel, joint_obs));
}

bool Theorem1Report::all_pass() const {
  for (const auto& r : rows) {
    if (!r.skipped && !r.pass) return false;
  }
  return true;
}

Theorem1Report theorem1_check(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                              std::size_t n_draws, Rng& rng) {
  const GroundSet& gs = kernel.ground_set();
  const JointDistribution exact = parallel::exact_distribution_parallel(kernel, joint_obs);

  Theorem1Report report;
  report.n_agents = gs.n_agents();
  report.draws = n_draws;
  report.delta = balance_delta(kernel);
  report.skipped = !(report.delta > 0.0);

  const std::uint64_t draw_seed = rng.next_u64();
  const parallel::SampleCounts counts = parallel::sample_counts_parallel(kernel, joint_obs, n_draws, draw_seed);

  const double factor = report.skipped ? 0.0 : std::pow(report.delta, -static_cast<double>(gs.n_agents()));
  report.rows.reserve(exact.outcome_count());
  for (std::size_t o = 0; o < exact.outcome_count(); ++o) {
    BoundRow row;
    row.actions = exact.actions_of(o);
    row.exact = exact.probabilities[o];
    row.empirical = n_draws == 0 ? 0.0 : static_cast<double>(counts.counts[o]) / static_cast<double>(n_draws);
    row.std_error = n_draws == 0 ? 0.0 : std::sqrt(row.empirical * (1.0 - row.empirical) / static_cast<double>(n_draws));
    row.skipped = report.skipped;
    if (!row.skipped) {
      row.bound = factor * row.exact;
      row.pass = row.empirical <= row.bound + 5.0 * row.std_error;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

JointSelection explore_action(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                              double epsilon, Rng& rng, SamplerStats* stats) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("explore_action: epsilon must lie in [0, 1]");
  }
  if (rng.uniform() < epsilon) {
    return orthogonalizing_sample(kernel, joint_obs, rng, stats);
  }
  const auto actions = greedy_joint_action(kernel, joint_obs);
  return make_selection(kernel.ground_set(), joint_obs, actions);
}

}  // namespace qdpp
