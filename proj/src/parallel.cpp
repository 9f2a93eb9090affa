#include "qdpp/parallel.hpp"

#include <cstdint>

#ifdef QDPP_HAVE_OPENMP
#include <omp.h>
#endif

namespace qdpp::parallel {

int max_threads() {
#ifdef QDPP_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

double outcome_determinant(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                           std::size_t outcome) {
  const GroundSet& gs = kernel.ground_set();
  JointSelection y;
  y.indices.resize(gs.n_agents());
  for (std::size_t i = gs.n_agents(); i-- > 0;) {
    y.indices[i] = gs.index(i, joint_obs[i], outcome % gs.n_actions());
    outcome /= gs.n_actions();
  }
  return std::max(linalg::det_gram(kernel.kernel_rows(y)), 0.0);
}

}  // namespace

std::vector<double> outcome_determinants_serial(const QDppKernel& kernel,
                                                std::span<const std::size_t> joint_obs) {
  kernel.ground_set().check_joint_obs(joint_obs);
  const std::size_t count = joint_outcome_count(kernel.ground_set());
  std::vector<double> dets(count);
  for (std::size_t o = 0; o < count; ++o) dets[o] = outcome_determinant(kernel, joint_obs, o);
  return dets;
}

std::vector<double> outcome_determinants_parallel(const QDppKernel& kernel,
                                                  std::span<const std::size_t> joint_obs) {
  kernel.ground_set().check_joint_obs(joint_obs);
  const std::size_t count = joint_outcome_count(kernel.ground_set());
  std::vector<double> dets(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < n; ++o) {
    dets[o] = outcome_determinant(kernel, joint_obs, static_cast<std::size_t>(o));
  }
  return dets;
}

JointDistribution normalize_determinants(const GroundSet& gs, std::vector<double> dets) {
  JointDistribution dist;
  dist.n_agents = gs.n_agents();
  dist.n_actions = gs.n_actions();
  double total = 0.0;
  for (double d : dets) total += d;
  if (!(total > 0.0)) {
    dist.degenerate = true;
    dist.probabilities.assign(dets.size(), 1.0 / static_cast<double>(dets.size()));
    return dist;
  }
  for (double& d : dets) d /= total;
  dist.probabilities = std::move(dets);
  return dist;
}

JointDistribution exact_distribution_parallel(const QDppKernel& kernel,
                                              std::span<const std::size_t> joint_obs) {
  return normalize_determinants(kernel.ground_set(), outcome_determinants_parallel(kernel, joint_obs));
}

namespace {

std::size_t draw_outcome(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                         std::uint64_t seed, std::size_t draw, SamplerStats& stats) {
  const GroundSet& gs = kernel.ground_set();
  Rng rng(seed, static_cast<std::uint64_t>(draw));
  const JointSelection y = orthogonalizing_sample(kernel, joint_obs, rng, &stats);
  std::size_t outcome = 0;
  for (std::size_t j : y.indices) outcome = outcome * gs.n_actions() + gs.action_of(j);
  return outcome;
}

}  // namespace

SampleCounts sample_counts_serial(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                                  std::size_t n_draws, std::uint64_t seed) {
  SampleCounts out;
  out.counts.assign(joint_outcome_count(kernel.ground_set()), 0);
  SamplerStats stats;
  for (std::size_t d = 0; d < n_draws; ++d) ++out.counts[draw_outcome(kernel, joint_obs, seed, d, stats)];
  out.degenerate_slices = stats.degenerate_slices;
  return out;
}

SampleCounts sample_counts_parallel(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                                    std::size_t n_draws, std::uint64_t seed) {
  kernel.ground_set().check_joint_obs(joint_obs);
  std::vector<std::uint32_t> outcomes(n_draws);
  std::vector<std::uint8_t> degenerate(n_draws, 0);
  const auto n = static_cast<std::int64_t>(n_draws);
#pragma omp parallel for schedule(static)
  for (std::int64_t d = 0; d < n; ++d) {
    SamplerStats stats;
    outcomes[d] = static_cast<std::uint32_t>(
        draw_outcome(kernel, joint_obs, seed, static_cast<std::size_t>(d), stats));
    degenerate[d] = static_cast<std::uint8_t>(stats.degenerate_slices);
  }
  SampleCounts out;
  out.counts.assign(joint_outcome_count(kernel.ground_set()), 0);
  for (std::size_t d = 0; d < n_draws; ++d) {
    ++out.counts[outcomes[d]];
    out.degenerate_slices += degenerate[d];
  }
  return out;
}

std::vector<double> batch_joint_q_serial(const QDppKernel& kernel,
                                         std::span<const JointSelection> selections) {
  std::vector<double> q(selections.size());
  for (std::size_t k = 0; k < selections.size(); ++k) {
    q[k] = joint_q_raw(kernel, selections[k].indices, nullptr, nullptr);
  }
  return q;
}

std::vector<double> batch_joint_q_parallel(const QDppKernel& kernel,
                                           std::span<const JointSelection> selections) {
  std::vector<double> q(selections.size());
  const auto n = static_cast<std::int64_t>(selections.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    q[k] = joint_q_raw(kernel, selections[k].indices, nullptr, nullptr);
  }
  return q;
}

}  // namespace qdpp::parallel
