#pragma once

// Data-parallel batch kernels. Each `_parallel` routine has a `_serial`
// reference with identical results: work items are independent and any
// reduction runs serially in a fixed order afterwards, so the output does not
// depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qdpp/kernel.hpp"
#include "qdpp/sampler.hpp"

namespace qdpp::parallel {

// Threads OpenMP would use; 1 when built without OpenMP.
int max_threads();

std::vector<double> outcome_determinants_serial(const QDppKernel& kernel,
                                                std::span<const std::size_t> joint_obs);
std::vector<double> outcome_determinants_parallel(const QDppKernel& kernel,
                                                  std::span<const std::size_t> joint_obs);

// Normalizes per-outcome determinants; all-zero input yields a uniform,
// `degenerate` distribution.
JointDistribution normalize_determinants(const GroundSet& gs, std::vector<double> dets);

JointDistribution exact_distribution_parallel(const QDppKernel& kernel,
                                              std::span<const std::size_t> joint_obs);

struct SampleCounts {
  std::vector<std::size_t> counts;  // per joint outcome
  std::size_t degenerate_slices = 0;
};

/// Histogram of `n_draws` orthogonalizing samples. Draw d uses its own
/// stream Rng(seed, d), so the histogram is reproducible for any thread count.
SampleCounts sample_counts_serial(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                                  std::size_t n_draws, std::uint64_t seed);
SampleCounts sample_counts_parallel(const QDppKernel& kernel, std::span<const std::size_t> joint_obs,
                                    std::size_t n_draws, std::uint64_t seed);

std::vector<double> batch_joint_q_serial(const QDppKernel& kernel,
                                         std::span<const JointSelection> selections);
std::vector<double> batch_joint_q_parallel(const QDppKernel& kernel,
                                           std::span<const JointSelection> selections);

}  // namespace qdpp::parallel
