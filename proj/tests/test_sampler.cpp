#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qdpp/parallel.hpp"
#include "qdpp/sampler.hpp"

using namespace qdpp;

namespace {

double total_variation(const std::vector<double>& p, const std::vector<std::size_t>& counts, std::size_t n) {
  double tv = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) tv += std::abs(p[k] - static_cast<double>(counts[k]) / n);
  return 0.5 * tv;
}

std::vector<std::size_t> histogram(const QDppKernel& k, const std::vector<std::size_t>& obs, std::size_t n,
                                   Rng& rng, SamplerStats* stats = nullptr) {
  const GroundSet& gs = k.ground_set();
  std::vector<std::size_t> counts(joint_outcome_count(gs), 0);
  JointDistribution shape;
  shape.n_agents = gs.n_agents();
  shape.n_actions = gs.n_actions();
  for (std::size_t d = 0; d < n; ++d) {
    const JointSelection y = orthogonalizing_sample(k, obs, rng, stats);
    std::vector<std::size_t> actions;
    for (std::size_t j : y.indices) actions.push_back(gs.action_of(j));
    ++counts[shape.outcome_of(actions)];
  }
  return counts;
}

// Every row a distinct scaled basis vector, so all rows are pairwise orthogonal.
QDppKernel orthogonal_kernel(const GroundSet& gs, Rng& rng) {
  QDppKernel k(gs, gs.size());
  for (std::size_t j = 0; j < gs.size(); ++j) {
    k.diversity()(j, j) = 0.3 + 0.7 * rng.uniform();
    k.log_quality()[j] = 2.0 * rng.uniform() - 1.0;
  }
  return k;
}

}  // namespace

TEST_CASE("single agent samples the categorical distribution of quality scores") {
  Rng rng(1, Stream::kTest);
  const QDppKernel k = oracle::random_kernel(GroundSet(1, 1, 4), 3, rng);
  std::vector<double> p(4);
  for (std::size_t a = 0; a < 4; ++a) p[a] = quality_score(k, a);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  const std::vector<std::size_t> obs{0};
  const auto counts = histogram(k, obs, 100000, rng);
  CHECK(total_variation(p, counts, 100000) <= 0.01);
}

TEST_CASE("sampler is exact when all rows are orthogonal") {
  Rng rng(2, Stream::kTest);
  const QDppKernel k = orthogonal_kernel(GroundSet(2, 1, 2), rng);
  const std::vector<std::size_t> obs{0, 0};
  const JointDistribution exact = exact_distribution(k, obs);
  CHECK(total_variation(exact.probabilities, histogram(k, obs, 100000, rng), 100000) <= 0.02);
}

TEST_CASE("identical diversity vectors across agents never co-occur") {
  QDppKernel k(GroundSet(2, 1, 2), 2);
  k.diversity()(0, 0) = 1.0;  // agent 0, action 0
  k.diversity()(1, 1) = 1.0;  // agent 0, action 1
  k.diversity()(2, 0) = 1.0;  // agent 1, action 0 duplicates agent 0 action 0
  k.diversity()(3, 0) = 0.6;
  k.diversity()(3, 1) = 0.8;
  Rng rng(3, Stream::kTest);
  const std::vector<std::size_t> obs{0, 0};
  const auto counts = histogram(k, obs, 20000, rng);
  CHECK(counts[0] == 0);  // outcome (0, 0)
}

TEST_CASE("running product of chosen weights equals the Gram determinant") {
  Rng rng(4, Stream::kTest);
  const GroundSet gs(4, 2, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const QDppKernel k = oracle::random_kernel(gs, 6, rng);
    const std::vector<std::size_t> obs{rng.uniform_index(2), rng.uniform_index(2), rng.uniform_index(2),
                                       rng.uniform_index(2)};
    const SampleTrace t = orthogonalizing_sample_traced(k, obs, rng);
    double running = 1.0;
    for (std::size_t i = 0; i < t.chosen_weights.size(); ++i) {
      running *= t.chosen_weights[i];
      JointSelection prefix{{t.selection.indices.begin(), t.selection.indices.begin() + i + 1}};
      CHECK(oracle::relative_error(running, linalg::det_gram(k.kernel_rows(prefix))) <= 1e-9);
    }
  }
}

TEST_CASE("degenerate slices fall back to uniform and are counted") {
  QDppKernel k(GroundSet(2, 1, 2), 2);
  k.diversity()(0, 0) = 1.0;
  k.diversity()(1, 0) = 1.0;
  k.diversity()(2, 0) = 1.0;  // agent 1's rows are parallel to agent 0's only direction
  k.diversity()(3, 0) = 0.5;
  Rng rng(5, Stream::kTest);
  SamplerStats stats;
  const std::vector<std::size_t> obs{0, 0};
  const auto counts = histogram(k, obs, 10000, rng, &stats);
  CHECK(stats.degenerate_slices == 10000);
  CHECK(counts[0] + counts[2] > 0);
  CHECK(counts[1] + counts[3] > 0);
}

TEST_CASE("exact_distribution examples") {
  QDppKernel k(GroundSet(1, 1, 2), 1);
  k.diversity()(0, 0) = 1.0;
  k.diversity()(1, 0) = std::sqrt(3.0);
  const JointDistribution d = exact_distribution(k, std::vector<std::size_t>{0});
  CHECK(d.probabilities[0] == doctest::Approx(0.25));
  CHECK(d.probabilities[1] == doctest::Approx(0.75));

  Rng rng(6, Stream::kTest);
  const QDppKernel r = oracle::random_kernel(GroundSet(3, 2, 3), 4, rng);
  const JointDistribution rd = exact_distribution(r, std::vector<std::size_t>{1, 0, 1});
  CHECK(rd.outcome_count() == 27);
  CHECK(std::accumulate(rd.probabilities.begin(), rd.probabilities.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t o = 0; o < 27; ++o) CHECK(rd.outcome_of(rd.actions_of(o)) == o);
}

TEST_CASE("exact_distribution matches hand 2x2 determinants on a six-item layout") {
  // Two agents, one observation, three actions each.
  QDppKernel k(GroundSet(2, 1, 3), 2);
  const double rows[6][2] = {{1, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 3}, {0, 2}};
  for (std::size_t j = 0; j < 6; ++j) {
    k.diversity()(j, 0) = rows[j][0] / 4.0;
    k.diversity()(j, 1) = rows[j][1] / 4.0;
  }
  const JointDistribution d = exact_distribution(k, std::vector<std::size_t>{0, 0});
  std::vector<double> dets;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 3; b < 6; ++b) {
      // det of [[x1 y1],[x2 y2]] squared is the 2x2 Gram determinant.
      const double det = (rows[a][0] * rows[b][1] - rows[a][1] * rows[b][0]) / 16.0;
      dets.push_back(det * det);
    }
  }
  const double total = std::accumulate(dets.begin(), dets.end(), 0.0);
  for (std::size_t o = 0; o < 9; ++o) CHECK(d.probabilities[o] == doctest::Approx(dets[o] / total).epsilon(1e-12));
}

TEST_CASE("exact_distribution is uniform and flagged when every determinant vanishes") {
  QDppKernel k(GroundSet(2, 1, 2), 2);
  const JointDistribution d = exact_distribution(k, std::vector<std::size_t>{0, 0});
  CHECK(d.degenerate);
  for (double p : d.probabilities) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("exact_distribution permutation invariance inside a partition") {
  Rng rng(7, Stream::kTest);
  const GroundSet gs(2, 1, 3);
  QDppKernel k = oracle::random_kernel(gs, 3, rng);
  const std::vector<std::size_t> obs{0, 0};
  const JointDistribution before = exact_distribution(k, obs);
  // Swap agent 1's actions 0 and 2.
  QDppKernel swapped = k;
  std::swap(swapped.log_quality()[3], swapped.log_quality()[5]);
  for (std::size_t c = 0; c < 3; ++c) std::swap(swapped.diversity()(3, c), swapped.diversity()(5, c));
  const JointDistribution after = exact_distribution(swapped, obs);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      const std::size_t mapped = b == 0 ? 2 : (b == 2 ? 0 : 1);
      const std::vector<std::size_t> x{a, b}, y{a, mapped};
      CHECK(after.probabilities[after.outcome_of(y)] ==
            doctest::Approx(before.probabilities[before.outcome_of(x)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("oracle guard rejects huge joint spaces") {
  const GroundSet gs(7, 1, 8);  // 8^7 > 1e6
  CHECK_THROWS_AS(joint_outcome_count(gs), OracleGuardError);
  const QDppKernel k(gs, 8);
  CHECK_THROWS_AS(exact_distribution(k, std::vector<std::size_t>(7, 0)), OracleGuardError);
}

TEST_CASE("theorem1_check passes on random kernels and skips vacuous bounds") {
  Rng rng(8, Stream::kTest);
  const std::vector<std::size_t> obs{0, 0};
  // Three generic rows per partition span the plane, so delta is positive.
  const QDppKernel planar = oracle::random_kernel(GroundSet(2, 1, 3), 2, rng);
  const Theorem1Report a = theorem1_check(planar, obs, 50000, rng);
  CHECK_FALSE(a.skipped);
  CHECK(a.delta > 0.0);
  CHECK(a.all_pass());

  // Axis-aligned rows: each partition misses the other's directions, so delta is 0.
  const Theorem1Report o = theorem1_check(orthogonal_kernel(GroundSet(2, 1, 3), rng), obs, 1000, rng);
  CHECK(o.skipped);

  const QDppKernel random = oracle::random_kernel(GroundSet(2, 1, 3), 3, rng);
  const Theorem1Report b = theorem1_check(random, obs, 200000, rng);
  CHECK(b.rows.size() == 9);
  double sum = 0.0;
  for (const BoundRow& r : b.rows) sum += r.exact;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  if (!b.skipped) CHECK(b.all_pass());

  QDppKernel broken = random;
  for (std::size_t j = 3; j < 6; ++j) {
    for (std::size_t c = 0; c < 3; ++c) broken.diversity()(j, c) = 0.0;
  }
  const Theorem1Report c = theorem1_check(broken, obs, 1000, rng);
  CHECK(c.skipped);
  CHECK(c.delta == 0.0);
  for (const BoundRow& r : c.rows) {
    CHECK(r.skipped);
    CHECK_FALSE(r.pass);
  }
}

TEST_CASE("explore_action: greedy at epsilon 0, sampler at epsilon 1, reproducible") {
  Rng init(9, Stream::kTest);
  const GroundSet gs(3, 2, 3);
  const QDppKernel k = oracle::random_kernel(gs, 4, init);
  const std::vector<std::size_t> obs{1, 0, 1};
  const JointSelection greedy = make_selection(gs, obs, greedy_joint_action(k, obs));
  Rng r0(10, Stream::kTest);
  for (int t = 0; t < 20; ++t) CHECK(explore_action(k, obs, 0.0, r0) == greedy);

  Rng a(11, Stream::kTest), b(11, Stream::kTest);
  for (int t = 0; t < 50; ++t) {
    Rng coin = a;
    coin.uniform();
    const JointSelection expected = orthogonalizing_sample(k, obs, coin);
    CHECK(explore_action(k, obs, 1.0, a) == expected);
  }
  Rng c(12, Stream::kTest), d(12, Stream::kTest);
  for (int t = 0; t < 50; ++t) CHECK(explore_action(k, obs, 0.5, c) == explore_action(k, obs, 0.5, d));
  (void)b;
}

TEST_CASE("parallel batch kernels equal their serial references") {
  Rng rng(13, Stream::kTest);
  const GroundSet gs(3, 2, 4);
  const QDppKernel k = oracle::random_kernel(gs, 5, rng);
  const std::vector<std::size_t> obs{0, 1, 1};
  CHECK(parallel::outcome_determinants_serial(k, obs) == parallel::outcome_determinants_parallel(k, obs));
  CHECK(parallel::outcome_determinants_serial(k, obs) == outcome_determinants(k, obs));
  CHECK(parallel::exact_distribution_parallel(k, obs).probabilities == exact_distribution(k, obs).probabilities);

  const auto s = parallel::sample_counts_serial(k, obs, 5000, 77);
  const auto p = parallel::sample_counts_parallel(k, obs, 5000, 77);
  CHECK(s.counts == p.counts);
  CHECK(s.degenerate_slices == p.degenerate_slices);

  std::vector<JointSelection> ys;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> o{rng.uniform_index(2), rng.uniform_index(2), rng.uniform_index(2)};
    std::vector<std::size_t> a{rng.uniform_index(4), rng.uniform_index(4), rng.uniform_index(4)};
    ys.push_back(make_selection(gs, o, a));
  }
  const auto qs = parallel::batch_joint_q_serial(k, ys);
  CHECK(qs == parallel::batch_joint_q_parallel(k, ys));
  for (std::size_t t = 0; t < ys.size(); ++t) CHECK(qs[t] == joint_q(k, ys[t]));
  CHECK(parallel::max_threads() >= 1);
}
