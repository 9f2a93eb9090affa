// Serial reference vs OpenMP variant of each batch kernel. Set OMP_NUM_THREADS
// to compare thread counts; results are identical by construction.

#include <benchmark/benchmark.h>

#include "qdpp/learner.hpp"
#include "qdpp/parallel.hpp"

namespace {

using namespace qdpp;

// Blocker-sized kernel: 3 agents, 28 cells, 5 actions.
QDppKernel make_kernel(std::size_t feature_dim) {
  Rng rng(1, Stream::kInit);
  return QDppKernel::random_init(GroundSet(3, 28, 5), feature_dim, rng);
}

std::vector<JointSelection> make_selections(const QDppKernel& k, std::size_t count) {
  Rng rng(2, Stream::kTest);
  const GroundSet& gs = k.ground_set();
  std::vector<JointSelection> ys(count);
  for (auto& y : ys) {
    for (std::size_t i = 0; i < gs.n_agents(); ++i) {
      y.indices.push_back(gs.index(i, rng.uniform_index(gs.n_obs()), rng.uniform_index(gs.n_actions())));
    }
  }
  return ys;
}

std::vector<Transition> make_batch(const GroundSet& gs, std::size_t count) {
  Rng rng(3, Stream::kTest);
  std::vector<Transition> ts(count);
  for (auto& t : ts) {
    for (std::size_t i = 0; i < gs.n_agents(); ++i) {
      t.obs.push_back(rng.uniform_index(gs.n_obs()));
      t.actions.push_back(rng.uniform_index(gs.n_actions()));
      t.next_obs.push_back(rng.uniform_index(gs.n_obs()));
    }
    t.reward = -1.0;
    t.done = rng.uniform() < 0.1;
  }
  return ts;
}

const std::vector<std::size_t> kObs{3, 11, 20};

void BM_OutcomeDeterminantsSerial(benchmark::State& s) {
  const QDppKernel k = make_kernel(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(parallel::outcome_determinants_serial(k, kObs));
}
void BM_OutcomeDeterminantsParallel(benchmark::State& s) {
  const QDppKernel k = make_kernel(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(parallel::outcome_determinants_parallel(k, kObs));
}

void BM_SampleCountsSerial(benchmark::State& s) {
  const QDppKernel k = make_kernel(32);
  for (auto _ : s) benchmark::DoNotOptimize(parallel::sample_counts_serial(k, kObs, 10'000, 7));
}
void BM_SampleCountsParallel(benchmark::State& s) {
  const QDppKernel k = make_kernel(32);
  for (auto _ : s) benchmark::DoNotOptimize(parallel::sample_counts_parallel(k, kObs, 10'000, 7));
}

void BM_BatchJointQSerial(benchmark::State& s) {
  const QDppKernel k = make_kernel(32);
  const auto ys = make_selections(k, 4096);
  for (auto _ : s) benchmark::DoNotOptimize(parallel::batch_joint_q_serial(k, ys));
}
void BM_BatchJointQParallel(benchmark::State& s) {
  const QDppKernel k = make_kernel(32);
  const auto ys = make_selections(k, 4096);
  for (auto _ : s) benchmark::DoNotOptimize(parallel::batch_joint_q_parallel(k, ys));
}

template <bool Parallel>
void BM_TdLoss(benchmark::State& s) {
  const QDppKernel k = make_kernel(32);
  const TargetView target(k);
  const auto ts = make_batch(k.ground_set(), static_cast<std::size_t>(s.range(0)));
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  KernelGradient grad(k);
  for (auto _ : s) {
    grad.zero();
    const auto r = Parallel ? td_loss_parallel(k, target, batch, 0.99, &grad) : td_loss(k, target, batch, 0.99, &grad);
    benchmark::DoNotOptimize(r.loss);
  }
}

}  // namespace

BENCHMARK(BM_OutcomeDeterminantsSerial)->Arg(8)->Arg(32);
BENCHMARK(BM_OutcomeDeterminantsParallel)->Arg(8)->Arg(32);
BENCHMARK(BM_SampleCountsSerial);
BENCHMARK(BM_SampleCountsParallel);
BENCHMARK(BM_BatchJointQSerial);
BENCHMARK(BM_BatchJointQParallel);
BENCHMARK(BM_TdLoss<false>)->Arg(256)->Arg(2048);
BENCHMARK(BM_TdLoss<true>)->Arg(256)->Arg(2048);

BENCHMARK_MAIN();
