#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qdpp/learner.hpp"

using namespace qdpp;

namespace {

// Greedy action of one agent from first principles.
std::size_t oracle_greedy(const QDppKernel& k, std::size_t agent, std::size_t obs) {
  const GroundSet& gs = k.ground_set();
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t a = 0; a < gs.n_actions(); ++a) {
    const std::size_t j = gs.index(agent, obs, a);
    double norm2 = 0.0;
    for (double v : k.diversity().row(j)) norm2 += v * v;
    const double s = norm2 * std::exp(k.log_quality()[j]);
    if (s > best_score) {
      best_score = s;
      best = a;
    }
  }
  return best;
}

double oracle_td_error(const QDppKernel& online, const QDppKernel& target, const Transition& t, double gamma) {
  const GroundSet& gs = online.ground_set();
  std::vector<std::size_t> y, y_next;
  for (std::size_t i = 0; i < gs.n_agents(); ++i) {
    y.push_back(gs.index(i, t.obs[i], t.actions[i]));
    y_next.push_back(gs.index(i, t.next_obs[i], oracle_greedy(target, i, t.next_obs[i])));
  }
  double target_value = t.reward;
  if (!t.done) target_value += gamma * oracle::joint_q(target, y_next);
  return oracle::joint_q(online, y) - target_value;
}

std::vector<Transition> toy_transitions(const GroundSet& gs, Rng& rng, std::size_t count) {
  std::vector<Transition> out;
  for (std::size_t k = 0; k < count; ++k) {
    Transition t;
    for (std::size_t i = 0; i < gs.n_agents(); ++i) {
      t.obs.push_back(rng.uniform_index(gs.n_obs()));
      t.actions.push_back(rng.uniform_index(gs.n_actions()));
      t.next_obs.push_back(rng.uniform_index(gs.n_obs()));
    }
    t.reward = 2.0 * rng.uniform() - 1.0;
    t.done = rng.uniform() < 0.3;
    out.push_back(t);
  }
  return out;
}

std::vector<const Transition*> pointers(const std::vector<Transition>& ts) {
  std::vector<const Transition*> p;
  for (const auto& t : ts) p.push_back(&t);
  return p;
}

}  // namespace

TEST_CASE("td_loss on a hand-built two-agent example") {
  GroundSet gs(2, 2, 2);
  QDppKernel k(gs, 2);
  // Agent 0 items 0..3, agent 1 items 4..7; (obs, action) order within each.
  const double d[8] = {0.1, 0.5, -0.2, 0.3, 0.0, 0.4, 0.2, -0.1};
  for (std::size_t j = 0; j < 8; ++j) k.log_quality()[j] = d[j];
  const double b[8][2] = {{1, 0}, {0.6, 0.8}, {0, 1}, {0.8, 0}, {0, 1}, {0.5, 0.5}, {1, 0}, {0.3, 0.9}};
  for (std::size_t j = 0; j < 8; ++j) {
    k.diversity()(j, 0) = b[j][0];
    k.diversity()(j, 1) = b[j][1];
  }
  const TargetView target(k);
  Transition t{{0, 1}, {1, 0}, 0.5, {1, 0}, false};
  // Q(o, a): items 1 and 6. det [[0.6,0.8],[1,0]] = -0.8, Gram det 0.64.
  const double q = 0.5 + 0.2 + std::log(0.64);
  // Next obs (1, 0). Agent 0 scores: item 2 = e^-0.2 = 0.8187, item 3 = 0.64 e^0.3 = 0.8639 -> item 3.
  // Agent 1 scores: item 4 = 1, item 5 = 0.5 e^0.4 = 0.7459 -> item 4.
  // Rows (0.8, 0) and (0, 1): Gram det 0.64.
  const double next = 0.3 + 0.0 + std::log(0.64);
  const double err = q - (0.5 + 0.9 * next);
  const Transition* batch[] = {&t};
  const TdLossResult r = td_loss(k, target, batch, 0.9, nullptr);
  CHECK(r.loss == doctest::Approx(err * err).epsilon(1e-12));
  CHECK(r.transitions == 1);
  CHECK(r.degenerate == 0);

  t.done = true;
  const double err_done = q - 0.5;
  CHECK(td_loss(k, target, batch, 0.9, nullptr).loss == doctest::Approx(err_done * err_done).epsilon(1e-12));
}

TEST_CASE("td_loss matches the oracle and is additive over the batch") {
  Rng rng(21, Stream::kTest);
  for (int trial = 0; trial < 20; ++trial) {
    GroundSet gs(2 + rng.uniform_index(2), 3, 3);
    const QDppKernel online = oracle::random_kernel(gs, 4, rng);
    const QDppKernel tk = oracle::random_kernel(gs, 4, rng);
    const TargetView target(tk);
    const auto ts = toy_transitions(gs, rng, 10);
    const auto all = pointers(ts);
    double expected = 0.0, parts = 0.0;
    for (const auto& t : ts) {
      const double e = oracle_td_error(online, tk, t, 0.95);
      expected += e * e;
    }
    const std::span<const Transition* const> span(all);
    parts += td_loss(online, target, span.first(4), 0.95, nullptr).loss;
    parts += td_loss(online, target, span.subspan(4), 0.95, nullptr).loss;
    const double whole = td_loss(online, target, span, 0.95, nullptr).loss;
    CHECK(oracle::relative_error(whole, expected) <= 1e-9);
    CHECK(oracle::relative_error(parts, whole) <= 1e-12);
  }
}

TEST_CASE("td_loss gradient matches central differences") {
  Rng rng(23, Stream::kTest);
  for (int trial = 0; trial < 10; ++trial) {
    GroundSet gs(2, 2, 3);
    QDppKernel online = oracle::random_kernel(gs, 3, rng);
    const TargetView target(oracle::random_kernel(gs, 3, rng));
    const auto ts = toy_transitions(gs, rng, 6);
    const auto batch = pointers(ts);
    KernelGradient grad(online);
    td_loss(online, target, batch, 0.9, &grad);
    auto loss = [&] { return td_loss(online, target, batch, 0.9, nullptr).loss; };
    double worst = 0.0;
    for (std::size_t j = 0; j < online.size(); ++j) {
      const double fd = oracle::central_difference(loss, online.log_quality()[j], 1e-6);
      if (std::abs(fd) > 1e-8 || grad.d_log_quality[j] != 0.0) {
        worst = std::max(worst, oracle::relative_error(grad.d_log_quality[j], fd));
      }
      for (std::size_t c = 0; c < online.feature_dim(); ++c) {
        const double fdb = oracle::central_difference(loss, online.diversity()(j, c), 1e-6);
        const double an = grad.d_diversity(j, c);
        if (std::abs(fdb) > 1e-8 || an != 0.0) worst = std::max(worst, oracle::relative_error(an, fdb));
      }
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("td_loss_parallel equals td_loss exactly") {
  Rng rng(25, Stream::kTest);
  GroundSet gs(3, 5, 4);
  const QDppKernel online = oracle::random_kernel(gs, 6, rng);
  const TargetView target(oracle::random_kernel(gs, 6, rng));
  const auto ts = toy_transitions(gs, rng, 500);
  const auto batch = pointers(ts);
  KernelGradient g1(online), g2(online);
  const auto a = td_loss(online, target, batch, 0.99, &g1);
  const auto b = td_loss_parallel(online, target, batch, 0.99, &g2);
  CHECK(a.loss == b.loss);
  CHECK(a.transitions == b.transitions);
  CHECK(a.degenerate == b.degenerate);
  CHECK(g1.d_log_quality == g2.d_log_quality);
  CHECK(g1.d_diversity == g2.d_diversity);
}

TEST_CASE("td_loss rejects transitions of the wrong shape") {
  GroundSet gs(2, 2, 2);
  const QDppKernel k(gs, 2);
  const TargetView target(k);
  const Transition bad{{0}, {0}, 0.0, {0}, true};
  const Transition* batch[] = {&bad};
  CHECK_THROWS_AS(td_loss(k, target, batch, 0.9, nullptr), std::invalid_argument);
}

TEST_CASE("RMSprop matches the closed form") {
  RmsProp opt(2, 0.1, 0.9, 1e-8);
  std::vector<double> params{1.0, -2.0};
  const std::vector<double> g1{0.5, 0.0};
  opt.step(params, g1);
  const double s1 = 0.1 * 0.25;
  CHECK(params[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (std::sqrt(s1) + 1e-8)).epsilon(1e-14));
  CHECK(params[1] == -2.0);  // zero gradient is a no-op
  const std::vector<double> g2{-1.0, 0.0};
  opt.step(params, g2);
  const double s2 = 0.9 * s1 + 0.1 * 1.0;
  CHECK(opt.square_avg()[0] == doctest::Approx(s2).epsilon(1e-14));
  CHECK(params[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (std::sqrt(s1) + 1e-8) + 0.1 / (std::sqrt(s2) + 1e-8)));
  CHECK_THROWS_AS(opt.step(params, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("target network refreshes at multiples of the interval") {
  Rng rng(27, Stream::kTest);
  GroundSet gs(2, 2, 2);
  TrainConfig cfg;
  cfg.penalty_weight = 0.0;
  cfg.target_update_interval = 100;
  QDppTrainer trainer(oracle::random_kernel(gs, 3, rng), cfg);
  const auto ts = toy_transitions(gs, rng, 8);
  const auto batch = pointers(ts);
  const QDppKernel initial = trainer.kernel();

  CHECK_FALSE(trainer.train_step(batch, 50).target_updated);
  CHECK(trainer.target().kernel() == initial);
  CHECK_FALSE(trainer.kernel() == initial);
  CHECK(trainer.train_step(batch, 100).target_updated);
  CHECK(trainer.target().kernel() == trainer.kernel());
  CHECK_FALSE(trainer.train_step(batch, 199).target_updated);
  CHECK(trainer.train_step(batch, 250).target_updated);
  CHECK_FALSE(trainer.train_step(batch, 260).target_updated);
  CHECK(trainer.target_updates() == 2);
}

TEST_CASE("train step keeps diversity rows in the unit ball") {
  Rng rng(29, Stream::kTest);
  GroundSet gs(2, 3, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  QDppTrainer trainer(oracle::random_kernel(gs, 4, rng), cfg);
  const auto ts = toy_transitions(gs, rng, 20);
  const auto batch = pointers(ts);
  for (int k = 0; k < 20; ++k) {
    const auto stats = trainer.train_step(batch, 0);
    CHECK_FALSE(stats.skipped);
    CHECK(stats.penalty >= 0.0);
  }
  for (std::size_t j = 0; j < trainer.kernel().size(); ++j) {
    double n2 = 0.0;
    for (double v : trainer.kernel().diversity().row(j)) n2 += v * v;
    CHECK(n2 <= 1.0 + 1e-12);
  }
}

TEST_CASE("a zero-error batch leaves the kernel unchanged") {
  Rng rng(31, Stream::kTest);
  GroundSet gs(2, 2, 2);
  TrainConfig cfg;
  cfg.penalty_weight = 0.0;
  QDppTrainer trainer(oracle::random_kernel(gs, 2, rng), cfg);
  // Terminal transition whose reward equals Q(o, a): zero TD error and zero gradient.
  Transition t{{0, 1}, {1, 0}, 0.0, {0, 0}, true};
  t.reward = joint_q(trainer.kernel(), make_selection(gs, t.obs, t.actions));
  const Transition* batch[] = {&t};
  const QDppKernel before = trainer.kernel();
  const auto stats = trainer.train_step(batch, 0);
  CHECK(stats.td_loss == doctest::Approx(0.0).scale(1e-20));
  for (std::size_t j = 0; j < before.size(); ++j) {
    CHECK(trainer.kernel().log_quality()[j] == doctest::Approx(before.log_quality()[j]).epsilon(1e-12));
  }
}

TEST_CASE("igm_check and joint_argmax") {
  GroundSet gs(2, 1, 2);
  QDppKernel k(gs, 2);
  // Orthogonal rows: the joint value is additive, so greedy is optimal.
  k.diversity()(0, 0) = 1.0;
  k.diversity()(1, 0) = 1.0;
  k.diversity()(2, 1) = 1.0;
  k.diversity()(3, 1) = 1.0;
  k.log_quality()[1] = 0.5;
  k.log_quality()[2] = 0.3;
  const std::vector<std::size_t> obs{0, 0};
  CHECK(joint_argmax(k, obs) == std::vector<std::size_t>{1, 0});
  CHECK(igm_check(k, obs));

  // Agent 1's best item is parallel to agent 0's best: the joint optimum moves.
  k.diversity()(2, 0) = 1.0;
  k.diversity()(2, 1) = 0.0;
  k.diversity()(3, 0) = 0.0;
  k.diversity()(3, 1) = 0.5;
  // Scores: agent 1 item 2 = e^0.3 = 1.35, item 3 = 0.25. Greedy (1, 0) has a singular Gram.
  CHECK(greedy_joint_action(k, obs) == std::vector<std::size_t>{1, 0});
  CHECK(joint_argmax(k, obs) == std::vector<std::size_t>{1, 1});
  CHECK_FALSE(igm_check(k, obs));
}

TEST_CASE("dq_ratio examples") {
  GroundSet gs(2, 1, 1);
  QDppKernel k(gs, 2);
  k.diversity()(0, 0) = 0.5;
  k.diversity()(1, 1) = 0.5;
  k.log_quality()[0] = 1.0;
  k.log_quality()[1] = 1.0;
  const JointSelection y{{0, 1}};
  // log det diag(0.25, 0.25) / 2.
  CHECK(*dq_ratio(k, y) == doctest::Approx(std::log(0.0625) / 2.0).epsilon(1e-12));
  k.log_quality()[1] = -1.0;
  CHECK_FALSE(dq_ratio(k, y).has_value());
}

TEST_CASE("QDppLearner greedy, joint value and explore agree with the kernel") {
  Rng rng(33, Stream::kTest);
  GroundSet gs(3, 4, 3);
  TrainConfig cfg;
  QDppLearner learner(oracle::random_kernel(gs, 5, rng), cfg);
  const std::vector<std::size_t> obs{1, 3, 0};
  const auto g = learner.greedy(obs);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == oracle_greedy(learner.export_kernel(), i, obs[i]));
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < 3; ++i) y.push_back(gs.index(i, obs[i], g[i]));
  CHECK(*learner.joint_value(obs, g) == doctest::Approx(oracle::joint_q(learner.export_kernel(), y)).epsilon(1e-10));
  Rng er(1, Stream::kSampler);
  CHECK(learner.explore(obs, 0.0, er, nullptr) == g);
  CHECK(learner.algorithm() == "qdpp");
}
