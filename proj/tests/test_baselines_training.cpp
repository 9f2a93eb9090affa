#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qdpp/baselines.hpp"
#include "qdpp/envs.hpp"
#include "qdpp/training.hpp"

using namespace qdpp;
using namespace qdpp::baselines;

TEST_CASE("TabularQ indexing, greedy ties and bounds") {
  TabularQ q(2, 3, 4);
  CHECK(q.values().size() == 24);
  CHECK(q.greedy(1, 2) == 0);
  q.at(1, 2, 3) = 2.0;
  q.at(1, 2, 1) = 2.0;
  CHECK(q.greedy(1, 2) == 1);
  CHECK(q.max_value(1, 2) == 2.0);
  CHECK(q.values()[(1 * 3 + 2) * 4 + 3] == 2.0);
  CHECK_THROWS_AS(q.at(2, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(q.at(0, 3, 0), std::out_of_range);
  CHECK_THROWS_AS(q.at(0, 0, 4), std::out_of_range);
}

TEST_CASE("IQL update by hand") {
  TabularQ q(2, 2, 2);
  q.at(0, 1, 0) = 1.0;
  q.at(1, 0, 1) = 3.0;
  const Transition t{{0, 1}, {1, 0}, 2.0, {1, 0}, false};
  const Transition* batch[] = {&t};
  const auto s = iql_train_step(q, batch, 0.5, 0.9);
  // Agent 0: target 2 + 0.9 * 1 = 2.9, error 2.9. Agent 1: target 2 + 0.9 * 3 = 4.7.
  CHECK(q.at(0, 0, 1) == doctest::Approx(1.45));
  CHECK(q.at(1, 1, 0) == doctest::Approx(2.35));
  CHECK(s.sq_td_error == doctest::Approx(2.9 * 2.9 + 4.7 * 4.7));
  CHECK(s.transitions == 1);

  const Transition end{{0, 1}, {1, 0}, 1.0, {1, 0}, true};
  const Transition* b2[] = {&end};
  iql_train_step(q, b2, 0.5, 0.9);
  CHECK(q.at(0, 0, 1) == doctest::Approx(1.45 + 0.5 * (1.0 - 1.45)));
}

TEST_CASE("VDN update by hand") {
  TabularQ q(2, 2, 2);
  q.at(0, 0, 1) = 0.5;
  q.at(1, 1, 0) = 0.25;
  q.at(0, 1, 1) = 1.0;
  q.at(1, 0, 0) = 2.0;
  const Transition t{{0, 1}, {1, 0}, 1.0, {1, 0}, false};
  const Transition* batch[] = {&t};
  const auto s = vdn_train_step(q, batch, 0.1, 0.5);
  // Joint 0.75; target 1 + 0.5 * (1 + 2) = 2.5; error 1.75 applied to both.
  CHECK(q.at(0, 0, 1) == doctest::Approx(0.675));
  CHECK(q.at(1, 1, 0) == doctest::Approx(0.425));
  CHECK(s.sq_td_error == doctest::Approx(1.75 * 1.75));
}

TEST_CASE("tables_as_kernel reproduces greedy and additive values") {
  Rng rng(41, Stream::kTest);
  TabularQ q(3, 4, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t o = 0; o < 4; ++o) {
      for (std::size_t a = 0; a < 3; ++a) q.at(i, o, a) = rng.normal();
    }
  }
  const QDppKernel k = tables_as_kernel(q, 5);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t o = 0; o < 4; ++o) CHECK(greedy_action(k, i, o) == q.greedy(i, o));
  }
  const std::vector<std::size_t> obs{1, 2, 3}, acts{0, 2, 1};
  const double additive = q.at(0, 1, 0) + q.at(1, 2, 2) + q.at(2, 3, 1);
  CHECK(joint_q(k, make_selection(k.ground_set(), obs, acts)) == doctest::Approx(additive).epsilon(1e-12));
  CHECK_THROWS_AS(tables_as_kernel(q, 2), std::invalid_argument);
}

TEST_CASE("TabularLearner interface") {
  GroundSet gs(2, 3, 2);
  TrainConfig cfg;
  cfg.feature_dim = 1;
  TabularLearner iql(TabularLearner::Kind::kIql, gs, cfg);
  TabularLearner vdn(TabularLearner::Kind::kVdn, gs, cfg);
  CHECK(iql.algorithm() == "iql");
  CHECK(vdn.algorithm() == "vdn");
  const std::vector<std::size_t> obs{0, 2}, acts{1, 1};
  CHECK_FALSE(iql.joint_value(obs, acts).has_value());
  CHECK(*vdn.joint_value(obs, acts) == 0.0);
  CHECK_FALSE(vdn.diversity_quality_ratio(obs).has_value());
  CHECK(vdn.export_kernel().feature_dim() == 2);
  Rng rng(1, Stream::kSampler);
  CHECK(iql.explore(obs, 0.0, rng, nullptr) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("metrics header and row format") {
  CHECK(metrics_header() ==
        "step,episode,mean_return,td_loss,penalty,dq_ratio,igm_rate,epsilon,degenerate_samples,wallclock_s");
  MetricsRow r;
  r.step = 1000;
  r.episode = 42;
  r.mean_return = 13.0;
  r.td_loss = 0.125;
  r.igm_rate = 1.0;
  r.epsilon = 0.05;
  r.degenerate_samples = 3;
  CHECK(format_metrics_row(r) == "1000,42,13,0.125,nan,nan,1,0.05,3,0");
  std::ostringstream os;
  write_metrics_csv(os, std::vector<MetricsRow>{r});
  CHECK(os.str() == metrics_header() + "\n" + format_metrics_row(r) + "\n");
}

TEST_CASE("make_learner dispatches on algo") {
  const auto spec = envs::MatrixGame().spec();
  Rng rng(1, Stream::kInit);
  TrainConfig cfg;
  for (const char* a : {"qdpp", "iql", "vdn"}) {
    cfg.algo = a;
    CHECK(make_learner(cfg, spec, rng)->algorithm() == a);
  }
  cfg.algo = "coma";
  CHECK_THROWS_AS(make_learner(cfg, spec, rng), ConfigError);
}

TEST_CASE("evaluate_policy on the matrix game") {
  envs::MatrixGame g;
  Rng rng(1, Stream::kEval);
  const EvalResult r = evaluate_policy(g, [](std::span<const std::size_t>) {
    return std::vector<std::size_t>{0, 0};
  }, 4, rng);
  CHECK(r.returns == std::vector<double>{10, 10, 10, 10});
  CHECK(r.mean == 10.0);
  CHECK(r.stddev == 0.0);
  CHECK(g.done());  // the template is untouched
}

TEST_CASE("run_training with zero steps emits no rows") {
  envs::MatrixGame g;
  TrainConfig cfg = default_config("matrix");
  cfg.steps = 0;
  const TrainResult r = run_training(g, cfg);
  CHECK(r.rows.empty());
  CHECK(r.episodes == 0);
  CHECK(r.train_steps == 0);
  cfg.delta = 0.0;
  CHECK_THROWS_AS(run_training(g, cfg), ConfigError);
}

TEST_CASE("run_training is deterministic and emits well-formed rows") {
  envs::MatrixGame g;
  TrainConfig cfg = default_config("matrix");
  cfg.steps = 2500;
  cfg.metrics_interval = 1000;
  cfg.eval_episodes = 2;
  std::vector<MetricsRow> streamed;
  const TrainResult a = run_training(g, cfg, [&](const MetricsRow& r) { streamed.push_back(r); });
  const TrainResult b = run_training(g, cfg);
  REQUIRE(a.rows.size() == 3);
  CHECK(a.rows == b.rows);
  CHECK(streamed == a.rows);
  CHECK(a.rows[0].step == 1000);
  CHECK(a.rows[2].step == 2500);
  for (const auto& r : a.rows) {
    REQUIRE(r.mean_return.has_value());
    CHECK(*r.mean_return >= 0.0);
    CHECK(*r.mean_return <= 13.0);
    CHECK(r.wallclock_s == 0.0);
    if (r.igm_rate) {
      CHECK(*r.igm_rate >= 0.0);
      CHECK(*r.igm_rate <= 1.0);
    }
  }
  CHECK(a.rows[2].epsilon == doctest::Approx(cfg.epsilon_at(2499)));
  CHECK(a.train_steps > 0);

  cfg.seed = 2;
  CHECK_FALSE(run_training(g, cfg).rows == a.rows);
}

TEST_CASE("baseline runs report no penalty or ratio") {
  envs::MatrixGame g;
  TrainConfig cfg = default_config("matrix");
  cfg.algo = "vdn";
  cfg.steps = 1500;
  cfg.eval_episodes = 1;
  const TrainResult r = run_training(g, cfg);
  REQUIRE_FALSE(r.rows.empty());
  for (const auto& row : r.rows) {
    CHECK_FALSE(row.penalty.has_value());
    CHECK_FALSE(row.dq_ratio.has_value());
    CHECK(row.degenerate_samples == 0);
  }
}
