#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "scansnap/errors.hpp"
#include "scansnap/experiments.hpp"
#include "scansnap/theory.hpp"

using namespace scansnap;

TEST(EntropyOnDistinct, UniformAndPointMass) {
  const DatasetSpec spec = build_syn_small();
  const auto roles = classify_tokens(spec);
  AttentionState a;
  a.c = Eigen::VectorXd::Zero(30);
  for (int l = 10; l < 20; ++l) a.c[l] = 0.05;
  a.c[0] = 0.5;
  EXPECT_NEAR(entropy_on_distinct(a, roles, 0), std::log(10.0), 1e-14);
  a.c.setZero();
  a.c[13] = 1.0;
  EXPECT_EQ(entropy_on_distinct(a, roles, 0), 0.0);
  EXPECT_THROW(entropy_on_distinct(a, roles, 1), std::domain_error);
}

TEST(Schedule, LogSpaced) {
  EXPECT_EQ(log_spaced_schedule(120), (std::vector<std::size_t>{0, 1, 2, 5, 10, 20, 50, 100, 120}));
  EXPECT_EQ(log_spaced_schedule(100), (std::vector<std::size_t>{0, 1, 2, 5, 10, 20, 50, 100}));
  EXPECT_EQ(log_spaced_schedule(1), (std::vector<std::size_t>{0, 1}));
}

TEST(SignTest, BinomialTail) {
  const std::vector<double> ten_ones(10, 1.0);
  std::vector<double> b(10, 0.0);
  auto t = sign_test(ten_ones, b);
  EXPECT_EQ(t.wins, 10u);
  EXPECT_NEAR(t.p_value, 1.0 / 1024, 1e-15);
  b[0] = 2.0;
  t = sign_test(ten_ones, b);
  EXPECT_NEAR(t.p_value, 11.0 / 1024, 1e-15);
  b[1] = 2.0;
  EXPECT_GT(sign_test(ten_ones, b).p_value, 0.05);
  b[2] = 1.0;
  t = sign_test(ten_ones, b);
  EXPECT_EQ(t.ties, 1u);
  EXPECT_THROW(sign_test(ten_ones, {1.0}), std::invalid_argument);
}

TEST(Train, DeterministicAndShaped) {
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.seq_len = 32;
  cfg.steps = 20;
  cfg.seed = 3;
  const DatasetSpec spec = build_syn_small();
  const auto a = train(spec, cfg);
  const auto b = train(spec, cfg);
  EXPECT_EQ(a.state.Z, b.state.Z);
  EXPECT_EQ(a.steps_run, 20u);
  EXPECT_EQ(a.metrics.size(), 2 * log_spaced_schedule(20).size());
  EXPECT_EQ(a.metrics.front().step, 0u);
  EXPECT_NEAR(a.metrics.front().entropy_distinct, entropy_on_distinct(attention_from_z(spec, 0, Eigen::VectorXd::Zero(30)),
                                                                      classify_tokens(spec), 0),
              1e-14);
}

TEST(Train, DivergenceThrows) {
  TrainConfig cfg;
  cfg.batch = 4;
  cfg.seq_len = 32;
  cfg.steps = 50;
  cfg.eta_z = 1e6;
  EXPECT_THROW(train(build_syn_small(), cfg), DivergenceError);
}

TEST(Train, GradNormStop) {
  TrainConfig cfg;
  cfg.batch = 4;
  cfg.seq_len = 32;
  cfg.steps = 50;
  cfg.grad_norm_threshold = 1e9;
  const auto r = train(build_syn_small(), cfg);
  EXPECT_TRUE(r.stopped_on_grad_norm);
  EXPECT_LT(r.steps_run, 50u);
}

TEST(Sweep, DeterministicAcrossWorkerCounts) {
  SweepConfig cfg;
  cfg.K_grid = {2};
  cfg.eta_z_grid = {0.5, 1.0};
  cfg.seeds = {0, 1};
  cfg.steps = 10;
  cfg.batch = 8;
  cfg.seq_len = 32;
  const auto a = run_entropy_sweep(cfg);
  cfg.workers = 3;
  const auto b = run_entropy_sweep(cfg);
  ASSERT_EQ(a.runs.size(), 4u);
  ASSERT_EQ(a.cells.size(), 2u);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].final_entropy, b.runs[i].final_entropy);
    EXPECT_TRUE(a.runs[i].ok);
  }
  EXPECT_TRUE(a.cells[0].complete);
  EXPECT_NEAR(a.cells[0].mean, (a.runs[0].final_entropy + a.runs[1].final_entropy) / 2, 1e-15);
}

TEST(Sweep, ValidateRejectsEmptyGrid) {
  SweepConfig cfg;
  cfg.seeds.clear();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Consistency, FrozenAttentionIsExact) {
  ConsistencyConfig cfg;
  cfg.eta_z = 0.0;
  cfg.steps = 5;
  cfg.T_list = {10, 100};
  cfg.seeds = {0};
  const auto r = consistency_study(oracle::toy8(), cfg);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) EXPECT_EQ(row.max_c_deviation, 0.0);
}

TEST(Consistency, DeviationShrinksWithT) {
  ConsistencyConfig cfg;
  cfg.steps = 50;
  cfg.T_list = {100, 10000};
  cfg.seeds = {0, 1, 2};
  const auto r = consistency_study(oracle::toy8(), cfg);
  EXPECT_LT(r.mean_deviation[1], r.mean_deviation[0]);
  EXPECT_EQ(r.inversions, 0u);
}

TEST(SingleCommonToken, Layout) {
  const DatasetSpec s = build_single_common_token_spec(3, 20, 0.3);
  ASSERT_NO_THROW(s.validate());
  EXPECT_EQ(common_tokens(s), std::vector<Token>{0});
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_NEAR(s.classes[n].cond_prob[0], 0.3, 1e-15);
    EXPECT_EQ(distinct_tokens(s, n).size(), 6u);
    EXPECT_EQ(s.classes[n].last_token, 19u);
  }
  EXPECT_THROW(build_single_common_token_spec(1, 20, 0.3), std::invalid_argument);
}

TEST(GrowthCurves, SmallRunHasSandwichAndOrdering) {
  GrowthCurveConfig cfg;
  cfg.M = 200;
  cfg.K = 4;
  cfg.steps = 1500;
  const auto curves = run_growth_curves(cfg);
  ASSERT_EQ(curves.size(), 3u);
  for (const auto& c : curves) {
    EXPECT_EQ(c.sandwich_violations, 0u);
    EXPECT_TRUE(c.dominance_ok);
    ASSERT_EQ(c.points.size(), 1501u);
    EXPECT_EQ(c.points[0].chi, 1.0);
    for (std::size_t s = 1; s < c.points.size(); ++s) ASSERT_GE(c.points[s].chi, c.points[s - 1].chi);
  }
  EXPECT_GT(curves[0].points.back().chi, curves[2].points.back().chi);
  EXPECT_GT(log_slope(curves[1], 100.0), 0.0);
}

TEST(Sweep, RatioCrossingPicksMinimum) {
  SweepResult r;
  r.cells = {{2, 1.0, 1.0, 10, 1.5, 0.1, true},  {2, 2.0, 1.0, 10, 1.2, 0.1, true}, {2, 8.0, 1.0, 10, 1.9, 0.1, true},
             {2, 4.0, 1.0, 10, 0.1, 0.1, false}, {5, 1.0, 0.5, 10, 2.0, 0.1, true}};
  const auto c = ratio_crossings(r);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].ratio, 2.0);
  EXPECT_EQ(c[0].cells, 3u);
  EXPECT_EQ(c[1].K, 5u);
  EXPECT_EQ(c[1].ratio, 2.0);
}

TEST(EntropyOnDistinct, SynSmallAtInit) {
  const DatasetSpec spec = build_syn_small();
  // Distinct masses are proportional to 1..10.
  double h = 0.0;
  for (int k = 1; k <= 10; ++k) h -= k / 55.0 * std::log(k / 55.0);
  EXPECT_NEAR(entropy_on_distinct(attention_from_z(spec, 0, Eigen::VectorXd::Zero(30)), classify_tokens(spec), 0), h,
              1e-14);
}

TEST(Train, ZeroRatesKeepAttentionAtPrior) {
  TrainConfig cfg;
  cfg.eta_y = cfg.eta_z = 0.0;
  cfg.batch = 4;
  cfg.seq_len = 32;
  cfg.steps = 10;
  const DatasetSpec spec = build_syn_small();
  for (const auto& s : train(spec, cfg).snapshots) EXPECT_EQ(s.c, spec.classes[s.cls].cond_prob);
}

TEST(Consistency, LongSequencesTrackLimit) {
  ConsistencyConfig cfg;
  cfg.T_list = {100000};
  cfg.seeds = {0};
  const auto r = consistency_study(oracle::toy8(), cfg);
  EXPECT_LT(r.rows[0].max_c_deviation, 0.02);
}
