#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "scansnap/errors.hpp"
#include "scansnap/experiments.hpp"
#include "scansnap/limit_dynamics.hpp"
#include "scansnap/theory.hpp"

using namespace scansnap;

TEST(AttentionFromZ, ZeroLogitsGiveNormalizedProbabilities) {
  const DatasetSpec spec = build_syn_small();
  const auto a = attention_from_z(spec, 0, Eigen::VectorXd::Zero(30));
  const Eigen::VectorXd& P = spec.classes[0].cond_prob;
  EXPECT_LT((a.c - P).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((a.f - P / P.norm()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(attention_from_z(spec, 0, Eigen::VectorXd::Zero(29)), std::invalid_argument);
}

TEST(AttentionFromZ, ShiftInvariantAndReweights) {
  const DatasetSpec spec = oracle::toy8();
  Rng rng(1);
  const Eigen::VectorXd z = oracle::gaussian(8, 1, rng, 1.0);
  const auto a = attention_from_z(spec, 1, z);
  const auto b = attention_from_z(spec, 1, (z.array() + 3.0).matrix());
  EXPECT_LT((a.c - b.c).cwiseAbs().maxCoeff(), 1e-15);
  // c_l proportional to P(l) e^{z_l}.
  const Eigen::ArrayXd w = spec.classes[1].cond_prob.array() * z.array().exp();
  EXPECT_LT((a.c.array() - w / w.sum()).abs().maxCoeff(), 1e-15);
}

TEST(LimitDerivative, SignsAtZeroOnSynSmall) {
  const DatasetSpec spec = build_syn_small();
  const LimitState st = LimitState::zeros(spec);
  const auto d = limit_z_derivative(spec, st, 1.0, AnalyticSource{1.0});
  for (const auto& dec : d.decomposition) EXPECT_GT(dec.xi, 0.0);
  for (std::size_t n = 0; n < 2; ++n) {
    const auto r = st.row_of(spec.classes[n].last_token);
    for (Token l : distinct_tokens(spec, n)) EXPECT_GT(d.zdot(r, static_cast<Eigen::Index>(l)), 0.0) << l;
    for (Token l : common_tokens(spec)) EXPECT_LT(d.zdot(r, static_cast<Eigen::Index>(l)), 0.0) << l;
  }
}

TEST(LimitDerivative, TrainedSourceWithZeroDecoderIsZero) {
  const DatasetSpec spec = build_syn_small();
  const Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(30, 30);
  const auto d = limit_z_derivative(spec, LimitState::zeros(spec), 1.0, TrainedSource{&Y});
  EXPECT_EQ(d.zdot.norm(), 0.0);
}

TEST(LimitDerivative, ScalesWithEtaZ) {
  const DatasetSpec spec = oracle::toy8();
  const LimitState st = LimitState::zeros(spec);
  const auto a = limit_z_derivative(spec, st, 1.0, AnalyticSource{0.7});
  const auto b = limit_z_derivative(spec, st, 0.25, AnalyticSource{0.7});
  EXPECT_LT((0.25 * a.zdot - b.zdot).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(IntegrateLimit, RelativeGainMatchesPrediction) {
  const DatasetSpec spec = build_syn_small();
  LimitConfig cfg;
  cfg.steps = 2000;
  const auto traj = integrate_limit(spec, cfg);
  for (std::size_t t : {1, 10, 500, 2000}) {
    for (std::size_t n = 0; n < 2; ++n) {
      const auto d = distinct_tokens(spec, n);
      const auto g = relative_gain(traj, spec, n, d.back(), d.front(), t);
      EXPECT_LT(std::abs(g.measured - g.predicted), 1e-6 * std::max(1.0, std::abs(g.predicted))) << t;
    }
  }
}

TEST(IntegrateLimit, ObserverSeesEveryRecord) {
  const DatasetSpec spec = oracle::toy8();
  LimitConfig cfg;
  cfg.steps = 50;
  cfg.record_every = 10;
  std::vector<std::size_t> seen;
  const auto traj = integrate_limit(spec, cfg, nullptr, [&](const LimitRecord& r) { seen.push_back(r.t); });
  ASSERT_EQ(seen.size(), 51u);
  EXPECT_EQ(seen.front(), 0u);
  EXPECT_EQ(seen.back(), 50u);
  ASSERT_EQ(traj.records.size(), 6u);
  EXPECT_EQ(record_at(traj, 30).t, 30u);
  EXPECT_THROW(record_at(traj, 31), std::out_of_range);
}

TEST(IntegrateLimit, EulerAndGainPreservingAgreeForSmallSteps) {
  const DatasetSpec spec = oracle::toy8();
  LimitConfig cfg;
  cfg.eta_z = 0.01;
  cfg.steps = 200;
  cfg.record_every = 0;
  const auto a = integrate_limit(spec, cfg);
  cfg.scheme = LimitScheme::Euler;
  const auto b = integrate_limit(spec, cfg);
  const double scale = a.records.back().z.cwiseAbs().maxCoeff();
  ASSERT_GT(scale, 0.0);
  EXPECT_LT((a.records.back().z - b.records.back().z).cwiseAbs().maxCoeff(), 0.01 * scale);
}

TEST(IntegrateLimit, DivergesForHugeRate) {
  LimitConfig cfg;
  cfg.eta_z = 1e7;
  cfg.steps = 100;
  EXPECT_THROW(integrate_limit(oracle::toy8(), cfg), DivergenceError);
}

TEST(IntegrateLimit, CoupledModeRunsAndMovesDecoder) {
  LimitConfig cfg;
  cfg.mode = LimitSourceMode::CoupledDecoder;
  cfg.steps = 100;
  const auto traj = integrate_limit(oracle::toy8(), cfg);
  EXPECT_EQ(traj.Y.rows(), 8);
  EXPECT_GT(traj.Y.norm(), 0.0);
  EXPECT_LT(traj.Y.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(IntegrateLimit, BAccumulatesXi) {
  LimitConfig cfg;
  cfg.eta_z = 0.5;
  cfg.steps = 20;
  const auto traj = integrate_limit(build_syn_small(), cfg);
  double B = 0.0;
  for (std::size_t s = 1; s < traj.records.size(); ++s) {
    B += 0.5 * traj.records[s].xi[0];
    EXPECT_NEAR(traj.records[s].B[0], B, 1e-14);
  }
}

TEST(TokenFates, SynSmallDistinctGrowCommonShrink) {
  const DatasetSpec spec = build_syn_small();
  const LimitState z0 = LimitState::zeros(spec);
  EXPECT_TRUE(symmetric_common_token_check(spec, z0.z, z0.rows).holds());
  LimitConfig cfg;
  cfg.steps = 1000;
  const auto fates = token_fate_report(spec, integrate_limit(spec, cfg));
  for (const auto& f : fates) {
    if (f.kind == TokenKind::Unused) continue;
    EXPECT_TRUE(f.covered);
    EXPECT_EQ(f.violations, 0u) << f.token;
    EXPECT_EQ(f.verdict, f.kind == TokenKind::Distinct ? FateVerdict::Grew : FateVerdict::Shrank) << f.token;
  }
}

TEST(TokenFates, AsymmetricCommonTokensNotCovered) {
  const DatasetSpec spec = build_syn_medium(3, 10, 10, 0);
  const LimitState z0 = LimitState::zeros(spec);
  EXPECT_FALSE(symmetric_common_token_check(spec, z0.z, z0.rows).holds());
  LimitConfig cfg;
  cfg.steps = 50;
  std::size_t uncovered = 0;
  for (const auto& f : token_fate_report(spec, integrate_limit(spec, cfg))) {
    if (f.kind == TokenKind::Common) uncovered += !f.covered;
    if (f.kind == TokenKind::Distinct) EXPECT_TRUE(f.covered);
  }
  EXPECT_GT(uncovered, 0u);
  EXPECT_STREQ(to_string(FateVerdict::Grew), "grew");
}

TEST(GrowthBounds, SandwichOnSingleCommonToken) {
  // Query 9; token 0 shared; 1-4 and 5-8 distinct.
  DatasetSpec spec;
  spec.vocab_size = 10;
  for (std::size_t n = 0; n < 2; ++n) {
    SequenceClassSpec c;
    c.next_token = n;
    c.last_token = 9;
    c.cond_prob = Eigen::VectorXd::Zero(10);
    c.cond_prob[0] = 0.3;
    for (int k = 0; k < 4; ++k) c.cond_prob[1 + 4 * static_cast<int>(n) + k] = 0.7 * (k + 1) / 10.0;
    spec.classes.push_back(c);
  }
  LimitConfig cfg;
  cfg.steps = 300;
  const auto traj = integrate_limit(spec, cfg);
  for (std::size_t t : {1, 50, 300}) {
    const auto b = growth_factor_bounds(traj, spec, 0, 4, t);
    EXPECT_TRUE(b.dominance_ok);
    EXPECT_GE(b.chi, 1.0);
    EXPECT_LE(b.lower, b.upper);
  }
}

namespace {

// Two classes on disjoint supports sharing query token 6.
DatasetSpec disjoint_spec() {
  DatasetSpec s;
  s.vocab_size = 7;
  for (std::size_t n = 0; n < 2; ++n) {
    SequenceClassSpec c;
    c.next_token = n;
    c.last_token = 6;
    c.cond_prob = Eigen::VectorXd::Zero(7);
    for (int k = 0; k < 3; ++k) c.cond_prob[3 * static_cast<int>(n) + k] = (k + 1) / 6.0;
    s.classes.push_back(c);
  }
  return s;
}

}  // namespace

TEST(AttentionFromZ, SaturatesOnLargeLogit) {
  const DatasetSpec spec = build_syn_small();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(30);
  z[13] = 100.0;
  const auto a = attention_from_z(spec, 0, z);
  EXPECT_NEAR(a.c[13], 1.0, 1e-12);
  EXPECT_NEAR(a.c.sum(), 1.0, 1e-12);
  EXPECT_NEAR(a.f.norm(), 1.0, 1e-12);
}

TEST(LimitDerivative, DisjointSupportsAreFrozen) {
  const DatasetSpec spec = disjoint_spec();
  const auto d = limit_z_derivative(spec, LimitState::zeros(spec), 1.0, AnalyticSource{1.0});
  EXPECT_EQ(d.zdot.cwiseAbs().maxCoeff(), 0.0);
  LimitConfig cfg;
  cfg.steps = 20;
  for (const auto& f : token_fate_report(spec, integrate_limit(spec, cfg)))
    if (f.kind != TokenKind::Unused) EXPECT_EQ(f.verdict, FateVerdict::Frozen);
}

TEST(IntegrateLimit, ZeroRateKeepsZ) {
  LimitConfig cfg;
  cfg.eta_z = 0.0;
  cfg.steps = 30;
  const auto traj = integrate_limit(build_syn_small(), cfg);
  EXPECT_EQ(traj.records.back().z.cwiseAbs().maxCoeff(), 0.0);
  const auto b = growth_factor_bounds(traj, build_syn_small(), 0, 19, 30);
  EXPECT_EQ(b.chi, 1.0);
  EXPECT_EQ(b.lower, 1.0);
  EXPECT_EQ(b.upper, 1.0);
}

TEST(RelativeGain, TrivialCases) {
  const DatasetSpec spec = build_syn_small();
  LimitConfig cfg;
  cfg.steps = 10;
  const auto traj = integrate_limit(spec, cfg);
  const auto& P = spec.classes[0].cond_prob;
  EXPECT_NEAR(relative_gain(traj, spec, 0, 19, 10, 0).measured, std::pow(P[19] / P[10], 2) - 1, 1e-12);
  EXPECT_EQ(relative_gain(traj, spec, 0, 15, 15, 10).measured, 0.0);
  EXPECT_THROW(relative_gain(traj, spec, 0, 25, 10, 5), std::invalid_argument);
}

TEST(LimitDerivative, SingleCommonTokenShrinks) {
  const DatasetSpec spec = build_single_common_token_spec(2, 10, 0.3);
  const LimitState st = LimitState::zeros(spec);
  const auto d = limit_z_derivative(spec, st, 1.0, AnalyticSource{1.0});
  EXPECT_LT(d.zdot(st.row_of(9), 0), 0.0);
}
