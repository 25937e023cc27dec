#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "scansnap/limit_dynamics.hpp"
#include "scansnap/linalg.hpp"
#include "scansnap/theory.hpp"

using namespace scansnap;

TEST(HStar, MatchesReferenceRecursion) {
  for (std::size_t M : {10, 30, 100})
    for (double eta : {0.1, 0.5, 1.0})
      for (long s : {0L, 1L, 7L, 200L, 5000L}) EXPECT_EQ(h_star(M, eta, s), oracle::h_star_ref(M, eta, s));
}

TEST(HStar, FrozenValues) {
  // h*(1) = eta / M; h*(2) = h*(1) + eta / (M - 1 + e^{eta}).
  EXPECT_DOUBLE_EQ(h_star(30, 1.0, 1), 1.0 / 30.0);
  EXPECT_DOUBLE_EQ(h_star(30, 1.0, 2), 1.0 / 30.0 + 1.0 / (29.0 + std::exp(1.0)));
}

TEST(HStar, TableAndSeriesAgree) {
  HStarTable t(100, 0.5);
  const auto series = h_star_series(100, 0.5, 1000);
  for (std::size_t s : {1000, 3, 500, 0}) EXPECT_EQ(t(s), series[s]);
}

TEST(HStar, MonotoneIncreasing) {
  const auto series = h_star_series(30, 0.5, 20000);
  for (std::size_t s = 1; s < series.size(); ++s) ASSERT_GT(series[s], series[s - 1]);
}

TEST(HContinuous, SolvesImplicitEquation) {
  for (std::size_t M : {10, 100, 1000})
    for (double eta : {0.1, 1.0})
      for (double t : {1e-3, 1.0, 37.0, 1e4, 1e8}) {
        const double h = h_continuous(M, eta, t);
        EXPECT_LT(h_continuous_residual(M, eta, t, h), 1e-10) << M << ' ' << eta << ' ' << t;
      }
  EXPECT_EQ(h_continuous(30, 1.0, 0.0), 0.0);
  EXPECT_THROW(h_continuous(30, 1.0, -1.0), std::invalid_argument);
}

TEST(HContinuous, GapToDiscrete) {
  const auto c = h_curve(30, 0.5, {1, 10, 100, 1000, 10000});
  for (const auto& x : c.samples) {
    EXPECT_GE(x.h_star - x.h_cont, 0.0);
    EXPECT_LE(x.h_star - x.h_cont, 2 * 0.5 / 30);
  }
}

TEST(Gamma, TwoStageEnvelope) {
  const std::size_t M = 1000, K = 10;
  for (double eta : {0.1, 0.5, 1.0}) {
    const PhaseTimes pt = phase_times(M, K, eta);
    for (double t = K; t <= pt.t0_prime; t += K) {
      const double r = gamma_of_t(M, K, eta, t) / (eta * t / K);
      EXPECT_GE(r, 1.0 / 8) << t;
      EXPECT_LE(r, 2.0) << t;
    }
    for (double t = std::ceil(pt.t0 / K) * K; t <= 1e6; t *= 1.5) {
      const double r = gamma_of_t(M, K, eta, t) * eta * t / (K * std::log(eta * t / K));
      EXPECT_GE(r, 1.0 / 8) << t;
      EXPECT_LE(r, 8.0) << t;
    }
  }
}

TEST(Gamma, CeilAndContinuousAgreeOnMultiplesOfK) {
  for (double t : {10.0, 100.0, 5000.0}) EXPECT_EQ(gamma_of_t(1000, 10, 0.5, t), gamma_continuous(1000, 10, 0.5, t));
}

TEST(PhaseTimes, FrozenValuesAndScaling) {
  const PhaseTimes p = phase_times(1000, 10, 0.5);
  EXPECT_NEAR(p.omega1, 0.27963414388170266, 1e-15);
  EXPECT_NEAR(p.t0_prime, 10 * std::log(1000.0) / 0.5, 1e-12);
  EXPECT_NEAR(p.t0, 2 * (1 + p.omega1) * p.t0_prime, 1e-12);
  EXPECT_FALSE(p.small_vocab_warning);
  EXPECT_TRUE(phase_times(30, 2, 1.0).small_vocab_warning);
  EXPECT_NEAR(phase_times(1000, 10, 0.25).t0, 2 * p.t0, 1e-9);
}

TEST(BigGamma, Formula) {
  const double h = h_continuous(1000, 0.5, 30.0);
  EXPECT_DOUBLE_EQ(big_gamma(1000, 10, 0.5, 0.25, 300.0), 0.5 * 10 * 999.0 * 999.0 * h * h / 2);
}

TEST(Bn, ConventionsAndMonotone) {
  const double rho = 1.3;
  EXPECT_EQ(b_n_closed_form(1000, 10, 0.5, 0.5, rho, 0.0, BnConvention::Zeroed), 0.0);
  EXPECT_NEAR(b_n_closed_form(1000, 10, 0.5, 0.5, rho, 0.0, BnConvention::Absolute), 0.25 * std::log(std::pow(rho, 4) / 10),
              1e-15);
  double prev = -1.0;
  for (double t = 0; t < 1e5; t = t * 1.3 + 1) {
    const double z = b_n_closed_form(1000, 10, 0.5, 0.5, rho, t, BnConvention::Zeroed);
    const double p = b_n_closed_form(1000, 10, 0.5, 0.5, rho, t, BnConvention::Absolute);
    EXPECT_GE(z, prev);
    EXPECT_NEAR(p - z, 0.25 * std::log(std::pow(rho, 4) / 10), 1e-12);
    prev = z;
  }
}

TEST(Bn, PhaseTransitionTimeValueDependsOnRatioOnly) {
  for (double nu : {1.0, 4.0}) {
    const auto at_t0 = [&](double ez) {
      const double ey = nu * ez;
      return b_n_closed_form(1000, 10, ey, ez, 1.0, phase_times(1000, 10, ey).t0, BnConvention::Absolute);
    };
    EXPECT_NEAR(at_t0(0.1), at_t0(1.0), 1e-12);
  }
}

TEST(Bn, BranchesApproximateClosedForm) {
  // Early: h ~ eta t / (K M); late: (M-1) h ~ ln(M eta t / K).
  const double early = b_n_closed_form(1000, 10, 0.5, 0.5, 1.0, 20.0, BnConvention::Absolute);
  EXPECT_NEAR(b_n_scanning_branch(1000, 10, 0.5, 0.5, 1.0, 20.0), early, 0.05);
  const double late = b_n_closed_form(1000, 10, 0.5, 0.5, 1.0, 1e7, BnConvention::Absolute);
  EXPECT_NEAR(b_n_snapping_branch(1000, 10, 0.5, 0.5, 1.0, 1e7), late, 0.05);
}

TEST(CommonTokenOde, BTracksClosedForm) {
  const auto ode = simulate_common_token_ode(1000, 10, 0.5, 0.5, 1.0, 10000);
  ASSERT_EQ(ode.size(), 10001u);
  EXPECT_EQ(ode[0].B, 0.0);
  for (std::size_t s = 1; s < ode.size(); ++s) {
    ASSERT_LT(ode[s].z, ode[s - 1].z);
    ASSERT_GT(ode[s].xi, 0.0);
  }
  const double closed = b_n_closed_form(1000, 10, 0.5, 0.5, 1.0, 10000.0, BnConvention::Zeroed);
  EXPECT_NEAR(ode.back().B / closed, 1.0, 2e-3);
  EXPECT_THROW(simulate_common_token_ode(1000, 10, 0.5, 0.5, 1.0, 0), std::invalid_argument);
}

TEST(Rho0, FromSpec) {
  const DatasetSpec s = build_syn_small();
  const double expect = s.classes[0].cond_prob.norm() / 0.025;
  EXPECT_DOUBLE_EQ(default_rho0(s, 0), expect);
  EXPECT_THROW(default_rho0(s, 0, Token{25}), std::invalid_argument);
}

TEST(Overlap, EPrimeDiagonalNonPositive) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index M = 20 + static_cast<Eigen::Index>(rng.below(30));
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.below(4));
    Eigen::MatrixXd F = oracle::gaussian(M, K, rng, 1.0).cwiseAbs();
    F.colwise().normalize();
    const OverlapAlgebra o = overlap_algebra(F);
    ASSERT_TRUE(o.invertible);
    ASSERT_LE(o.E_prime.diagonal().maxCoeff(), 1e-12);
  }
}

TEST(Overlap, OrthogonalColumnsGiveZeroCorrection) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(6, 3);
  F(0, 0) = F(2, 1) = F(4, 2) = 1.0;
  const OverlapAlgebra o = overlap_algebra(F);
  EXPECT_EQ(o.E.norm(), 0.0);
  EXPECT_LT(o.E_prime.norm(), 1e-15);
  EXPECT_TRUE(o.lambda1_ok);
  EXPECT_FALSE(o.lambda_floor_ok);
}

TEST(Decomposition, ConstructedDecoderRecoversEPrime) {
  Rng rng(5);
  const DatasetSpec spec = oracle::random_two_class(rng, 300, 40, 0.35);
  Eigen::MatrixXd F(300, 2);
  for (std::size_t n = 0; n < 2; ++n)
    F.col(static_cast<Eigen::Index>(n)) = attention_from_z(spec, n, Eigen::VectorXd::Zero(300)).f;
  const OverlapAlgebra o = overlap_algebra(F);
  ASSERT_TRUE(o.assumption_holds());
  const Eigen::MatrixXd Y = constructed_decoder(F, {0, 1}, h_continuous(300, 1.0, 100.0));
  for (std::size_t n = 0; n < 2; ++n) {
    const auto ni = static_cast<Eigen::Index>(n);
    const Eigen::VectorXd alpha = softmax(Y.transpose() * F.col(ni));
    const auto d = gradient_decomposition(Y, F, n, n, alpha);
    EXPECT_LT(d.residual_norm, 1e-10 * d.g_norm);
    EXPECT_NEAR(d.iota, 1.0 - o.E_prime(ni, ni), 1e-12);
    EXPECT_NEAR(d.betas[1 - ni], o.E_prime(1 - ni, ni), 3.0 / 300);
    EXPECT_EQ(d.betas[ni], 0.0);
    EXPECT_GT(d.xi, 0.0);
  }
}

TEST(Decomposition, RejectsRankDeficientF) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(4, 2);
  F(0, 0) = F(0, 1) = 1.0;
  EXPECT_THROW(gradient_decomposition(Eigen::MatrixXd::Identity(4, 4), F, 0, 0, Eigen::VectorXd::Constant(4, 0.25)),
               std::invalid_argument);
}

TEST(Epochs, SmallTargetsAndBound) {
  EXPECT_EQ(epochs_for_epsilon(30, 2, 1.0, std::sqrt(29.0 / 30.0) + 1e-12).exact_per_class, 0u);
  const auto e = epochs_for_epsilon(30, 2, 1.0, 0.01);
  EXPECT_EQ(e.exact_total, 2 * e.exact_per_class);
  // Check the stopping condition against the reference recursion.
  const auto s = static_cast<long>(e.exact_per_class);
  const auto dist = [](double h) { return 29.0 / (29.0 + std::exp(30.0 * h)) * std::sqrt(30.0 / 29.0); };
  EXPECT_LE(dist(oracle::h_star_ref(30, 1.0, s)), 0.01);
  EXPECT_GT(dist(oracle::h_star_ref(30, 1.0, s - 1)), 0.01);
  EXPECT_LE(static_cast<double>(e.exact_total), 10 * e.big_o);
  EXPECT_THROW(epochs_for_epsilon(30, 2, 1.0, 0.0), std::invalid_argument);
}
