#pragma once

// Infinite-sequence-length dynamics of the attention logits.
//
// In the T -> infinity limit the pooled attention of class n is c_n with
// c~_l = P(l|n) exp(z_l), and the logit row z_m of query token m evolves as
//
//   z_m' = eta_z sum_{n: psi(n)=m} diag(f_n) P_perp(f_n) g_n,  f_n = c_n/||c_n||,
//
// where g_n = Y (e_n - alpha_n) is the gradient reaching the pooled vector.
// With the analytic decomposition g_n = gamma (iota_n f_n - sum beta_nn' f_n')
// and beta = E' this becomes
//
//   z_m' = eta_z gamma sum_n diag(f_n) sum_{n'!=n} beta_nn' (f_n f_n^T - I) f_n'.

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "scansnap/seqgen.hpp"

namespace scansnap {

struct AttentionState {
  Eigen::VectorXd c_tilde;
  Eigen::VectorXd c;
  Eigen::VectorXd f;
};

AttentionState attention_from_z(const DatasetSpec& spec, std::size_t n, const Eigen::VectorXd& z_row);

// One logit row per query token in use.
struct LimitState {
  std::vector<Token> rows;
  Eigen::MatrixXd z;  // rows.size() x M
  std::size_t t = 0;

  static LimitState zeros(const DatasetSpec& spec);
  Eigen::Index row_of(Token m) const;
  Eigen::VectorXd row_for_class(const DatasetSpec& spec, std::size_t n) const;
};

struct GradDecomposition {
  double gamma = 0.0;
  double iota = 0.0;
  Eigen::VectorXd betas;
  double xi = 0.0;  // gamma * sum_{n'!=n} beta_nn' f_n^T f_n'
};

// gamma from the theory module; beta = E'(F), iota = 1 - E'_nn.
struct AnalyticSource {
  double gamma = 0.0;
};
// g_n = Y (e_n - softmax(Y^T f_n)) from a given decoder matrix.
struct TrainedSource {
  const Eigen::MatrixXd* Y = nullptr;
};
using DecompositionSource = std::variant<AnalyticSource, TrainedSource>;

struct LimitDerivative {
  Eigen::MatrixXd zdot;  // same shape as LimitState::z
  std::vector<AttentionState> attention;
  std::vector<GradDecomposition> decomposition;
};

// class_weights, when given, scales each class's contribution (used for the
// expected mini-batch dynamics); otherwise classes are summed.
LimitDerivative limit_z_derivative(const DatasetSpec& spec, const LimitState& state, double eta_z,
                                   const DecompositionSource& source,
                                   const Eigen::VectorXd* class_weights = nullptr);

enum class LimitSourceMode {
  Analytic,        // gamma(t) from h, beta from E'
  CoupledDecoder,  // Y integrated alongside z with prior-weighted classes
};

enum class LimitScheme {
  Euler,           // z <- z + zdot
  GainPreserving,  // z <- z - ln(1 - 2 zdot) / 2: Euler in e^{-2z}
};

struct LimitConfig {
  double eta_y = 1.0;
  double eta_z = 1.0;
  std::size_t steps = 1000;
  LimitSourceMode mode = LimitSourceMode::Analytic;
  LimitScheme scheme = LimitScheme::GainPreserving;
  // Keep every k-th record in the returned trajectory (0: first and last only).
  std::size_t record_every = 1;
};

// Step s advances z(s-1) -> z(s) with the derivative evaluated at z(s-1) and
// gamma_of_t(s). B accumulates eta_z * xi of each step.
struct LimitRecord {
  std::size_t t = 0;
  Eigen::MatrixXd z;
  std::vector<AttentionState> attention;
  Eigen::MatrixXd zdot;  // derivative used for the step into t (empty at t = 0)
  Eigen::VectorXd xi;    // per class, for the step into t
  Eigen::VectorXd B;     // per class, cumulative
  double gamma = 0.0;
};

struct LimitTrajectory {
  std::vector<Token> rows;
  std::vector<LimitRecord> records;
  Eigen::MatrixXd Y;  // final decoder in CoupledDecoder mode
};

using LimitObserver = std::function<void(const LimitRecord&)>;

// Throws DivergenceError when |z| exceeds the guard; the observer has seen
// every completed step by then.
LimitTrajectory integrate_limit(const DatasetSpec& spec, const LimitConfig& cfg, const LimitState* z0 = nullptr,
                                const LimitObserver& observer = {});

const LimitRecord& record_at(const LimitTrajectory& traj, std::size_t t);

struct RelativeGain {
  double measured = 0.0;   // f_l^2 / f_l'^2 - 1
  double predicted = 0.0;  // r(0) exp(2 (z_l(t) - z_l(0)))
};
RelativeGain relative_gain(const LimitTrajectory& traj, const DatasetSpec& spec, std::size_t n, Token l,
                           Token l_prime, std::size_t t);

struct GrowthBounds {
  double lower = 1.0;
  double chi = 1.0;
  double upper = 1.0;
  bool dominance_ok = false;  // l0 has the largest f among distinct tokens at t = 0
  bool holds() const { return lower <= chi && chi <= upper; }
};
GrowthBounds growth_factor_bounds(const LimitTrajectory& traj, const DatasetSpec& spec, std::size_t n, Token l0,
                                  std::size_t t);

enum class FateVerdict { Grew, Shrank, Mixed, Frozen };

struct TokenFate {
  Token row = 0;
  Token token = 0;
  TokenKind kind = TokenKind::Unused;
  FateVerdict verdict = FateVerdict::Frozen;
  bool covered = false;  // theory makes a sign prediction
  std::size_t violations = 0;
  std::size_t steps_checked = 0;
};

struct SymmetryCheck {
  bool zero_init = false;
  bool global_common = false;  // every CT in every class with one shared probability
  bool symmetric_distinct = false;
  bool balanced_rows = false;
  bool holds() const { return zero_init && global_common && symmetric_distinct && balanced_rows; }
};
SymmetryCheck symmetric_common_token_check(const DatasetSpec& spec, const Eigen::MatrixXd& z0,
                                           const std::vector<Token>& rows);

std::vector<TokenFate> token_fate_report(const DatasetSpec& spec, const LimitTrajectory& traj);

const char* to_string(FateVerdict v);

}  // namespace scansnap
