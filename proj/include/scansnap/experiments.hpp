#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scansnap/limit_dynamics.hpp"
#include "scansnap/model.hpp"
#include "scansnap/seqgen.hpp"

namespace scansnap {

// Entropy (nats) of c restricted to the distinct tokens of class n and
// renormalized.
double entropy_on_distinct(const AttentionState& c, const std::vector<TokenRole>& roles, std::size_t n);

// {0, 1, 2, 5, 10, 20, 50, ...} up to `steps`, plus `steps` itself.
std::vector<std::size_t> log_spaced_schedule(std::size_t steps);

enum class OptimizerKind { SgdMomentum, Adam };

struct TrainConfig {
  double eta_y = 1.0;
  double eta_z = 1.0;
  double momentum = 0.9;
  std::size_t batch = 128;
  std::size_t seq_len = 128;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::SgdMomentum;
  double adam_lr = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Stop early once ||dY||_F + ||dZ||_F of a training batch falls below this
  // value (0 disables).
  double grad_norm_threshold = 0.0;
  // Training-loss level whose first crossing is reported (negative: 0.1 ln M).
  double loss_threshold = -1.0;
  std::vector<std::size_t> snapshot_steps;  // empty: log_spaced_schedule(steps)
};

struct MetricRow {
  std::string run_id;
  std::size_t step = 0;
  std::size_t cls = 0;
  double entropy_distinct = 0.0;
  double c_top_mass = 0.0;
  Token c_top_token = 0;
  double loss = 0.0;
  double grad_norm_y = 0.0;
  double grad_norm_z = 0.0;
};

struct AttentionSnapshot {
  std::size_t step = 0;
  std::size_t cls = 0;
  Eigen::VectorXd c;
};

struct TrainResult {
  ModelState<double> state;
  std::vector<MetricRow> metrics;
  std::vector<AttentionSnapshot> snapshots;
  std::size_t steps_run = 0;
  std::optional<std::size_t> steps_to_loss_threshold;
  bool stopped_on_grad_norm = false;
  std::string rng_state;
};

struct TrainObserver {
  std::function<void(const MetricRow&)> on_metric;
  std::function<void(const AttentionSnapshot&)> on_snapshot;
};

// Mini-batch training from Y = Z = 0. Classes are drawn from the prior.
// Metrics at step s describe the state after s updates and use a separate
// evaluation batch. Throws DivergenceError on a non-finite loss or |Z| > 500.
TrainResult train(const DatasetSpec& spec, const TrainConfig& cfg, const std::string& run_id = "run",
                  const TrainObserver& observer = {});

// Batch 128, T = 128, momentum 0.9 on the Syn-Small spec.
TrainResult run_syn_small(double eta_y, double eta_z, std::uint64_t seed, std::size_t steps = 2000);

struct SignTest {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double p_value = 1.0;  // one-sided: P(X >= wins), X ~ Bin(wins + losses, 1/2)
};
// Tests a[i] > b[i] over paired samples.
SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b);

struct SweepConfig {
  // Unset: Syn-Medium built per (K, seed).
  std::optional<DatasetSpec> dataset;
  std::vector<std::size_t> K_grid{2, 5, 10};
  std::vector<double> eta_y_grid{1.0};
  std::vector<double> eta_z_grid{1.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t steps = 1000;
  std::size_t batch = 128;
  std::size_t seq_len = 128;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::SgdMomentum;
  std::size_t workers = 1;

  void validate() const;
};

struct SweepRun {
  std::size_t K = 0;
  double eta_y = 0.0;
  double eta_z = 0.0;
  std::uint64_t seed = 0;
  double final_entropy = 0.0;  // mean over classes of entropy_distinct
  double final_loss = 0.0;
  bool ok = false;
  std::string error;
};

struct SweepCell {
  std::size_t K = 0;
  double eta_y = 0.0;
  double eta_z = 0.0;
  std::size_t runs = 0;
  double mean = 0.0;
  double sem = 0.0;  // standard deviation of the mean
  bool complete = false;
};

struct SweepResult {
  std::vector<SweepRun> runs;  // ordered by (K, eta_y, eta_z, seed)
  std::vector<SweepCell> cells;
};

SweepResult run_entropy_sweep(const SweepConfig& cfg);

// Per (K, eta_z): the eta_y/eta_z ratio with the lowest mean entropy among
// complete cells. Entropy rises past it, so it is the empirical threshold.
struct RatioCrossing {
  std::size_t K = 0;
  double eta_z = 0.0;
  double ratio = 0.0;
  double mean = 0.0;
  std::size_t cells = 0;  // complete cells considered
};
std::vector<RatioCrossing> ratio_crossings(const SweepResult& r);

struct ConsistencyConfig {
  double eta_y = 1.0;
  double eta_z = 1.0;
  std::size_t steps = 200;
  std::vector<std::size_t> T_list{100, 1000, 10000, 100000};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<double> rho0;
};

struct ConsistencyRow {
  std::size_t T = 0;
  std::uint64_t seed = 0;
  double max_c_deviation = 0.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  std::vector<double> mean_deviation;  // per T, in T_list order
  std::size_t inversions = 0;          // adjacent T pairs where the mean grows
  double max_bn_rel_deviation = 0.0;   // limit B_n vs closed form (zeroed)
};

// (a) finite-T SGD without momentum on balanced batches (one sequence per
// class, weighted by the prior) against (b) the coupled limit dynamics with
// Euler steps, and (b)'s B_n against (c) the closed form.
ConsistencyReport consistency_study(const DatasetSpec& spec, const ConsistencyConfig& cfg);

// K classes over M tokens: token 0 is the only common token with mass
// ct_mass in every class; each class owns (M - K) / K distinct tokens (rounded
// down) with masses proportional to 1..D; all classes share query token M-1.
DatasetSpec build_single_common_token_spec(std::size_t K, std::size_t M, double ct_mass);

struct GrowthPoint {
  std::size_t t = 0;
  double chi = 1.0;
  double chi_lower = 1.0;
  double chi_upper = 1.0;
  double B_n = 0.0;         // common-token ODE, zeroed
  double B_n_closed = 0.0;  // closed form, zeroed
};

struct GrowthCurve {
  double eta_y = 0.0;
  double t0 = 0.0;
  double t0_prime = 0.0;
  Token l0 = 0;
  std::vector<GrowthPoint> points;  // every step 0..steps
  bool dominance_ok = false;
  std::size_t sandwich_violations = 0;
};

struct GrowthCurveConfig {
  std::size_t K = 10;
  std::size_t M = 1000;
  double eta_z = 0.5;
  std::vector<double> eta_y_grid{0.3, 0.5, 1.0};
  std::size_t steps = 8000;
  double ct_mass = 0.3;
  double c_prime = 1.0;
};

// Drives the distinct tokens of class 0 with the xi of the common-token ODE
// (z_l' = eta_z xi f_l^2, Euler) and tracks chi of its top distinct token l0.
std::vector<GrowthCurve> run_growth_curves(const GrowthCurveConfig& cfg);

// d ln chi / d ln t at t, by central differences over +-5% in t.
double log_slope(const GrowthCurve& curve, double t);

}  // namespace scansnap
