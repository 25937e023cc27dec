#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <vector>

#include "scansnap/seqgen.hpp"

namespace scansnap {

// h*(s) = h*(s-1) + eta_y / ((M-1) + exp(M h*(s-1))), h*(0) = 0.
double h_star(std::size_t M, double eta_y, std::size_t s);
// Values h*(0..S).
std::vector<double> h_star_series(std::size_t M, double eta_y, std::size_t S);

// Memoized h* for repeated trajectory queries.
class HStarTable {
 public:
  HStarTable(std::size_t M, double eta_y);
  double operator()(std::size_t s);

 private:
  std::size_t M_;
  double eta_y_;
  std::vector<double> values_;
};

// Root of exp(M h) + (M-1) M h = M eta_y t + 1.
double h_continuous(std::size_t M, double eta_y, double t);
// |LHS - RHS| / RHS of the implicit equation at h.
double h_continuous_residual(std::size_t M, double eta_y, double t, double h);

struct HSample {
  std::size_t s;
  double h_star;
  double h_cont;
};
struct HCurve {
  std::size_t M;
  double eta_y;
  std::vector<HSample> samples;
};
HCurve h_curve(std::size_t M, double eta_y, const std::vector<std::size_t>& s_grid);

// (M-1)^2 h / ((M-1) + exp(M h)) evaluated at h = h(ceil(t / K)).
double gamma_of_t(std::size_t M, std::size_t K, double eta_y, double t);
// Same with h(t / K); this is the form whose integral has a closed form.
double gamma_continuous(std::size_t M, std::size_t K, double eta_y, double t);
// eta_z * integral_0^t gamma_continuous = (eta_z / eta_y) K (M-1)^2 h(t/K)^2 / 2.
double big_gamma(std::size_t M, std::size_t K, double eta_y, double eta_z, double t);

struct PhaseTimes {
  double t0_prime = 0.0;
  double t0 = 0.0;
  double omega1 = 0.0;
  bool small_vocab_warning = false;  // M <= 100
};
// t0' = K ln M / eta_y; omega1 from M^omega1 = c' ln(M) (M-1)/M;
// t0 = 2 (1 + omega1) K ln M / eta_y.
PhaseTimes phase_times(std::size_t M, std::size_t K, double eta_y, double c_prime = 1.0);

enum class BnConvention { Absolute, Zeroed };

// 1/4 ln(rho0^4/K + 2 (eta_z/eta_y) K (M-1)^2 h(t/K)^2); `Zeroed` subtracts
// the t = 0 value.
double b_n_closed_form(std::size_t M, std::size_t K, double eta_y, double eta_z, double rho0, double t,
                       BnConvention conv);
// Small-t and large-t asymptotic forms (absolute convention).
double b_n_scanning_branch(std::size_t M, std::size_t K, double eta_y, double eta_z, double rho0, double t);
double b_n_snapping_branch(std::size_t M, std::size_t K, double eta_y, double eta_z, double rho0, double t);

struct CommonTokenOdeSample {
  std::size_t t;
  double z;
  double xi;
  double B;  // zeroed: eta_z * sum of xi
};
// Euler steps of z' = -K rho0^-4 eta_z gamma(t) e^{4z}, xi = K rho0^-4 gamma e^{4z};
// step s advances t = s-1 -> s using gamma_continuous(s). Returns steps + 1
// samples starting at t = 0. Throws std::overflow_error if |z| > 500.
std::vector<CommonTokenOdeSample> simulate_common_token_ode(std::size_t M, std::size_t K, double eta_y,
                                                            double eta_z, double rho0, std::size_t steps);

// rho0 such that f_n^T f_n' = 1 / rho0^2 at z = 0 for the common token l:
// ||c_n(0)||_2 / P(l|n). With l unset, the largest-mass common token of
// class n is used.
double default_rho0(const DatasetSpec& spec, std::size_t n, std::optional<Token> l = std::nullopt);

struct OverlapAlgebra {
  Eigen::MatrixXd F;        // M x K, unit columns
  Eigen::MatrixXd E;        // F^T F - I
  Eigen::MatrixXd E_prime;  // I - (I + E)^-1
  Eigen::VectorXd eigvals;  // of E, ascending
  bool invertible = false;
  double lambda1 = 0.0;  // spectral radius of E
  bool lambda1_ok = false;      // |lambda_1| < 1/K
  bool lambda_floor_ok = false;  // |lambda_i| >= 6/sqrt(M) for all i
  bool assumption_holds() const { return lambda1_ok && lambda_floor_ok; }
};
OverlapAlgebra overlap_algebra(const Eigen::MatrixXd& F);

struct FittedDecomposition {
  Eigen::VectorXd coeffs;  // g ~= F coeffs
  double gamma_fit = 0.0;
  double iota = 0.0;
  Eigen::VectorXd betas;  // beta_{n n'}, zero at n' = n
  double xi = 0.0;        // sum_{n' != n} (gamma beta_{n n'}) f_n^T f_n'
  double residual_norm = 0.0;
  double g_norm = 0.0;
};
// Least-squares fit of g = Y (e_next - alpha) onto span(F). `next` is the
// target token of class n. Without a known gamma, gamma_fit is chosen so
// that iota equals 1 - E'_nn.
FittedDecomposition gradient_decomposition(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& F, std::size_t n,
                                           Token next, const Eigen::VectorXd& alpha,
                                           std::optional<double> gamma = std::nullopt);

// Y = F (I - E') Wbar with rows wbar_k = (M-1) h zeta_{next_k}.
Eigen::MatrixXd constructed_decoder(const Eigen::MatrixXd& F, const std::vector<Token>& next_tokens, double h);

struct EpochEstimate {
  double big_o = 0.0;               // (K / (eps eta_y)) ln(M / eps)
  std::size_t exact_per_class = 0;  // first s with ||e_n - alpha_n(s)|| <= eps
  std::size_t exact_total = 0;      // K * exact_per_class
};
EpochEstimate epochs_for_epsilon(std::size_t M, std::size_t K, double eta_y, double epsilon);

}  // namespace scansnap
