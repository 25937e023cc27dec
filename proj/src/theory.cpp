#include "scansnap/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scansnap {

double h_star(std::size_t M, double eta_y, std::size_t s) {
  const double Md = static_cast<double>(M);
  double h = 0.0;
  for (std::size_t i = 0; i < s; ++i) h += eta_y / ((Md - 1.0) + std::exp(Md * h));
  return h;
}

std::vector<double> h_star_series(std::size_t M, double eta_y, std::size_t S) {
  const double Md = static_cast<double>(M);
  std::vector<double> out(S + 1, 0.0);
  for (std::size_t i = 1; i <= S; ++i) out[i] = out[i - 1] + eta_y / ((Md - 1.0) + std::exp(Md * out[i - 1]));
  return out;
}

HStarTable::HStarTable(std::size_t M, double eta_y) : M_(M), eta_y_(eta_y), values_{0.0} {}

double HStarTable::operator()(std::size_t s) {
  const double Md = static_cast<double>(M_);
  while (values_.size() <= s) {
    const double h = values_.back();
    values_.push_back(h + eta_y_ / ((Md - 1.0) + std::exp(Md * h)));
  }
  return values_[s];
}

double h_continuous(std::size_t M, double eta_y, double t) {
  if (t < 0.0) throw std::invalid_argument("h_continuous: t must be >= 0");
  const double Md = static_cast<double>(M);
  const double rhs = Md * eta_y * t;  // RHS - 1
  if (rhs == 0.0) return 0.0;
  // Work in x = M h: f(x) = expm1(x) + (M-1) x - M eta_y t, increasing, with
  // f(0) < 0 <= f(ln(M eta_y t + 1)).
  auto f = [&](double x) { return std::expm1(x) + (Md - 1.0) * x - rhs; };
  double lo = 0.0;
  double hi = std::log1p(rhs);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {
    const double step = f(x) / (std::exp(x) + Md - 1.0);
    x = std::clamp(x - step, lo, hi);
  }
  return x / Md;
}

double h_continuous_residual(std::size_t M, double eta_y, double t, double h) {
  const double Md = static_cast<double>(M);
  const double rhs = Md * eta_y * t + 1.0;
  return std::abs(std::exp(Md * h) + (Md - 1.0) * Md * h - rhs) / rhs;
}

HCurve h_curve(std::size_t M, double eta_y, const std::vector<std::size_t>& s_grid) {
  HCurve c{M, eta_y, {}};
  HStarTable hs(M, eta_y);
  for (std::size_t s : s_grid) c.samples.push_back({s, hs(s), h_continuous(M, eta_y, static_cast<double>(s))});
  return c;
}

namespace {
double gamma_from_h(std::size_t M, double h) {
  const double Md = static_cast<double>(M);
  return (Md - 1.0) * (Md - 1.0) * h / ((Md - 1.0) + std::exp(Md * h));
}
}  // namespace

double gamma_of_t(std::size_t M, std::size_t K, double eta_y, double t) {
  const double s = std::ceil(t / static_cast<double>(K));
  return gamma_from_h(M, h_continuous(M, eta_y, s));
}

double gamma_continuous(std::size_t M, std::size_t K, double eta_y, double t) {
  return gamma_from_h(M, h_continuous(M, eta_y, t / static_cast<double>(K)));
}

double big_gamma(std::size_t M, std::size_t K, double eta_y, double eta_z, double t) {
  const double h = h_continuous(M, eta_y, t / static_cast<double>(K));
  const double Mm1 = static_cast<double>(M) - 1.0;
  return (eta_z / eta_y) * static_cast<double>(K) * Mm1 * Mm1 * h * h / 2.0;
}

PhaseTimes phase_times(std::size_t M, std::size_t K, double eta_y, double c_prime) {
  if (M < 2) throw std::invalid_argument("phase_times: M must be >= 2");
  const double Md = static_cast<double>(M);
  const double lnM = std::log(Md);
  PhaseTimes p;
  p.small_vocab_warning = M <= 100;
  p.t0_prime = static_cast<double>(K) * lnM / eta_y;
  p.omega1 = std::log(c_prime * lnM * (Md - 1.0) / Md) / lnM;
  p.t0 = 2.0 * (1.0 + p.omega1) * static_cast<double>(K) * lnM / eta_y;
  return p;
}

double b_n_closed_form(std::size_t M, std::size_t K, double eta_y, double eta_z, double rho0, double t,
                       BnConvention conv) {
  const double Kd = static_cast<double>(K);
  const double base = std::pow(rho0, 4) / Kd;
  const double h = h_continuous(M, eta_y, t / Kd);
  const double Mm1 = static_cast<double>(M) - 1.0;
  const double drive = 2.0 * (eta_z / eta_y) * Kd * Mm1 * Mm1 * h * h;
  if (conv == BnConvention::Zeroed) return 0.25 * std::log1p(drive / base);
  return 0.25 * std::log(base + drive);
}

double b_n_scanning_branch(std::size_t M, std::size_t K, double eta_y, double eta_z, double rho0, double t) {
  const double Md = static_cast<double>(M);
  const double Kd = static_cast<double>(K);
  return 0.25 * std::log(std::pow(rho0, 4) / Kd +
                         2.0 * (Md - 1.0) * (Md - 1.0) / (Kd * Md * Md) * eta_y * eta_z * t * t);
}

double b_n_snapping_branch(std::size_t M, std::size_t K, double eta_y, double eta_z, double rho0, double t) {
  const double Md = static_cast<double>(M);
  const double Kd = static_cast<double>(K);
  const double l = std::log(Md * eta_y * t / Kd);
  return 0.25 * std::log(std::pow(rho0, 4) / Kd + 2.0 * Kd * (Md - 1.0) * (Md - 1.0) / (Md * Md) *
                                                      (eta_z / eta_y) * l * l);
}

std::vector<CommonTokenOdeSample> simulate_common_token_ode(std::size_t M, std::size_t K, double eta_y,
                                                            double eta_z, double rho0, std::size_t steps) {
  if (steps < 1) throw std::invalid_argument("simulate_common_token_ode: steps must be >= 1");
  const double a = static_cast<double>(K) / std::pow(rho0, 4);
  std::vector<CommonTokenOdeSample> out;
  out.reserve(steps + 1);
  double z = 0.0;
  double B = 0.0;
  out.push_back({0, z, 0.0, B});
  for (std::size_t s = 1; s <= steps; ++s) {
    const double xi = a * gamma_continuous(M, K, eta_y, static_cast<double>(s)) * std::exp(4.0 * z);
    z -= eta_z * xi;
    B += eta_z * xi;
    if (!std::isfinite(z) || std::abs(z) > 500.0)
      throw std::overflow_error("simulate_common_token_ode: |z| exceeded 500 at step " + std::to_string(s));
    out.push_back({s, z, xi, B});
  }
  return out;
}

double default_rho0(const DatasetSpec& spec, std::size_t n, std::optional<Token> l) {
  const auto& c = spec.classes.at(n);
  Token tok = 0;
  if (l) {
    tok = *l;
  } else {
    const auto cts = common_tokens(spec);
    double best = -1.0;
    for (Token t : cts) {
      const double p = c.cond_prob[static_cast<Eigen::Index>(t)];
      if (p > best) {
        best = p;
        tok = t;
      }
    }
    if (best <= 0.0) throw std::invalid_argument("default_rho0: class has no common token");
  }
  const double p = c.cond_prob[static_cast<Eigen::Index>(tok)];
  if (p <= 0.0) throw std::invalid_argument("default_rho0: token not in class support");
  return c.cond_prob.norm() / p;
}

OverlapAlgebra overlap_algebra(const Eigen::MatrixXd& F) {
  const auto K = F.cols();
  OverlapAlgebra o;
  o.F = F;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
  o.E = F.transpose() * F - I;
  o.E = 0.5 * (o.E + o.E.transpose());
  o.E.diagonal().setZero();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(o.E);
  o.eigvals = es.eigenvalues();
  o.lambda1 = o.eigvals.cwiseAbs().maxCoeff();
  o.invertible = (o.eigvals.array() + 1.0).minCoeff() > 1e-12;
  o.lambda1_ok = o.lambda1 < 1.0 / static_cast<double>(K);
  o.lambda_floor_ok = o.eigvals.cwiseAbs().minCoeff() >= 6.0 / std::sqrt(static_cast<double>(F.rows()));
  if (o.invertible) {
    o.E_prime = I - (I + o.E).inverse();
  } else {
    o.E_prime = Eigen::MatrixXd::Constant(K, K, std::numeric_limits<double>::quiet_NaN());
  }
  return o;
}

FittedDecomposition gradient_decomposition(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& F, std::size_t n,
                                           Token next, const Eigen::VectorXd& alpha, std::optional<double> gamma) {
  const auto K = F.cols();
  if (Y.rows() != F.rows() || Y.cols() != alpha.size())
    throw std::invalid_argument("gradient_decomposition: dimension mismatch");
  if (static_cast<Eigen::Index>(n) >= K) throw std::out_of_range("gradient_decomposition: class index");
  Eigen::VectorXd resid = -alpha;
  resid[static_cast<Eigen::Index>(next)] += 1.0;
  const Eigen::VectorXd g = Y * resid;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(F);
  if (qr.rank() < K) throw std::invalid_argument("gradient_decomposition: F is rank deficient");
  FittedDecomposition d;
  d.coeffs = qr.solve(g);
  d.g_norm = g.norm();
  d.residual_norm = (g - F * d.coeffs).norm();

  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::VectorXd overlaps = F.transpose() * F.col(ni);
  d.xi = 0.0;
  for (Eigen::Index k = 0; k < K; ++k)
    if (k != ni) d.xi -= d.coeffs[k] * overlaps[k];

  if (gamma) {
    d.gamma_fit = *gamma;
  } else {
    const OverlapAlgebra o = overlap_algebra(F);
    d.gamma_fit = d.coeffs[ni] / (1.0 - o.E_prime(ni, ni));
  }
  d.betas = Eigen::VectorXd::Zero(K);
  if (d.gamma_fit != 0.0) {
    d.iota = d.coeffs[ni] / d.gamma_fit;
    for (Eigen::Index k = 0; k < K; ++k)
      if (k != ni) d.betas[k] = -d.coeffs[k] / d.gamma_fit;
  }
  return d;
}

Eigen::MatrixXd constructed_decoder(const Eigen::MatrixXd& F, const std::vector<Token>& next_tokens, double h) {
  const auto M = F.rows();
  const auto K = F.cols();
  if (static_cast<Eigen::Index>(next_tokens.size()) != K)
    throw std::invalid_argument("constructed_decoder: need one next token per column of F");
  const double Md = static_cast<double>(M);
  Eigen::MatrixXd W(K, M);
  for (Eigen::Index k = 0; k < K; ++k) {
    W.row(k).setConstant(-1.0 / Md);
    W(k, static_cast<Eigen::Index>(next_tokens[static_cast<std::size_t>(k)])) += 1.0;
  }
  W *= (Md - 1.0) * h * Md / (Md - 1.0);
  const OverlapAlgebra o = overlap_algebra(F);
  if (!o.invertible) throw std::invalid_argument("constructed_decoder: I + E is singular");
  return F * (Eigen::MatrixXd::Identity(K, K) - o.E_prime) * W;
}

EpochEstimate epochs_for_epsilon(std::size_t M, std::size_t K, double eta_y, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epochs_for_epsilon: epsilon must be positive");
  const double Md = static_cast<double>(M);
  EpochEstimate e;
  e.big_o = static_cast<double>(K) / (epsilon * eta_y) * std::log(Md / epsilon);
  // ||e_n - alpha_n(s)||_2 = (M-1) / ((M-1) + exp(M h*(s))) * ||zeta_n||_2.
  const double zeta_norm = std::sqrt(Md / (Md - 1.0));
  double h = 0.0;
  std::size_t s = 0;
  constexpr std::size_t kCap = std::size_t{1} << 40;
  while ((Md - 1.0) / ((Md - 1.0) + std::exp(Md * h)) * zeta_norm > epsilon) {
    h += eta_y / ((Md - 1.0) + std::exp(Md * h));
    if (++s >= kCap) throw std::runtime_error("epochs_for_epsilon: iteration cap reached");
  }
  e.exact_per_class = s;
  e.exact_total = s * K;
  return e;
}

}  // namespace scansnap
