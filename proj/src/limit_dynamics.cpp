#include "scansnap/limit_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "scansnap/errors.hpp"
#include "scansnap/linalg.hpp"
#include "scansnap/theory.hpp"

namespace scansnap {

AttentionState attention_from_z(const DatasetSpec& spec, std::size_t n, const Eigen::VectorXd& z_row) {
  const auto& cls = spec.classes.at(n);
  const auto M = cls.cond_prob.size();
  if (z_row.size() != M) throw std::invalid_argument("attention_from_z: z row length != M");
  double zmax = -std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < M; ++l)
    if (cls.cond_prob[l] > 0.0) zmax = std::max(zmax, z_row[l]);
  if (!std::isfinite(zmax)) throw std::invalid_argument("attention_from_z: empty support or non-finite z");

  AttentionState a;
  a.c_tilde = Eigen::VectorXd::Zero(M);
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(M);
  for (Eigen::Index l = 0; l < M; ++l) {
    if (cls.cond_prob[l] <= 0.0) continue;
    a.c_tilde[l] = cls.cond_prob[l] * std::exp(z_row[l]);
    scaled[l] = cls.cond_prob[l] * std::exp(z_row[l] - zmax);
  }
  const double s = scaled.sum();
  if (!(s > 0.0)) throw std::runtime_error("attention_from_z: all-zero scores");
  a.c = scaled / s;
  a.f = a.c / a.c.norm();
  return a;
}

LimitState LimitState::zeros(const DatasetSpec& spec) {
  LimitState s;
  s.rows = spec.last_tokens();
  s.z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.rows.size()), static_cast<Eigen::Index>(spec.vocab_size));
  return s;
}

Eigen::Index LimitState::row_of(Token m) const {
  const auto it = std::find(rows.begin(), rows.end(), m);
  if (it == rows.end()) throw std::out_of_range("LimitState: untracked query token " + std::to_string(m));
  return static_cast<Eigen::Index>(it - rows.begin());
}

Eigen::VectorXd LimitState::row_for_class(const DatasetSpec& spec, std::size_t n) const {
  return z.row(row_of(spec.classes.at(n).last_token)).transpose();
}

namespace {

Eigen::MatrixXd stack_f(const std::vector<AttentionState>& att) {
  Eigen::MatrixXd F(att.front().f.size(), static_cast<Eigen::Index>(att.size()));
  for (std::size_t n = 0; n < att.size(); ++n) F.col(static_cast<Eigen::Index>(n)) = att[n].f;
  return F;
}

}  // namespace

LimitDerivative limit_z_derivative(const DatasetSpec& spec, const LimitState& state, double eta_z,
                                   const DecompositionSource& source, const Eigen::VectorXd* class_weights) {
  const std::size_t K = spec.num_classes();
  const auto M = static_cast<Eigen::Index>(spec.vocab_size);
  if (state.z.cols() != M || state.z.rows() != static_cast<Eigen::Index>(state.rows.size()))
    throw std::invalid_argument("limit_z_derivative: state shape does not match spec");
  if (class_weights && class_weights->size() != static_cast<Eigen::Index>(K))
    throw std::invalid_argument("limit_z_derivative: class weight length != K");

  LimitDerivative d;
  d.zdot = Eigen::MatrixXd::Zero(state.z.rows(), M);
  for (std::size_t n = 0; n < K; ++n) d.attention.push_back(attention_from_z(spec, n, state.row_for_class(spec, n)));
  const Eigen::MatrixXd F = stack_f(d.attention);
  d.decomposition.resize(K);

  if (const auto* an = std::get_if<AnalyticSource>(&source)) {
    const OverlapAlgebra o = overlap_algebra(F);
    if (!o.invertible) throw std::runtime_error("limit_z_derivative: I + E is singular");
    for (std::size_t n = 0; n < K; ++n) {
      const auto ni = static_cast<Eigen::Index>(n);
      GradDecomposition& g = d.decomposition[n];
      g.gamma = an->gamma;
      g.iota = 1.0 - o.E_prime(ni, ni);
      g.betas = o.E_prime.row(ni).transpose();
      g.betas[ni] = 0.0;
      g.xi = 0.0;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(M);
      for (std::size_t k = 0; k < K; ++k) {
        if (k == n) continue;
        const auto ki = static_cast<Eigen::Index>(k);
        g.xi += g.betas[ki] * o.E(ni, ki);
        v += g.betas[ki] * (o.E(ni, ki) * F.col(ni) - F.col(ki));
      }
      g.xi *= g.gamma;
      const double w = class_weights ? (*class_weights)[ni] : 1.0;
      d.zdot.row(state.row_of(spec.classes[n].last_token)) +=
          (eta_z * g.gamma * w) * F.col(ni).cwiseProduct(v).transpose();
    }
  } else {
    const Eigen::MatrixXd& Y = *std::get<TrainedSource>(source).Y;
    if (Y.rows() != M || Y.cols() != M) throw std::invalid_argument("limit_z_derivative: Y must be M x M");
    for (std::size_t n = 0; n < K; ++n) {
      const auto ni = static_cast<Eigen::Index>(n);
      const Eigen::VectorXd f = F.col(ni);
      const Eigen::VectorXd alpha = softmax(Y.transpose() * f);
      Eigen::VectorXd resid = -alpha;
      resid[static_cast<Eigen::Index>(spec.classes[n].next_token)] += 1.0;
      const Eigen::VectorXd g = Y * resid;
      const double w = class_weights ? (*class_weights)[ni] : 1.0;
      d.zdot.row(state.row_of(spec.classes[n].last_token)) +=
          (eta_z * w) * f.cwiseProduct(g - f * f.dot(g)).transpose();
      GradDecomposition& dec = d.decomposition[n];
      try {
        const FittedDecomposition fit = gradient_decomposition(Y, F, n, spec.classes[n].next_token, alpha);
        dec.gamma = fit.gamma_fit;
        dec.iota = fit.iota;
        dec.betas = fit.betas;
        dec.xi = fit.xi;
      } catch (const std::invalid_argument&) {
        dec.betas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
        dec.xi = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return d;
}

namespace {

void check_guard(const Eigen::MatrixXd& z, std::size_t step) {
  if (!z.allFinite() || z.cwiseAbs().maxCoeff() > kDivergenceGuard)
    throw DivergenceError("limit dynamics: |z| exceeded " + std::to_string(kDivergenceGuard) + " at step " +
                          std::to_string(step));
}

}  // namespace

LimitTrajectory integrate_limit(const DatasetSpec& spec, const LimitConfig& cfg, const LimitState* z0,
                                const LimitObserver& observer) {
  if (cfg.steps < 1) throw std::invalid_argument("integrate_limit: steps must be >= 1");
  spec.validate();
  const std::size_t K = spec.num_classes();
  const std::size_t M = spec.vocab_size;
  const auto Mi = static_cast<Eigen::Index>(M);

  LimitState state = z0 ? *z0 : LimitState::zeros(spec);
  if (z0 && (state.z.cols() != Mi || state.rows.size() != static_cast<std::size_t>(state.z.rows())))
    throw std::invalid_argument("integrate_limit: z0 shape does not match spec");
  state.t = 0;

  LimitTrajectory traj;
  traj.rows = state.rows;
  const bool coupled = cfg.mode == LimitSourceMode::CoupledDecoder;
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(coupled ? Mi : 0, coupled ? Mi : 0);
  const Eigen::VectorXd prior = spec.prior();

  auto keep = [&](std::size_t s) {
    if (s == 0 || s == cfg.steps) return true;
    return cfg.record_every > 0 && s % cfg.record_every == 0;
  };

  LimitRecord rec;
  rec.t = 0;
  rec.z = state.z;
  for (std::size_t n = 0; n < K; ++n) rec.attention.push_back(attention_from_z(spec, n, state.row_for_class(spec, n)));
  rec.xi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  rec.B = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  if (observer) observer(rec);
  traj.records.push_back(rec);

  Eigen::VectorXd B = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  for (std::size_t s = 1; s <= cfg.steps; ++s) {
    double gamma = 0.0;
    LimitDerivative d;
    if (coupled) {
      d = limit_z_derivative(spec, state, cfg.eta_z, TrainedSource{&Y}, &prior);
    } else {
      gamma = gamma_of_t(M, K, cfg.eta_y, static_cast<double>(s));
      d = limit_z_derivative(spec, state, cfg.eta_z, AnalyticSource{gamma});
    }

    if (cfg.scheme == LimitScheme::GainPreserving) {
      const Eigen::ArrayXXd arg = 1.0 - 2.0 * d.zdot.array();
      if ((arg <= 0.0).any())
        throw DivergenceError("limit dynamics: step too large for the gain-preserving update at step " +
                              std::to_string(s));
      state.z.array() -= 0.5 * arg.log();
    } else {
      state.z += d.zdot;
    }
    if (coupled) {
      Eigen::MatrixXd Ydot = Eigen::MatrixXd::Zero(Mi, Mi);
      for (std::size_t n = 0; n < K; ++n) {
        const Eigen::VectorXd& f = d.attention[n].f;
        Eigen::VectorXd resid = -softmax(Y.transpose() * f);
        resid[static_cast<Eigen::Index>(spec.classes[n].next_token)] += 1.0;
        Ydot.noalias() += prior[static_cast<Eigen::Index>(n)] * f * resid.transpose();
      }
      Y += cfg.eta_y * Ydot;
    }
    check_guard(state.z, s);
    state.t = s;

    Eigen::VectorXd xi(static_cast<Eigen::Index>(K));
    for (std::size_t n = 0; n < K; ++n) xi[static_cast<Eigen::Index>(n)] = d.decomposition[n].xi;
    B += cfg.eta_z * xi;

    if (!observer && !keep(s)) continue;
    rec.t = s;
    rec.z = state.z;
    rec.attention.clear();
    for (std::size_t n = 0; n < K; ++n)
      rec.attention.push_back(attention_from_z(spec, n, state.row_for_class(spec, n)));
    rec.zdot = d.zdot;
    rec.xi = xi;
    rec.B = B;
    rec.gamma = gamma;
    if (observer) observer(rec);
    if (keep(s)) traj.records.push_back(rec);
  }
  traj.Y = Y;
  return traj;
}

const LimitRecord& record_at(const LimitTrajectory& traj, std::size_t t) {
  const auto it = std::lower_bound(traj.records.begin(), traj.records.end(), t,
                                   [](const LimitRecord& r, std::size_t v) { return r.t < v; });
  if (it == traj.records.end() || it->t != t)
    throw std::out_of_range("trajectory has no record at step " + std::to_string(t));
  return *it;
}

RelativeGain relative_gain(const LimitTrajectory& traj, const DatasetSpec& spec, std::size_t n, Token l,
                           Token l_prime, std::size_t t) {
  const auto li = static_cast<Eigen::Index>(l);
  const auto lpi = static_cast<Eigen::Index>(l_prime);
  const auto& cls = spec.classes.at(n);
  if (cls.cond_prob[li] <= 0.0 || cls.cond_prob[lpi] <= 0.0)
    throw std::invalid_argument("relative_gain: tokens must lie in the class support");
  const LimitRecord& r0 = traj.records.front();
  const LimitRecord& rt = record_at(traj, t);
  const auto row = static_cast<Eigen::Index>(
      std::find(traj.rows.begin(), traj.rows.end(), cls.last_token) - traj.rows.begin());
  auto ratio = [&](const LimitRecord& r) {
    const double fl = r.attention[n].f[li];
    const double flp = r.attention[n].f[lpi];
    if (flp == 0.0) throw std::domain_error("relative_gain: f_{n,l'} = 0");
    return fl * fl / (flp * flp) - 1.0;
  };
  RelativeGain g;
  g.measured = ratio(rt);
  g.predicted = ratio(r0) * std::exp(2.0 * (rt.z(row, li) - r0.z(row, li)));
  return g;
}

GrowthBounds growth_factor_bounds(const LimitTrajectory& traj, const DatasetSpec& spec, std::size_t n, Token l0,
                                  std::size_t t) {
  const auto& cls = spec.classes.at(n);
  const auto l0i = static_cast<Eigen::Index>(l0);
  const LimitRecord& r0 = traj.records.front();
  const LimitRecord& rt = record_at(traj, t);
  const auto row = static_cast<Eigen::Index>(
      std::find(traj.rows.begin(), traj.rows.end(), cls.last_token) - traj.rows.begin());

  GrowthBounds b;
  b.dominance_ok = true;
  const double f0 = r0.attention[n].f[l0i];
  for (Token l : distinct_tokens(spec, n))
    if (l != l0 && !(r0.attention[n].f[static_cast<Eigen::Index>(l)] < f0)) b.dominance_ok = false;
  const double Bn = rt.B[static_cast<Eigen::Index>(n)];
  b.chi = std::exp(2.0 * (rt.z(row, l0i) - r0.z(row, l0i)));
  b.lower = std::exp(2.0 * f0 * f0 * Bn);
  b.upper = std::exp(2.0 * Bn);
  return b;
}

SymmetryCheck symmetric_common_token_check(const DatasetSpec& spec, const Eigen::MatrixXd& z0,
                                           const std::vector<Token>& rows) {
  SymmetryCheck c;
  c.zero_init = z0.size() == 0 || z0.cwiseAbs().maxCoeff() == 0.0;

  const auto cts = common_tokens(spec);
  c.global_common = true;
  for (Token l : cts) {
    const double p0 = spec.classes[0].cond_prob[static_cast<Eigen::Index>(l)];
    for (const auto& cls : spec.classes) {
      const double p = cls.cond_prob[static_cast<Eigen::Index>(l)];
      if (!(p > 0.0) || std::abs(p - p0) > 1e-12) c.global_common = false;
    }
  }

  c.symmetric_distinct = true;
  std::vector<double> ref;
  for (std::size_t n = 0; n < spec.num_classes(); ++n) {
    std::vector<double> probs;
    for (Token l : distinct_tokens(spec, n)) probs.push_back(spec.classes[n].cond_prob[static_cast<Eigen::Index>(l)]);
    std::sort(probs.begin(), probs.end());
    if (n == 0) {
      ref = probs;
      continue;
    }
    if (probs.size() != ref.size()) {
      c.symmetric_distinct = false;
      continue;
    }
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (std::abs(probs[i] - ref[i]) > 1e-12) c.symmetric_distinct = false;
  }

  c.balanced_rows = true;
  const std::size_t first = spec.classes_with_last(rows.front()).size();
  for (Token m : rows)
    if (spec.classes_with_last(m).size() != first) c.balanced_rows = false;
  return c;
}

std::vector<TokenFate> token_fate_report(const DatasetSpec& spec, const LimitTrajectory& traj) {
  if (traj.records.size() < 2) throw std::invalid_argument("token_fate_report: trajectory too short");
  const auto roles = classify_tokens(spec);
  const bool single_ct = common_tokens(spec).size() == 1;
  const bool symmetric = symmetric_common_token_check(spec, traj.records.front().z, traj.rows).holds();

  std::vector<TokenFate> out;
  for (std::size_t r = 0; r < traj.rows.size(); ++r) {
    const Token m = traj.rows[r];
    const auto members = spec.classes_with_last(m);
    std::vector<Token> toks;
    for (std::size_t n : members)
      for (Token l : spec.classes[n].support()) toks.push_back(l);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());

    for (Token l : toks) {
      TokenFate fate;
      fate.row = m;
      fate.token = l;
      fate.kind = roles[l].kind;
      fate.covered = fate.kind == TokenKind::Distinct || single_ct || symmetric;
      std::size_t pos = 0, neg = 0, zero = 0;
      for (std::size_t i = 1; i < traj.records.size(); ++i) {
        const LimitRecord& rec = traj.records[i];
        const double v = rec.zdot(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(l));
        (v > 0.0 ? pos : (v < 0.0 ? neg : zero))++;
        ++fate.steps_checked;
        if (!fate.covered) continue;
        if (fate.kind == TokenKind::Distinct) {
          const auto owner = static_cast<Eigen::Index>(roles[l].owners.front());
          if (rec.xi[owner] > 0.0 && !(v > 0.0)) ++fate.violations;
        } else {
          double drive = 0.0;
          for (std::size_t n : members) drive = std::max(drive, rec.xi[static_cast<Eigen::Index>(n)]);
          if (drive > 0.0 && !(v < 0.0)) ++fate.violations;
        }
      }
      const std::size_t total = pos + neg + zero;
      fate.verdict = pos == total ? FateVerdict::Grew
                     : neg == total ? FateVerdict::Shrank
                     : zero == total ? FateVerdict::Frozen
                                     : FateVerdict::Mixed;
      out.push_back(fate);
    }
  }
  return out;
}

const char* to_string(FateVerdict v) {
  switch (v) {
    case FateVerdict::Grew: return "grew";
    case FateVerdict::Shrank: return "shrank";
    case FateVerdict::Mixed: return "mixed";
    case FateVerdict::Frozen: return "frozen";
  }
  return "?";
}

}  // namespace scansnap
