#pragma once

// (Y, Z) reparameterized 1-layer transformer.
//
// Sign convention: J = log alpha_next is the objective and loss = -J. grad()
// returns dJ/d(Y, Z), which is the ascent direction for J and the descent
// direction for the loss; optimizers add it.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "scansnap/linalg.hpp"
#include "scansnap/seqgen.hpp"

namespace scansnap {

template <typename Scalar = double>
struct ModelState {
  Matrix<Scalar> Y;
  Matrix<Scalar> Z;

  static ModelState zeros(std::size_t M) {
    const auto m = static_cast<Eigen::Index>(M);
    return {Matrix<Scalar>::Zero(m, m), Matrix<Scalar>::Zero(m, m)};
  }
  std::size_t vocab_size() const { return static_cast<std::size_t>(Y.rows()); }
};

template <typename Scalar = double>
struct ForwardCache {
  Vector<Scalar> b;           // attention over context positions
  Vector<Scalar> pooled;      // X^T b
  Vector<Scalar> normalized;  // LN(X^T b)
  Vector<Scalar> alpha;
  Scalar loss = 0;
  bool zero_pooled = false;
};

template <typename Scalar = double>
struct GradPair {
  Matrix<Scalar> dY;
  Matrix<Scalar> dZ;
};

struct BatchStats {
  double mean_loss = 0.0;
  double grad_norm_y = 0.0;
  double grad_norm_z = 0.0;
};

namespace detail {

struct ContextCounts {
  std::vector<Token> tokens;
  std::vector<double> counts;
};

inline ContextCounts count_context(const SequenceSample& s, std::size_t M) {
  if (s.context.empty()) throw std::invalid_argument("model: empty context");
  if (s.last >= M || s.next >= M) throw std::out_of_range("model: token index out of range");
  std::vector<std::uint32_t> dense(M, 0);
  ContextCounts c;
  for (Token x : s.context) {
    if (x >= M) throw std::out_of_range("model: context token out of range");
    if (dense[x]++ == 0) c.tokens.push_back(x);
  }
  c.counts.reserve(c.tokens.size());
  for (Token x : c.tokens) c.counts.push_back(static_cast<double>(dense[x]));
  return c;
}

// Pooled attention restricted to the tokens present in the context.
template <typename Scalar>
Vector<Scalar> pooled_on_support(const ModelState<Scalar>& st, Token m, const ContextCounts& c,
                                 Scalar* max_logit = nullptr, Scalar* denom = nullptr) {
  const auto k = static_cast<Eigen::Index>(c.tokens.size());
  Vector<Scalar> a(k);
  for (Eigen::Index i = 0; i < k; ++i) a[i] = st.Z(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c.tokens[i]));
  const Scalar mx = a.maxCoeff();
  Vector<Scalar> p(k);
  for (Eigen::Index i = 0; i < k; ++i) p[i] = Scalar(c.counts[i]) * std::exp(a[i] - mx);
  const Scalar s = p.sum();
  if (max_logit) *max_logit = mx;
  if (denom) *denom = s;
  return p / s;
}

}  // namespace detail

template <typename Scalar>
ForwardCache<Scalar> forward(const ModelState<Scalar>& st, const SequenceSample& s) {
  const std::size_t M = st.vocab_size();
  const auto c = detail::count_context(s, M);
  Scalar mx, denom;
  const Vector<Scalar> p = detail::pooled_on_support(st, s.last, c, &mx, &denom);

  ForwardCache<Scalar> out;
  const auto m = static_cast<Eigen::Index>(s.last);
  out.b.resize(static_cast<Eigen::Index>(s.context.size()));
  for (std::size_t t = 0; t < s.context.size(); ++t)
    out.b[static_cast<Eigen::Index>(t)] = std::exp(st.Z(m, static_cast<Eigen::Index>(s.context[t])) - mx) / denom;
  out.pooled = Vector<Scalar>::Zero(static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < c.tokens.size(); ++i)
    out.pooled[static_cast<Eigen::Index>(c.tokens[i])] = p[static_cast<Eigen::Index>(i)];
  out.normalized = l2_normalized(out.pooled, &out.zero_pooled);
  const Vector<Scalar> logits = st.Y.transpose() * out.normalized;
  out.alpha = softmax(logits);
  out.loss = log_sum_exp(logits) - logits[static_cast<Eigen::Index>(s.next)];
  return out;
}

// Adds weight * dJ/d(Y, Z) for one sample into acc and returns the sample
// loss. Only rows of dY in the context support and row `last` of dZ are
// touched.
template <typename Scalar>
Scalar accumulate_grad(const ModelState<Scalar>& st, const SequenceSample& s, GradPair<Scalar>& acc,
                       Scalar weight = Scalar(1)) {
  const std::size_t M = st.vocab_size();
  const auto c = detail::count_context(s, M);
  const Vector<Scalar> p = detail::pooled_on_support(st, s.last, c);
  const auto k = static_cast<Eigen::Index>(c.tokens.size());
  const Scalar pn = p.norm();
  if (pn == Scalar(0)) throw std::runtime_error("model: zero pooled vector");
  const Vector<Scalar> phat = p / pn;

  const auto next = static_cast<Eigen::Index>(s.next);
  Vector<Scalar> logits = Vector<Scalar>::Zero(static_cast<Eigen::Index>(M));
  for (Eigen::Index i = 0; i < k; ++i)
    logits.noalias() += phat[i] * st.Y.row(static_cast<Eigen::Index>(c.tokens[i])).transpose();
  const Vector<Scalar> alpha = softmax(logits);
  const Scalar loss = log_sum_exp(logits) - logits[next];

  // g = Y (e_next - alpha), needed only on the context support.
  Vector<Scalar> g(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto r = static_cast<Eigen::Index>(c.tokens[i]);
    g[i] = st.Y(r, next) - st.Y.row(r).dot(alpha);
  }
  const Scalar proj = p.dot(g) / (pn * pn);

  Vector<Scalar> resid = -alpha;
  resid[next] += Scalar(1);
  const auto m = static_cast<Eigen::Index>(s.last);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto r = static_cast<Eigen::Index>(c.tokens[i]);
    acc.dY.row(r).noalias() += (weight * phat[i]) * resid.transpose();
    acc.dZ(m, r) += weight * p[i] * (g[i] - p[i] * proj) / pn;
  }
  return loss;
}

template <typename Scalar>
GradPair<Scalar> grad(const ModelState<Scalar>& st, const SequenceSample& s) {
  const auto M = static_cast<Eigen::Index>(st.vocab_size());
  GradPair<Scalar> g{Matrix<Scalar>::Zero(M, M), Matrix<Scalar>::Zero(M, M)};
  accumulate_grad(st, s, g);
  return g;
}

// Mean gradient over a batch, summed in batch order.
template <typename Scalar>
GradPair<Scalar> batch_grad(const ModelState<Scalar>& st, std::span<const SequenceSample> batch,
                            BatchStats* stats = nullptr) {
  if (batch.empty()) throw std::invalid_argument("model: empty batch");
  const auto M = static_cast<Eigen::Index>(st.vocab_size());
  GradPair<Scalar> g{Matrix<Scalar>::Zero(M, M), Matrix<Scalar>::Zero(M, M)};
  const Scalar w = Scalar(1) / Scalar(batch.size());
  Scalar loss(0);
  for (const auto& s : batch) loss += accumulate_grad(st, s, g, w);
  if (stats) {
    stats->mean_loss = static_cast<double>(loss * w);
    stats->grad_norm_y = static_cast<double>(g.dY.norm());
    stats->grad_norm_z = static_cast<double>(g.dZ.norm());
  }
  return g;
}

template <typename Scalar = double>
struct Velocity {
  Matrix<Scalar> vY;
  Matrix<Scalar> vZ;
};

// Heavy-ball momentum: v <- mu v + g; theta <- theta + lr v.
template <typename Scalar>
void sgd_step_inplace(ModelState<Scalar>& st, std::span<const SequenceSample> batch, Scalar lr_y, Scalar lr_z,
                      Scalar momentum, Velocity<Scalar>& v, BatchStats* stats = nullptr) {
  if (lr_y < 0 || lr_z < 0) throw std::invalid_argument("sgd_step: negative learning rate");
  if (momentum < 0) throw std::invalid_argument("sgd_step: negative momentum");
  const GradPair<Scalar> g = batch_grad(st, batch, stats);
  const auto M = static_cast<Eigen::Index>(st.vocab_size());
  if (v.vY.rows() != M) v.vY = Matrix<Scalar>::Zero(M, M);
  if (v.vZ.rows() != M) v.vZ = Matrix<Scalar>::Zero(M, M);
  v.vY = momentum * v.vY + g.dY;
  v.vZ = momentum * v.vZ + g.dZ;
  st.Y.noalias() += lr_y * v.vY;
  st.Z.noalias() += lr_z * v.vZ;
}

template <typename Scalar>
ModelState<Scalar> sgd_step(const ModelState<Scalar>& st, std::span<const SequenceSample> batch, Scalar lr_y,
                            Scalar lr_z, Scalar momentum, Velocity<Scalar>& v, BatchStats* stats = nullptr) {
  ModelState<Scalar> out = st;
  sgd_step_inplace(out, batch, lr_y, lr_z, momentum, v, stats);
  return out;
}

template <typename Scalar = double>
struct AdamMoments {
  Matrix<Scalar> mY, vY, mZ, vZ;
  long t = 0;
};

template <typename Scalar>
void adam_step_inplace(ModelState<Scalar>& st, std::span<const SequenceSample> batch, Scalar lr, Scalar beta1,
                       Scalar beta2, Scalar eps, AdamMoments<Scalar>& mom, BatchStats* stats = nullptr) {
  if (lr < 0) throw std::invalid_argument("adam_step: negative learning rate");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw std::invalid_argument("adam_step: betas must lie in [0, 1)");
  if (!(eps > 0)) throw std::invalid_argument("adam_step: eps must be positive");
  const GradPair<Scalar> g = batch_grad(st, batch, stats);
  const auto M = static_cast<Eigen::Index>(st.vocab_size());
  if (mom.t == 0) {
    mom.mY = mom.vY = mom.mZ = mom.vZ = Matrix<Scalar>::Zero(M, M);
  }
  ++mom.t;
  const Scalar c1 = Scalar(1) - std::pow(beta1, Scalar(mom.t));
  const Scalar c2 = Scalar(1) - std::pow(beta2, Scalar(mom.t));
  auto update = [&](Matrix<Scalar>& theta, Matrix<Scalar>& m, Matrix<Scalar>& v, const Matrix<Scalar>& d) {
    m = beta1 * m + (Scalar(1) - beta1) * d;
    v = beta2 * v + (Scalar(1) - beta2) * d.cwiseAbs2();
    theta.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  update(st.Y, mom.mY, mom.vY, g.dY);
  update(st.Z, mom.mZ, mom.vZ, g.dZ);
}

template <typename Scalar>
ModelState<Scalar> adam_step(const ModelState<Scalar>& st, std::span<const SequenceSample> batch, Scalar lr,
                             Scalar beta1, Scalar beta2, Scalar eps, AdamMoments<Scalar>& mom,
                             BatchStats* stats = nullptr) {
  ModelState<Scalar> out = st;
  adam_step_inplace(out, batch, lr, beta1, beta2, eps, mom, stats);
  return out;
}

// Runs w_n(s) = w_n(s-1) + eta_y (e_n - softmax(w_n(s-1))) from w_n(0) = 0 and
// returns max_s max_j |w_n(s) - (M-1) h*(s) zeta_n| over s <= steps.
// K is accepted for interface symmetry; a single class is fed every step.
double decoder_only_closed_form_check(std::size_t M, std::size_t K, double eta_y, std::size_t steps,
                                      std::size_t n);

}  // namespace scansnap
