#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace scansnap {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Max-subtracted softmax.
template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> e = (x.array() - x.maxCoeff()).exp().matrix();
  return Vector<Scalar>(e / e.sum());
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using std::exp;
  using std::log;
  const auto mx = x.maxCoeff();
  return mx + log((x.array() - mx).exp().sum());
}

// x / ||x||_2. A zero input yields a zero vector and sets *was_zero.
template <typename Derived>
auto l2_normalized(const Eigen::MatrixBase<Derived>& x, bool* was_zero = nullptr) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = x.norm();
  if (was_zero) *was_zero = (n == Scalar(0));
  if (n == Scalar(0)) return Vector<Scalar>(Vector<Scalar>::Zero(x.size()));
  return Vector<Scalar>(x / n);
}

// Shannon entropy in nats with 0 ln 0 = 0.
template <typename Derived>
typename Derived::Scalar shannon_entropy(const Eigen::MatrixBase<Derived>& p) {
  using std::log;
  typename Derived::Scalar h(0);
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0) h -= p[i] * log(p[i]);
  return h;
}

}  // namespace scansnap
