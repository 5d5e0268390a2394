#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace hrpm {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Numerically stable softmax of a logit vector.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

/// log(sum(exp(x))) without overflow.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using std::exp;
  using std::log;
  const auto top = x.maxCoeff();
  return top + log((x.array() - top).exp().sum());
}

/// Shannon entropy in nats with the 0 log 0 = 0 convention.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  using std::log;
  Scalar h(0);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > Scalar(0)) h -= w(i) * log(w(i));
  }
  return h;
}

/// True when every entry is non-negative and the entries sum to one within tol.
template <typename Derived>
bool is_simplex(const Eigen::MatrixBase<Derived>& w, double tol = 1e-9) {
  if (w.size() == 0) return false;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(static_cast<double>(w(i))) || w(i) < 0) return false;
  }
  return std::abs(static_cast<double>(w.sum()) - 1.0) <= tol;
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
template <typename Derived>
VectorX<typename Derived::Scalar> simplex_project(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> input = v;
  const Eigen::Index n = input.size();
  std::vector<Scalar> sorted(input.data(), input.data() + n);
  std::sort(sorted.begin(), sorted.end(), [](Scalar a, Scalar b) { return a > b; });
  Scalar cumulative(0);
  Scalar theta(0);
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const Scalar candidate = (cumulative - Scalar(1)) / Scalar(k + 1);
    if (sorted[k] - candidate > Scalar(0)) theta = candidate;
  }
  VectorX<Scalar> w = (input.array() - theta).cwiseMax(Scalar(0)).matrix();
  // Clean up the rounding residue so the result sums to one exactly enough.
  return w / w.sum();
}

}  // namespace hrpm
