#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

#include "gcca/errors.hpp"

namespace gcca {

/// Fixed-depth history of past mixture snapshots and extractor outputs.
/// Lag k (1 <= k <= depth) refers to the k-th most recent push; slots that
/// were never written read as zero.
class DelayLine {
 public:
  DelayLine() = default;
  DelayLine(Eigen::Index channels, Eigen::Index depth)
      : x_(Eigen::MatrixXd::Zero(channels, depth)), y_(Eigen::VectorXd::Zero(depth)) {
    detail::require(depth >= 1, "DelayLine: depth must be positive");
  }

  Eigen::Index depth() const noexcept { return y_.size(); }

  auto x(Eigen::Index lag) const { return x_.col(slot(lag)); }
  double y(Eigen::Index lag) const { return y_(slot(lag)); }

  void push(const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
    head_ = (head_ + 1) % depth();
    x_.col(head_) = x;
    y_(head_) = y;
  }

 private:
  Eigen::Index slot(Eigen::Index lag) const { return ((head_ - lag + 1) % depth() + depth()) % depth(); }

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::Index head_ = -1;  // slot of the most recent push
};

inline Eigen::VectorXd random_unit_vector(Eigen::Index size, std::uint64_t seed) {
  detail::require(size >= 1, "random_unit_vector: size must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(size);
  do {
    for (Eigen::Index i = 0; i < size; ++i) v(i) = normal(rng);
  } while (!(v.norm() > 1e-8));
  return v.normalized();
}

/// Column n of the result is column (n - k) mod N of m.
inline Eigen::MatrixXd circular_delay(const Eigen::MatrixXd& m, Eigen::Index k) {
  const Eigen::Index n = m.cols();
  k = ((k % n) + n) % n;
  if (k == 0) return m;
  Eigen::MatrixXd out(m.rows(), n);
  out.rightCols(n - k) = m.leftCols(n - k);
  out.leftCols(k) = m.rightCols(k);
  return out;
}

}  // namespace gcca
