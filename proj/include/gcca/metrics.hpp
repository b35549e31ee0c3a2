#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "gcca/errors.hpp"
#include "gcca/signals.hpp"

namespace gcca {

/// g = A^T w and its unit-norm version.
struct GlobalVector {
  Vector g;
  Vector g_normalized;
};

inline GlobalVector global_vector(const Matrix& A, const Vector& w) {
  detail::require(A.rows() == w.size(), "global_vector: mixing matrix rows must equal demixing vector length");
  Vector g = A.transpose() * w;
  const double norm = g.norm();
  if (!(norm > 0.0)) throw precondition_error("global_vector: A^T w is zero (w orthogonal to every column of A)");
  return {g, g / norm};
}

inline constexpr double kPerformanceIndexFloorDb = -300.0;

/// 10 log10( (sum_l g_l^2 / max_l g_l^2 - 1) / (L - 1) ), clamped below at
/// -300 dB for perfect extraction.
inline double performance_index(const Vector& g) {
  detail::require(g.size() >= 2, "performance_index: need at least two components");
  detail::require(g.allFinite(), "performance_index: non-finite global vector");
  const Eigen::ArrayXd sq = g.array().square();
  const double peak = sq.maxCoeff();
  if (!(peak > 0.0)) throw std::invalid_argument("performance_index: zero global vector");
  const double ratio = (sq.sum() / peak - 1.0) / static_cast<double>(g.size() - 1);
  if (!(ratio > 0.0)) return kPerformanceIndexFloorDb;
  return std::max(10.0 * std::log10(ratio), kPerformanceIndexFloorDb);
}

inline double performance_index(const GlobalVector& g) { return performance_index(g.g); }

struct SourceMatch {
  Eigen::Index index = -1;
  double correlation = 0.0;  // signed Pearson correlation with the matched source
};

inline double pearson_correlation(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  detail::require(a.size() == b.size() && a.size() >= 2, "pearson_correlation: length mismatch");
  const Eigen::RowVectorXd ac = a.array() - a.mean();
  const Eigen::RowVectorXd bc = b.array() - b.mean();
  const double na = ac.norm(), nb = bc.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw std::invalid_argument("pearson_correlation: zero-variance input");
  return ac.dot(bc) / (na * nb);
}

/// Source whose sample correlation with y has the largest magnitude.
inline SourceMatch match_source(const SignalMatrix& y, const SignalMatrix& sources) {
  detail::require(y.channel_count() == 1, "match_source: y must be a single channel");
  detail::require(y.sample_count() == sources.sample_count(), "match_source: length mismatch");
  SourceMatch best;
  for (Eigen::Index l = 0; l < sources.channel_count(); ++l) {
    const double c = pearson_correlation(y.channel(0), sources.channel(l));
    if (best.index < 0 || std::abs(c) > std::abs(best.correlation)) best = {l, c};
  }
  return best;
}

}  // namespace gcca
