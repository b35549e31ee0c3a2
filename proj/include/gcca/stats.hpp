#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

#include "gcca/errors.hpp"
#include "gcca/signals.hpp"

namespace gcca {

struct LagCorrelation {
  Matrix matrix;
  Eigen::Index lag = 0;
  bool symmetrized = false;
  Eigen::Index sample_count = 0;
};

/// Coefficients of the two linear predictors
///   e[n] = y[n] - sum_{p=1..P}  b_p y[n-p]
///   f[n] = y[n] - sum_{p=1..Pd} d_p y[n-p]
/// The leading b_0 = d_0 = 1 is implicit and never stored.
struct PredictorCoeffs {
  std::vector<double> b;
  std::vector<double> d{1.0};

  void validate() const {
    detail::require(!b.empty(), "PredictorCoeffs: b must have at least one coefficient");
    detail::require(!d.empty(), "PredictorCoeffs: d must have at least one coefficient");
    for (double v : b) detail::require(std::isfinite(v), "PredictorCoeffs: b must be finite");
    for (double v : d) detail::require(std::isfinite(v), "PredictorCoeffs: d must be finite");
  }

  /// 1 + sum b_p^2
  double q_c() const { return 1.0 + std::inner_product(b.begin(), b.end(), b.begin(), 0.0); }
  /// 1 + sum d_p^2
  double a_c() const { return 1.0 + std::inner_product(d.begin(), d.end(), d.begin(), 0.0); }
};

/// +1 when p == 0 or q == 0, -1 otherwise.
constexpr double prediction_sign(int p, int q) noexcept { return (p == 0 || q == 0) ? 1.0 : -1.0; }

/// (1/(N-lag)) sum_{n=lag}^{N-1} x[n] x[n-lag]^T, optionally replaced by its
/// symmetric part.
inline LagCorrelation estimate_lag_correlation(const SignalMatrix& x, Eigen::Index lag, bool symmetrize) {
  const Eigen::Index n = x.sample_count();
  if (lag < 0 || 2 * lag >= n)
    throw std::invalid_argument("estimate_lag_correlation: lag " + std::to_string(lag) +
                                " outside [0, N/2) for N = " + std::to_string(n));
  const Eigen::Index count = n - lag;
  const auto& d = x.data();
  Matrix r = d.rightCols(count) * d.leftCols(count).transpose() / static_cast<double>(count);
  if (symmetrize) r = (0.5 * (r + r.transpose())).eval();
  return {std::move(r), lag, symmetrize, n};
}

/// Circular estimate (1/N) sum_n x[n] x[(n-lag) mod N]^T for any signed lag.
/// Unlike the linear estimate it satisfies R[-k] = R[k]^T exactly and every
/// sample product of a length-N window is stationary, which makes batch
/// identities between filtered outputs and lagged correlations hold to rounding.
inline Matrix circular_lag_correlation(const SignalMatrix& x, Eigen::Index lag) {
  const Eigen::Index n = x.sample_count();
  const Eigen::Index k = ((lag % n) + n) % n;
  const auto& d = x.data();
  Matrix r = Matrix::Zero(d.rows(), d.rows());
  if (k == 0) {
    r.noalias() = d * d.transpose();
  } else {
    // x[n] pairs with x[n-k] for n >= k, and with x[n-k+N] for n < k.
    r.noalias() = d.rightCols(n - k) * d.leftCols(n - k).transpose();
    r.noalias() += d.leftCols(k) * d.rightCols(k).transpose();
  }
  return r / static_cast<double>(n);
}

/// sum_{p != q} s_pq c_p c_q R[q-p] over p, q = 0..P with c_0 = 1, built from
/// circular correlations; symmetric by construction.
inline Matrix predictor_correlation_sum(const SignalMatrix& x, const std::vector<double>& coeffs) {
  const int order = static_cast<int>(coeffs.size());
  auto c = [&](int p) { return p == 0 ? 1.0 : coeffs[static_cast<std::size_t>(p - 1)]; };
  std::vector<Matrix> lagged(static_cast<std::size_t>(order) + 1);
  for (int k = 1; k <= order; ++k) lagged[static_cast<std::size_t>(k)] = circular_lag_correlation(x, k);
  Matrix sum = Matrix::Zero(x.channel_count(), x.channel_count());
  for (int p = 0; p <= order; ++p) {
    for (int q = 0; q <= order; ++q) {
      if (p == q) continue;
      const int k = q - p;
      const Matrix& rk = lagged[static_cast<std::size_t>(std::abs(k))];
      const double w = prediction_sign(p, q) * c(p) * c(q);
      if (k > 0) sum += w * rk;
      else sum += w * rk.transpose();
    }
  }
  return sum;
}

/// Per-source sample autocorrelation rho[k] = (1/(N-k)) sum s[n] s[n-k] for
/// k = 0..max_lag.
inline std::vector<double> sample_autocorrelation(const SignalMatrix& s, Eigen::Index channel, Eigen::Index max_lag) {
  const Eigen::Index n = s.sample_count();
  detail::require(max_lag >= 0 && max_lag < n, "sample_autocorrelation: max_lag out of range");
  const auto row = s.channel(channel);
  std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1);
  for (Eigen::Index k = 0; k <= max_lag; ++k)
    rho[static_cast<std::size_t>(k)] = row.tail(n - k).dot(row.head(n - k)) / static_cast<double>(n - k);
  return rho;
}

/// sum_{p != q} s_pq c_p c_q rho[|q-p|], c_0 = 1.
inline double predictor_autocorrelation(const std::vector<double>& rho, const std::vector<double>& coeffs) {
  const int order = static_cast<int>(coeffs.size());
  auto c = [&](int p) { return p == 0 ? 1.0 : coeffs[static_cast<std::size_t>(p - 1)]; };
  double sum = 0.0;
  for (int p = 0; p <= order; ++p)
    for (int q = 0; q <= order; ++q)
      if (p != q) sum += prediction_sign(p, q) * c(p) * c(q) * rho[static_cast<std::size_t>(std::abs(q - p))];
  return sum;
}

/// Normalized autocorrelation r_hat_l / r_tilde_l of every source, where
/// r_hat uses the first predictor b and r_tilde the second predictor d. With
/// d = [1], r_tilde_l = 2 rho_l[1].
inline std::vector<double> normalized_autocorrelations(const SignalMatrix& sources, const PredictorCoeffs& coeffs) {
  coeffs.validate();
  const auto max_lag = static_cast<Eigen::Index>(std::max(coeffs.b.size(), coeffs.d.size()));
  detail::require(max_lag < sources.sample_count(), "normalized_autocorrelations: signal shorter than predictor");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(sources.channel_count()));
  for (Eigen::Index l = 0; l < sources.channel_count(); ++l) {
    const auto rho = sample_autocorrelation(sources, l, max_lag);
    const double r_hat = predictor_autocorrelation(rho, coeffs.b);
    const double r_tilde = predictor_autocorrelation(rho, coeffs.d);
    if (!(r_tilde > 1e-6 * rho[0]))
      throw precondition_error("normalized_autocorrelations: source " + std::to_string(l) +
                               " violates the positivity assumption on r_tilde (value " +
                               std::to_string(r_tilde) + ")");
    out.push_back(r_hat / r_tilde);
  }
  return out;
}

}  // namespace gcca
