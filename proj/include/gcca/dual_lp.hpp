#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "gcca/delay_line.hpp"
#include "gcca/errors.hpp"
#include "gcca/signals.hpp"
#include "gcca/stats.hpp"

namespace gcca {

// Dual linear predictor extraction. With y = w^T x and
//   e[n] = y[n] - sum_{p=1..P}  b_p y[n-p]
//   f[n] = y[n] - sum_{p=1..Pd} d_p y[n-p]
// the cost
//   J(w) = (q_c E{y^2} - E{e^2}) / (a_c E{y^2} - E{f^2})
// contains only lagged (p != q) output correlations, so spatially and
// temporally white noise cancels from both numerator and denominator.
// Minimizing J extracts the source with the smallest normalized
// autocorrelation r_hat / r_tilde.

struct DualParams {
  PredictorCoeffs coeffs;
  double mu = 0.0015;
  double beta_e = 0.975;
  double beta_y = 0.975;
  double beta_f = 0.975;
  Eigen::Index warmup = 100;
  bool normalize_w = false;
  double denominator_guard = 1e-9;

  void validate() const {
    coeffs.validate();
    detail::require(std::isfinite(mu) && mu > 0.0, "DualParams: mu must be positive");
    for (double beta : {beta_e, beta_y, beta_f})
      detail::require(beta >= 0.0 && beta < 1.0, "DualParams: forgetting factors must lie in [0, 1)");
    detail::require(warmup >= 0, "DualParams: warmup must be non-negative");
    detail::require(denominator_guard >= 0.0, "DualParams: denominator_guard must be non-negative");
  }

  Eigen::Index history_depth() const noexcept {
    return static_cast<Eigen::Index>(std::max(coeffs.b.size(), coeffs.d.size()));
  }
};

struct DualStep {
  double y = 0.0;
  double e = 0.0;
  double f = 0.0;
  bool updated = false;
  bool skipped = false;  // warm, but |a_c sigma_y - sigma_f| below the guard
};

class DualLPExtractor {
 public:
  DualLPExtractor(Eigen::Index channels, DualParams params, std::uint64_t seed)
      : DualLPExtractor(random_unit_vector(channels, seed), std::move(params)) {}

  /// Starts from w0 as given (no normalization).
  DualLPExtractor(const Vector& w0, DualParams params) : params_(std::move(params)) {
    params_.validate();
    detail::require(w0.size() >= 1 && w0.allFinite(), "DualLPExtractor: invalid initial w");
    w_ = w0;
    q_c_ = params_.coeffs.q_c();
    a_c_ = params_.coeffs.a_c();
    const Eigen::Index m = w_.size();
    history_ = DelayLine(m, params_.history_depth());
    x_hat_ = Vector::Zero(m);
    x_tilde_ = Vector::Zero(m);
    delta_ = Vector::Zero(m);
  }

  DualStep step(const Eigen::Ref<const Vector>& x) {
    detail::require(x.size() == w_.size(), "DualLPExtractor::step: snapshot size mismatch");
    const auto& b = params_.coeffs.b;
    const auto& d = params_.coeffs.d;
    const double y = w_.dot(x);
    double e = y, f = y;
    x_hat_ = x;
    x_tilde_ = x;
    for (std::size_t p = 1; p <= b.size(); ++p) {
      const auto lag = static_cast<Eigen::Index>(p);
      e -= b[p - 1] * history_.y(lag);
      x_hat_.noalias() -= b[p - 1] * history_.x(lag);
    }
    for (std::size_t p = 1; p <= d.size(); ++p) {
      const auto lag = static_cast<Eigen::Index>(p);
      f -= d[p - 1] * history_.y(lag);
      x_tilde_.noalias() -= d[p - 1] * history_.x(lag);
    }
    sigma_e_ = params_.beta_e * sigma_e_ + (1.0 - params_.beta_e) * e * e;
    sigma_y_ = params_.beta_y * sigma_y_ + (1.0 - params_.beta_y) * y * y;
    sigma_f_ = params_.beta_f * sigma_f_ + (1.0 - params_.beta_f) * f * f;

    DualStep out{y, e, f, false, false};
    delta_.setZero();
    if (static_cast<Eigen::Index>(steps_) >= std::max(params_.warmup, params_.history_depth())) {
      const double den = a_c_ * sigma_y_ - sigma_f_;
      if (std::abs(den) < params_.denominator_guard) {
        out.skipped = true;
        ++skipped_;
      } else {
        const double num = q_c_ * sigma_y_ - sigma_e_;
        // -(2 mu / den^2) [ (q_c y x - e x_hat) den - num (a_c y x - f x_tilde) ]
        delta_.noalias() = den * (q_c_ * y * x - e * x_hat_);
        delta_.noalias() -= num * (a_c_ * y * x - f * x_tilde_);
        delta_ *= -2.0 * params_.mu / (den * den);
        w_ += delta_;
        if (params_.normalize_w) w_.normalize();
        out.updated = true;
      }
    }
    history_.push(x, y);
    ++steps_;
    return out;
  }

  const Vector& w() const noexcept { return w_; }
  double q_c() const noexcept { return q_c_; }
  double a_c() const noexcept { return a_c_; }
  double sigma_e() const noexcept { return sigma_e_; }
  double sigma_y() const noexcept { return sigma_y_; }
  double sigma_f() const noexcept { return sigma_f_; }
  /// Update applied by the last step (zero when no update happened).
  const Vector& last_delta() const noexcept { return delta_; }
  const DualParams& params() const noexcept { return params_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::uint64_t skipped_updates() const noexcept { return skipped_; }

 private:
  DualParams params_;
  Vector w_;
  double q_c_ = 1.0;
  double a_c_ = 1.0;
  double sigma_e_ = 1.0;
  double sigma_y_ = 1.0;
  double sigma_f_ = 1.0;
  DelayLine history_;
  Vector x_hat_;
  Vector x_tilde_;
  Vector delta_;
  std::uint64_t steps_ = 0;
  std::uint64_t skipped_ = 0;
};

// Batch quantities below use circular sample averages over the whole record,
// so they agree exactly with the circular lagged-correlation expansion.

/// x[n] - sum_p c_p x[n-p] for every n.
inline Matrix prediction_error_mixture(const SignalMatrix& x, const std::vector<double>& coeffs) {
  Matrix out = x.data();
  for (std::size_t p = 1; p <= coeffs.size(); ++p)
    out -= coeffs[p - 1] * circular_delay(x.data(), static_cast<Eigen::Index>(p));
  return out;
}

/// Batch mean square prediction error E{e^2} of w^T x through 1 - sum c_p z^-p.
inline double prediction_error_power(const Vector& w, const SignalMatrix& x, const std::vector<double>& coeffs) {
  detail::require(w.size() == x.channel_count(), "prediction_error_power: w size mismatch");
  const Eigen::RowVectorXd e = w.transpose() * prediction_error_mixture(x, coeffs);
  return e.squaredNorm() / static_cast<double>(x.sample_count());
}

struct DualMoments {
  double power_y = 0.0;  // E{y^2}
  double power_e = 0.0;  // E{e^2}
  double power_f = 0.0;  // E{f^2}
  double numerator = 0.0;
  double denominator = 0.0;
};

inline DualMoments dual_moments(const Vector& w, const SignalMatrix& x, const PredictorCoeffs& coeffs) {
  coeffs.validate();
  detail::require(w.size() == x.channel_count(), "dual_moments: w size mismatch");
  DualMoments m;
  const Eigen::RowVectorXd y = w.transpose() * x.data();
  m.power_y = y.squaredNorm() / static_cast<double>(x.sample_count());
  m.power_e = prediction_error_power(w, x, coeffs.b);
  m.power_f = prediction_error_power(w, x, coeffs.d);
  m.numerator = coeffs.q_c() * m.power_y - m.power_e;
  m.denominator = coeffs.a_c() * m.power_y - m.power_f;
  return m;
}

/// (q_c E{y^2} - E{e^2}) / (a_c E{y^2} - E{f^2}).
inline double dual_cost(const Vector& w, const SignalMatrix& x, const PredictorCoeffs& coeffs) {
  const auto m = dual_moments(w, x, coeffs);
  if (!(m.denominator > 0.0))
    throw precondition_error("dual_cost: a_c E{y^2} - E{f^2} is not positive (r_tilde positivity assumption violated)");
  return m.numerator / m.denominator;
}

/// Full-expectation gradient of dual_cost:
///   2/den^2 [ (q_c E{y x} - E{e x_hat}) den - num (a_c E{y x} - E{f x_tilde}) ]
inline Vector dual_gradient(const Vector& w, const SignalMatrix& x, const PredictorCoeffs& coeffs) {
  coeffs.validate();
  detail::require(w.size() == x.channel_count(), "dual_gradient: w size mismatch");
  const double n = static_cast<double>(x.sample_count());
  const Matrix& xm = x.data();
  const Matrix x_hat = prediction_error_mixture(x, coeffs.b);
  const Matrix x_tilde = prediction_error_mixture(x, coeffs.d);
  const Eigen::RowVectorXd y = w.transpose() * xm;
  const Eigen::RowVectorXd e = w.transpose() * x_hat;
  const Eigen::RowVectorXd f = w.transpose() * x_tilde;
  const double q_c = coeffs.q_c(), a_c = coeffs.a_c();
  const double num = q_c * y.squaredNorm() / n - e.squaredNorm() / n;
  const double den = a_c * y.squaredNorm() / n - f.squaredNorm() / n;
  if (!(den > 0.0)) throw precondition_error("dual_gradient: cost denominator is not positive");
  const Vector e_yx = xm * y.transpose() / n;
  const Vector e_ex = x_hat * e.transpose() / n;
  const Vector e_fx = x_tilde * f.transpose() / n;
  return 2.0 / (den * den) * ((q_c * e_yx - e_ex) * den - num * (a_c * e_yx - e_fx));
}

struct DualPencil {
  Matrix numerator;    // sum_{p != q} s_pq b_p b_q R_xx[q-p]
  Matrix denominator;  // sum_{p != q} s_pq d_p d_q R_xx[q-p]
};

/// Pencil whose generalized Rayleigh quotient equals dual_cost exactly.
inline DualPencil dual_pencil(const SignalMatrix& x, const PredictorCoeffs& coeffs) {
  coeffs.validate();
  return {predictor_correlation_sum(x, coeffs.b), predictor_correlation_sum(x, coeffs.d)};
}

}  // namespace gcca
