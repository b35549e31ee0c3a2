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

namespace gcca {

// Online extraction maximizing
//   J(w) = E{y[n] e[n]} / E{y[n] y[n-1]},   e[n] = sum_{k=1..P} b_k y[n-k-1]
// i.e. the output is correlated with a fixed weighting of its lags 2..P+1 and
// normalized by its own lag-1 correlation, which carries no white-noise term.

struct DirectParams {
  std::vector<double> b{1.0};  // b_k weights lag k + 1
  double mu = 3e-4;
  double beta = 0.995;
  Eigen::Index warmup = 100;
  double sigma_guard = 1e-9;

  void validate() const {
    detail::require(!b.empty(), "DirectParams: b must have at least one coefficient");
    for (double v : b) detail::require(std::isfinite(v), "DirectParams: b must be finite");
    detail::require(std::isfinite(mu) && mu > 0.0, "DirectParams: mu must be positive");
    detail::require(beta >= 0.0 && beta < 1.0, "DirectParams: beta must lie in [0, 1)");
    detail::require(warmup >= 0, "DirectParams: warmup must be non-negative");
    detail::require(sigma_guard >= 0.0, "DirectParams: sigma_guard must be non-negative");
  }

  Eigen::Index order() const noexcept { return static_cast<Eigen::Index>(b.size()); }
};

struct DirectStep {
  double y = 0.0;
  double e = 0.0;
  bool updated = false;
  bool skipped = false;  // warm, but |sigma_y| below the guard
};

class DirectExtractor {
 public:
  DirectExtractor(Eigen::Index channels, DirectParams params, std::uint64_t seed)
      : DirectExtractor(random_unit_vector(channels, seed), std::move(params)) {}

  /// Starts from w0 / |w0|.
  DirectExtractor(const Vector& w0, DirectParams params) : params_(std::move(params)) {
    params_.validate();
    detail::require(w0.size() >= 1 && w0.allFinite() && w0.norm() > 0.0, "DirectExtractor: invalid initial w");
    w_ = w0.normalized();
    const Eigen::Index m = w_.size();
    history_ = DelayLine(m, params_.order() + 1);
    x_hat_ = Vector::Zero(m);
    delta_ = Vector::Zero(m);
  }

  DirectStep step(const Eigen::Ref<const Vector>& x) {
    detail::require(x.size() == w_.size(), "DirectExtractor::step: snapshot size mismatch");
    const Eigen::Index order = params_.order();
    const double y = w_.dot(x);
    const double y1 = history_.y(1);
    double e = 0.0;
    x_hat_.setZero();
    for (Eigen::Index k = 1; k <= order; ++k) {
      const double bk = params_.b[static_cast<std::size_t>(k - 1)];
      e += bk * history_.y(k + 1);
      x_hat_.noalias() += bk * history_.x(k + 1);
    }
    sigma_y_ = params_.beta * sigma_y_ + (1.0 - params_.beta) * y * y1;

    DirectStep out{y, e, false, false};
    delta_.setZero();
    if (static_cast<Eigen::Index>(steps_) >= std::max(params_.warmup, order + 2)) {
      if (std::abs(sigma_y_) < params_.sigma_guard) {
        out.skipped = true;
        ++skipped_;
      } else {
        const auto x1 = history_.x(1);
        const double scale = params_.mu / (sigma_y_ * sigma_y_);
        // (y x_hat + x e)(y y1) - (y e)(y x1 + x y1)
        delta_.noalias() = (y * y1) * (y * x_hat_ + e * x);
        delta_.noalias() -= (y * e) * (y * x1 + y1 * x);
        delta_ *= scale;
        w_ += delta_;
        w_.normalize();
        out.updated = true;
      }
    }
    history_.push(x, y);
    ++steps_;
    return out;
  }

  const Vector& w() const noexcept { return w_; }
  double sigma_y() const noexcept { return sigma_y_; }
  /// Raw update applied by the last step, before renormalization.
  const Vector& last_delta() const noexcept { return delta_; }
  const DirectParams& params() const noexcept { return params_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::uint64_t skipped_updates() const noexcept { return skipped_; }

 private:
  DirectParams params_;
  Vector w_;
  double sigma_y_ = 1.0;
  DelayLine history_;
  Vector x_hat_;
  Vector delta_;
  std::uint64_t steps_ = 0;
  std::uint64_t skipped_ = 0;
};

// Batch versions below use circular sample averages over the whole record.

/// x_hat[n] = sum_k b_k x[n-k-1] for every n.
inline Matrix direct_lag_mixture(const SignalMatrix& x, const std::vector<double>& b) {
  Matrix out = Matrix::Zero(x.channel_count(), x.sample_count());
  for (std::size_t k = 1; k <= b.size(); ++k)
    out += b[k - 1] * circular_delay(x.data(), static_cast<Eigen::Index>(k) + 1);
  return out;
}

/// E{y e} / E{y y[n-1]}.
inline double direct_cost(const Vector& w, const SignalMatrix& x, const std::vector<double>& b) {
  detail::require(w.size() == x.channel_count(), "direct_cost: w size mismatch");
  const Eigen::RowVectorXd y = w.transpose() * x.data();
  const Eigen::RowVectorXd e = w.transpose() * direct_lag_mixture(x, b);
  const Eigen::RowVectorXd y1 = circular_delay(y, 1);
  const double den = y.dot(y1);
  if (!(std::abs(den) > 0.0)) throw precondition_error("direct_cost: lag-1 output correlation vanishes");
  return y.dot(e) / den;
}

/// Full-expectation gradient
///   ( E{y x_hat + x e} E{y y1} - E{y e} E{y x1 + x y1} ) / E{y y1}^2.
inline Vector direct_gradient(const Vector& w, const SignalMatrix& x, const std::vector<double>& b) {
  detail::require(w.size() == x.channel_count(), "direct_gradient: w size mismatch");
  const double n = static_cast<double>(x.sample_count());
  const Matrix& xm = x.data();
  const Matrix x_hat = direct_lag_mixture(x, b);
  const Matrix x1 = circular_delay(xm, 1);
  const Eigen::RowVectorXd y = w.transpose() * xm;
  const Eigen::RowVectorXd e = w.transpose() * x_hat;
  const Eigen::RowVectorXd y1 = w.transpose() * x1;

  const double e_yy1 = y.dot(y1) / n;
  const double e_ye = y.dot(e) / n;
  const Vector d_num = (x_hat * y.transpose() + xm * e.transpose()) / n;
  const Vector d_den = (x1 * y.transpose() + xm * y1.transpose()) / n;
  if (!(std::abs(e_yy1) > 0.0)) throw precondition_error("direct_gradient: lag-1 output correlation vanishes");
  return (d_num * e_yy1 - e_ye * d_den) / (e_yy1 * e_yy1);
}

}  // namespace gcca
