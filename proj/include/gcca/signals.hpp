#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gcca/errors.hpp"
#include "gcca/linalg.hpp"
#include "gcca/seed.hpp"

namespace gcca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Multichannel time series stored channels x samples. Column n is the
/// snapshot x[n]; row c is the c-th channel over time.
class SignalMatrix {
 public:
  SignalMatrix() = default;

  explicit SignalMatrix(Matrix data) : data_(std::move(data)) {
    detail::require(data_.rows() >= 1 && data_.cols() >= 1,
                    "SignalMatrix: need at least one channel and one sample");
    detail::require(data_.allFinite(), "SignalMatrix: entries must be finite");
  }

  static SignalMatrix zeros(Eigen::Index channels, Eigen::Index samples) {
    return SignalMatrix(Matrix::Zero(channels, samples));
  }

  Eigen::Index channel_count() const noexcept { return data_.rows(); }
  Eigen::Index sample_count() const noexcept { return data_.cols(); }
  bool empty() const noexcept { return data_.size() == 0; }

  const Matrix& data() const noexcept { return data_; }
  double operator()(Eigen::Index c, Eigen::Index n) const { return data_(c, n); }
  auto snapshot(Eigen::Index n) const { return data_.col(n); }
  auto channel(Eigen::Index c) const { return data_.row(c); }

  friend bool operator==(const SignalMatrix& a, const SignalMatrix& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
           a.data_ == b.data_;
  }

 private:
  Matrix data_;
};

enum class FilterKind { all_pole, all_zero };

/// Shaping filter applied to unit-variance white Gaussian noise u[n].
///   all_pole: s[n] = u[n] + sum_{k=1..K} a_k s[n-k]   (coefficients = a_1..a_K)
///   all_zero: s[n] = sum_{k=0..K} c_k u[n-k]          (coefficients = c_0..c_K)
struct SourceFilter {
  FilterKind kind = FilterKind::all_zero;
  std::vector<double> coefficients{1.0};

  std::size_t order() const noexcept {
    if (kind == FilterKind::all_pole) return coefficients.size();
    return coefficients.empty() ? 0 : coefficients.size() - 1;
  }
};

struct SourceSpec {
  std::vector<SourceFilter> filters;
  std::uint64_t seed = 0;
  Eigen::Index length = 0;
  bool normalize_power = true;
};

/// x[n] = A s[n] + v[n], v white Gaussian with per-entry variance noise_variance.
struct MixtureModel {
  Matrix A;
  double noise_variance = 0.0;
  bool row_normalized = false;

  void validate() const;
};

/// True when 1 - sum a_k z^-k has every root strictly inside the unit
/// circle, decided by the step-down (reflection coefficient) recursion.
inline bool all_pole_is_stable(const std::vector<double>& feedback) {
  // alpha holds the monic polynomial 1 + alpha_1 z^-1 + ... + alpha_p z^-p.
  std::vector<double> alpha(feedback.size());
  std::transform(feedback.begin(), feedback.end(), alpha.begin(), [](double a) { return -a; });
  for (std::size_t m = alpha.size(); m >= 1; --m) {
    const double k = alpha[m - 1];
    if (!(std::abs(k) < 1.0)) return false;
    std::vector<double> lower(m - 1);
    const double denom = 1.0 - k * k;
    for (std::size_t i = 1; i < m; ++i) lower[i - 1] = (alpha[i - 1] - k * alpha[m - i - 1]) / denom;
    alpha = std::move(lower);
  }
  return true;
}

/// Three shaping filters with distinct, positive lag-1 autocorrelations
/// (0.85, 0.75, 0.62) whose one-step dual-predictor normalized
/// autocorrelations with the default b are roughly 0.04, 0.22 and 0.79.
inline std::vector<SourceFilter> default_source_filters() {
  return {
      {FilterKind::all_pole, {0.85}},
      {FilterKind::all_pole, {0.75}},
      {FilterKind::all_pole, {0.9, -0.45}},
  };
}

inline void validate_filter(const SourceFilter& f) {
  detail::require(!f.coefficients.empty(), "source filter: empty coefficient list");
  detail::require(std::all_of(f.coefficients.begin(), f.coefficients.end(),
                              [](double c) { return std::isfinite(c); }),
                  "source filter: coefficients must be finite");
  detail::require(std::any_of(f.coefficients.begin(), f.coefficients.end(),
                              [](double c) { return c != 0.0; }),
                  "source filter: at least one coefficient must be nonzero");
  if (f.kind == FilterKind::all_pole && !all_pole_is_stable(f.coefficients))
    throw std::invalid_argument("source filter: all-pole recursion is unstable (pole magnitude >= 1)");
}

/// L x N matrix of filtered white Gaussian sources. Source l is driven by its
/// own generator seeded from derive_seed(spec.seed, l); the first
/// 10 x order output samples are discarded as filter warm-up.
inline SignalMatrix generate_sources(const SourceSpec& spec) {
  detail::require(!spec.filters.empty(), "generate_sources: no source filters");
  std::size_t max_order = 0;
  for (const auto& f : spec.filters) {
    validate_filter(f);
    max_order = std::max(max_order, f.order());
  }
  detail::require(spec.length >= 1, "generate_sources: length must be positive");
  detail::require(spec.length >= static_cast<Eigen::Index>(10 * max_order),
                  "generate_sources: length must be at least 10 x the largest filter order");

  const auto n_sources = static_cast<Eigen::Index>(spec.filters.size());
  Matrix out(n_sources, spec.length);
  for (Eigen::Index l = 0; l < n_sources; ++l) {
    const SourceFilter& f = spec.filters[static_cast<std::size_t>(l)];
    const auto warmup = static_cast<Eigen::Index>(10 * f.order());
    const Eigen::Index total = warmup + spec.length;

    std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(l)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> u(static_cast<std::size_t>(total));
    for (auto& v : u) v = normal(rng);

    std::vector<double> s(static_cast<std::size_t>(total), 0.0);
    const auto& c = f.coefficients;
    for (std::size_t n = 0; n < s.size(); ++n) {
      double acc = 0.0;
      if (f.kind == FilterKind::all_pole) {
        acc = u[n];
        for (std::size_t k = 1; k <= c.size() && k <= n; ++k) acc += c[k - 1] * s[n - k];
      } else {
        for (std::size_t k = 0; k < c.size() && k <= n; ++k) acc += c[k] * u[n - k];
      }
      s[n] = acc;
    }
    for (Eigen::Index n = 0; n < spec.length; ++n) out(l, n) = s[static_cast<std::size_t>(warmup + n)];

    if (spec.normalize_power) {
      const double mean = out.row(l).mean();
      out.row(l).array() -= mean;
      const double var = out.row(l).squaredNorm() / static_cast<double>(spec.length);
      if (!(var > 0.0)) throw precondition_error("generate_sources: generated source has zero power");
      out.row(l) /= std::sqrt(var);
    }
  }
  return SignalMatrix(std::move(out));
}

/// Sample correlation (1/(N-lag)) sum s[n] s[n-lag] of one channel normalized
/// by its lag-0 value.
inline double normalized_lag_autocorrelation(const SignalMatrix& x, Eigen::Index channel, Eigen::Index lag) {
  const Eigen::Index n = x.sample_count();
  detail::require(lag >= 0 && lag < n, "normalized_lag_autocorrelation: lag out of range");
  const auto row = x.channel(channel);
  const double r0 = row.squaredNorm() / static_cast<double>(n);
  if (!(r0 > 0.0)) throw precondition_error("normalized_lag_autocorrelation: zero-power channel");
  const double rl = row.tail(n - lag).dot(row.head(n - lag)) / static_cast<double>(n - lag);
  return rl / r0;
}

/// Throws precondition_error unless every channel is positively correlated
/// with its own `lag`-delayed copy by at least `min_value`.
inline void require_positive_lag_correlation(const SignalMatrix& sources, Eigen::Index lag = 1,
                                             double min_value = 0.05) {
  for (Eigen::Index l = 0; l < sources.channel_count(); ++l) {
    const double rho = normalized_lag_autocorrelation(sources, l, lag);
    if (!(rho > min_value))
      throw precondition_error("source " + std::to_string(l) + " has lag-" + std::to_string(lag) +
                               " autocorrelation " + std::to_string(rho) + " (must be positive)");
  }
}

/// Scales each row to unit Euclidean norm.
inline Matrix row_normalize(const Matrix& a) {
  Matrix out = a;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double norm = a.row(r).norm();
    if (!(norm > 0.0)) throw std::invalid_argument("row_normalize: row " + std::to_string(r) + " is zero");
    out.row(r) /= norm;
  }
  return out;
}

inline double condition_number(const Matrix& a) {
  const auto eig = linalg::jacobi_eigen(a.transpose() * a);
  const double lo = std::max(eig.values(0), 0.0);
  const double hi = eig.values(eig.values.size() - 1);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(hi / lo);
}

inline void MixtureModel::validate() const {
  detail::require(A.rows() >= A.cols() && A.cols() >= 2,
                  "MixtureModel: mixing matrix must be M x L with M >= L >= 2");
  detail::require(A.allFinite(), "MixtureModel: mixing matrix entries must be finite");
  detail::require(std::isfinite(noise_variance) && noise_variance >= 0.0,
                  "MixtureModel: noise variance must be finite and non-negative");
  detail::require(condition_number(A) < 1e12, "MixtureModel: mixing matrix must have full column rank");
  if (row_normalized) {
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      detail::require(std::abs(A.row(r).norm() - 1.0) <= 1e-12,
                      "MixtureModel: row_normalized is set but a row does not have unit norm");
  }
}

/// Gaussian mixing matrix drawn by rejection until its 2-norm condition
/// number is at most max_condition.
inline Matrix random_mixing_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                   bool normalize_rows = true, double max_condition = 10.0) {
  detail::require(rows >= cols && cols >= 1, "random_mixing_matrix: need rows >= cols >= 1");
  detail::require(max_condition > 1.0, "random_mixing_matrix: max_condition must exceed 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Matrix a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
    if (normalize_rows) a = row_normalize(a);
    if (condition_number(a) <= max_condition) return a;
  }
  throw precondition_error("random_mixing_matrix: no draw met the condition-number bound");
}

/// Mixing matrix used by the reference benchmark, before row normalization.
inline Matrix benchmark_mixing_matrix() {
  Matrix a(3, 3);
  a << 0.9207, 0.0299, 0.3891,
       0.5165, 0.3676, 0.7733,
       0.7822, -0.2735, -0.5598;
  return a;
}

inline SignalMatrix mix(const MixtureModel& model, const SignalMatrix& sources, std::uint64_t noise_seed) {
  model.validate();
  if (sources.channel_count() != model.A.cols())
    throw std::invalid_argument("mix: source count " + std::to_string(sources.channel_count()) +
                                " does not match mixing matrix columns " + std::to_string(model.A.cols()));
  Matrix x = model.A * sources.data();
  if (model.noise_variance > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(model.noise_variance));
    for (Eigen::Index n = 0; n < x.cols(); ++n)
      for (Eigen::Index m = 0; m < x.rows(); ++m) x(m, n) += normal(rng);
  }
  return SignalMatrix(std::move(x));
}

}  // namespace gcca
