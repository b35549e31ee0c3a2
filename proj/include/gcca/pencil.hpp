#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gcca/errors.hpp"
#include "gcca/linalg.hpp"
#include "gcca/signals.hpp"
#include "gcca/stats.hpp"

namespace gcca {

struct PencilSolution {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // column i is the unit-norm w_i paired with eigenvalues(i)
  std::vector<Eigen::Index> numerator_lags;
  std::vector<Eigen::Index> denominator_lags;
  bool degenerate = false;  // two eigenvalues coincide to ~1e-10 relative

  Vector top() const { return eigenvectors.col(0); }
};

/// One term of a weighted multi-lag correlation sum_k c_k R_xx[lag_k].
struct LagWeight {
  Eigen::Index lag = 0;
  double weight = 1.0;
};

namespace detail {

/// Flips v so that its first component with magnitude above 1e-12 * |v|_inf is positive.
inline void canonicalize_sign(Eigen::Ref<Vector> v) {
  const double tol = 1e-12 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > tol) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace detail

/// All generalized eigenpairs of the symmetric-definite pencil
/// (numerator, denominator): numerator w = lambda denominator w.
///
/// The denominator is factored D = L L^T, the standard symmetric problem on
/// L^-1 N L^-T is solved by cyclic Jacobi, and w = L^-T v. Eigenvectors are
/// scaled to unit Euclidean norm with their first nonzero entry positive and
/// the pairs are ordered by descending eigenvalue (ties: lexicographically
/// larger eigenvector first).
inline PencilSolution solve_pencil(const Matrix& numerator, const Matrix& denominator) {
  gcca::detail::require(numerator.rows() == numerator.cols() && denominator.rows() == denominator.cols(),
                        "solve_pencil: matrices must be square");
  gcca::detail::require(numerator.rows() == denominator.rows(), "solve_pencil: dimension mismatch");
  gcca::detail::require(numerator.rows() >= 1, "solve_pencil: empty matrices");
  gcca::detail::require(numerator.allFinite() && denominator.allFinite(), "solve_pencil: non-finite entries");
  gcca::detail::require(linalg::is_symmetric(numerator) && linalg::is_symmetric(denominator),
                        "solve_pencil: both pencil matrices must be symmetric (symmetrize the lagged correlations)");

  const Eigen::Index n = numerator.rows();
  const Matrix den = 0.5 * (denominator + denominator.transpose());
  const Matrix num = 0.5 * (numerator + numerator.transpose());

  const auto den_eig = linalg::jacobi_eigen(den);
  const double trace = den.trace();
  if (!(trace > 0.0) || !(den_eig.values(0) > 1e-10 * trace))
    throw precondition_error("solve_pencil: denominator correlation matrix is not positive definite (smallest eigenvalue " +
                             std::to_string(den_eig.values(0)) + ", trace " + std::to_string(trace) + ")");

  const Matrix l = linalg::cholesky_lower(den);
  // C = L^-1 N L^-T
  Matrix c = l.triangularView<Eigen::Lower>().solve(num);
  c = l.triangularView<Eigen::Lower>().solve(c.transpose()).eval();
  c = (0.5 * (c + c.transpose())).eval();
  const auto std_eig = linalg::jacobi_eigen(c);

  Matrix w = l.transpose().triangularView<Eigen::Upper>().solve(std_eig.vectors);
  for (Eigen::Index i = 0; i < n; ++i) {
    w.col(i).normalize();
    detail::canonicalize_sign(w.col(i));
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double scale = std::max(std_eig.values.cwiseAbs().maxCoeff(), 1e-300);
  const double tie_tol = 1e-10 * scale;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double la = std_eig.values(a), lb = std_eig.values(b);
    if (std::abs(la - lb) > tie_tol) return la > lb;
    for (Eigen::Index k = 0; k < n; ++k)
      if (w(k, a) != w(k, b)) return w(k, a) > w(k, b);
    return false;
  });

  PencilSolution out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = std_eig.values(order[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = w.col(order[static_cast<std::size_t>(k)]);
  }
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    if (std::abs(out.eigenvalues(k) - out.eigenvalues(k + 1)) <= tie_tol) out.degenerate = true;
  return out;
}

inline PencilSolution solve_pencil(const LagCorrelation& numerator, const LagCorrelation& denominator) {
  gcca::detail::require(numerator.symmetrized && denominator.symmetrized,
                        "solve_pencil: lagged correlations must be symmetrized");
  auto out = solve_pencil(numerator.matrix, denominator.matrix);
  out.numerator_lags = {numerator.lag};
  out.denominator_lags = {denominator.lag};
  return out;
}

/// Symmetrized sum_k c_k R_xx[lag_k].
inline Matrix weighted_lag_correlation(const SignalMatrix& x, const std::vector<LagWeight>& terms) {
  gcca::detail::require(!terms.empty(), "weighted_lag_correlation: no lag terms");
  Matrix sum = Matrix::Zero(x.channel_count(), x.channel_count());
  for (const auto& t : terms) sum += t.weight * estimate_lag_correlation(x, t.lag, true).matrix;
  return sum;
}

inline PencilSolution solve_weighted_pencil(const SignalMatrix& x, const std::vector<LagWeight>& numerator,
                                            const std::vector<LagWeight>& denominator) {
  auto out = solve_pencil(weighted_lag_correlation(x, numerator), weighted_lag_correlation(x, denominator));
  for (const auto& t : numerator) out.numerator_lags.push_back(t.lag);
  for (const auto& t : denominator) out.denominator_lags.push_back(t.lag);
  return out;
}

/// Generalized Rayleigh quotient w^T N w / w^T D w.
inline double rayleigh_quotient(const Matrix& numerator, const Matrix& denominator, const Vector& w) {
  return w.dot(numerator * w) / w.dot(denominator * w);
}

enum class BatchMode { cca, gcca };

inline const char* to_string(BatchMode m) { return m == BatchMode::cca ? "cca" : "gcca"; }

struct BatchExtraction {
  Vector w;
  SignalMatrix y;  // 1 x N
  PencilSolution pencil;
};

inline SignalMatrix project(const SignalMatrix& x, const Vector& w) {
  gcca::detail::require(w.size() == x.channel_count(), "project: demixing vector length does not match channels");
  return SignalMatrix(Matrix(w.transpose() * x.data()));
}

/// Extracts one source by maximizing
///   w^T R_xx[delta1] w / w^T R_xx[delta0] w
/// (both correlations symmetrized). cca mode normalizes by the zero-lag
/// correlation (delta0 = 0); gcca mode needs a nonzero delta0, which removes
/// the white-noise term from the denominator.
inline BatchExtraction extract_batch(const SignalMatrix& x, Eigen::Index delta0, Eigen::Index delta1, BatchMode mode) {
  gcca::detail::require(delta0 != delta1, "extract_batch: delta1 must differ from delta0");
  gcca::detail::require(delta0 >= 0 && delta1 >= 0, "extract_batch: lags must be non-negative");
  if (mode == BatchMode::gcca)
    gcca::detail::require(delta0 != 0, "extract_batch: gcca mode requires a nonzero delta0");
  else
    gcca::detail::require(delta0 == 0, "extract_batch: cca mode normalizes by the zero-lag correlation (delta0 = 0)");
  const auto num = estimate_lag_correlation(x, delta1, true);
  const auto den = estimate_lag_correlation(x, delta0, true);
  auto pencil = solve_pencil(num, den);
  Vector w = pencil.top();
  auto y = project(x, w);
  return {std::move(w), std::move(y), std::move(pencil)};
}

/// Lagged least-squares regression coefficients a_hat with
///   a_hat = sum_n x[n] y[n-lag] / sum_n y[n] y[n-lag].
inline Vector deflation_coefficients(const SignalMatrix& x, const SignalMatrix& y, Eigen::Index lag) {
  gcca::detail::require(y.channel_count() == 1, "deflate: y must be a single channel");
  gcca::detail::require(y.sample_count() == x.sample_count(), "deflate: x and y lengths differ");
  gcca::detail::require(lag >= 1 && lag < x.sample_count(), "deflate: lag must be in [1, N)");
  const Eigen::Index count = x.sample_count() - lag;
  const auto yv = y.channel(0);
  const double denom = yv.tail(count).dot(yv.head(count));
  const double power = yv.squaredNorm();
  if (!(std::abs(denom) > 1e-12 * power))
    throw precondition_error("deflate: lagged correlation of the extracted signal vanishes");
  return x.data().rightCols(count) * yv.head(count).transpose() / denom;
}

/// x - a_hat y, removing the extracted signal's contribution from every
/// channel. Estimating a_hat at a nonzero lag keeps white noise out of it.
inline SignalMatrix deflate(const SignalMatrix& x, const SignalMatrix& y, Eigen::Index lag) {
  const Vector a = deflation_coefficients(x, y, lag);
  return SignalMatrix(Matrix(x.data() - a * y.data()));
}

struct SequentialSeparation {
  SignalMatrix outputs;           // L x N, row k is the k-th extracted signal
  Matrix demixing;                // L x M, row k maps the original mixtures to output k
  std::vector<PencilSolution> stages;
};

/// Repeated extraction and deflation until `source_count` signals are
/// recovered. Deflation leaves a rank-deficient mixture, so before each stage
/// the working signal is projected onto the principal subspace of its
/// zero-lag correlation whose dimension equals the number of sources still
/// present. The composite linear map from the original mixtures is tracked so
/// every output has an equivalent demixing vector.
inline SequentialSeparation separate_sequential(const SignalMatrix& x, Eigen::Index source_count, Eigen::Index delta0,
                                                Eigen::Index delta1, BatchMode mode) {
  const Eigen::Index m = x.channel_count();
  gcca::detail::require(source_count >= 1 && source_count <= m,
                        "separate_sequential: source count must be in [1, channels]");
  const Eigen::Index deflation_lag = delta0 != 0 ? delta0 : std::max<Eigen::Index>(delta1, 1);

  Matrix transform = Matrix::Identity(m, m);  // working = transform * x
  SignalMatrix working = x;
  Matrix outputs(source_count, x.sample_count());
  Matrix demixing(source_count, m);
  std::vector<PencilSolution> stages;

  for (Eigen::Index k = 0; k < source_count; ++k) {
    const Eigen::Index remaining = source_count - k;
    if (working.channel_count() > remaining) {
      const auto r0 = estimate_lag_correlation(working, 0, true);
      const auto eig = linalg::jacobi_eigen(r0.matrix);
      const Matrix basis = eig.vectors.rightCols(remaining);  // dominant subspace
      working = SignalMatrix(Matrix(basis.transpose() * working.data()));
      transform = (basis.transpose() * transform).eval();
    }
    auto stage = extract_batch(working, delta0, delta1, mode);
    outputs.row(k) = stage.y.channel(0);
    demixing.row(k) = (transform.transpose() * stage.w).transpose();
    if (k + 1 < source_count) {
      const Vector a = deflation_coefficients(working, stage.y, deflation_lag);
      working = SignalMatrix(Matrix(working.data() - a * stage.y.data()));
      transform = ((Matrix::Identity(a.size(), a.size()) - a * stage.w.transpose()) * transform).eval();
    }
    stages.push_back(std::move(stage.pencil));
  }
  return {SignalMatrix(std::move(outputs)), std::move(demixing), std::move(stages)};
}

}  // namespace gcca
