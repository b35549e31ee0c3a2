#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gcca/dual_lp.hpp"
#include "gcca/harness.hpp"
#include "gcca/metrics.hpp"
#include "gcca/pencil.hpp"
#include "gcca/seed.hpp"
#include "oracles.hpp"

using namespace gcca;

namespace {

const std::vector<double> kBenchmarkB{-0.4548, -1.0053, 1.1957, -0.5590, -0.3617};

DualParams hand_params() {
  DualParams p;
  p.coeffs = {{0.5, -0.25}, {1.0}};
  p.mu = 0.05;
  p.beta_e = 0.5;
  p.beta_y = 0.6;
  p.beta_f = 0.8;
  p.warmup = 0;
  return p;
}

SignalMatrix benchmark_mixture(Eigen::Index n, std::uint64_t seed, double noise) {
  const auto s = generate_sources({default_source_filters(), seed, n, true});
  return mix({row_normalize(benchmark_mixing_matrix()), noise, true}, s, derive_seed(seed, 2));
}

}  // namespace

TEST_CASE("dual extractor constants", "[dual]") {
  DualParams p;
  p.coeffs = {kBenchmarkB, {1.0}};
  DualLPExtractor ex(3, p, 1);
  REQUIRE(ex.a_c() == 2.0);
  double q = 1.0;
  for (double b : kBenchmarkB) q += b * b;
  REQUIRE(ex.q_c() == Catch::Approx(q).epsilon(1e-15));
  REQUIRE(ex.q_c() == Catch::Approx(4.09047751).epsilon(1e-12));
}

TEST_CASE("dual extractor initialization is seeded", "[dual]") {
  DualParams p;
  p.coeffs = {kBenchmarkB, {1.0}};
  DualLPExtractor a(3, p, 11), b(3, p, 11), c(3, p, 12);
  REQUIRE(a.w() == b.w());
  REQUIRE_FALSE(a.w() == c.w());
  REQUIRE(a.sigma_e() == 1.0);
  REQUIRE(a.sigma_y() == 1.0);
  REQUIRE(a.sigma_f() == 1.0);
  Vector w0(2);
  w0 << 3, 4;
  REQUIRE(DualLPExtractor(w0, p).w() == w0);
}

TEST_CASE("dual hyperparameters are validated", "[dual]") {
  DualParams p;
  p.coeffs = {kBenchmarkB, {1.0}};
  auto bad = p;
  bad.beta_f = 1.0;
  REQUIRE_THROWS_AS(DualLPExtractor(3, bad, 1), std::invalid_argument);
  bad = p;
  bad.mu = -1.0;
  REQUIRE_THROWS_AS(DualLPExtractor(3, bad, 1), std::invalid_argument);
  bad = p;
  bad.coeffs.d.clear();
  REQUIRE_THROWS_AS(DualLPExtractor(3, bad, 1), std::invalid_argument);
  bad = p;
  bad.coeffs.b = {std::numeric_limits<double>::infinity()};
  REQUIRE_THROWS_AS(DualLPExtractor(3, bad, 1), std::invalid_argument);
}

TEST_CASE("zero input never moves w", "[dual]") {
  DualParams p;
  p.coeffs = {kBenchmarkB, {1.0}};
  p.warmup = 5;
  DualLPExtractor ex(3, p, 3);
  const Vector w0 = ex.w();
  for (int n = 0; n < 2000; ++n) {
    const auto st = ex.step(Vector::Zero(3));
    REQUIRE(ex.last_delta().isZero(0.0));
    REQUIRE((st.y == 0.0 && st.e == 0.0 && st.f == 0.0));
  }
  REQUIRE(ex.w() == w0);
  REQUIRE(ex.skipped_updates() > 0);
}

TEST_CASE("scalar dual update matches hand evaluation", "[dual]") {
  // Values from an independent rational-arithmetic evaluation; the three
  // forgetting factors differ so each statistic is checked on its own.
  DualLPExtractor ex(Vector::Constant(1, 0.7), hand_params());
  const double xs[6] = {1, 2, -1, 3, 0.5, -2};
  const double delta[6] = {0, 0, 0.19290105273998667, 0.04759723616186338, 1.8081732913300947, -0.03373739077765096};
  const double w[6] = {0.7, 0.7, 0.8929010527399867, 0.94049828890185, 2.7486715802319446, 2.714934189454294};
  const double se[6] = {0.745, 0.92375, 1.2121875, 6.313911265682766, 3.7020305798718662, 14.666946419669037};
  const double sy[6] = {0.796, 1.2616, 0.95296, 3.4419562439430353, 2.153627449508552, 13.380489199264773};
  const double sf[6] = {0.898, 0.8164, 1.53512, 3.5112230062731062, 3.784432231204997, 10.1499773684997};
  const double e[6] = {0.7, 1.05, -1.225, 3.37870315821996, -1.044102434659055, -5.0627919431343615};
  const double f[6] = {0.7, 0.7, -2.1, 3.37870315821996, -2.208454013769035, -5.967592304914814};
  for (int n = 0; n < 6; ++n) {
    const auto st = ex.step(Vector::Constant(1, xs[n]));
    REQUIRE(st.e == Catch::Approx(e[n]).epsilon(1e-12));
    REQUIRE(st.f == Catch::Approx(f[n]).epsilon(1e-12));
    REQUIRE(ex.sigma_e() == Catch::Approx(se[n]).epsilon(1e-12));
    REQUIRE(ex.sigma_y() == Catch::Approx(sy[n]).epsilon(1e-12));
    REQUIRE(ex.sigma_f() == Catch::Approx(sf[n]).epsilon(1e-12));
    REQUIRE(ex.last_delta()(0) == Catch::Approx(delta[n]).epsilon(1e-12).margin(1e-15));
    REQUIRE(ex.w()(0) == Catch::Approx(w[n]).epsilon(1e-12));
    REQUIRE(st.updated == (n >= 2));
  }
}

TEST_CASE("two-channel dual update matches hand evaluation", "[dual]") {
  Vector w0(2);
  w0 << 0.6, -0.3;
  DualLPExtractor ex(w0, hand_params());
  const double xs[7][2] = {{1, 0}, {0, 1}, {2, -1}, {1, 1}, {-1, 2}, {3, 0.5}, {0.5, -2}};
  const double delta[7][2] = {{0, 0},
                              {0, 0},
                              {-0.05953543132974519, -0.08767670675881667},
                              {106.66657515401333, -320.7219943861998},
                              {-6.959956624996754e-05, 0.0002776942464835781},
                              {0.024773279699788268, -0.012563400725303561},
                              {-2.5369281231145404e-05, 0.00014215986298467023}};
  const double w[7][2] = {{0.6, -0.3},
                          {0.6, -0.3},
                          {0.5404645686702548, -0.38767670675881666},
                          {107.20703972268359, -321.1096710929586},
                          {107.20697012311733, -321.10939339871214},
                          {107.23174340281712, -321.12195679943744},
                          {107.23171803353588, -321.12181463957444}};
  for (int n = 0; n < 7; ++n) {
    Vector x(2);
    x << xs[n][0], xs[n][1];
    ex.step(x);
    for (int i = 0; i < 2; ++i) {
      REQUIRE(ex.last_delta()(i) == Catch::Approx(delta[n][i]).epsilon(1e-10).margin(1e-15));
      REQUIRE(ex.w()(i) == Catch::Approx(w[n][i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("dual prediction errors use lags 1..P", "[dual]") {
  DualParams p;
  p.coeffs = {{1.0, 10.0}, {100.0}};
  p.warmup = 1000;
  DualLPExtractor ex(Vector::Constant(1, 1.0), p);
  std::vector<double> e, f;
  for (int n = 0; n < 5; ++n) {
    const auto st = ex.step(Vector::Constant(1, n == 0 ? 1.0 : 0.0));
    e.push_back(st.e);
    f.push_back(st.f);
  }
  REQUIRE(e == std::vector<double>{1, -1, -10, 0, 0});
  REQUIRE(f == std::vector<double>{1, -100, 0, 0, 0});
}

TEST_CASE("optional renormalization keeps unit norm", "[dual]") {
  DualParams p;
  p.coeffs = {kBenchmarkB, {1.0}};
  p.normalize_w = true;
  DualLPExtractor ex(3, p, 4);
  const auto x = benchmark_mixture(3000, 4, 0.09);
  for (Eigen::Index n = 0; n < x.sample_count(); ++n) {
    ex.step(x.snapshot(n));
    REQUIRE(std::abs(ex.w().norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("dual cost is scale invariant", "[dual][property]") {
  const auto x = benchmark_mixture(3000, 5, 0.09);
  const PredictorCoeffs c{kBenchmarkB, {1.0}};
  std::mt19937_64 rng(derive_seed(5, 1));
  for (int trial = 0; trial < 50; ++trial) {
    const Vector w = oracle::random_vector(3, rng);
    const double k = (trial % 2 ? -1.0 : 1.0) * std::pow(10.0, trial % 7 - 3);
    const double j = dual_cost(w, x, c);
    REQUIRE(std::abs(dual_cost(k * w, x, c) - j) <= 1e-12 * std::abs(j));
  }
}

TEST_CASE("copied single source gives its normalized autocorrelation", "[dual]") {
  const auto s = generate_sources({{{FilterKind::all_pole, {0.6, 0.2}}}, 6, 100000, true});
  Matrix copies(3, s.sample_count());
  for (Eigen::Index m = 0; m < 3; ++m) copies.row(m) = s.channel(0);
  const PredictorCoeffs c{kBenchmarkB, {1.0}};
  const double expected = normalized_autocorrelations(s, c)[0];
  Vector w(3);
  w << 0.3, -1.2, 2.0;
  REQUIRE(dual_cost(w, SignalMatrix(copies), c) == Catch::Approx(expected).margin(5e-3));
}

TEST_CASE("pencil minimum eigenvector minimizes the dual cost", "[dual]") {
  const auto x = benchmark_mixture(20000, 7, 0.09);
  const PredictorCoeffs c{kBenchmarkB, {1.0}};
  const auto pen = dual_pencil(x, c);
  const auto sol = solve_pencil(pen.numerator, pen.denominator);
  const Vector w_min = sol.eigenvectors.col(sol.eigenvectors.cols() - 1);
  const double j_min = dual_cost(w_min, x, c);
  REQUIRE(j_min == Catch::Approx(sol.eigenvalues(sol.eigenvalues.size() - 1)).epsilon(1e-10));
  std::mt19937_64 rng(derive_seed(7, 1));
  for (int trial = 0; trial < 1000; ++trial)
    REQUIRE(dual_cost(oracle::random_vector(3, rng), x, c) >= j_min - 1e-12);
}

TEST_CASE("prediction error power matches the lagged expansion", "[dual][property]") {
  std::mt19937_64 rng(derive_seed(8, 1));
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = benchmark_mixture(1000 + 37 * trial, static_cast<std::uint64_t>(trial), 0.09);
    std::vector<double> b(1 + trial % 6);
    for (auto& v : b) v = normal(rng);
    const Vector w = oracle::random_vector(3, rng);
    PredictorCoeffs c{b, {1.0}};
    const Eigen::RowVectorXd y = w.transpose() * x.data();
    const double power_y = y.squaredNorm() / static_cast<double>(x.sample_count());
    const double rhs = c.q_c() * power_y - w.dot(predictor_correlation_sum(x, b) * w);
    const double lhs = prediction_error_power(w, x, b);
    REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
  }
}

TEST_CASE("dual gradient matches central differences", "[dual]") {
  const auto x = benchmark_mixture(5000, 9, 0.09);
  const PredictorCoeffs c{kBenchmarkB, {1.0}};
  std::mt19937_64 rng(derive_seed(9, 1));
  for (int trial = 0; trial < 20; ++trial) {
    const Vector w = oracle::random_vector(3, rng);
    const Vector g = dual_gradient(w, x, c);
    const Vector fd = oracle::central_difference([&](const Vector& v) { return dual_cost(v, x, c); }, w, 1e-5);
    REQUIRE((g - fd).norm() <= 1e-6 * std::max(g.norm(), 1e-3));
  }
}

TEST_CASE("white noise cancels from the dual cost numerator", "[dual][property]") {
  // q_c E{y^2} - E{e^2} keeps only lagged terms, so adding noise changes it
  // by sampling error only.
  const Eigen::Index n = 50000;
  const PredictorCoeffs c{kBenchmarkB, {1.0}};
  std::mt19937_64 rng(derive_seed(10, 1));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_sources({default_source_filters(), seed, n, true});
    const Matrix a = row_normalize(benchmark_mixing_matrix());
    const auto clean = mix({a, 0.0, true}, s, 1);
    const auto noisy = mix({a, 0.09, true}, s, derive_seed(seed, 2));
    const Vector w = oracle::random_vector(3, rng).normalized();
    const auto mc = dual_moments(w, clean, c);
    const auto mn = dual_moments(w, noisy, c);
    // the noise power itself does not cancel
    REQUIRE(mn.power_y - mc.power_y == Catch::Approx(0.09).margin(0.02));
    const double tol = 10.0 * c.q_c() * std::sqrt(0.09) / std::sqrt(static_cast<double>(n));
    REQUIRE(std::abs(mn.numerator - mc.numerator) <= tol);
    REQUIRE(std::abs(mn.denominator - mc.denominator) <= tol);
  }
}

TEST_CASE("dual-lp extracts the minimum normalized autocorrelation source", "[dual][statistical]") {
  ExperimentConfig cfg;  // defaults carry the benchmark hyperparameters
  cfg.method = Method::dual_lp;
  cfg.mixing.matrix = benchmark_mixing_matrix();
  cfg.noise_variance = 0.09;
  cfg.sample_count = 30000;
  cfg.run_count = 20;
  cfg.master_seed = 77;
  cfg.threads = 1;
  const auto result = run_experiment(cfg);
  REQUIRE(result.failed_runs == 0);
  int hits = 0, below = 0;
  for (const auto& r : result.runs) {
    const auto s = make_run_data(cfg, r.run).sources;
    const auto v = normalized_autocorrelations(s, cfg.predictor);
    const auto argmin = static_cast<Eigen::Index>(std::min_element(v.begin(), v.end()) - v.begin());
    if (r.matched_source == argmin) ++hits;
    if (r.final_pi_db <= -10.0) ++below;
  }
  REQUIRE(hits >= 18);
  REQUIRE(below >= 18);
}
