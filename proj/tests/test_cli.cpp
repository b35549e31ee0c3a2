#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "curve_check.hpp"
#include "gcca_cli.hpp"

namespace fs = std::filesystem;
using gcca::Matrix;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "gcca");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = gcca::cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gcca_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run-experiment on the benchmark preset writes outputs", "[cli]") {
  const auto dir = scratch("experiment");
  const auto r = run({"run-experiment", "--config", curve_check::config_path("paper_iv.json"), "--runs", "2",
                      "--out-dir", dir.string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("runs=2 failed=0") != std::string::npos);
  for (const char* f : {"curve.csv", "runs.csv", "run_curves.csv"}) REQUIRE(fs::exists(dir / f));
  REQUIRE(slurp(dir / "curve.csv").rfind("n,PI_dB\n0,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("missing config file exits with 1", "[cli]") {
  const auto r = run({"run-experiment", "--config", "/nonexistent/paper_iv.json"});
  REQUIRE(r.code == 1);
  REQUIRE(r.err.find("does not exist") != std::string::npos);
}

TEST_CASE("unknown flag prints usage and exits with 1", "[cli]") {
  const auto r = run({"run-experiment", "--bogus"});
  REQUIRE(r.code == 1);
  REQUIRE(r.err.find("Usage") != std::string::npos);
  REQUIRE(run({}).code == 1);
  REQUIRE(run({"frobnicate"}).code == 1);
}

TEST_CASE("help exits with 0", "[cli]") {
  const auto r = run({"--help"});
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("solve-pencil") != std::string::npos);
}

TEST_CASE("solve-pencil writes eigenvalues then eigenvectors", "[cli]") {
  const auto dir = scratch("pencil");
  Matrix n(2, 2), d = Matrix::Identity(2, 2);
  n << 1, 0, 0, 3;
  gcca::csv::save_matrix((dir / "n.csv").string(), n);
  gcca::csv::save_matrix((dir / "d.csv").string(), d);
  const auto r = run({"solve-pencil", "--numerator", (dir / "n.csv").string(), "--denominator", (dir / "d.csv").string()});
  REQUIRE(r.code == 0);
  std::istringstream is(r.out);
  const Matrix m = gcca::csv::read_matrix(is);
  REQUIRE(m.rows() == 3);
  REQUIRE(m(0, 0) == Catch::Approx(3.0));
  REQUIRE(m(0, 1) == Catch::Approx(1.0));
  REQUIRE(std::abs(m(1, 1)) == Catch::Approx(1.0));  // eigenvector for 3 is e_2
  REQUIRE(std::abs(m(2, 0)) == Catch::Approx(1.0));
  fs::remove_all(dir);
}

TEST_CASE("denominator that is not positive definite exits with 2", "[cli]") {
  const auto dir = scratch("notpd");
  Matrix d(2, 2);
  d << 1, 2, 2, 1;
  gcca::csv::save_matrix((dir / "n.csv").string(), Matrix::Identity(2, 2));
  gcca::csv::save_matrix((dir / "d.csv").string(), d);
  const auto r = run({"solve-pencil", "--numerator", (dir / "n.csv").string(), "--denominator", (dir / "d.csv").string()});
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("positive definite") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("generate, mix, extract and evaluate round trip", "[cli]") {
  const auto dir = scratch("pipeline");
  auto p = [&](const char* f) { return (dir / f).string(); };
  REQUIRE(run({"generate", "--length", "10000", "--seed", "4", "--out", p("s.csv")}).code == 0);
  REQUIRE(gcca::csv::load_signal(p("s.csv")).channel_count() == 3);
  REQUIRE(run({"mix", "--sources", p("s.csv"), "--config", curve_check::config_path("paper_iv.json"),
               "--noise-variance", "0", "--out", p("x.csv"), "--mixing-out", p("a.csv")})
              .code == 0);
  const Matrix a = gcca::csv::load_matrix(p("a.csv"));
  REQUIRE((a - gcca::row_normalize(gcca::benchmark_mixing_matrix())).norm() <= 1e-15);

  auto r = run({"extract-batch", "--input", p("x.csv"), "--mode", "gcca", "--delta0", "1", "--delta1", "2", "--count",
                "3", "--out", p("y.csv"), "--w-out", p("w.csv")});
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(gcca::csv::load_signal(p("y.csv")).channel_count() == 3);

  // first demixing row scored against the mixing matrix
  const Matrix w = gcca::csv::load_matrix(p("w.csv"));
  gcca::csv::save_matrix(p("w0.csv"), Matrix(w.row(0)));
  r = run({"evaluate", "--mixing", p("a.csv"), "--w", p("w0.csv"), "--extracted", p("y.csv"), "--sources", p("s.csv")});
  REQUIRE(r.code == 0);
  const auto pos = r.out.find("PI_dB=");
  REQUIRE(pos != std::string::npos);
  REQUIRE(std::stod(r.out.substr(pos + 6)) <= -30.0);
  REQUIRE(r.out.find("correlation=") != std::string::npos);

  r = run({"extract-adaptive", "--method", "dual-lp", "--input", p("x.csv"), "--config",
           curve_check::config_path("paper_iv.json"), "--seed", "1", "--out", p("ya.csv"), "--telemetry",
           p("tel.csv"), "--every", "100", "--mixing", p("a.csv"), "--w-out", p("wa.csv")});
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(slurp(p("tel.csv")).rfind("n,y,e,f,sigma_e,sigma_y,sigma_f,PI\n", 0) == 0);
  REQUIRE(r.out.find("final_PI_dB=") != std::string::npos);

  r = run({"extract-adaptive", "--method", "direct", "--input", p("x.csv"), "--telemetry", p("tel2.csv")});
  REQUIRE(r.code == 0);
  REQUIRE(slurp(p("tel2.csv")).rfind("n,y,sigma_y\n", 0) == 0);

  REQUIRE(run({"evaluate"}).code == 1);
  REQUIRE(run({"extract-batch", "--input", p("x.csv"), "--mode", "pca", "--out", p("z.csv")}).code == 1);
  REQUIRE(run({"extract-batch", "--input", p("missing.csv"), "--out", p("z.csv")}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("rank-deficient batch input exits with 2", "[cli]") {
  const auto dir = scratch("rank");
  Matrix x(2, 200);
  for (Eigen::Index n = 0; n < 200; ++n) x(0, n) = x(1, n) = std::sin(0.1 * static_cast<double>(n));
  gcca::csv::save_signal((dir / "x.csv").string(), gcca::SignalMatrix(x));
  const auto r = run({"extract-batch", "--input", (dir / "x.csv").string(), "--count", "2", "--out",
                      (dir / "y.csv").string()});
  REQUIRE(r.code == 2);
  fs::remove_all(dir);
}
