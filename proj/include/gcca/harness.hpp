#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gcca/adaptive_direct.hpp"
#include "gcca/csv.hpp"
#include "gcca/dual_lp.hpp"
#include "gcca/errors.hpp"
#include "gcca/metrics.hpp"
#include "gcca/pencil.hpp"
#include "gcca/seed.hpp"
#include "gcca/signals.hpp"
#include "gcca/stats.hpp"

namespace gcca {

inline constexpr int kConfigSchemaVersion = 1;

enum class Method { cca_batch, gcca_batch, direct, dual_lp };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::cca_batch: return "cca-batch";
    case Method::gcca_batch: return "gcca-batch";
    case Method::direct: return "direct";
    case Method::dual_lp: return "dual-lp";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "cca-batch") return Method::cca_batch;
  if (s == "gcca-batch") return Method::gcca_batch;
  if (s == "direct") return Method::direct;
  if (s == "dual-lp") return Method::dual_lp;
  throw std::invalid_argument("unknown method '" + s + "' (expected cca-batch, gcca-batch, direct or dual-lp)");
}

struct MixingConfig {
  std::optional<Matrix> matrix;  // explicit matrix; otherwise drawn at random
  bool row_normalize = true;
  Eigen::Index rows = 3;
  Eigen::Index cols = 3;
  double max_condition = 10.0;
  std::optional<std::uint64_t> seed;  // fixed random matrix; per-run draw when absent
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;

  std::vector<SourceFilter> filters = default_source_filters();
  bool normalize_power = true;
  bool require_positive_lag1 = true;
  std::optional<std::uint64_t> source_seed;  // same sources in every run when set

  MixingConfig mixing;
  double noise_variance = 0.0;
  std::optional<std::uint64_t> noise_seed;  // same noise in every run when set

  Method method = Method::dual_lp;
  Eigen::Index delta0 = 1;
  Eigen::Index delta1 = 2;
  std::vector<LagWeight> numerator_lags;    // optional multi-lag gcca-batch numerator
  std::vector<LagWeight> denominator_lags;  // optional multi-lag gcca-batch denominator

  PredictorCoeffs predictor{{-0.4548, -1.0053, 1.1957, -0.5590, -0.3617}, {1.0}};
  double mu = 0.0015;
  double beta_e = 0.975;
  double beta_y = 0.975;
  double beta_f = 0.975;
  Eigen::Index warmup = 100;
  bool normalize_w = false;

  Eigen::Index sample_count = 100000;
  std::size_t run_count = 1;
  std::uint64_t master_seed = 0;
  Eigen::Index checkpoint_interval = 100;
  unsigned threads = 0;  // 0: hardware concurrency

  std::string output_directory;  // empty: nothing written

  void validate() const {
    detail::require(schema_version == kConfigSchemaVersion, "config: unsupported schema_version");
    detail::require(!filters.empty(), "config: at least one source filter is required");
    for (const auto& f : filters) validate_filter(f);
    detail::require(std::isfinite(noise_variance) && noise_variance >= 0.0, "config: noise_variance must be >= 0");
    detail::require(run_count >= 1, "config: run_count must be at least 1");
    detail::require(sample_count >= 16, "config: sample_count must be at least 16");
    detail::require(checkpoint_interval >= 1, "config: checkpoint_interval must be positive");
    if (mixing.matrix) {
      detail::require(mixing.matrix->cols() == static_cast<Eigen::Index>(filters.size()),
                      "config: mixing matrix columns must equal the number of sources");
    } else {
      detail::require(mixing.cols == static_cast<Eigen::Index>(filters.size()),
                      "config: mixing.cols must equal the number of sources");
      detail::require(mixing.rows >= mixing.cols, "config: mixing.rows must be >= mixing.cols");
    }
    if (method == Method::cca_batch || method == Method::gcca_batch) {
      detail::require(delta0 >= 0 && delta1 >= 0 && delta0 != delta1, "config: lags must be non-negative and distinct");
      if (method == Method::cca_batch)
        detail::require(delta0 == 0, "config: cca-batch normalizes by the zero-lag correlation (delta0 = 0)");
      else
        detail::require(delta0 != 0, "config: gcca-batch needs a nonzero delta0");
      detail::require(method == Method::gcca_batch || (numerator_lags.empty() && denominator_lags.empty()),
                      "config: lag-weight lists apply to gcca-batch only");
    }
    if (method == Method::direct) direct_params().validate();
    if (method == Method::dual_lp) dual_params().validate();
  }

  DirectParams direct_params() const {
    DirectParams p;
    p.b = predictor.b;
    p.mu = mu;
    p.beta = beta_y;
    p.warmup = warmup;
    return p;
  }

  DualParams dual_params() const {
    DualParams p;
    p.coeffs = predictor;
    p.mu = mu;
    p.beta_e = beta_e;
    p.beta_y = beta_y;
    p.beta_f = beta_f;
    p.warmup = warmup;
    p.normalize_w = normalize_w;
    return p;
  }
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("config: matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("config: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline std::vector<LagWeight> lag_weights_from_json(const json& j) {
  std::vector<LagWeight> out;
  for (const auto& t : j) {
    reject_unknown(t, {"lag", "weight"}, "lag weight");
    out.push_back({t.at("lag").get<Eigen::Index>(), t.value("weight", 1.0)});
  }
  return out;
}

}  // namespace config_detail

/// Parses an experiment configuration. A relative mixing-matrix file is
/// resolved against base_dir; the output directory is used as given.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using config_detail::reject_unknown;
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    reject_unknown(j,
                   {"schema_version", "description", "sources", "mixing", "noise_variance", "noise_seed", "method",
                    "lags", "predictor", "mu", "beta", "betas", "warmup", "normalize_w", "sample_count", "run_count",
                    "master_seed", "checkpoint_interval", "threads", "output"},
                   "top level");
    if (!j.contains("schema_version")) throw std::invalid_argument("config: missing schema_version");
    c.schema_version = j.at("schema_version").get<int>();

    if (j.contains("sources")) {
      const auto& s = j.at("sources");
      reject_unknown(s, {"filters", "normalize_power", "require_positive_lag1", "seed"}, "sources");
      if (s.contains("filters")) {
        c.filters.clear();
        for (const auto& f : s.at("filters")) {
          reject_unknown(f, {"kind", "coefficients"}, "sources.filters[]");
          SourceFilter sf;
          const auto kind = f.value("kind", std::string("all_pole"));
          if (kind == "all_pole") sf.kind = FilterKind::all_pole;
          else if (kind == "all_zero") sf.kind = FilterKind::all_zero;
          else throw std::invalid_argument("config: filter kind must be all_pole or all_zero");
          sf.coefficients = f.at("coefficients").get<std::vector<double>>();
          c.filters.push_back(std::move(sf));
        }
      }
      c.normalize_power = s.value("normalize_power", true);
      c.require_positive_lag1 = s.value("require_positive_lag1", true);
      if (s.contains("seed")) c.source_seed = s.at("seed").get<std::uint64_t>();
    }

    if (j.contains("mixing")) {
      const auto& m = j.at("mixing");
      reject_unknown(m, {"matrix", "file", "row_normalize", "rows", "cols", "max_condition", "seed"}, "mixing");
      c.mixing.row_normalize = m.value("row_normalize", true);
      if (m.contains("matrix")) {
        c.mixing.matrix = config_detail::matrix_from_json(m.at("matrix"));
      } else if (m.contains("file")) {
        const auto path = base_dir / m.at("file").get<std::string>();
        if (!std::filesystem::exists(path))
          throw std::invalid_argument("config: mixing file '" + path.string() + "' does not exist");
        c.mixing.matrix = csv::load_matrix(path.string());
      }
      c.mixing.rows = m.value("rows", static_cast<Eigen::Index>(c.filters.size()));
      c.mixing.cols = m.value("cols", static_cast<Eigen::Index>(c.filters.size()));
      c.mixing.max_condition = m.value("max_condition", 10.0);
      if (m.contains("seed")) c.mixing.seed = m.at("seed").get<std::uint64_t>();
    } else {
      c.mixing.rows = c.mixing.cols = static_cast<Eigen::Index>(c.filters.size());
    }

    c.noise_variance = j.value("noise_variance", 0.0);
    if (j.contains("noise_seed")) c.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    if (!j.contains("method")) throw std::invalid_argument("config: missing method");
    c.method = parse_method(j.at("method").get<std::string>());

    if (j.contains("lags")) {
      const auto& l = j.at("lags");
      reject_unknown(l, {"delta0", "delta1", "numerator", "denominator"}, "lags");
      c.delta0 = l.value("delta0", c.method == Method::cca_batch ? Eigen::Index{0} : Eigen::Index{1});
      c.delta1 = l.value("delta1", Eigen::Index{2});
      if (l.contains("numerator")) c.numerator_lags = config_detail::lag_weights_from_json(l.at("numerator"));
      if (l.contains("denominator")) c.denominator_lags = config_detail::lag_weights_from_json(l.at("denominator"));
    } else if (c.method == Method::cca_batch) {
      c.delta0 = 0;
      c.delta1 = 1;
    }

    if (j.contains("predictor")) {
      const auto& p = j.at("predictor");
      reject_unknown(p, {"b", "d"}, "predictor");
      if (p.contains("b")) c.predictor.b = p.at("b").get<std::vector<double>>();
      if (p.contains("d")) c.predictor.d = p.at("d").get<std::vector<double>>();
    }
    c.mu = j.value("mu", c.mu);
    if (j.contains("beta")) c.beta_e = c.beta_y = c.beta_f = j.at("beta").get<double>();
    if (j.contains("betas")) {
      const auto& b = j.at("betas");
      reject_unknown(b, {"e", "y", "f"}, "betas");
      c.beta_e = b.value("e", c.beta_e);
      c.beta_y = b.value("y", c.beta_y);
      c.beta_f = b.value("f", c.beta_f);
    }
    c.warmup = j.value("warmup", c.warmup);
    c.normalize_w = j.value("normalize_w", false);
    c.sample_count = j.value("sample_count", c.sample_count);
    const auto runs = j.value("run_count", std::int64_t{1});
    if (runs < 1) throw std::invalid_argument("config: run_count must be at least 1");
    c.run_count = static_cast<std::size_t>(runs);
    c.master_seed = j.value("master_seed", std::uint64_t{0});
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.threads = j.value("threads", 0u);
    if (j.contains("output")) {
      const auto& o = j.at("output");
      reject_unknown(o, {"directory"}, "output");
      c.output_directory = o.value("directory", std::string{});
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Everything a single run consumes, reproducible from (config, run index).
struct RunData {
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;
  SignalMatrix sources;
  Matrix A;
  SignalMatrix mixtures;
};

inline std::uint64_t run_seed(const ExperimentConfig& c, std::size_t run) {
  return derive_seed(c.master_seed, static_cast<std::uint64_t>(run));
}

inline Matrix mixing_matrix_for_run(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.mixing.matrix) return c.mixing.row_normalize ? row_normalize(*c.mixing.matrix) : *c.mixing.matrix;
  const auto s = c.mixing.seed ? *c.mixing.seed : derive_seed(seed, 4);
  return random_mixing_matrix(c.mixing.rows, c.mixing.cols, s, c.mixing.row_normalize, c.mixing.max_condition);
}

inline RunData make_run_data(const ExperimentConfig& c, std::size_t run) {
  RunData d;
  d.seed = run_seed(c, run);
  d.init_seed = derive_seed(d.seed, 3);
  SourceSpec spec{c.filters, c.source_seed ? *c.source_seed : derive_seed(d.seed, 1), c.sample_count,
                  c.normalize_power};
  d.sources = generate_sources(spec);
  if (c.require_positive_lag1) require_positive_lag_correlation(d.sources, 1);
  d.A = mixing_matrix_for_run(c, d.seed);
  MixtureModel model{d.A, c.noise_variance, c.mixing.row_normalize};
  d.mixtures = mix(model, d.sources, c.noise_seed ? *c.noise_seed : derive_seed(d.seed, 2));
  return d;
}

struct Checkpoint {
  Eigen::Index n = 0;
  double pi_db = 0.0;
};

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<Checkpoint> checkpoints;  // n strictly increasing
  double final_pi_db = 0.0;
  Eigen::Index matched_source = -1;
  double match_correlation = 0.0;
  Vector w;
  double wall_seconds = 0.0;  // reported, never persisted
};

struct ExperimentResult {
  std::vector<RunRecord> runs;    // ordered by run index
  std::vector<Checkpoint> curve;  // mean PI (dB) over successful runs
  std::size_t failed_runs = 0;
};

namespace harness_detail {

template <class Extractor>
void run_adaptive(Extractor& ex, const RunData& d, Eigen::Index interval, RunRecord& rec) {
  const Matrix& x = d.mixtures.data();
  rec.checkpoints.push_back({0, performance_index(global_vector(d.A, ex.w()).g)});
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    ex.step(x.col(n));
    if ((n + 1) % interval == 0 || n + 1 == x.cols()) {
      if (!ex.w().allFinite()) throw precondition_error("adaptive extractor diverged (non-finite w)");
      rec.checkpoints.push_back({n + 1, performance_index(global_vector(d.A, ex.w()).g)});
    }
  }
  rec.w = ex.w();
}

}  // namespace harness_detail

/// One independent run: regenerate its data, extract, score. Module errors
/// are caught and recorded on the returned record.
inline RunRecord execute_run(const ExperimentConfig& c, std::size_t run) {
  RunRecord rec;
  rec.run = run;
  rec.seed = run_seed(c, run);
  const auto start = std::chrono::steady_clock::now();
  try {
    const RunData d = make_run_data(c, run);
    switch (c.method) {
      case Method::cca_batch:
      case Method::gcca_batch: {
        PencilSolution sol;
        if (c.method == Method::gcca_batch && !c.numerator_lags.empty()) {
          const auto den = c.denominator_lags.empty() ? std::vector<LagWeight>{{c.delta0, 1.0}} : c.denominator_lags;
          sol = solve_weighted_pencil(d.mixtures, c.numerator_lags, den);
        } else {
          sol = extract_batch(d.mixtures, c.delta0, c.delta1,
                              c.method == Method::cca_batch ? BatchMode::cca : BatchMode::gcca)
                    .pencil;
        }
        rec.w = sol.top();
        rec.checkpoints.push_back({c.sample_count, performance_index(global_vector(d.A, rec.w).g)});
        break;
      }
      case Method::direct: {
        DirectExtractor ex(d.mixtures.channel_count(), c.direct_params(), d.init_seed);
        harness_detail::run_adaptive(ex, d, c.checkpoint_interval, rec);
        break;
      }
      case Method::dual_lp: {
        DualLPExtractor ex(d.mixtures.channel_count(), c.dual_params(), d.init_seed);
        harness_detail::run_adaptive(ex, d, c.checkpoint_interval, rec);
        break;
      }
    }
    rec.final_pi_db = rec.checkpoints.back().pi_db;
    const auto match = match_source(project(d.mixtures, rec.w), d.sources);
    rec.matched_source = match.index;
    rec.match_correlation = match.correlation;
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.checkpoints.clear();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// Mean PI per checkpoint over successful runs; every successful run of one
/// experiment shares the same checkpoint grid.
inline std::vector<Checkpoint> average_curve(const std::vector<RunRecord>& runs) {
  std::vector<Checkpoint> curve;
  std::size_t count = 0;
  for (const auto& r : runs) {
    if (!r.ok) continue;
    if (curve.empty()) {
      curve.assign(r.checkpoints.size(), {});
      for (std::size_t i = 0; i < curve.size(); ++i) curve[i].n = r.checkpoints[i].n;
    }
    for (std::size_t i = 0; i < curve.size(); ++i) curve[i].pi_db += r.checkpoints[i].pi_db;
    ++count;
  }
  for (auto& p : curve) p.pi_db /= static_cast<double>(count);
  return curve;
}

/// Runs are independent and may execute on several threads; results are
/// stored by run index and aggregated after all runs finish, so the output
/// does not depend on scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult result;
  result.runs.resize(c.run_count);
  unsigned threads = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, c.run_count));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < c.run_count; i = next++) result.runs[i] = execute_run(c, i);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& r : result.runs)
    if (!r.ok) ++result.failed_runs;
  result.curve = average_curve(result.runs);
  return result;
}

inline void write_curve_csv(std::ostream& os, const std::vector<Checkpoint>& curve) {
  os << "n,PI_dB\n";
  for (const auto& p : curve) os << p.n << ',' << csv::format_double(p.pi_db) << '\n';
}

inline void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << "run,seed,status,final_PI_dB,matched_source,match_corr,error\n";
  for (const auto& r : runs) {
    os << r.run << ',' << r.seed << ',' << (r.ok ? "ok" : "error") << ',';
    if (r.ok) {
      os << csv::format_double(r.final_pi_db) << ',' << r.matched_source << ','
         << csv::format_double(r.match_correlation) << ',';
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << ",,," << msg;
    }
    os << '\n';
  }
}

inline void write_run_curves_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << "run,n,PI_dB\n";
  for (const auto& r : runs)
    for (const auto& p : r.checkpoints) os << r.run << ',' << p.n << ',' << csv::format_double(p.pi_db) << '\n';
}

/// Writes curve.csv, runs.csv and run_curves.csv into `directory`.
inline void write_outputs(const ExperimentResult& result, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(directory) / name);
    if (!out) throw std::invalid_argument("cannot write into output directory '" + directory + "'");
    return out;
  };
  {
    auto out = open("curve.csv");
    write_curve_csv(out, result.curve);
  }
  {
    auto out = open("runs.csv");
    write_runs_csv(out, result.runs);
  }
  {
    auto out = open("run_curves.csv");
    write_run_curves_csv(out, result.runs);
  }
}

}  // namespace gcca
