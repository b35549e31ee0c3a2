#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "gcca/gcca.hpp"

namespace gcca::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNumericalError = 2;

namespace detail {

inline Vector load_vector(const std::string& path) {
  const Matrix m = csv::load_matrix(path);
  return Eigen::Map<const Vector>(m.data(), m.size());  // 1 x M or M x 1
}

inline void save_vector(const std::string& path, const Vector& v) { csv::save_matrix(path, Matrix(v.transpose())); }

inline void write_eigenpairs(std::ostream& os, const PencilSolution& sol) {
  // first row: eigenvalues; row k+1: eigenvector k
  Matrix out(sol.eigenvalues.size() + 1, sol.eigenvalues.size());
  out.row(0) = sol.eigenvalues.transpose();
  out.bottomRows(sol.eigenvalues.size()) = sol.eigenvectors.transpose();
  csv::write_rows(os, out);
}

inline std::ostream& open_or(std::ofstream& file, const std::string& path, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path);
  if (!file) throw std::invalid_argument("cannot write '" + path + "'");
  return file;
}

}  // namespace detail

/// Entry point for the `gcca` tool. Returns 0 on success, 1 on usage or
/// configuration errors and 2 when a numerical precondition fails.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Blind source extraction from noisy instantaneous mixtures by generalized CCA"};
  app.name("gcca");
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Generate filtered white Gaussian sources");
  std::string gen_config, gen_out;
  long gen_length = 10000;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  generate->add_option("--config", gen_config, "Experiment config supplying sources.filters");
  generate->add_option("--length", gen_length, "Samples per source");
  generate->add_option("--seed", gen_seed, "Generator seed")->each([&](const std::string&) { gen_seed_set = true; });
  generate->add_option("--out", gen_out, "Output CSV")->required();

  // mix
  auto* mixcmd = app.add_subcommand("mix", "Mix sources and add white Gaussian noise");
  std::string mix_sources, mix_out, mix_matrix, mix_config, mix_matrix_out;
  double mix_noise = -1.0;
  std::uint64_t mix_noise_seed = 0, mix_matrix_seed = 0;
  bool mix_row_normalize = false;
  mixcmd->add_option("--sources", mix_sources, "Source CSV (L x N)")->required();
  mixcmd->add_option("--out", mix_out, "Mixture CSV")->required();
  mixcmd->add_option("--mixing", mix_matrix, "Mixing matrix CSV (M x L)");
  mixcmd->add_option("--config", mix_config, "Experiment config supplying mixing and noise_variance");
  mixcmd->add_option("--noise-variance", mix_noise, "Noise variance per entry (overrides config)");
  mixcmd->add_option("--noise-seed", mix_noise_seed, "Noise seed");
  mixcmd->add_option("--matrix-seed", mix_matrix_seed, "Seed for a random mixing matrix");
  mixcmd->add_flag("--row-normalize", mix_row_normalize, "Scale mixing matrix rows to unit norm");
  mixcmd->add_option("--mixing-out", mix_matrix_out, "Write the mixing matrix that was used");

  // solve-pencil
  auto* pencil = app.add_subcommand("solve-pencil", "Generalized eigenpairs of a symmetric-definite pencil");
  std::string pen_num, pen_den, pen_out;
  pencil->add_option("--numerator", pen_num, "Numerator matrix CSV")->required();
  pencil->add_option("--denominator", pen_den, "Denominator matrix CSV (positive definite)")->required();
  pencil->add_option("--out", pen_out, "Output CSV (default stdout)");

  // extract-batch
  auto* batch = app.add_subcommand("extract-batch", "Batch CCA/GCCA extraction with optional deflation");
  std::string bat_in, bat_out, bat_w_out, bat_mode = "gcca";
  long bat_d0 = 1, bat_d1 = 2, bat_count = 1;
  batch->add_option("--input", bat_in, "Mixture CSV")->required();
  batch->add_option("--mode", bat_mode, "cca or gcca")->check(CLI::IsMember({"cca", "gcca"}));
  batch->add_option("--delta0", bat_d0, "Denominator lag (0 for cca)");
  batch->add_option("--delta1", bat_d1, "Numerator lag");
  batch->add_option("--count", bat_count, "Number of sources to extract by deflation");
  batch->add_option("--out", bat_out, "Extracted signals CSV")->required();
  batch->add_option("--w-out", bat_w_out, "Demixing vectors CSV (one row per output)");

  // extract-adaptive
  auto* adaptive = app.add_subcommand("extract-adaptive", "Online extraction (direct or dual linear predictor)");
  std::string ad_method, ad_in, ad_config, ad_out, ad_tel, ad_mixing, ad_w_out;
  std::uint64_t ad_seed = 0;
  long ad_every = 1;
  adaptive->add_option("--method", ad_method, "direct or dual-lp")->required()->check(CLI::IsMember({"direct", "dual-lp"}));
  adaptive->add_option("--input", ad_in, "Mixture CSV")->required();
  adaptive->add_option("--config", ad_config, "Config supplying predictor, mu, betas, warmup");
  adaptive->add_option("--seed", ad_seed, "Seed for the initial demixing vector");
  adaptive->add_option("--out", ad_out, "Extracted signal CSV");
  adaptive->add_option("--telemetry", ad_tel, "Per-step telemetry CSV");
  adaptive->add_option("--every", ad_every, "Telemetry decimation")->check(CLI::PositiveNumber);
  adaptive->add_option("--mixing", ad_mixing, "Ground-truth mixing matrix CSV (adds a PI column)");
  adaptive->add_option("--w-out", ad_w_out, "Final demixing vector CSV");

  // run-experiment
  auto* experiment = app.add_subcommand("run-experiment", "Seeded Monte-Carlo experiment from a JSON config");
  std::string exp_config, exp_out_dir;
  long exp_runs = 0;
  unsigned exp_threads = 0;
  experiment->add_option("--config", exp_config, "Experiment config JSON")->required();
  experiment->add_option("--out-dir", exp_out_dir, "Output directory (overrides config)");
  experiment->add_option("--runs", exp_runs, "Override run_count");
  experiment->add_option("--threads", exp_threads, "Worker threads (0: all cores)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Performance index and source matching");
  std::string ev_mixing, ev_w, ev_y, ev_sources;
  evaluate->add_option("--mixing", ev_mixing, "Mixing matrix CSV");
  evaluate->add_option("--w", ev_w, "Demixing vector CSV");
  evaluate->add_option("--extracted", ev_y, "Extracted signal CSV (first row used)");
  evaluate->add_option("--sources", ev_sources, "Ground-truth sources CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfigError;
  }

  try {
    if (generate->parsed()) {
      SourceSpec spec;
      spec.filters = default_source_filters();
      if (!gen_config.empty()) {
        const auto c = load_config(gen_config);
        spec.filters = c.filters;
        spec.normalize_power = c.normalize_power;
        if (c.source_seed) spec.seed = *c.source_seed;
      }
      if (gen_seed_set) spec.seed = gen_seed;
      spec.length = gen_length;
      csv::save_signal(gen_out, generate_sources(spec));
      return kExitOk;
    }

    if (mixcmd->parsed()) {
      const SignalMatrix s = csv::load_signal(mix_sources);
      MixtureModel model;
      double noise = 0.0;
      bool normalize = mix_row_normalize;
      if (!mix_config.empty()) {
        const auto c = load_config(mix_config);
        noise = c.noise_variance;
        normalize = normalize || c.mixing.row_normalize;
        model.A = mixing_matrix_for_run(c, mix_matrix_seed);
      }
      if (!mix_matrix.empty()) model.A = csv::load_matrix(mix_matrix);
      if (model.A.size() == 0)
        model.A = random_mixing_matrix(s.channel_count(), s.channel_count(), mix_matrix_seed, true);
      if (normalize) model.A = row_normalize(model.A);
      model.row_normalized = normalize;
      if (mix_noise >= 0.0) noise = mix_noise;
      model.noise_variance = noise;
      csv::save_signal(mix_out, mix(model, s, mix_noise_seed));
      if (!mix_matrix_out.empty()) csv::save_matrix(mix_matrix_out, model.A);
      return kExitOk;
    }

    if (pencil->parsed()) {
      const auto sol = solve_pencil(csv::load_matrix(pen_num), csv::load_matrix(pen_den));
      if (sol.degenerate) err << "warning: repeated eigenvalues, eigenvector order is not unique\n";
      std::ofstream file;
      detail::write_eigenpairs(detail::open_or(file, pen_out, out), sol);
      return kExitOk;
    }

    if (batch->parsed()) {
      const SignalMatrix x = csv::load_signal(bat_in);
      const auto mode = bat_mode == "cca" ? BatchMode::cca : BatchMode::gcca;
      if (mode == BatchMode::cca && !batch->count("--delta0")) bat_d0 = 0;
      const auto sep = separate_sequential(x, bat_count, bat_d0, bat_d1, mode);
      csv::save_signal(bat_out, sep.outputs);
      if (!bat_w_out.empty()) csv::save_matrix(bat_w_out, sep.demixing);
      for (const auto& st : sep.stages)
        if (st.degenerate) err << "warning: near-tied eigenvalues, extraction order is ill-determined\n";
      return kExitOk;
    }

    if (adaptive->parsed()) {
      const SignalMatrix x = csv::load_signal(ad_in);
      ExperimentConfig c;
      c.method = ad_method == "direct" ? Method::direct : Method::dual_lp;
      if (!ad_config.empty()) c = load_config(ad_config);
      if (ad_method == "direct" && ad_config.empty()) {
        const DirectParams defaults;
        c.predictor.b = defaults.b;
        c.mu = defaults.mu;
        c.beta_y = defaults.beta;
      }
      std::optional<Matrix> a;
      if (!ad_mixing.empty()) a = csv::load_matrix(ad_mixing);
      std::ofstream tel_file;
      std::ostream* tel = nullptr;
      if (!ad_tel.empty()) {
        tel_file.open(ad_tel);
        if (!tel_file) throw std::invalid_argument("cannot write '" + ad_tel + "'");
        tel = &tel_file;
      }
      Matrix y(1, x.sample_count());
      auto pi = [&](const Vector& w) { return performance_index(global_vector(*a, w).g); };
      Vector w_final;
      if (ad_method == "direct") {
        DirectExtractor ex(x.channel_count(), c.direct_params(), ad_seed);
        if (tel) *tel << "n,y,sigma_y" << (a ? ",PI" : "") << '\n';
        for (Eigen::Index n = 0; n < x.sample_count(); ++n) {
          const auto st = ex.step(x.snapshot(n));
          y(0, n) = st.y;
          if (tel && n % ad_every == 0) {
            *tel << n << ',' << csv::format_double(st.y) << ',' << csv::format_double(ex.sigma_y());
            if (a) *tel << ',' << csv::format_double(pi(ex.w()));
            *tel << '\n';
          }
        }
        w_final = ex.w();
      } else {
        DualLPExtractor ex(x.channel_count(), c.dual_params(), ad_seed);
        if (tel) *tel << "n,y,e,f,sigma_e,sigma_y,sigma_f" << (a ? ",PI" : "") << '\n';
        for (Eigen::Index n = 0; n < x.sample_count(); ++n) {
          const auto st = ex.step(x.snapshot(n));
          y(0, n) = st.y;
          if (tel && n % ad_every == 0) {
            *tel << n << ',' << csv::format_double(st.y) << ',' << csv::format_double(st.e) << ','
                 << csv::format_double(st.f) << ',' << csv::format_double(ex.sigma_e()) << ','
                 << csv::format_double(ex.sigma_y()) << ',' << csv::format_double(ex.sigma_f());
            if (a) *tel << ',' << csv::format_double(pi(ex.w()));
            *tel << '\n';
          }
        }
        w_final = ex.w();
      }
      if (!w_final.allFinite()) throw precondition_error("adaptive extractor diverged (non-finite w)");
      if (!ad_out.empty()) csv::save_signal(ad_out, SignalMatrix(y));
      if (!ad_w_out.empty()) detail::save_vector(ad_w_out, w_final);
      if (a) out << "final_PI_dB=" << csv::format_double(pi(w_final)) << '\n';
      return kExitOk;
    }

    if (experiment->parsed()) {
      if (!std::filesystem::exists(exp_config)) {
        err << "error: config file '" << exp_config << "' does not exist\n";
        return kExitConfigError;
      }
      auto c = load_config(exp_config);
      if (!exp_out_dir.empty()) c.output_directory = exp_out_dir;
      if (exp_runs > 0) c.run_count = static_cast<std::size_t>(exp_runs);
      if (experiment->count("--threads")) c.threads = exp_threads;
      const auto result = run_experiment(c);
      if (!c.output_directory.empty()) write_outputs(result, c.output_directory);
      out << "runs=" << result.runs.size() << " failed=" << result.failed_runs;
      if (!result.curve.empty()) out << " final_mean_PI_dB=" << csv::format_double(result.curve.back().pi_db);
      out << '\n';
      for (const auto& r : result.runs)
        if (!r.ok) err << "run " << r.run << " failed: " << r.error << '\n';
      return result.failed_runs == result.runs.size() ? kExitNumericalError : kExitOk;
    }

    if (evaluate->parsed()) {
      bool any = false;
      if (!ev_mixing.empty() && !ev_w.empty()) {
        const auto g = global_vector(csv::load_matrix(ev_mixing), detail::load_vector(ev_w));
        out << "PI_dB=" << csv::format_double(performance_index(g)) << '\n';
        any = true;
      }
      if (!ev_y.empty() && !ev_sources.empty()) {
        const SignalMatrix y = csv::load_signal(ev_y);
        const SignalMatrix first(Matrix(y.data().topRows(1)));
        const auto m = match_source(first, csv::load_signal(ev_sources));
        out << "matched_source=" << m.index << " correlation=" << csv::format_double(m.correlation) << '\n';
        any = true;
      }
      if (!any) {
        err << "error: evaluate needs --mixing with --w, and/or --extracted with --sources\n";
        return kExitConfigError;
      }
      return kExitOk;
    }
  } catch (const precondition_error& e) {
    err << "numerical precondition failed: " << e.what() << '\n';
    return kExitNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  return kExitConfigError;
}

}  // namespace gcca::cli
