#ifndef MVREPROBIT_CLI_HPP
#define MVREPROBIT_CLI_HPP

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "chain_io.hpp"
#include "config.hpp"
#include "data.hpp"
#include "diagnostics.hpp"
#include "error.hpp"
#include "format.hpp"
#include "posterior.hpp"
#include "sampler.hpp"
#include "simulate.hpp"

namespace mvreprobit::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kNumerical = 3 };

/// Command-line arguments after parsing; the command functions below read
/// only the fields they need.
struct Arguments {
  std::string command;
  std::string data;
  std::string config;
  std::string out;
  std::string chains;
  std::string model;  // "two" or "three"
  std::string covariate;
  std::vector<double> values;
  std::map<std::string, std::string> overrides;  // section.key -> value
};

inline RunConfig load_config(const Arguments& a) {
  if (a.config.empty()) return parse_config_text("", a.overrides);
  std::ifstream in(a.config);
  if (!in) throw ValidationError("cannot open config " + a.config);
  return parse_config(in, a.overrides);
}

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(std::string("missing required option ") + flag);
}

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

inline std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline void write_summary_csv(std::ostream& out, const std::vector<ParameterSummary>& rows) {
  out << "parameter,mean,sd,q2.5,q97.5,psrf,excludes_zero\n";
  for (const auto& p : rows) {
    out << p.name << ',' << format_number(p.mean) << ',' << format_number(p.sd) << ',' << format_number(p.q025) << ','
        << format_number(p.q975) << ',' << (std::isnan(p.psrf) ? std::string("NA") : format_number(p.psrf)) << ','
        << (p.excludes_zero ? 1 : 0) << '\n';
  }
}

inline double max_psrf(const PosteriorSummary& s) {
  double worst = 0.0;
  for (const auto& p : s.parameters) {
    if (!std::isnan(p.psrf)) worst = std::max(worst, p.psrf);
  }
  return worst;
}

inline int run_simulate(const Arguments& a, std::ostream& out) {
  require(a.config, "--config");
  require(a.out, "--out");
  const RunConfig cfg = load_config(a);
  if (cfg.scenario.truth.B.size() == 0) throw ValidationError("truth.B: simulate needs a [truth] section");
  const auto sim = simulate_dataset(cfg.scenario);
  fs::create_directories(a.out);
  write_dataset_csv((fs::path(a.out) / "data.csv").string(), sim.data);
  auto truth = open_output(fs::path(a.out) / "truth.csv");
  write_truth_csv(truth, cfg.scenario.truth);
  out << "simulated " << sim.data.row_count() << " rows for " << sim.data.individual_count() << " individuals into "
      << a.out << '\n';
  return kOk;
}

inline int run_fit(const Arguments& a, std::ostream& out, std::ostream& err) {
  require(a.data, "--data");
  require(a.out, "--out");
  RunConfig cfg = load_config(a);
  const PanelDataset data = read_dataset_csv(a.data);
  for (const auto& d : data.dropped()) err << "dropped " << d << '\n';
  cfg.spec.outcomes = data.outcome_count();
  cfg.spec.covariates = data.covariate_count();
  cfg.spec.validate();
  const auto clusters = build_couple_clusters(data);
  const Design design = Design::build(data, clusters);

  std::mutex progress_mutex;
  const int step = std::max(1, cfg.spec.n_iterations / 10);
  ProgressCallback progress;
  if (cfg.verbosity > 0) {
    progress = [&](std::size_t chain, int it) {
      if (it % step != 0 && it != cfg.spec.n_iterations) return;
      std::lock_guard lock(progress_mutex);
      err << "chain " << chain + 1 << ": iteration " << it << "/" << cfg.spec.n_iterations << '\n';
    };
  }
  const auto start = std::chrono::steady_clock::now();
  const ChainStore store = run_chains(cfg.spec, design, cfg.threads, progress);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_chain_store(a.out, store);

  nlohmann::json manifest;
  manifest["seed"] = cfg.spec.seed;
  manifest["spec_hash"] = cfg.spec.hash();
  manifest["spec"] = cfg.spec.canonical();
  manifest["wall_seconds"] = seconds;
  manifest["rows"] = data.row_count();
  manifest["individuals"] = data.individual_count();
  manifest["clusters"] = clusters.cluster_count();
  manifest["outcomes"] = data.meta().outcome_labels;
  manifest["covariates"] = data.meta().covariate_labels;
  manifest["chains"] = nlohmann::json::array();
  for (const auto& c : store.chains) {
    manifest["chains"].push_back({{"file", chain_file_name(c.chain)},
                                  {"draws", c.draws.size()},
                                  {"step_size", c.step_size},
                                  {"rejection_rate", c.frozen_rejection_rate()}});
  }
  if (store.chains.size() >= 2 && cfg.spec.stored_draws() >= 2) {
    const auto summary = summarize(store);
    const double worst = max_psrf(summary);
    manifest["max_psrf"] = worst;
    manifest["psrf_warning"] = worst > cfg.psrf_threshold;
    if (worst > cfg.psrf_threshold) {
      err << "warning: max psrf " << fixed(worst, 3) << " exceeds " << cfg.psrf_threshold << '\n';
    }
  }
  auto mf = open_output(fs::path(a.out) / "manifest.json");
  mf << manifest.dump(2) << '\n';
  out << "wrote " << store.chains.size() << " chains to " << a.out << " in " << fixed(seconds, 1) << " s\n";
  return kOk;
}

inline int run_diagnose(const Arguments& a, std::ostream& out, std::ostream& err) {
  require(a.chains, "--chains");
  const RunConfig cfg = load_config(a);
  const ChainStore store = load_chain_store(a.chains);
  const auto summary = summarize(store);
  out << std::left << std::setw(16) << "parameter" << std::right << std::setw(10) << "mean" << std::setw(10) << "sd"
      << std::setw(10) << "psrf" << '\n';
  int flagged = 0;
  for (const auto& p : summary.parameters) {
    const bool bad = !std::isnan(p.psrf) && p.psrf > cfg.psrf_threshold;
    flagged += bad ? 1 : 0;
    out << std::left << std::setw(16) << p.name << std::right << std::setw(10) << fixed(p.mean) << std::setw(10)
        << fixed(p.sd) << std::setw(10) << fixed(p.psrf, 3) << (bad ? "  *" : "") << '\n';
  }
  for (const auto& c : store.chains) {
    out << "chain " << c.chain + 1 << " rejection rate " << fixed(c.frozen_rejection_rate(), 3) << '\n';
  }
  if (flagged > 0) {
    err << "warning: " << flagged << " parameter(s) with psrf above " << cfg.psrf_threshold << '\n';
  }
  const fs::path dir(a.chains);
  auto diag = open_output(dir / "diagnostics.csv");
  write_summary_csv(diag, summary.parameters);

  // Running means per chain, one column per (chain, parameter).
  const auto names = parameter_names(store.spec.outcomes, store.spec.covariates, store.spec.levels);
  const auto draws = flattened_draws(store);
  std::vector<std::vector<std::vector<double>>> means(draws.size());
  std::size_t length = 0;
  for (std::size_t c = 0; c < draws.size(); ++c) {
    length = std::max(length, draws[c].size());
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<double> series;
      for (const auto& d : draws[c]) series.push_back(d[k]);
      means[c].push_back(series.empty() ? series : running_means(series));
    }
  }
  auto rm = open_output(dir / "running_means.csv");
  rm << "draw";
  for (std::size_t c = 0; c < draws.size(); ++c) {
    for (const auto& n : names) rm << ",chain" << store.chains[c].chain + 1 << ':' << n;
  }
  rm << '\n';
  for (std::size_t i = 0; i < length; ++i) {
    rm << i + 1;
    for (const auto& chain : means) {
      for (const auto& series : chain) rm << ',' << (i < series.size() ? format_number(series[i]) : std::string());
    }
    rm << '\n';
  }
  return kOk;
}

inline int run_summarize(const Arguments& a, std::ostream& out) {
  require(a.chains, "--chains");
  const ChainStore store = load_chain_store(a.chains);
  std::vector<ParameterSummary> rows = summarize(store).parameters;
  for (const auto& icc : intra_cluster_summary(store)) {
    rows.push_back(icc.within_individual);
    if (store.spec.levels.v || store.spec.levels.w) rows.push_back(icc.within_couple);
  }
  write_summary_csv(out, rows);
  return kOk;
}

inline int run_correlations(const Arguments& a, std::ostream& out) {
  require(a.chains, "--chains");
  const ChainStore store = load_chain_store(a.chains);
  if (a.model != "two" && a.model != "three") throw ValidationError("--model must be 'two' or 'three'");
  const bool couple = store.spec.levels.v || store.spec.levels.w;
  if ((a.model == "three") != couple) {
    throw ValidationError("--model " + a.model + " does not match the chains (levels " + store.spec.levels.to_string() + ")");
  }
  if (store.spec.outcomes < 2) throw ValidationError("correlations need at least two outcomes");
  const auto decomposition = correlation_decomposition(store);

  std::vector<ParameterSummary> rows;
  for (const auto& pd : decomposition) {
    rows.push_back(pd.residual);
    for (const auto* s : {&pd.individual, &pd.couple_fixed, &pd.couple_varying}) {
      if (!std::isnan(s->mean)) rows.push_back(*s);
    }
    rows.push_back(pd.overall);
  }
  const fs::path dir(a.out.empty() ? a.chains : a.out);
  fs::create_directories(dir);
  auto csv = open_output(dir / "correlations.csv");
  write_summary_csv(csv, rows);

  // Unadjusted tetrachoric correlations alongside, when the data are given.
  std::optional<PanelDataset> data;
  if (!a.data.empty()) data = read_dataset_csv(a.data);
  out << "pair,residual,individual,couple_fixed,couple_varying,adjusted,adjusted_plugin";
  if (data) out << ",unadjusted,unadjusted_se";
  out << '\n';
  for (const auto& pd : decomposition) {
    out << pd.r + 1 << '-' << pd.rp + 1 << ',' << fixed(pd.residual.mean) << ',' << fixed(pd.individual.mean) << ','
        << fixed(pd.couple_fixed.mean) << ',' << fixed(pd.couple_varying.mean) << ',' << fixed(pd.overall.mean) << ','
        << fixed(pd.overall_plugin);
    if (data) {
      const auto t = tetrachoric_correlation(contingency_table(*data, pd.r, pd.rp));
      out << ',' << fixed(t.rho) << ',' << fixed(t.se);
    }
    out << '\n';
  }
  return kOk;
}

inline int run_predict_marginals(const Arguments& a, std::ostream& out) {
  require(a.chains, "--chains");
  require(a.data, "--data");
  require(a.covariate, "--covariate");
  if (a.values.empty()) throw ValidationError("missing required option --values");
  const ChainStore store = load_chain_store(a.chains);
  const PanelDataset data = read_dataset_csv(a.data);
  const ParameterState mean = posterior_mean_state(store);
  out << "covariate,value";
  for (const auto& l : data.meta().outcome_labels) out << ',' << l;
  out << '\n';
  for (double v : a.values) {
    const auto probs = predicted_marginal_probabilities(mean, data, a.covariate, v);
    out << a.covariate << ',' << format_number(v);
    for (double p : probs) out << ',' << fixed(p);
    out << '\n';
  }
  return kOk;
}

inline int run_tetrachoric(const Arguments& a, std::ostream& out) {
  require(a.data, "--data");
  const PanelDataset data = read_dataset_csv(a.data);
  const auto& labels = data.meta().outcome_labels;
  out << "first,second,rho,se,boundary,n\n";
  for (std::size_t r = 1; r < labels.size(); ++r) {
    for (std::size_t rp = 0; rp < r; ++rp) {
      const auto t = tetrachoric_correlation(contingency_table(data, r, rp));
      out << labels[r] << ',' << labels[rp] << ',' << fixed(t.rho) << ',' << fixed(t.se) << ','
          << (t.boundary ? 1 : 0) << ',' << data.row_count() << '\n';
    }
  }
  return kOk;
}

/// Runs one command and maps failures to exit codes: 2 for invalid input,
/// 3 for numerical failure, 1 for anything else.
inline int dispatch(const Arguments& a, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (a.command == "simulate") return run_simulate(a, out);
    if (a.command == "fit") return run_fit(a, out, err);
    if (a.command == "diagnose") return run_diagnose(a, out, err);
    if (a.command == "summarize") return run_summarize(a, out);
    if (a.command == "correlations") return run_correlations(a, out);
    if (a.command == "predict-marginals") return run_predict_marginals(a, out);
    if (a.command == "tetrachoric") return run_tetrachoric(a, out);
    throw ValidationError("unknown command '" + a.command + "'");
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace mvreprobit::cli

#endif  // MVREPROBIT_CLI_HPP
