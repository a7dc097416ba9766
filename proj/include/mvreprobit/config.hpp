#ifndef MVREPROBIT_CONFIG_HPP
#define MVREPROBIT_CONFIG_HPP

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "data.hpp"
#include "error.hpp"
#include "model.hpp"
#include "simulate.hpp"

namespace mvreprobit {

// Sectioned INI file. Keys are addressed as "section.key"; command-line
// overrides use the same addresses and win over the file.
//
//   [model]     levels, prior_beta_variance, iw_prior_dof
//   [sampler]   n_iterations, burn_in, thin, n_chains, seed, initial_step,
//               target_rejection_low, target_rejection_high, adapt_window,
//               adapt_interval, adapt_factor, init_jitter_variance
//   [run]       threads, verbosity, psrf_threshold
//   [simulate]  units, waves, p_partnered, p_form, p_dissolve, seed
//   [truth]     B, sigma_u, sigma_v, sigma_w  (rows split by ';')
//               rho_e                         (lower triangle, row-wise)

struct RunConfig {
  ModelSpec spec;
  SimulationScenario scenario;
  std::size_t threads = 1;
  int verbosity = 1;
  double psrf_threshold = 1.1;
};

inline Matrix parse_matrix(const std::string& text, const std::string& key) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row_text;
  while (std::getline(ss, row_text, ';')) {
    auto& row = rows.emplace_back();
    std::stringstream rs(row_text);
    std::string cell;
    while (std::getline(rs, cell, ',')) {
      auto v = parse_optional_number(trim(cell), key);
      if (!v) throw ValidationError(key + ": empty matrix entry");
      row.push_back(*v);
    }
  }
  if (rows.empty() || rows.front().empty()) throw ValidationError(key + ": empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw ValidationError(key + ": ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    auto v = parse_optional_number(trim(cell), key);
    if (!v) throw ValidationError(key + ": empty list entry");
    out.push_back(*v);
  }
  return out;
}

namespace detail {

template <class T>
T parse_scalar(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if constexpr (std::is_unsigned_v<T>) {
    if (!t.empty() && t[0] == '-') throw ValidationError(key + ": must be non-negative");
  }
  std::istringstream is(t);
  T value{};
  is >> value;
  if (!is || !is.eof()) throw ValidationError(key + ": cannot parse '" + text + "'");
  return value;
}

inline std::map<std::string, std::string> flatten_ini(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> flat;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ValidationError("config key '" + section + "' must sit inside a section");
    for (const auto& [key, value] : body) flat[section + "." + key] = value.data();
  }
  return flat;
}

}  // namespace detail

/// Builds a RunConfig from INI text plus overrides. Unknown keys and
/// malformed values raise ValidationError naming the key.
inline RunConfig parse_config(std::istream& ini, const std::map<std::string, std::string>& overrides = {}) {
  auto flat = detail::flatten_ini(ini);
  for (const auto& [k, v] : overrides) flat[k] = v;

  RunConfig cfg;
  Matrix truth_b;
  std::map<Level, Matrix> truth_sigma;
  std::vector<double> truth_rho;
  bool have_rho = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto scalar = [](auto& field) {
    return Setter([&field](const std::string& v, const std::string& k) {
      field = detail::parse_scalar<std::remove_reference_t<decltype(field)>>(v, k);
    });
  };
  const std::map<std::string, Setter> setters = {
      {"model.levels", [&](const std::string& v, const std::string&) { cfg.spec.levels = Levels::parse(trim(v)); }},
      {"model.prior_beta_variance", scalar(cfg.spec.prior_beta_variance)},
      {"model.iw_prior_dof", scalar(cfg.spec.iw_prior_dof)},
      {"sampler.n_iterations", scalar(cfg.spec.n_iterations)},
      {"sampler.burn_in", scalar(cfg.spec.burn_in)},
      {"sampler.thin", scalar(cfg.spec.thin)},
      {"sampler.n_chains", scalar(cfg.spec.n_chains)},
      {"sampler.seed", scalar(cfg.spec.seed)},
      {"sampler.initial_step", scalar(cfg.spec.initial_step)},
      {"sampler.target_rejection_low", scalar(cfg.spec.target_rejection_low)},
      {"sampler.target_rejection_high", scalar(cfg.spec.target_rejection_high)},
      {"sampler.adapt_window", scalar(cfg.spec.adapt_window)},
      {"sampler.adapt_interval", scalar(cfg.spec.adapt_interval)},
      {"sampler.adapt_factor", scalar(cfg.spec.adapt_factor)},
      {"sampler.init_jitter_variance", scalar(cfg.spec.init_jitter_variance)},
      {"run.threads", scalar(cfg.threads)},
      {"run.verbosity", scalar(cfg.verbosity)},
      {"run.psrf_threshold", scalar(cfg.psrf_threshold)},
      {"simulate.units", scalar(cfg.scenario.units)},
      {"simulate.waves", scalar(cfg.scenario.waves)},
      {"simulate.p_partnered", scalar(cfg.scenario.p_partnered)},
      {"simulate.p_form", scalar(cfg.scenario.p_form)},
      {"simulate.p_dissolve", scalar(cfg.scenario.p_dissolve)},
      {"simulate.seed", scalar(cfg.scenario.seed)},
      {"truth.B", [&](const std::string& v, const std::string& k) { truth_b = parse_matrix(v, k); }},
      {"truth.sigma_u", [&](const std::string& v, const std::string& k) { truth_sigma[Level::individual_u] = parse_matrix(v, k); }},
      {"truth.sigma_v", [&](const std::string& v, const std::string& k) { truth_sigma[Level::couple_v] = parse_matrix(v, k); }},
      {"truth.sigma_w", [&](const std::string& v, const std::string& k) { truth_sigma[Level::couple_w] = parse_matrix(v, k); }},
      {"truth.rho_e", [&](const std::string& v, const std::string& k) {
         truth_rho = trim(v).empty() ? std::vector<double>{} : parse_list(v, k);
         have_rho = true;
       }},
  };
  for (const auto& [key, value] : flat) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ValidationError("unknown config key '" + key + "'");
    it->second(value, key);
  }
  if (cfg.threads < 1) throw ValidationError("run.threads: must be >= 1");
  if (!(cfg.psrf_threshold > 1.0)) throw ValidationError("run.psrf_threshold: must exceed 1");

  // Dimensions come from the data at fit time; validate everything else now.
  ModelSpec probe = cfg.spec;
  probe.outcomes = std::max<std::size_t>(probe.outcomes, 1);
  probe.covariates = std::max<std::size_t>(probe.covariates, 1);
  probe.validate();

  if (truth_b.size() > 0) {
    auto& t = cfg.scenario.truth;
    t.B = truth_b;
    const auto r = static_cast<std::size_t>(truth_b.rows());
    for (Level l : kAllLevels) {
      const auto found = truth_sigma.find(l);
      if (cfg.spec.levels.active(l)) {
        if (found == truth_sigma.end()) {
          throw ValidationError(std::string("truth.sigma_") + level_name(l) + ": required by model.levels");
        }
        t.sigma(l) = found->second;
      } else if (found != truth_sigma.end()) {
        throw ValidationError(std::string("truth.sigma_") + level_name(l) + ": level not in model.levels");
      }
    }
    if (!have_rho && r > 1) throw ValidationError("truth.rho_e: required when B has more than one row");
    try {
      t.rho_e = CorrVector(r, truth_rho);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("truth.rho_e: ") + e.what());
    }
  } else if (!truth_sigma.empty() || have_rho) {
    throw ValidationError("truth.B: required when other truth keys are given");
  }
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text, const std::map<std::string, std::string>& overrides = {}) {
  std::istringstream in(text);
  return parse_config(in, overrides);
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_CONFIG_HPP
