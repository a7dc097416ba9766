#ifndef MVREPROBIT_MODEL_HPP
#define MVREPROBIT_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "format.hpp"
#include "stochastic.hpp"

namespace mvreprobit {

enum class Level { individual_u, couple_v, couple_w };

inline constexpr Level kAllLevels[] = {Level::individual_u, Level::couple_v, Level::couple_w};

inline const char* level_name(Level level) {
  switch (level) {
    case Level::individual_u: return "u";
    case Level::couple_v: return "v";
    case Level::couple_w: return "w";
  }
  return "?";
}

/// Active random-effect levels. Two-level model: {u}; three-level: {u, v, w}.
struct Levels {
  bool u = true;
  bool v = false;
  bool w = false;

  static Levels two_level() { return {true, false, false}; }
  static Levels three_level() { return {true, true, true}; }

  bool active(Level level) const {
    switch (level) {
      case Level::individual_u: return u;
      case Level::couple_v: return v;
      case Level::couple_w: return w;
    }
    return false;
  }

  std::string to_string() const {
    std::string s;
    for (Level l : kAllLevels) {
      if (!active(l)) continue;
      if (!s.empty()) s += ',';
      s += level_name(l);
    }
    return s;
  }

  // Accepts "two", "three", or a comma list drawn from u, v, w (may be empty).
  static Levels parse(const std::string& text) {
    if (text == "two") return two_level();
    if (text == "three") return three_level();
    Levels levels{false, false, false};
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item == "u") levels.u = true;
      else if (item == "v") levels.v = true;
      else if (item == "w") levels.w = true;
      else if (!item.empty()) throw ValidationError("unknown random-effect level '" + item + "'");
    }
    return levels;
  }

  friend bool operator==(const Levels&, const Levels&) = default;
};

struct ModelSpec {
  std::size_t outcomes = 0;    // R
  std::size_t covariates = 0;  // P
  Levels levels;
  double prior_beta_variance = 100.0;
  double iw_prior_dof = 4.0;  // scale is the identity
  int n_iterations = 1000;
  int burn_in = 500;
  int thin = 1;
  int n_chains = 2;
  double target_rejection_low = 0.7;
  double target_rejection_high = 0.8;
  double initial_step = 0.05;
  int adapt_window = 100;
  int adapt_interval = 20;
  double adapt_factor = 1.1;
  double init_jitter_variance = 0.1;
  std::uint64_t seed = 1;

  std::size_t corr_length() const { return CorrVector::length_for(outcomes); }

  int stored_draws() const { return (n_iterations - burn_in) / thin; }

  void validate() const {
    auto fail = [](const std::string& key, const std::string& msg) { throw ValidationError(key + ": " + msg); };
    if (outcomes < 1) fail("model.outcomes", "at least one outcome required");
    if (covariates < 1) fail("model.covariates", "at least one covariate required");
    if (!(prior_beta_variance > 0)) fail("model.prior_beta_variance", "must be positive");
    if (!(iw_prior_dof > static_cast<double>(outcomes) - 1.0)) fail("model.iw_prior_dof", "must exceed outcomes - 1");
    if (n_iterations < 1) fail("sampler.n_iterations", "must be positive");
    if (burn_in < 0) fail("sampler.burn_in", "must be non-negative");
    if (burn_in >= n_iterations) fail("sampler.burn_in", "must be smaller than n_iterations");
    if (thin < 1) fail("sampler.thin", "must be >= 1");
    if (n_chains < 1) fail("sampler.n_chains", "must be >= 1");
    if (!(target_rejection_low > 0 && target_rejection_low < target_rejection_high && target_rejection_high < 1)) {
      fail("sampler.target_rejection", "need 0 < low < high < 1");
    }
    if (!(initial_step > 0)) fail("sampler.initial_step", "must be positive");
    if (adapt_window < 1 || adapt_interval < 1) fail("sampler.adapt_window", "window and interval must be >= 1");
    if (!(adapt_factor > 1)) fail("sampler.adapt_factor", "must exceed 1");
    if (!(init_jitter_variance >= 0)) fail("sampler.init_jitter_variance", "must be non-negative");
  }

  // Everything that shapes the chains except the seed.
  std::string canonical() const {
    std::ostringstream os;
    os << "R=" << outcomes << ";P=" << covariates << ";levels=" << levels.to_string()
       << ";prior_beta_variance=" << format_number(prior_beta_variance)
       << ";iw_prior_dof=" << format_number(iw_prior_dof) << ";n_iterations=" << n_iterations
       << ";burn_in=" << burn_in << ";thin=" << thin << ";target_rejection=" << format_number(target_rejection_low)
       << "," << format_number(target_rejection_high) << ";initial_step=" << format_number(initial_step)
       << ";adapt_window=" << adapt_window << ";adapt_interval=" << adapt_interval
       << ";adapt_factor=" << format_number(adapt_factor)
       << ";init_jitter_variance=" << format_number(init_jitter_variance);
    return os.str();
  }

  std::string hash() const { return hex64(fnv1a(canonical())); }
};

/// One value of every model parameter.
struct ParameterState {
  Matrix B;           // R x P, row r holds beta_r
  CovMatrix sigma_u;  // empty when the level is inactive
  CovMatrix sigma_v;
  CovMatrix sigma_w;
  CorrVector rho_e;

  static ParameterState neutral(std::size_t outcomes, std::size_t covariates, const Levels& levels) {
    const auto r = static_cast<Eigen::Index>(outcomes);
    ParameterState s;
    s.B = Matrix::Zero(r, static_cast<Eigen::Index>(covariates));
    if (levels.u) s.sigma_u = Matrix::Identity(r, r);
    if (levels.v) s.sigma_v = Matrix::Identity(r, r);
    if (levels.w) s.sigma_w = Matrix::Identity(r, r);
    s.rho_e = CorrVector(outcomes);
    return s;
  }

  const CovMatrix& sigma(Level level) const {
    switch (level) {
      case Level::individual_u: return sigma_u;
      case Level::couple_v: return sigma_v;
      case Level::couple_w: return sigma_w;
    }
    return sigma_u;
  }
  CovMatrix& sigma(Level level) { return const_cast<CovMatrix&>(std::as_const(*this).sigma(level)); }

  Matrix sigma_e() const { return rho_e.to_matrix(); }

  // Variance of `level` for outcome r, zero when the level is inactive.
  double variance(Level level, Eigen::Index r) const {
    const auto& s = sigma(level);
    return s.size() == 0 ? 0.0 : s(r, r);
  }
  double covariance(Level level, Eigen::Index r, Eigen::Index rp) const {
    const auto& s = sigma(level);
    return s.size() == 0 ? 0.0 : s(r, rp);
  }

  Levels levels() const { return {sigma_u.size() > 0, sigma_v.size() > 0, sigma_w.size() > 0}; }

  friend bool operator==(const ParameterState& a, const ParameterState& b) {
    return a.B == b.B && a.sigma_u == b.sigma_u && a.sigma_v == b.sigma_v && a.sigma_w == b.sigma_w &&
           a.rho_e == b.rho_e;
  }
};

// Column names in chain files: vec(B) by outcome, lower triangles of the
// active covariance matrices (row-wise, diagonal included), then rho_e.
inline std::vector<std::string> parameter_names(std::size_t outcomes, std::size_t covariates, const Levels& levels) {
  std::vector<std::string> names;
  for (std::size_t r = 1; r <= outcomes; ++r)
    for (std::size_t p = 1; p <= covariates; ++p) names.push_back("B_" + std::to_string(r) + "_" + std::to_string(p));
  for (Level l : kAllLevels) {
    if (!levels.active(l)) continue;
    for (std::size_t i = 1; i <= outcomes; ++i)
      for (std::size_t j = 1; j <= i; ++j)
        names.push_back(std::string("sigma_") + level_name(l) + "_" + std::to_string(i) + "_" + std::to_string(j));
  }
  for (std::size_t l = 0; l < CorrVector::length_for(outcomes); ++l) {
    auto [i, j] = CorrVector::position(l);
    names.push_back("rho_e_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  }
  return names;
}

inline std::vector<double> flatten(const ParameterState& s) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < s.B.rows(); ++r)
    for (Eigen::Index p = 0; p < s.B.cols(); ++p) out.push_back(s.B(r, p));
  for (Level l : kAllLevels) {
    const auto& m = s.sigma(l);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j <= i; ++j) out.push_back(m(i, j));
  }
  for (double e : s.rho_e.entries()) out.push_back(e);
  return out;
}

inline ParameterState unflatten(const std::vector<double>& values, std::size_t outcomes, std::size_t covariates,
                                const Levels& levels) {
  const auto r = static_cast<Eigen::Index>(outcomes);
  const auto p = static_cast<Eigen::Index>(covariates);
  if (values.size() != parameter_names(outcomes, covariates, levels).size()) {
    throw ValidationError("parameter vector has " + std::to_string(values.size()) + " entries, expected " +
                          std::to_string(parameter_names(outcomes, covariates, levels).size()));
  }
  ParameterState s;
  std::size_t at = 0;
  s.B.resize(r, p);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < p; ++j) s.B(i, j) = values[at++];
  for (Level l : kAllLevels) {
    if (!levels.active(l)) continue;
    auto& m = s.sigma(l);
    m.resize(r, r);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = values[at++];
  }
  std::vector<double> rho(values.begin() + static_cast<std::ptrdiff_t>(at), values.end());
  s.rho_e = CorrVector(outcomes, std::move(rho));
  return s;
}

/// Latent quantities, one column per unit.
struct LatentState {
  Matrix y_star;  // R x rows
  Matrix u;       // R x individuals
  Matrix v;       // R x clusters
  Matrix w;       // R x cluster-waves

  Matrix& effects(Level level) {
    switch (level) {
      case Level::individual_u: return u;
      case Level::couple_v: return v;
      case Level::couple_w: return w;
    }
    return u;
  }
  const Matrix& effects(Level level) const { return const_cast<LatentState&>(*this).effects(level); }
};

/// Index structure the kernels run on: design matrix, probit boxes and the
/// row membership of every random-effect unit.
struct Design {
  std::size_t outcomes = 0;
  std::size_t covariates = 0;
  Matrix xt;     // P x rows
  Matrix xtx;    // P x P
  Matrix lower;  // R x rows
  Matrix upper;  // R x rows
  std::vector<std::size_t> row_individual;
  std::vector<std::size_t> row_cluster;
  std::vector<std::size_t> row_cluster_wave;
  std::vector<std::pair<std::size_t, int>> cluster_waves;  // (cluster, wave)
  std::size_t individual_count = 0;
  std::size_t cluster_count = 0;

  std::size_t row_count() const { return row_individual.size(); }

  std::size_t unit_count(Level level) const {
    switch (level) {
      case Level::individual_u: return individual_count;
      case Level::couple_v: return cluster_count;
      case Level::couple_w: return cluster_waves.size();
    }
    return 0;
  }

  const std::vector<std::size_t>& row_unit(Level level) const {
    switch (level) {
      case Level::individual_u: return row_individual;
      case Level::couple_v: return row_cluster;
      case Level::couple_w: return row_cluster_wave;
    }
    return row_individual;
  }

  // Rows per unit (T_ij for u, sum_i T_ij for v, observed members for w).
  std::vector<std::size_t> unit_row_counts(Level level) const {
    std::vector<std::size_t> counts(unit_count(level), 0);
    for (auto unit : row_unit(level)) ++counts[unit];
    return counts;
  }

  static Design build(const PanelDataset& data, const CoupleClusterIndex& clusters) {
    Design d;
    d.outcomes = data.outcome_count();
    d.covariates = data.covariate_count();
    const auto n = static_cast<Eigen::Index>(data.row_count());
    const auto r = static_cast<Eigen::Index>(d.outcomes);
    d.xt.resize(static_cast<Eigen::Index>(d.covariates), n);
    d.lower.resize(r, n);
    d.upper.resize(r, n);
    std::map<std::pair<std::size_t, int>, std::size_t> cw_index;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = data.rows()[static_cast<std::size_t>(i)];
      for (std::size_t p = 0; p < d.covariates; ++p) d.xt(static_cast<Eigen::Index>(p), i) = row.covariates[p];
      for (Eigen::Index k = 0; k < r; ++k) {
        const bool one = row.outcomes[static_cast<std::size_t>(k)] == 1;
        d.lower(k, i) = one ? 0.0 : -kInf;
        d.upper(k, i) = one ? kInf : 0.0;
      }
      const auto ind = data.row_individual()[static_cast<std::size_t>(i)];
      const auto cl = clusters.cluster_of[ind];
      d.row_individual.push_back(ind);
      d.row_cluster.push_back(cl);
      cw_index.emplace(std::make_pair(cl, row.wave), 0);
    }
    for (auto& [key, idx] : cw_index) {
      idx = d.cluster_waves.size();
      d.cluster_waves.push_back(key);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      d.row_cluster_wave.push_back(
          cw_index.at({d.row_cluster[static_cast<std::size_t>(i)], data.rows()[static_cast<std::size_t>(i)].wave}));
    }
    d.xtx = d.xt * d.xt.transpose();
    d.individual_count = data.individual_count();
    d.cluster_count = clusters.cluster_count();
    return d;
  }
};

}  // namespace mvreprobit

#endif  // MVREPROBIT_MODEL_HPP
