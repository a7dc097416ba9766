#ifndef MVREPROBIT_SAMPLER_HPP
#define MVREPROBIT_SAMPLER_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "random.hpp"
#include "stochastic.hpp"

namespace mvreprobit {

// Sum of the active random effects for every row (R x rows), optionally
// leaving one level out.
inline Matrix effect_sum(const Design& d, const ParameterState& p, const LatentState& z,
                         std::optional<Level> skip = std::nullopt) {
  Matrix sum = Matrix::Zero(static_cast<Eigen::Index>(d.outcomes), static_cast<Eigen::Index>(d.row_count()));
  const Levels levels = p.levels();
  for (Level l : kAllLevels) {
    if (!levels.active(l) || (skip && *skip == l)) continue;
    const auto& effects = z.effects(l);
    const auto& unit = d.row_unit(l);
    for (std::size_t i = 0; i < unit.size(); ++i) sum.col(static_cast<Eigen::Index>(i)) += effects.col(static_cast<Eigen::Index>(unit[i]));
  }
  return sum;
}

// mu = B x + active effects, R x rows.
inline Matrix linear_predictor(const Design& d, const ParameterState& p, const LatentState& z,
                               std::optional<Level> skip = std::nullopt) {
  return p.B * d.xt + effect_sum(d, p, z, skip);
}

/// y* given everything else: one whitened Gibbs sweep per row under the
/// truncated N(mu, Sigma_e) on the row's orthant box.
inline void gibbs_sample_y_star(const Design& d, const ParameterState& p, LatentState& z, RandomStream& rng) {
  const TruncatedMvnSampler sampler(cholesky_lower(p.sigma_e()));
  const Matrix mean = linear_predictor(d, p, z);
  for (Eigen::Index i = 0; i < mean.cols(); ++i) {
    sampler.sweep(mean.col(i), d.lower.col(i), d.upper.col(i), z.y_star.col(i), rng);
  }
}

/// Closed-form conditional of one random-effect vector that appears in
/// `count` rows with summed residual `residual_sum`:
///   cov  = (count Sigma_e^{-1} + Sigma_level^{-1})^{-1}
///   mean = cov Sigma_e^{-1} residual_sum
struct EffectConditional {
  Vector mean;
  Matrix covariance;
};

inline EffectConditional effect_conditional(const Matrix& sigma_e, const CovMatrix& sigma_level, std::size_t count,
                                            const Vector& residual_sum) {
  const Matrix se_inv = spd_inverse(sigma_e);
  const Matrix precision = static_cast<double>(count) * se_inv + spd_inverse(sigma_level);
  EffectConditional c;
  c.covariance = spd_inverse(precision);
  c.mean = c.covariance * se_inv * residual_sum;
  return c;
}

/// Redraws every unit of `level` from its conditional normal. Units sharing a
/// row count share one Cholesky factor of the precision.
inline void gibbs_sample_effects(Level level, const Design& d, const ParameterState& p, LatentState& z,
                                 RandomStream& rng) {
  if (!p.levels().active(level)) return;
  const auto r = static_cast<Eigen::Index>(d.outcomes);
  const Matrix resid = z.y_star - linear_predictor(d, p, z, level);
  const auto& unit = d.row_unit(level);
  const std::size_t units = d.unit_count(level);
  Matrix sums = Matrix::Zero(r, static_cast<Eigen::Index>(units));
  std::vector<std::size_t> counts(units, 0);
  for (std::size_t i = 0; i < unit.size(); ++i) {
    sums.col(static_cast<Eigen::Index>(unit[i])) += resid.col(static_cast<Eigen::Index>(i));
    ++counts[unit[i]];
  }
  const Matrix se_inv = spd_inverse(p.sigma_e());
  const Matrix level_inv = spd_inverse(p.sigma(level));
  std::map<std::size_t, Matrix> factors;
  auto& effects = z.effects(level);
  Vector noise(r);
  for (std::size_t j = 0; j < units; ++j) {
    auto it = factors.find(counts[j]);
    if (it == factors.end()) {
      it = factors.emplace(counts[j], cholesky_lower(static_cast<double>(counts[j]) * se_inv + level_inv)).first;
    }
    const Matrix& lower = it->second;
    const Vector linear = se_inv * sums.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index k = 0; k < r; ++k) noise[k] = rng.normal();
    const Vector half = lower.triangularView<Eigen::Lower>().solve(linear);
    effects.col(static_cast<Eigen::Index>(j)) = lower.transpose().triangularView<Eigen::Upper>().solve(half + noise);
  }
}

inline void gibbs_sample_u(const Design& d, const ParameterState& p, LatentState& z, RandomStream& rng) {
  gibbs_sample_effects(Level::individual_u, d, p, z, rng);
}
inline void gibbs_sample_v(const Design& d, const ParameterState& p, LatentState& z, RandomStream& rng) {
  gibbs_sample_effects(Level::couple_v, d, p, z, rng);
}
inline void gibbs_sample_w(const Design& d, const ParameterState& p, LatentState& z, RandomStream& rng) {
  gibbs_sample_effects(Level::couple_w, d, p, z, rng);
}

/// vec(B) ~ N(mu, Sigma_beta) with
///   Sigma_beta^{-1} = I / prior_variance + Sigma_e^{-1} (x) X^T X
///   Sigma_beta^{-1} mu = vec(X^T (y* - effects) Sigma_e^{-1})
/// where vec stacks beta_1, ..., beta_R.
inline void gibbs_sample_beta(const Design& d, ParameterState& p, const LatentState& z, double prior_variance,
                              RandomStream& rng) {
  const auto r = static_cast<Eigen::Index>(d.outcomes);
  const auto k = static_cast<Eigen::Index>(d.covariates);
  const Matrix target = z.y_star - effect_sum(d, p, z);
  const Matrix se_inv = spd_inverse(p.sigma_e());
  const Matrix xtz = d.xt * target.transpose();  // P x R
  const Matrix rhs = xtz * se_inv;
  Matrix precision = Matrix::Identity(r * k, r * k) / prior_variance;
  Vector linear(r * k);
  for (Eigen::Index a = 0; a < r; ++a) {
    for (Eigen::Index b = 0; b < r; ++b) precision.block(a * k, b * k, k, k) += se_inv(a, b) * d.xtx;
    linear.segment(a * k, k) = rhs.col(a);
  }
  const Vector beta = sample_mvn_canonical(precision, linear, rng);
  for (Eigen::Index a = 0; a < r; ++a) p.B.row(a) = beta.segment(a * k, k).transpose();
}

/// Conjugate update Sigma ~ IW(I + sum_j e_j e_j^T, prior_dof + units) for
/// effects stored one unit per column.
inline CovMatrix sample_sigma_posterior(const Matrix& effects, double prior_dof, RandomStream& rng) {
  const auto r = effects.rows();
  const Matrix scale = Matrix::Identity(r, r) + effects * effects.transpose();
  return sample_inverse_wishart(scale, prior_dof + static_cast<double>(effects.cols()), rng);
}

inline void gibbs_sample_sigma(Level level, ParameterState& p, const LatentState& z, double prior_dof,
                               RandomStream& rng) {
  if (!p.levels().active(level)) return;
  p.sigma(level) = sample_sigma_posterior(z.effects(level), prior_dof, rng);
}

/// Sufficient statistics of the residuals e = y* - mu for the Sigma_e likelihood.
struct ResidualScatter {
  Matrix cross;  // sum_rows e e^T
  double count = 0.0;
};

inline ResidualScatter residual_scatter(const Design& d, const ParameterState& p, const LatentState& z) {
  const Matrix e = z.y_star - linear_predictor(d, p, z);
  return {e * e.transpose(), static_cast<double>(e.cols())};
}

// Gaussian log-density of the residuals up to a constant, log domain throughout.
inline double residual_log_likelihood(const ResidualScatter& s, const Matrix& sigma_e) {
  const Matrix lower = cholesky_lower(sigma_e);
  const Matrix lower_inv = lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(lower.rows(), lower.cols()));
  const Matrix precision = lower_inv.transpose() * lower_inv;
  return -0.5 * s.count * log_determinant_from_cholesky(lower) - 0.5 * (precision.cwiseProduct(s.cross)).sum();
}

/// Metropolis acceptance probability for moving entry l of rho to `value`.
/// Zero outside the PD body (uniform prior on it), otherwise the likelihood ratio.
inline double metropolis_acceptance_probability(const ResidualScatter& s, const CorrVector& rho, std::size_t l,
                                                double value) {
  if (!is_positive_definite_corr_update(rho, l, value)) return 0.0;
  CorrVector proposal = rho;
  proposal.set_keeping_pd(l, value);
  const double log_ratio =
      residual_log_likelihood(s, proposal.to_matrix()) - residual_log_likelihood(s, rho.to_matrix());
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

/// Random-walk Metropolis over the residual correlations, one coordinate at a
/// time: rho'_l = rho_l + gamma_l * N(0, 1). Returns per-coordinate accept flags.
inline std::vector<bool> metropolis_step_rho(const ResidualScatter& s, CorrVector& rho,
                                             const std::vector<double>& gamma, RandomStream& rng) {
  std::vector<bool> accepted(rho.size(), false);
  double current = residual_log_likelihood(s, rho.to_matrix());
  for (std::size_t l = 0; l < rho.size(); ++l) {
    const double value = rho[l] + gamma[l] * rng.normal();
    if (!is_positive_definite_corr_update(rho, l, value)) continue;
    CorrVector proposal = rho;
    proposal.set_keeping_pd(l, value);
    const double candidate = residual_log_likelihood(s, proposal.to_matrix());
    if (std::log(rng.uniform()) < candidate - current) {
      rho = std::move(proposal);
      current = candidate;
      accepted[l] = true;
    }
  }
  return accepted;
}

/// Multiplies gamma_l by `factor` when coordinate l rejects too rarely and
/// divides when it rejects too often.
inline std::vector<double> adapt_step_size(const std::vector<double>& rejection_rates, std::vector<double> gamma,
                                           double target_low, double target_high, double factor) {
  for (std::size_t l = 0; l < gamma.size(); ++l) {
    if (rejection_rates[l] > target_high) gamma[l] /= factor;
    else if (rejection_rates[l] < target_low) gamma[l] *= factor;
  }
  return gamma;
}

// Trailing window of accept flags per coordinate.
class AcceptanceWindow {
 public:
  AcceptanceWindow(std::size_t coordinates, std::size_t window) : window_(window), history_(coordinates) {}

  void record(const std::vector<bool>& accepted) {
    for (std::size_t l = 0; l < history_.size(); ++l) {
      history_[l].push_back(accepted[l]);
      if (history_[l].size() > window_) history_[l].pop_front();
    }
  }

  bool full() const { return !history_.empty() && history_.front().size() == window_; }

  std::vector<double> rejection_rates() const {
    std::vector<double> rates;
    for (const auto& h : history_) {
      const auto acc = static_cast<double>(std::count(h.begin(), h.end(), true));
      rates.push_back(h.empty() ? 0.0 : 1.0 - acc / static_cast<double>(h.size()));
    }
    return rates;
  }

 private:
  std::size_t window_;
  std::vector<std::deque<bool>> history_;
};

/// Output of one chain: thinned post-burn-in draws plus Metropolis bookkeeping.
struct ChainRecord {
  std::size_t chain = 0;
  std::uint64_t seed = 0;
  std::vector<ParameterState> draws;
  std::vector<double> step_size;                // frozen after burn-in
  std::vector<std::vector<double>> step_trace;  // gamma after each adaptation
  std::vector<std::size_t> accepted;            // post-burn-in, per coordinate
  std::vector<std::size_t> proposed;

  double rejection_rate(std::size_t l) const {
    return proposed[l] == 0 ? 0.0 : 1.0 - static_cast<double>(accepted[l]) / static_cast<double>(proposed[l]);
  }

  // Rejection rate pooled over coordinates after the step size froze.
  double frozen_rejection_rate() const {
    std::size_t acc = 0;
    std::size_t prop = 0;
    for (std::size_t l = 0; l < proposed.size(); ++l) {
      acc += accepted[l];
      prop += proposed[l];
    }
    return prop == 0 ? 0.0 : 1.0 - static_cast<double>(acc) / static_cast<double>(prop);
  }
};

struct ChainStore {
  ModelSpec spec;
  std::vector<ChainRecord> chains;
};

inline void check_state_shape(const ParameterState& s, const ModelSpec& spec) {
  const auto r = static_cast<Eigen::Index>(spec.outcomes);
  if (s.B.rows() != r || s.B.cols() != static_cast<Eigen::Index>(spec.covariates)) {
    throw ValidationError("initial B has wrong shape");
  }
  for (Level l : kAllLevels) {
    const auto& m = s.sigma(l);
    if (spec.levels.active(l) != (m.size() > 0)) {
      throw ValidationError(std::string("initial sigma_") + level_name(l) + " does not match the active levels");
    }
    if (m.size() > 0 && (m.rows() != r || m.cols() != r)) {
      throw ValidationError(std::string("initial sigma_") + level_name(l) + " has wrong shape");
    }
  }
  if (s.rho_e.dim() != spec.outcomes) throw ValidationError("initial rho_e has wrong dimension");
}

/// Starting point of a chain: neutral values with B jittered by
/// N(0, init_jitter_variance) so chains start apart, or a user-supplied state
/// (fully checked). y* starts as one sequential truncated draw.
inline std::pair<ParameterState, LatentState> initialize_chain(const ModelSpec& spec, const Design& d,
                                                               const std::optional<ParameterState>& init,
                                                               RandomStream& rng) {
  ParameterState p;
  if (init) {
    p = *init;
    check_state_shape(p, spec);
    p.rho_e.validate();
    for (Level l : kAllLevels) {
      if (spec.levels.active(l)) cholesky_lower(p.sigma(l));
    }
  } else {
    p = ParameterState::neutral(spec.outcomes, spec.covariates, spec.levels);
    const double sd = std::sqrt(spec.init_jitter_variance);
    for (Eigen::Index i = 0; i < p.B.size(); ++i) p.B.data()[i] = rng.normal(0.0, sd);
  }
  const auto r = static_cast<Eigen::Index>(spec.outcomes);
  LatentState z;
  z.u = Matrix::Zero(r, spec.levels.u ? static_cast<Eigen::Index>(d.individual_count) : 0);
  z.v = Matrix::Zero(r, spec.levels.v ? static_cast<Eigen::Index>(d.cluster_count) : 0);
  z.w = Matrix::Zero(r, spec.levels.w ? static_cast<Eigen::Index>(d.cluster_waves.size()) : 0);
  z.y_star.resize(r, static_cast<Eigen::Index>(d.row_count()));
  const TruncatedMvnSampler sampler(cholesky_lower(p.sigma_e()));
  const Matrix mean = p.B * d.xt;
  for (Eigen::Index i = 0; i < mean.cols(); ++i) {
    z.y_star.col(i) = sampler.sequential_draw(mean.col(i), d.lower.col(i), d.upper.col(i), rng);
  }
  return {std::move(p), std::move(z)};
}

/// One full sweep in the fixed order y* -> u -> v -> w -> B -> Sigma_u ->
/// Sigma_v -> Sigma_w -> rho_e. Returns the Metropolis accept flags.
inline std::vector<bool> gibbs_sweep(const ModelSpec& spec, const Design& d, ParameterState& p, LatentState& z,
                                     const std::vector<double>& gamma, RandomStream& rng) {
  gibbs_sample_y_star(d, p, z, rng);
  for (Level l : kAllLevels) gibbs_sample_effects(l, d, p, z, rng);
  gibbs_sample_beta(d, p, z, spec.prior_beta_variance, rng);
  for (Level l : kAllLevels) gibbs_sample_sigma(l, p, z, spec.iw_prior_dof, rng);
  if (p.rho_e.size() == 0) return {};
  return metropolis_step_rho(residual_scatter(d, p, z), p.rho_e, gamma, rng);
}

using ProgressCallback = std::function<void(std::size_t chain, int iteration)>;

/// Runs one chain. The stream is derived from (spec.seed, chain), so a chain
/// is reproducible on its own regardless of how many chains run or where.
inline ChainRecord run_chain(const ModelSpec& spec, const Design& d, std::size_t chain,
                             const std::optional<ParameterState>& init = std::nullopt,
                             const ProgressCallback& progress = {}, LatentState* final_latent = nullptr) {
  spec.validate();
  if (d.outcomes != spec.outcomes || d.covariates != spec.covariates) {
    throw ValidationError("model spec dimensions do not match the dataset");
  }
  RandomStream rng(spec.seed, chain);
  auto [p, z] = initialize_chain(spec, d, init, rng);

  const std::size_t coords = spec.corr_length();
  ChainRecord rec;
  rec.chain = chain;
  rec.seed = spec.seed;
  rec.step_size.assign(coords, spec.initial_step);
  rec.accepted.assign(coords, 0);
  rec.proposed.assign(coords, 0);
  rec.draws.reserve(static_cast<std::size_t>(spec.stored_draws()));
  AcceptanceWindow window(coords, static_cast<std::size_t>(spec.adapt_window));

  for (int it = 1; it <= spec.n_iterations; ++it) {
    std::vector<bool> flags;
    try {
      flags = gibbs_sweep(spec, d, p, z, rec.step_size, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("chain " + std::to_string(chain) + ", iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it <= spec.burn_in) {
      window.record(flags);
      if (it % spec.adapt_interval == 0 && window.full()) {
        rec.step_size = adapt_step_size(window.rejection_rates(), rec.step_size, spec.target_rejection_low,
                                        spec.target_rejection_high, spec.adapt_factor);
        rec.step_trace.push_back(rec.step_size);
      }
    } else {
      for (std::size_t l = 0; l < coords; ++l) {
        ++rec.proposed[l];
        if (flags[l]) ++rec.accepted[l];
      }
      if ((it - spec.burn_in) % spec.thin == 0) rec.draws.push_back(p);
    }
    if (progress) progress(chain, it);
  }
  if (final_latent) *final_latent = std::move(z);
  return rec;
}

/// Runs spec.n_chains chains on up to `threads` worker threads.
inline ChainStore run_chains(const ModelSpec& spec, const Design& d, std::size_t threads = 1,
                             const ProgressCallback& progress = {}) {
  spec.validate();
  ChainStore store;
  store.spec = spec;
  store.chains.resize(static_cast<std::size_t>(spec.n_chains));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < store.chains.size(); c = next++) {
      try {
        store.chains[c] = run_chain(spec, d, c, std::nullopt, progress);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, store.chains.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return store;
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_SAMPLER_HPP
