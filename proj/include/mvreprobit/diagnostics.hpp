#ifndef MVREPROBIT_DIAGNOSTICS_HPP
#define MVREPROBIT_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "sampler.hpp"

namespace mvreprobit {

/// Gelman-Rubin potential scale reduction factor over whole (unsplit) chains:
///   W = mean within-chain variance, B/n = variance of chain means,
///   R = sqrt(((n - 1)/n W + B/n) / W).
/// Identical chains give sqrt((n - 1)/n).
inline double psrf(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ValidationError("psrf: need at least 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 2) throw ValidationError("psrf: chains need at least 2 draws");
  for (const auto& c : chains) {
    if (c.size() != n) throw ValidationError("psrf: chains must have equal length");
  }
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / nd;
    double ss = 0.0;
    for (double x : c) ss += (x - mean) * (x - mean);
    means.push_back(mean);
    within += ss / (nd - 1.0);
  }
  within /= m;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double between_over_n = 0.0;
  for (double mu : means) between_over_n += (mu - grand) * (mu - grand);
  between_over_n /= (m - 1.0);
  const double shrink = (nd - 1.0) / nd;
  if (within == 0.0) {
    return between_over_n == 0.0 ? std::sqrt(shrink) : std::numeric_limits<double>::infinity();
  }
  return std::sqrt((shrink * within + between_over_n) / within);
}

/// Cumulative means; the last element is the plain mean.
inline std::vector<double> running_means(const std::vector<double>& chain) {
  if (chain.empty()) throw ValidationError("running_means: empty chain");
  std::vector<double> out;
  out.reserve(chain.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    sum += chain[i];
    out.push_back(sum / static_cast<double>(i + 1));
  }
  return out;
}

// Linear interpolation between order statistics at (n - 1) p.
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw ValidationError("quantile: empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double psrf = std::numeric_limits<double>::quiet_NaN();
  bool excludes_zero = false;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& at(const std::string& name) const {
    for (const auto& p : parameters) {
      if (p.name == name) return p;
    }
    throw ValidationError("no parameter named " + name);
  }
};

// Pooled mean/sd/quantiles of one scalar over all chains; psrf when there are
// two or more equal-length chains.
inline ParameterSummary summarize_scalar(const std::string& name, const std::vector<std::vector<double>>& chains) {
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.empty()) throw ValidationError("summarize: no draws for " + name);
  ParameterSummary s;
  s.name = name;
  const auto n = static_cast<double>(pooled.size());
  s.mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : pooled) ss += (x - s.mean) * (x - s.mean);
  s.sd = pooled.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(pooled.begin(), pooled.end());
  s.q025 = quantile_sorted(pooled, 0.025);
  s.q975 = quantile_sorted(pooled, 0.975);
  s.excludes_zero = 0.0 < s.q025 || 0.0 > s.q975;
  bool equal = chains.size() >= 2 && chains.front().size() >= 2;
  for (const auto& c : chains) equal = equal && c.size() == chains.front().size();
  if (equal) s.psrf = psrf(chains);
  return s;
}

// draws[chain][draw][parameter] in parameter_names() order.
inline std::vector<std::vector<std::vector<double>>> flattened_draws(const ChainStore& store) {
  std::vector<std::vector<std::vector<double>>> out;
  for (const auto& c : store.chains) {
    auto& chain = out.emplace_back();
    for (const auto& d : c.draws) chain.push_back(flatten(d));
  }
  return out;
}

inline PosteriorSummary summarize(const ChainStore& store) {
  const auto names = parameter_names(store.spec.outcomes, store.spec.covariates, store.spec.levels);
  const auto draws = flattened_draws(store);
  PosteriorSummary out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<std::vector<double>> per_chain;
    for (const auto& chain : draws) {
      auto& v = per_chain.emplace_back();
      for (const auto& d : chain) v.push_back(d[k]);
    }
    out.parameters.push_back(summarize_scalar(names[k], per_chain));
  }
  return out;
}

// Pooled posterior mean of every parameter, as a state.
inline ParameterState posterior_mean_state(const ChainStore& store) {
  const auto names = parameter_names(store.spec.outcomes, store.spec.covariates, store.spec.levels);
  std::vector<double> sum(names.size(), 0.0);
  std::size_t count = 0;
  for (const auto& c : store.chains) {
    for (const auto& d : c.draws) {
      const auto f = flatten(d);
      for (std::size_t k = 0; k < f.size(); ++k) sum[k] += f[k];
      ++count;
    }
  }
  if (count == 0) throw ValidationError("posterior mean: store has no draws");
  for (auto& s : sum) s /= static_cast<double>(count);
  return unflatten(sum, store.spec.outcomes, store.spec.covariates, store.spec.levels);
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_DIAGNOSTICS_HPP
