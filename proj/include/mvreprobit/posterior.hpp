#ifndef MVREPROBIT_POSTERIOR_HPP
#define MVREPROBIT_POSTERIOR_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "data.hpp"
#include "diagnostics.hpp"
#include "error.hpp"
#include "model.hpp"
#include "sampler.hpp"
#include "stochastic.hpp"

namespace mvreprobit {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Correlations implied by one parameter draw.

// Total latent variance of outcome r: sum of active random-effect variances + 1.
inline double total_variance(const ParameterState& s, Eigen::Index r) {
  return s.variance(Level::individual_u, r) + s.variance(Level::couple_v, r) + s.variance(Level::couple_w, r) + 1.0;
}

/// Correlation of y*_r and y*_r' for the same row given covariates: all
/// covariance components over the square root of the total variances.
inline double adjusted_correlation(const ParameterState& s, std::size_t r, std::size_t rp) {
  const auto a = static_cast<Eigen::Index>(r);
  const auto b = static_cast<Eigen::Index>(rp);
  double num = s.rho_e[CorrVector::index(r, rp)];
  for (Level l : kAllLevels) num += s.covariance(l, a, b);
  return num / std::sqrt(total_variance(s, a) * total_variance(s, b));
}

inline void check_pair(const ParameterState& s, std::size_t r, std::size_t rp) {
  if (r == rp) throw ValidationError("adjusted correlation needs two distinct outcomes");
  if (r >= s.rho_e.dim() || rp >= s.rho_e.dim()) throw ValidationError("outcome index out of range");
}

// Two-level model: (s_u,rr' + s_e,rr') / sqrt((s_u,rr + 1)(s_u,r'r' + 1)).
inline double adjusted_correlation_two_level(const ParameterState& s, std::size_t r, std::size_t rp) {
  check_pair(s, r, rp);
  if (s.sigma_v.size() > 0 || s.sigma_w.size() > 0) throw ValidationError("two-level correlation on a three-level draw");
  return adjusted_correlation(s, r, rp);
}

// Three-level model: u, v, w and e covariances over the total variances.
inline double adjusted_correlation_three_level(const ParameterState& s, std::size_t r, std::size_t rp) {
  check_pair(s, r, rp);
  return adjusted_correlation(s, r, rp);
}

// Correlation between outcomes within one covariance matrix; NaN for an inactive level.
inline double component_correlation(const CovMatrix& m, std::size_t r, std::size_t rp) {
  if (m.size() == 0) return kNaN;
  const auto a = static_cast<Eigen::Index>(r);
  const auto b = static_cast<Eigen::Index>(rp);
  const double denom = std::sqrt(m(a, a) * m(b, b));
  return denom > 0.0 ? m(a, b) / denom : 0.0;
}

struct IntraClusterCorrelation {
  double within_individual = 0.0;
  double within_couple = kNaN;  // same wave, between partners; NaN without couple levels
};

/// Per outcome: within-individual (s_v + s_u)/s_total and within-couple
/// (s_v + s_w)/s_total; for the two-level model s_u/(s_u + 1).
inline std::vector<IntraClusterCorrelation> intra_cluster_correlations(const ParameterState& s) {
  std::vector<IntraClusterCorrelation> out;
  const bool couple = s.sigma_v.size() > 0 || s.sigma_w.size() > 0;
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(s.rho_e.dim()); ++r) {
    const double su = s.variance(Level::individual_u, r);
    const double sv = s.variance(Level::couple_v, r);
    const double sw = s.variance(Level::couple_w, r);
    const double total = total_variance(s, r);
    IntraClusterCorrelation icc;
    icc.within_individual = (sv + su) / total;
    if (couple) icc.within_couple = (sv + sw) / total;
    out.push_back(icc);
  }
  return out;
}

/// Latent residual covariances for one outcome between two observations:
/// same individual at different waves, partners at the same wave, partners
/// at different waves.
struct CovarianceStructure {
  double total = 0.0;
  double within_individual = 0.0;
  double between_partner_same_wave = 0.0;
  double between_partner_cross_wave = 0.0;
};

inline std::vector<CovarianceStructure> covariance_structure(const ParameterState& s) {
  std::vector<CovarianceStructure> out;
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(s.rho_e.dim()); ++r) {
    const double su = s.variance(Level::individual_u, r);
    const double sv = s.variance(Level::couple_v, r);
    const double sw = s.variance(Level::couple_w, r);
    out.push_back({su + sv + sw + 1.0, sv + su, sv + sw, sv});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Draw-wise summaries.

struct PairDecomposition {
  std::size_t r = 0;
  std::size_t rp = 0;
  ParameterSummary residual;
  ParameterSummary individual;
  ParameterSummary couple_fixed;
  ParameterSummary couple_varying;
  ParameterSummary overall;
  double overall_plugin = 0.0;  // formula at the posterior-mean parameters
};

/// Every outcome pair's correlation components evaluated at each stored draw
/// and then summarized. Components of inactive levels are left NaN.
inline std::vector<PairDecomposition> correlation_decomposition(const ChainStore& store) {
  const std::size_t r_count = store.spec.outcomes;
  const ParameterState mean_state = posterior_mean_state(store);
  std::vector<PairDecomposition> out;
  auto summarize_fn = [&](const std::string& name, auto&& fn) {
    std::vector<std::vector<double>> per_chain;
    for (const auto& c : store.chains) {
      auto& v = per_chain.emplace_back();
      for (const auto& d : c.draws) v.push_back(fn(d));
    }
    return summarize_scalar(name, per_chain);
  };
  auto nan_summary = [](const std::string& name) {
    ParameterSummary s;
    s.name = name;
    s.mean = s.sd = s.q025 = s.q975 = kNaN;
    return s;
  };
  for (std::size_t a = 1; a < r_count; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      const std::string tag = std::to_string(a + 1) + "_" + std::to_string(b + 1);
      PairDecomposition pd;
      pd.r = a;
      pd.rp = b;
      pd.residual = summarize_fn("residual_" + tag, [&](const ParameterState& s) { return s.rho_e[CorrVector::index(a, b)]; });
      auto level_summary = [&](Level l, const std::string& name) {
        if (!store.spec.levels.active(l)) return nan_summary(name);
        return summarize_fn(name, [&](const ParameterState& s) { return component_correlation(s.sigma(l), a, b); });
      };
      pd.individual = level_summary(Level::individual_u, "individual_" + tag);
      pd.couple_fixed = level_summary(Level::couple_v, "couple_fixed_" + tag);
      pd.couple_varying = level_summary(Level::couple_w, "couple_varying_" + tag);
      pd.overall = summarize_fn("overall_" + tag, [&](const ParameterState& s) { return adjusted_correlation(s, a, b); });
      pd.overall_plugin = adjusted_correlation(mean_state, a, b);
      out.push_back(std::move(pd));
    }
  }
  return out;
}

struct IntraClusterSummary {
  ParameterSummary within_individual;
  ParameterSummary within_couple;
};

inline std::vector<IntraClusterSummary> intra_cluster_summary(const ChainStore& store) {
  std::vector<IntraClusterSummary> out(store.spec.outcomes);
  for (std::size_t r = 0; r < store.spec.outcomes; ++r) {
    std::vector<std::vector<double>> wi;
    std::vector<std::vector<double>> wc;
    for (const auto& c : store.chains) {
      auto& a = wi.emplace_back();
      auto& b = wc.emplace_back();
      for (const auto& d : c.draws) {
        const auto icc = intra_cluster_correlations(d)[r];
        a.push_back(icc.within_individual);
        b.push_back(icc.within_couple);
      }
    }
    out[r].within_individual = summarize_scalar("within_individual_" + std::to_string(r + 1), wi);
    out[r].within_couple = summarize_scalar("within_couple_" + std::to_string(r + 1), wc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predicted marginal probabilities.

/// Average over rows of Pr(y_r = 1 | x_k = c) with the zero-mean normal
/// random terms integrated out analytically:
///   Phi(beta_r x / sqrt(s_u,rr + s_v,rr + s_w,rr + 1)).
inline std::vector<double> predicted_marginal_probabilities(const ParameterState& s, const PanelDataset& data,
                                                            std::size_t covariate, double value) {
  if (covariate >= data.covariate_count()) throw ValidationError("unknown covariate index " + std::to_string(covariate));
  if (static_cast<std::size_t>(s.B.cols()) != data.covariate_count() ||
      static_cast<std::size_t>(s.B.rows()) != data.outcome_count()) {
    throw ValidationError("parameter dimensions do not match the dataset");
  }
  std::vector<double> out(data.outcome_count(), 0.0);
  Vector x(s.B.cols());
  for (const auto& row : data.rows()) {
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = row.covariates[static_cast<std::size_t>(k)];
    x[static_cast<Eigen::Index>(covariate)] = value;
    for (std::size_t r = 0; r < out.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      out[r] += normal_cdf(s.B.row(ri).dot(x) / std::sqrt(total_variance(s, ri)));
    }
  }
  for (auto& p : out) p /= static_cast<double>(data.row_count());
  return out;
}

inline std::vector<double> predicted_marginal_probabilities(const ParameterState& s, const PanelDataset& data,
                                                            const std::string& covariate, double value) {
  const auto k = data.covariate_index(covariate);
  if (!k) throw ValidationError("unknown covariate '" + covariate + "'");
  return predicted_marginal_probabilities(s, data, *k, value);
}

/// Monte Carlo version of the same average: the random terms are drawn
/// rather than integrated. Used to check the variance-scaling identity.
inline std::vector<double> predicted_marginal_probabilities_mc(const ParameterState& s, const PanelDataset& data,
                                                               std::size_t covariate, double value,
                                                               std::size_t draws_per_row, RandomStream& rng) {
  std::vector<double> out(data.outcome_count(), 0.0);
  Vector x(s.B.cols());
  for (const auto& row : data.rows()) {
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = row.covariates[static_cast<std::size_t>(k)];
    x[static_cast<Eigen::Index>(covariate)] = value;
    for (std::size_t r = 0; r < out.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      const double eta = s.B.row(ri).dot(x);
      const double effect_sd = std::sqrt(total_variance(s, ri) - 1.0);
      double acc = 0.0;
      for (std::size_t m = 0; m < draws_per_row; ++m) acc += normal_cdf(eta + effect_sd * rng.normal());
      out[r] += acc / static_cast<double>(draws_per_row);
    }
  }
  for (auto& p : out) p /= static_cast<double>(data.row_count());
  return out;
}

// ---------------------------------------------------------------------------
// Bivariate normal probabilities and the tetrachoric correlation.

/// P(X > h, Y > k) for standard bivariate normal with correlation r.
/// Drezner-Wesolowsky / Genz Gauss-Legendre scheme, about 1e-15 absolute.
inline double bivariate_normal_upper(double h, double k, double r) {
  if (h == kInf || k == kInf) return 0.0;
  if (h == -kInf) return k == -kInf ? 1.0 : normal_cdf(-k);
  if (k == -kInf) return normal_cdf(-h);
  if (r == 0.0) return normal_cdf(-h) * normal_cdf(-k);

  static constexpr std::array<double, 3> w6 = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static constexpr std::array<double, 3> x6 = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static constexpr std::array<double, 6> w12 = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                                0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
  static constexpr std::array<double, 6> x12 = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                                0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  static constexpr std::array<double, 10> w20 = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                                 0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                                 0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                                 0.1527533871307259};
  static constexpr std::array<double, 10> x20 = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                                 0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                                 0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                                 0.07652652113349733};
  const double* w = w20.data();
  const double* x = x20.data();
  std::size_t n = w20.size();
  if (std::abs(r) < 0.3) {
    w = w6.data();
    x = x6.data();
    n = w6.size();
  } else if (std::abs(r) < 0.75) {
    w = w12.data();
    x = x12.data();
    n = w12.size();
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < n; ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (1.0 + sign * x[i]) / 2.0);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return std::clamp(bvn * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k), 0.0, 1.0);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * normal_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double xs = std::pow(a * (1.0 + sign * x[i]), 2);
        const double rs = std::sqrt(1.0 - xs);
        const double asr = -(bs / xs + hk) / 2.0;
        if (asr <= -100.0) continue;
        const double sp = 1.0 + c * xs * (1.0 + d * xs);
        const double ep = std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
        bvn += a * w[i] * std::exp(asr) * (ep - sp);
      }
    }
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) bvn += normal_cdf(-std::max(h, k));
  else bvn = -bvn + std::max(0.0, normal_cdf(-h) - normal_cdf(-k));
  return std::clamp(bvn, 0.0, 1.0);
}

// P(X < h, Y < k).
inline double bivariate_normal_cdf(double h, double k, double r) { return bivariate_normal_upper(-h, -k, r); }

inline double bivariate_normal_pdf(double h, double k, double r) {
  const double one_minus = 1.0 - r * r;
  return std::exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_minus)) /
         (2.0 * std::numbers::pi * std::sqrt(one_minus));
}

// Counts indexed [value of first variable][value of second variable].
using ContingencyTable = std::array<std::array<double, 2>, 2>;

struct TetrachoricResult {
  double rho = 0.0;
  double se = kNaN;
  bool boundary = false;  // estimate clamped to +-(1 - 1e-6)
  double threshold_first = 0.0;
  double threshold_second = 0.0;
};

inline constexpr double kTetrachoricLimit = 1.0 - 1e-6;

/// Two-step maximum likelihood: thresholds from the margins, then the
/// correlation solving Phi2(t1, t2; rho) = n00 / n by bisection. The standard
/// error is 1/sqrt(observed information) at the estimate.
inline TetrachoricResult tetrachoric_correlation(const ContingencyTable& n) {
  for (const auto& row : n) {
    for (double c : row) {
      if (!(c >= 0.0)) throw ValidationError("tetrachoric: negative or missing cell count");
    }
  }
  const double total = n[0][0] + n[0][1] + n[1][0] + n[1][1];
  if (!(total > 0.0)) throw ValidationError("tetrachoric: empty table");
  const double first0 = n[0][0] + n[0][1];
  const double second0 = n[0][0] + n[1][0];
  if (first0 == 0.0 || first0 == total || second0 == 0.0 || second0 == total) {
    throw ValidationError("tetrachoric: a zero margin leaves the correlation undefined");
  }
  TetrachoricResult res;
  res.threshold_first = normal_quantile(first0 / total);
  res.threshold_second = normal_quantile(second0 / total);
  const double t1 = res.threshold_first;
  const double t2 = res.threshold_second;
  const double target = n[0][0] / total;
  auto cell = [&](double rho) { return bivariate_normal_cdf(t1, t2, rho); };

  double lo = -kTetrachoricLimit;
  double hi = kTetrachoricLimit;
  if (target <= cell(lo)) {
    res.rho = lo;
    res.boundary = true;
  } else if (target >= cell(hi)) {
    res.rho = hi;
    res.boundary = true;
  } else {
    while (hi - lo > 1e-8) {
      const double mid = 0.5 * (lo + hi);
      (cell(mid) < target ? lo : hi) = mid;
    }
    res.rho = 0.5 * (lo + hi);
  }
  if (res.boundary) return res;

  const double p1 = first0 / total;
  const double p2 = second0 / total;
  auto score = [&](double rho) {
    const double p00 = cell(rho);
    const double p01 = p1 - p00;
    const double p10 = p2 - p00;
    const double p11 = 1.0 - p1 - p2 + p00;
    return bivariate_normal_pdf(t1, t2, rho) * (n[0][0] / p00 - n[0][1] / p01 - n[1][0] / p10 + n[1][1] / p11);
  };
  const double step = std::min(1e-5, 0.5 * (kTetrachoricLimit - std::abs(res.rho)));
  const double info = -(score(res.rho + step) - score(res.rho - step)) / (2.0 * step);
  if (info > 0.0) res.se = 1.0 / std::sqrt(info);
  return res;
}

inline ContingencyTable contingency_table(const PanelDataset& data, std::size_t r, std::size_t rp) {
  ContingencyTable t{};
  for (const auto& row : data.rows()) t[static_cast<std::size_t>(row.outcomes[r])][static_cast<std::size_t>(row.outcomes[rp])] += 1.0;
  return t;
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_POSTERIOR_HPP
