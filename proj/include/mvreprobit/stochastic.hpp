#ifndef MVREPROBIT_STOCHASTIC_HPP
#define MVREPROBIT_STOCHASTIC_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace mvreprobit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CovMatrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Strictness floor for correlation-matrix membership (determinant / leading minors).
inline constexpr double kPdFloor = 1e-10;
// Cholesky pivots at or below this trigger one jittered retry.
inline constexpr double kPivotFloor = 1e-12;
inline constexpr double kCholeskyJitter = 1e-10;
// Standardized distance beyond which truncated normals use the exponential tail sampler.
inline constexpr double kTailThreshold = 6.0;
// Gibbs sweeps applied after the sequential pass in the standalone TMVN draw.
inline constexpr int kDefaultTmvnSweeps = 20;

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Upper tail 1 - Phi(x), accurate for large x.
inline double normal_ccdf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

// Inverse of the upper tail: returns x with 1 - Phi(x) = q.
inline double normal_cquantile(double q) {
  if (q <= 0.0) return kInf;
  if (q >= 1.0) return -kInf;
  return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q);
}

/// Off-diagonal entries of a K x K correlation matrix, row-wise lower
/// triangle: (1,0), (2,0), (2,1), (3,0), ...
///
/// The vector carries a "validated" tag once the implied matrix has passed
/// the full positive-definiteness check. Entry updates through `set` drop the
/// tag; `set_keeping_pd` is for callers that have already established the
/// updated matrix is PD (the single-entry determinant test).
class CorrVector {
 public:
  CorrVector() = default;

  explicit CorrVector(std::size_t dim) : dim_(dim), entries_(length_for(dim), 0.0), validated_(true) {}

  CorrVector(std::size_t dim, std::vector<double> entries) : dim_(dim), entries_(std::move(entries)) {
    if (entries_.size() != length_for(dim)) {
      throw ValidationError("correlation vector for dimension " + std::to_string(dim) + " needs " +
                            std::to_string(length_for(dim)) + " entries, got " +
                            std::to_string(entries_.size()));
    }
    for (std::size_t l = 0; l < entries_.size(); ++l) check_range(l, entries_[l]);
  }

  static CorrVector from_matrix(const Matrix& m) {
    const auto k = static_cast<std::size_t>(m.rows());
    std::vector<double> e;
    e.reserve(length_for(k));
    for (std::size_t i = 1; i < k; ++i)
      for (std::size_t j = 0; j < i; ++j) e.push_back(m(i, j));
    return CorrVector(k, std::move(e));
  }

  static constexpr std::size_t length_for(std::size_t dim) { return dim < 2 ? 0 : dim * (dim - 1) / 2; }

  static constexpr std::size_t index(std::size_t row, std::size_t col) {
    if (row < col) std::swap(row, col);
    return row * (row - 1) / 2 + col;
  }

  // (row, col) with row > col for entry l.
  static std::pair<std::size_t, std::size_t> position(std::size_t l) {
    std::size_t row = 1;
    while (row * (row + 1) / 2 <= l) ++row;
    return {row, l - row * (row - 1) / 2};
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  double operator[](std::size_t l) const { return entries_[l]; }
  const std::vector<double>& entries() const { return entries_; }
  bool validated() const { return validated_; }

  void set(std::size_t l, double value) {
    check_range(l, value);
    entries_[l] = value;
    validated_ = false;
  }

  void set_keeping_pd(std::size_t l, double value) {
    const bool was = validated_;
    set(l, value);
    validated_ = was;
  }

  Matrix to_matrix() const {
    Matrix m = Matrix::Identity(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    for (std::size_t l = 0; l < entries_.size(); ++l) {
      auto [i, j] = position(l);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entries_[l];
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = entries_[l];
    }
    return m;
  }

  // Full leading-minor check; throws if the implied matrix is not PD.
  void validate();

  friend bool operator==(const CorrVector& a, const CorrVector& b) {
    return a.dim_ == b.dim_ && a.entries_ == b.entries_;
  }

 private:
  static void check_range(std::size_t l, double value) {
    if (!(value >= -1.0 && value <= 1.0)) {
      throw ValidationError("correlation entry " + std::to_string(l) + " = " + std::to_string(value) +
                            " outside [-1, 1]");
    }
  }

  std::size_t dim_ = 0;
  std::vector<double> entries_;
  bool validated_ = false;
};

/// Lower/upper bounds of a K-dimensional box; infinite bounds allowed.
struct TruncationBox {
  Vector lower;
  Vector upper;

  void check() const {
    if (lower.size() != upper.size()) throw ValidationError("truncation box: bound lengths differ");
    for (Eigen::Index r = 0; r < lower.size(); ++r) {
      if (!(lower[r] < upper[r])) {
        throw ValidationError("truncation box: lower >= upper at component " + std::to_string(r));
      }
    }
  }
};

// Probit box for a binary outcome vector: (0, inf) for 1, (-inf, 0) for 0.
template <class Outcomes>
TruncationBox orthant_box(const Outcomes& y) {
  const auto k = static_cast<Eigen::Index>(y.size());
  TruncationBox box{Vector(k), Vector(k)};
  for (Eigen::Index r = 0; r < k; ++r) {
    box.lower[r] = y[r] ? 0.0 : -kInf;
    box.upper[r] = y[r] ? kInf : 0.0;
  }
  return box;
}

namespace detail {

enum class CholeskyStatus { ok, tiny_pivot, non_positive };

inline CholeskyStatus cholesky_attempt(const Matrix& m, Matrix& lower, std::size_t& failed, double& pivot) {
  const Eigen::Index k = m.rows();
  lower.setZero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double d = m(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(d > kPivotFloor)) {
      failed = static_cast<std::size_t>(j);
      pivot = d;
      return d > 0.0 ? CholeskyStatus::tiny_pivot : CholeskyStatus::non_positive;
    }
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < k; ++i) {
      lower(i, j) = (m(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j))) / ljj;
    }
  }
  return CholeskyStatus::ok;
}

}  // namespace detail

/// Lower Cholesky factor G with G G^T = m.
///
/// A pivot in (0, 1e-12] gets one retry with 1e-10 added to the diagonal; a
/// non-positive pivot, or a second failure, raises DecompositionError naming
/// the pivot index.
inline Matrix cholesky_lower(const CovMatrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("cholesky: matrix is not square");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double scale = std::max({1.0, std::abs(m(i, j)), std::abs(m(j, i))});
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale) {
        throw ValidationError("cholesky: matrix not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
    }
  }
  Matrix lower;
  std::size_t failed = 0;
  double pivot = 0.0;
  auto status = detail::cholesky_attempt(m, lower, failed, pivot);
  if (status == detail::CholeskyStatus::ok) return lower;
  if (status == detail::CholeskyStatus::non_positive) throw DecompositionError(failed, pivot);
  Matrix jittered = m;
  jittered.diagonal().array() += kCholeskyJitter;
  status = detail::cholesky_attempt(jittered, lower, failed, pivot);
  if (status != detail::CholeskyStatus::ok) throw DecompositionError(failed, pivot);
  return lower;
}

// Inverse of an SPD matrix through its Cholesky factor.
inline Matrix spd_inverse(const CovMatrix& m) {
  const Matrix lower = cholesky_lower(m);
  const Matrix lower_inv =
      lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(m.rows(), m.cols()));
  return lower_inv.transpose() * lower_inv;
}

inline double log_determinant_from_cholesky(const Matrix& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

namespace detail {

// Uniform proposal on (a, b) accepted with exp(-(z^2 - m^2)/2), m the point of
// (a, b) closest to zero. Exact for any interval; efficient when it is narrow.
inline double truncated_normal_uniform(double a, double b, RandomStream& rng) {
  const double m = (a > 0.0) ? a : (b < 0.0 ? b : 0.0);
  for (;;) {
    const double z = a + (b - a) * rng.uniform();
    if (rng.uniform() <= std::exp(0.5 * (m * m - z * z))) return z;
  }
}

// Standard normal truncated to (a, b) with a > 0 (upper tail). Translated
// exponential proposal with the optimal rate.
inline double truncated_normal_upper_tail(double a, double b, RandomStream& rng) {
  if (std::isfinite(b) && (b - a) * a < 1.0) return truncated_normal_uniform(a, b, rng);
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential(rate);
    if (z >= b) continue;
    const double diff = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * diff * diff)) return z;
  }
}

inline double truncated_standard_normal(double a, double b, RandomStream& rng) {
  if (a > kTailThreshold) return truncated_normal_upper_tail(a, b, rng);
  if (b < -kTailThreshold) return -truncated_normal_upper_tail(-b, -a, rng);
  if (b - a < 1e-6) return truncated_normal_uniform(a, b, rng);
  for (int attempt = 0; attempt < 64; ++attempt) {
    double z;
    if (a >= 0.0) {
      const double qa = normal_ccdf(a);
      const double qb = normal_ccdf(b);
      z = normal_cquantile(qb + (qa - qb) * rng.uniform());
    } else if (b <= 0.0) {
      const double pa = normal_cdf(a);
      const double pb = normal_cdf(b);
      z = normal_quantile(pa + (pb - pa) * rng.uniform());
    } else {
      const double pa = normal_cdf(a);
      const double pb = normal_cdf(b);
      z = normal_quantile(pa + (pb - pa) * rng.uniform());
    }
    if (z > a && z < b) return z;
  }
  return truncated_normal_uniform(a, b, rng);
}

}  // namespace detail

/// N(mean, sd^2) conditioned on (lower, upper). Inverse CDF inside six
/// standard deviations, exponential rejection beyond.
inline double sample_truncated_normal(double mean, double sd, double lower, double upper, RandomStream& rng) {
  if (!(sd > 0.0)) throw ValidationError("truncated normal: sd must be positive");
  if (!(lower < upper)) throw ValidationError("truncated normal: lower bound must be below upper bound");
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  double x = mean + sd * detail::truncated_standard_normal(a, b, rng);
  if (!(x > lower)) x = std::nextafter(lower, upper);
  if (!(x < upper)) x = std::nextafter(upper, lower);
  return x;
}

/// Truncated multivariate normal with a fixed Cholesky factor G of the
/// covariance: y = mean + G eps. Works in the whitened coordinates eps.
class TruncatedMvnSampler {
 public:
  explicit TruncatedMvnSampler(Matrix chol_lower) : gamma_(std::move(chol_lower)) {}

  const Matrix& factor() const { return gamma_; }

  /// Sequential pass: eps_k from a univariate truncated normal whose bounds
  /// come from row k of G^{-1}(box - mean), given eps_1..eps_{k-1}. Always
  /// lands in the box; it is a starting point, not an exact draw.
  Vector sequential_draw(const Vector& mean, const Eigen::Ref<const Vector>& lower,
                         const Eigen::Ref<const Vector>& upper, RandomStream& rng) const {
    const Eigen::Index k = gamma_.rows();
    Vector eps(k);
    Vector y(k);
    for (int attempt = 0;; ++attempt) {
      for (Eigen::Index r = 0; r < k; ++r) {
        const double shift = mean[r] + gamma_.row(r).head(r).dot(eps.head(r));
        const double g = gamma_(r, r);
        eps[r] = sample_truncated_normal(0.0, 1.0, (lower[r] - shift) / g, (upper[r] - shift) / g, rng);
      }
      y = mean + gamma_.triangularView<Eigen::Lower>() * eps;
      if (inside(y, lower, upper)) return y;
      if (attempt > 100) throw NumericalError("truncated mvn: sequential draw cannot land inside the box");
    }
  }

  /// One Gibbs sweep over eps_1..eps_K. Each eps_k is redrawn from N(0,1)
  /// truncated to the set where every row constraint m >= k still holds.
  /// `point` must be inside the box and stays inside; the truncated MVN is
  /// invariant under the sweep.
  void sweep(const Eigen::Ref<const Vector>& mean, const Eigen::Ref<const Vector>& lower,
             const Eigen::Ref<const Vector>& upper, Eigen::Ref<Vector> point, RandomStream& rng) const {
    const Eigen::Index k = gamma_.rows();
    Vector eps = gamma_.triangularView<Eigen::Lower>().solve(point - mean);
    Vector y = point;
    for (Eigen::Index c = 0; c < k; ++c) {
      double lo = -kInf;
      double hi = kInf;
      for (Eigen::Index m = c; m < k; ++m) {
        const double g = gamma_(m, c);
        if (g == 0.0) continue;
        const double rest = y[m] - g * eps[c];
        double l = (lower[m] - rest) / g;
        double u = (upper[m] - rest) / g;
        if (g < 0.0) std::swap(l, u);
        lo = std::max(lo, l);
        hi = std::min(hi, u);
      }
      if (!(lo < hi)) continue;
      const double fresh = sample_truncated_normal(0.0, 1.0, lo, hi, rng);
      for (Eigen::Index m = c; m < k; ++m) y[m] += gamma_(m, c) * (fresh - eps[c]);
      eps[c] = fresh;
    }
    y = mean + gamma_.triangularView<Eigen::Lower>() * eps;
    // Rounding can put a component on its bound; keep the previous point then.
    if (inside(y, lower, upper)) point = y;
  }

 private:
  static bool inside(const Vector& y, const Eigen::Ref<const Vector>& lower, const Eigen::Ref<const Vector>& upper) {
    for (Eigen::Index r = 0; r < y.size(); ++r) {
      if (!(y[r] > lower[r] && y[r] < upper[r])) return false;
    }
    return true;
  }

  Matrix gamma_;
};

/// Draw from N(mean, Sigma(corr)) truncated to `box`.
inline Vector sample_truncated_mvn(const Vector& mean, const CorrVector& corr, const TruncationBox& box,
                                   RandomStream& rng, int sweeps = kDefaultTmvnSweeps) {
  box.check();
  if (mean.size() != static_cast<Eigen::Index>(corr.dim()) || box.lower.size() != mean.size()) {
    throw ValidationError("truncated mvn: dimension mismatch");
  }
  const TruncatedMvnSampler sampler(cholesky_lower(corr.to_matrix()));
  Vector y = sampler.sequential_draw(mean, box.lower, box.upper, rng);
  for (int s = 0; s < sweeps; ++s) sampler.sweep(mean, box.lower, box.upper, y, rng);
  return y;
}

inline Vector sample_mvn(const Vector& mean, const CovMatrix& cov, RandomStream& rng) {
  const Matrix lower = cholesky_lower(cov);
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + lower.triangularView<Eigen::Lower>() * z;
}

/// Draw from N(Q^{-1} h, Q^{-1}) given precision Q and linear term h.
inline Vector sample_mvn_canonical(const Matrix& precision, const Vector& linear, RandomStream& rng) {
  const Matrix lower = cholesky_lower(precision);
  const auto tri = lower.triangularView<Eigen::Lower>();
  const Vector mean = tri.transpose().solve(tri.solve(linear));
  Vector z(linear.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + tri.transpose().solve(z);
}

/// Sigma ~ IW(scale, dof), mean scale / (dof - K - 1). Bartlett
/// decomposition of the Wishart(scale^{-1}, dof) precision, then inverted.
inline CovMatrix sample_inverse_wishart(const CovMatrix& scale, double dof, RandomStream& rng) {
  const Eigen::Index k = scale.rows();
  if (!(dof > static_cast<double>(k) - 1.0)) {
    throw ValidationError("inverse wishart: dof " + std::to_string(dof) + " must exceed K - 1 = " +
                          std::to_string(k - 1));
  }
  const Matrix scale_inv_lower = cholesky_lower(spd_inverse(scale));
  Matrix bartlett = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    bartlett(i, i) = std::sqrt(rng.chi_squared(dof - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  const Matrix factor = scale_inv_lower * bartlett;  // lower triangular, precision = F F^T
  const Matrix factor_inv =
      factor.triangularView<Eigen::Lower>().solve(Matrix::Identity(k, k));
  Matrix sigma = factor_inv.transpose() * factor_inv;
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  cholesky_lower(sigma);
  return sigma;
}

/// Full Sylvester check: every leading principal minor above the strictness floor.
inline bool is_positive_definite_corr(const CorrVector& rho) {
  for (double e : rho.entries()) {
    if (!(e >= -1.0 && e <= 1.0)) return false;
  }
  const Matrix m = rho.to_matrix();
  for (Eigen::Index k = 1; k <= m.rows(); ++k) {
    if (!(m.topLeftCorner(k, k).determinant() > kPdFloor)) return false;
  }
  return true;
}

/// Membership test after changing entry l of a PD correlation vector.
///
/// With every other entry fixed, permuting the changed entry into the last
/// row leaves the first K-1 leading minors untouched and positive, so only
/// the sign of the full determinant is left to check.
inline bool is_positive_definite_corr_update(const CorrVector& current, std::size_t l, double value) {
  if (!(value > -1.0 && value < 1.0)) return false;
  Matrix m = current.to_matrix();
  auto [i, j] = CorrVector::position(l);
  m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
  m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
  return m.determinant() > kPdFloor;
}

inline void CorrVector::validate() {
  if (!is_positive_definite_corr(*this)) {
    throw ValidationError("correlation vector does not define a positive definite matrix");
  }
  validated_ = true;
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_STOCHASTIC_HPP
