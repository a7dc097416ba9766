#ifndef MVREPROBIT_SIMULATE_HPP
#define MVREPROBIT_SIMULATE_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "model.hpp"
#include "random.hpp"
#include "stochastic.hpp"

namespace mvreprobit {

/// Forward model and panel layout for synthetic data.
///
/// Each of `units` clusters starts from one primary respondent observed at
/// every wave. A primary is partnered at wave 1 with probability
/// `p_partnered`; between waves a partnership dissolves with `p_dissolve` and
/// an unpartnered primary forms a new one with `p_form`. Partners are fresh
/// individuals and are observed while the union lasts, so clusters of three
/// or more people arise when a primary re-partners.
struct SimulationScenario {
  ParameterState truth;  // its active sigmas select the levels
  std::size_t units = 100;
  int waves = 4;
  double p_partnered = 0.0;
  double p_form = 0.0;
  double p_dissolve = 0.0;
  std::uint64_t seed = 1;
  // Optional fixed design, used row by row and recycled; otherwise an
  // intercept column followed by independent standard normals.
  std::vector<std::vector<double>> fixed_covariates;

  std::size_t outcomes() const { return static_cast<std::size_t>(truth.B.rows()); }
  std::size_t covariates() const { return static_cast<std::size_t>(truth.B.cols()); }

  void validate() const {
    auto prob = [](double p, const char* key) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string("simulate.") + key + ": must lie in [0, 1]");
    };
    prob(p_partnered, "p_partnered");
    prob(p_form, "p_form");
    prob(p_dissolve, "p_dissolve");
    if (units < 1) throw ValidationError("simulate.units: must be >= 1");
    if (waves < 1) throw ValidationError("simulate.waves: must be >= 1");
    if (outcomes() < 1 || covariates() < 1) throw ValidationError("truth.B: needs at least one row and column");
    if (truth.rho_e.dim() != outcomes()) throw ValidationError("truth.rho_e: dimension does not match B");
    if (!is_positive_definite_corr(truth.rho_e)) throw ValidationError("truth.rho_e: not positive definite");
    for (Level l : kAllLevels) {
      const auto& m = truth.sigma(l);
      if (m.size() == 0) continue;
      if (static_cast<std::size_t>(m.rows()) != outcomes() || m.rows() != m.cols()) {
        throw ValidationError(std::string("truth.sigma_") + level_name(l) + ": wrong shape");
      }
      cholesky_lower(m);
    }
    for (const auto& row : fixed_covariates) {
      if (row.size() != covariates()) throw ValidationError("simulate: fixed design row has wrong length");
    }
  }
};

struct SimulatedPanel {
  PanelDataset data;
  // True latent values laid out like Design::build(data, build_couple_clusters(data)).
  LatentState latent;
};

inline SimulatedPanel simulate_dataset(const SimulationScenario& sc) {
  sc.validate();
  RandomStream rng(sc.seed, 0);
  const std::size_t r_count = sc.outcomes();
  const std::size_t p_count = sc.covariates();
  const auto r = static_cast<Eigen::Index>(r_count);

  struct Row {
    std::size_t person;
    std::size_t cluster;
    int wave;
    std::optional<std::size_t> partner;
  };
  std::vector<Row> layout;
  std::size_t people = 0;
  for (std::size_t j = 0; j < sc.units; ++j) {
    const std::size_t primary = people++;
    std::optional<std::size_t> partner;
    if (rng.uniform() < sc.p_partnered) partner = people++;
    for (int t = 1; t <= sc.waves; ++t) {
      if (t > 1) {
        if (partner) {
          if (rng.uniform() < sc.p_dissolve) partner.reset();
        } else if (rng.uniform() < sc.p_form) {
          partner = people++;
        }
      }
      layout.push_back({primary, j, t, partner});
      if (partner) layout.push_back({*partner, j, t, primary});
    }
  }

  const Levels levels = sc.truth.levels();
  auto draw_effects = [&](Level l, std::size_t count) {
    Matrix m = Matrix::Zero(r, static_cast<Eigen::Index>(count));
    if (!levels.active(l)) return m;
    for (std::size_t i = 0; i < count; ++i) m.col(static_cast<Eigen::Index>(i)) = sample_mvn(Vector::Zero(r), sc.truth.sigma(l), rng);
    return m;
  };
  const Matrix u = draw_effects(Level::individual_u, people);
  const Matrix v = draw_effects(Level::couple_v, sc.units);
  std::map<std::pair<std::size_t, int>, std::size_t> cw;
  for (const auto& row : layout) cw.emplace(std::make_pair(row.cluster, row.wave), 0);
  std::size_t next_cw = 0;
  for (auto& [key, idx] : cw) idx = next_cw++;
  const Matrix w = draw_effects(Level::couple_w, cw.size());

  const Matrix sigma_e = sc.truth.sigma_e();
  DatasetMeta meta;
  for (std::size_t k = 1; k <= r_count; ++k) meta.outcome_labels.push_back("y_" + std::to_string(k));
  for (std::size_t k = 1; k <= p_count; ++k) meta.covariate_labels.push_back("x_" + std::to_string(k));

  std::vector<RawRow> raw;
  std::map<std::pair<std::size_t, int>, Vector> y_star;
  std::size_t design_row = 0;
  for (const auto& row : layout) {
    Vector x(static_cast<Eigen::Index>(p_count));
    if (!sc.fixed_covariates.empty()) {
      const auto& fixed = sc.fixed_covariates[design_row++ % sc.fixed_covariates.size()];
      for (std::size_t k = 0; k < p_count; ++k) x[static_cast<Eigen::Index>(k)] = fixed[k];
    } else {
      x[0] = 1.0;
      for (Eigen::Index k = 1; k < x.size(); ++k) x[k] = rng.normal();
    }
    Vector latent = sc.truth.B * x + sample_mvn(Vector::Zero(r), sigma_e, rng);
    latent += u.col(static_cast<Eigen::Index>(row.person)) + v.col(static_cast<Eigen::Index>(row.cluster)) +
              w.col(static_cast<Eigen::Index>(cw.at({row.cluster, row.wave})));
    RawRow out;
    out.individual_id = std::to_string(row.person + 1);
    out.wave = row.wave;
    if (row.partner) out.partner_id = std::to_string(*row.partner + 1);
    for (Eigen::Index k = 0; k < r; ++k) out.outcomes.emplace_back(latent[k] > 0.0 ? 1.0 : 0.0);
    for (Eigen::Index k = 0; k < x.size(); ++k) out.covariates.emplace_back(x[k]);
    raw.push_back(std::move(out));
    y_star.emplace(std::make_pair(row.person, row.wave), latent);
  }

  SimulatedPanel sim{validate_dataset(std::move(raw), std::move(meta)), {}};
  // Identifiers are numbered cluster by cluster, so canonical order of
  // individuals, clusters and cluster-waves matches generation order.
  sim.latent.u = levels.u ? u : Matrix(r, 0);
  sim.latent.v = levels.v ? v : Matrix(r, 0);
  sim.latent.w = levels.w ? w : Matrix(r, 0);
  sim.latent.y_star.resize(r, static_cast<Eigen::Index>(sim.data.row_count()));
  for (std::size_t i = 0; i < sim.data.row_count(); ++i) {
    const auto& row = sim.data.rows()[i];
    const auto person = static_cast<std::size_t>(std::stoull(row.individual_id)) - 1;
    sim.latent.y_star.col(static_cast<Eigen::Index>(i)) = y_star.at({person, row.wave});
  }
  return sim;
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_SIMULATE_HPP
