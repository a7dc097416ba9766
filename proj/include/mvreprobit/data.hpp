#ifndef MVREPROBIT_DATA_HPP
#define MVREPROBIT_DATA_HPP

#include <algorithm>
#include <boost/pending/disjoint_sets.hpp>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "format.hpp"

namespace mvreprobit {

// Orders identifiers numerically when both are plain digit strings, otherwise
// lexicographically. Numeric ids sort before non-numeric ones.
struct IdLess {
  static bool numeric(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  }
  static std::string_view trimmed(const std::string& s) {
    std::string_view v(s);
    while (v.size() > 1 && v.front() == '0') v.remove_prefix(1);
    return v;
  }
  bool operator()(const std::string& a, const std::string& b) const {
    const bool na = numeric(a);
    const bool nb = numeric(b);
    if (na != nb) return na;
    if (na) {
      const auto ta = trimmed(a);
      const auto tb = trimmed(b);
      if (ta.size() != tb.size()) return ta.size() < tb.size();
      if (ta != tb) return ta < tb;
    }
    return a < b;
  }
};

/// One (individual, wave) record as it arrives from a file or a generator.
/// Missing values are empty optionals.
struct RawRow {
  std::string individual_id;
  std::optional<int> wave;
  std::string partner_id;  // empty: no coresident partner this wave
  std::vector<std::optional<double>> outcomes;
  std::vector<std::optional<double>> covariates;
  std::size_t source_row = 0;  // 1-based data row number, for diagnostics
};

struct ObservationRow {
  std::string individual_id;
  int wave = 0;
  std::optional<std::string> partner_id;
  std::vector<double> covariates;
  std::vector<int> outcomes;
  std::size_t source_row = 0;
};

struct DatasetMeta {
  std::vector<std::string> outcome_labels;
  std::vector<std::string> covariate_labels;

  std::size_t outcomes() const { return outcome_labels.size(); }
  std::size_t covariates() const { return covariate_labels.size(); }
};

/// Validated long-format panel. Rows are held in canonical order (individual
/// id, then wave) so everything downstream is independent of input order.
class PanelDataset {
 public:
  const DatasetMeta& meta() const { return meta_; }
  const std::vector<ObservationRow>& rows() const { return rows_; }
  const std::vector<std::string>& individuals() const { return individuals_; }
  std::size_t individual_count() const { return individuals_.size(); }
  std::size_t row_count() const { return rows_.size(); }
  std::size_t outcome_count() const { return meta_.outcomes(); }
  std::size_t covariate_count() const { return meta_.covariates(); }

  // Index of each row's individual in individuals().
  const std::vector<std::size_t>& row_individual() const { return row_individual_; }

  // Number of observed waves per individual (T_i).
  std::vector<std::size_t> waves_per_individual() const {
    std::vector<std::size_t> t(individuals_.size(), 0);
    for (auto i : row_individual_) ++t[i];
    return t;
  }

  std::optional<std::size_t> covariate_index(const std::string& name) const {
    const auto& labels = meta_.covariate_labels;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (labels[k] == name || (labels[k].rfind("x_", 0) == 0 && labels[k].substr(2) == name)) return k;
    }
    return std::nullopt;
  }

  // Complete-case diagnostics: rows dropped for missing values.
  const std::vector<std::string>& dropped() const { return dropped_; }

  friend PanelDataset validate_dataset(std::vector<RawRow> raw, DatasetMeta meta);

 private:
  DatasetMeta meta_;
  std::vector<ObservationRow> rows_;
  std::vector<std::string> individuals_;
  std::vector<std::size_t> row_individual_;
  std::vector<std::string> dropped_;
};

inline std::string row_label(std::size_t source_row) { return "row " + std::to_string(source_row); }

/// Checks every dataset invariant and returns the canonical dataset. Rows with
/// a missing outcome or covariate are dropped (complete cases) and listed in
/// dropped(); every other violation throws ValidationError citing the row.
inline PanelDataset validate_dataset(std::vector<RawRow> raw, DatasetMeta meta) {
  const std::size_t n_out = meta.outcomes();
  const std::size_t n_cov = meta.covariates();
  if (n_out == 0) throw ValidationError("dataset: no outcome columns");
  if (n_cov == 0) throw ValidationError("dataset: no covariate columns");

  PanelDataset data;
  data.meta_ = std::move(meta);
  for (std::size_t idx = 0; idx < raw.size(); ++idx) {
    RawRow& r = raw[idx];
    if (r.source_row == 0) r.source_row = idx + 1;
    const auto where = row_label(r.source_row);
    if (r.individual_id.empty()) throw ValidationError(where + ": missing individual_id");
    if (!r.wave) throw ValidationError(where + ": missing wave");
    if (*r.wave < 1) throw ValidationError(where + ": wave must be >= 1");
    if (r.outcomes.size() != n_out) {
      throw ValidationError(where + ": expected " + std::to_string(n_out) + " outcomes, got " +
                            std::to_string(r.outcomes.size()));
    }
    if (r.covariates.size() != n_cov) {
      throw ValidationError(where + ": expected " + std::to_string(n_cov) + " covariates, got " +
                            std::to_string(r.covariates.size()));
    }
    if (r.partner_id == r.individual_id) throw ValidationError(where + ": individual names itself as partner");
    for (std::size_t k = 0; k < n_out; ++k) {
      if (r.outcomes[k] && *r.outcomes[k] != 0.0 && *r.outcomes[k] != 1.0) {
        throw ValidationError(where + ": outcome " + data.meta_.outcome_labels[k] + " = " +
                              format_number(*r.outcomes[k]) + " not in {0, 1}");
      }
    }
    const bool complete =
        std::all_of(r.outcomes.begin(), r.outcomes.end(), [](const auto& v) { return v.has_value(); }) &&
        std::all_of(r.covariates.begin(), r.covariates.end(), [](const auto& v) { return v.has_value(); });
    if (!complete) {
      data.dropped_.push_back(where + ": missing value, row omitted");
      continue;
    }
    ObservationRow row;
    row.individual_id = r.individual_id;
    row.wave = *r.wave;
    if (!r.partner_id.empty()) row.partner_id = r.partner_id;
    row.source_row = r.source_row;
    row.outcomes.reserve(n_out);
    for (const auto& v : r.outcomes) row.outcomes.push_back(static_cast<int>(*v));
    row.covariates.reserve(n_cov);
    for (const auto& v : r.covariates) row.covariates.push_back(*v);
    data.rows_.push_back(std::move(row));
  }
  if (data.rows_.empty()) throw ValidationError("dataset: no complete rows");

  IdLess less;
  std::sort(data.rows_.begin(), data.rows_.end(), [&](const ObservationRow& a, const ObservationRow& b) {
    if (a.individual_id != b.individual_id) return less(a.individual_id, b.individual_id);
    if (a.wave != b.wave) return a.wave < b.wave;
    return a.source_row < b.source_row;
  });

  std::map<std::pair<std::string, int>, std::size_t> at;  // (id, wave) -> row position
  for (std::size_t i = 0; i < data.rows_.size(); ++i) {
    const auto& row = data.rows_[i];
    auto [it, fresh] = at.emplace(std::make_pair(row.individual_id, row.wave), i);
    if (!fresh) {
      throw ValidationError(row_label(data.rows_[it->second].source_row) + " and " + row_label(row.source_row) +
                            ": duplicate (individual " + row.individual_id + ", wave " +
                            std::to_string(row.wave) + ")");
    }
  }
  for (const auto& row : data.rows_) {
    if (!row.partner_id) continue;
    auto other = at.find({*row.partner_id, row.wave});
    if (other == at.end()) continue;  // partner not observed this wave
    const auto& back = data.rows_[other->second];
    if (back.partner_id != row.individual_id) {
      throw ValidationError(row_label(row.source_row) + " and " + row_label(back.source_row) +
                            ": asymmetric partner link at wave " + std::to_string(row.wave) + " (" +
                            row.individual_id + " names " + *row.partner_id + ", who names " +
                            back.partner_id.value_or("nobody") + ")");
    }
  }

  for (const auto& row : data.rows_) {
    if (data.individuals_.empty() || data.individuals_.back() != row.individual_id) {
      data.individuals_.push_back(row.individual_id);
    }
    data.row_individual_.push_back(data.individuals_.size() - 1);
  }
  return data;
}

/// Couple clusters: connected components of the union graph whose edges are
/// partner links from any wave. Clusters are numbered by their smallest
/// member id.
struct CoupleClusterIndex {
  std::vector<std::size_t> cluster_of;                // individual index -> cluster
  std::vector<std::vector<std::size_t>> members;      // cluster -> individual indices (ascending)
  std::vector<std::vector<int>> waves;                // cluster -> observed waves (ascending)

  std::size_t cluster_count() const { return members.size(); }

  std::size_t cluster_of_id(const PanelDataset& data, const std::string& id) const {
    const auto& ids = data.individuals();
    auto it = std::lower_bound(ids.begin(), ids.end(), id, IdLess{});
    if (it == ids.end() || *it != id) throw ValidationError("unknown individual " + id);
    return cluster_of[static_cast<std::size_t>(it - ids.begin())];
  }
};

inline CoupleClusterIndex build_couple_clusters(const PanelDataset& data) {
  const std::size_t n = data.individual_count();
  std::unordered_map<std::string, std::size_t> node;
  for (std::size_t i = 0; i < n; ++i) node.emplace(data.individuals()[i], i);
  // Partners never observed themselves still connect the people who named them.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t r = 0; r < data.row_count(); ++r) {
    const auto& row = data.rows()[r];
    if (!row.partner_id) continue;
    auto [it, fresh] = node.emplace(*row.partner_id, node.size());
    edges.emplace_back(data.row_individual()[r], it->second);
  }
  std::vector<std::size_t> rank(node.size());
  std::vector<std::size_t> parent(node.size());
  boost::disjoint_sets<std::size_t*, std::size_t*> sets(rank.data(), parent.data());
  for (std::size_t v = 0; v < node.size(); ++v) sets.make_set(v);
  for (auto [a, b] : edges) sets.union_set(a, b);

  CoupleClusterIndex index;
  index.cluster_of.assign(n, 0);
  std::unordered_map<std::size_t, std::size_t> cluster_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = sets.find_set(i);
    auto [it, fresh] = cluster_of_root.emplace(root, index.members.size());
    if (fresh) index.members.emplace_back();
    index.cluster_of[i] = it->second;
    index.members[it->second].push_back(i);
  }
  index.waves.assign(index.members.size(), {});
  for (std::size_t r = 0; r < data.row_count(); ++r) {
    index.waves[index.cluster_of[data.row_individual()[r]]].push_back(data.rows()[r].wave);
  }
  for (auto& w : index.waves) {
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
  }
  return index;
}

// --- CSV ----------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_optional_number(const std::string& field, const std::string& where) {
  const std::string t = trim(field);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ValidationError(where + ": '" + t + "' is not a number");
  return value;
}

/// Reads the long-format panel CSV:
///   individual_id,wave,partner_id,y_...,x_...
/// Outcome columns are the contiguous run of headers starting with "y" after
/// partner_id; every later column is a covariate.
inline PanelDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("dataset csv: missing header row");
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 5 || header[0] != "individual_id" || header[1] != "wave" || header[2] != "partner_id") {
    throw ValidationError("dataset csv: header must start with individual_id,wave,partner_id and list outcomes and covariates");
  }
  DatasetMeta meta;
  std::size_t col = 3;
  while (col < header.size() && !header[col].empty() && header[col][0] == 'y') meta.outcome_labels.push_back(header[col++]);
  for (; col < header.size(); ++col) meta.covariate_labels.push_back(header[col]);

  std::vector<RawRow> raw;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++data_row;
    const auto where = row_label(data_row);
    auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(f.size()));
    }
    RawRow r;
    r.source_row = data_row;
    r.individual_id = trim(f[0]);
    if (auto w = parse_optional_number(f[1], where)) {
      if (*w != static_cast<int>(*w)) throw ValidationError(where + ": wave must be an integer");
      r.wave = static_cast<int>(*w);
    }
    r.partner_id = trim(f[2]);
    std::size_t c = 3;
    for (std::size_t k = 0; k < meta.outcomes(); ++k) r.outcomes.push_back(parse_optional_number(f[c++], where));
    for (std::size_t k = 0; k < meta.covariates(); ++k) r.covariates.push_back(parse_optional_number(f[c++], where));
    raw.push_back(std::move(r));
  }
  return validate_dataset(std::move(raw), std::move(meta));
}

inline PanelDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path);
  return read_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const PanelDataset& data) {
  out << "individual_id,wave,partner_id";
  for (const auto& l : data.meta().outcome_labels) out << ',' << l;
  for (const auto& l : data.meta().covariate_labels) out << ',' << l;
  out << '\n';
  for (const auto& row : data.rows()) {
    out << row.individual_id << ',' << row.wave << ',' << row.partner_id.value_or("");
    for (int y : row.outcomes) out << ',' << y;
    for (double x : row.covariates) out << ',' << format_number(x);
    out << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const PanelDataset& data) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  write_dataset_csv(out, data);
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_DATA_HPP
