#ifndef MVREPROBIT_CHAIN_IO_HPP
#define MVREPROBIT_CHAIN_IO_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "format.hpp"
#include "model.hpp"
#include "sampler.hpp"

namespace mvreprobit {

// Chain file layout (CSV, one file per chain):
//
//   # mvreprobit chain
//   # spec_hash=<16 hex>
//   # seed=<seed>
//   # chain=<index>
//   # outcomes=<R>
//   # covariates=<P>
//   # levels=u,v,w
//   # step_size=<gamma_1>;<gamma_2>;...
//   # accepted=<count>;...
//   # proposed=<count>;...
//   draw,B_1_1,...,sigma_u_1_1,...,rho_e_2_1,...
//   1,<values>
//
// Values are written in shortest round-trip form, so reading a file back
// reproduces every stored double exactly.

struct ChainFile {
  ChainRecord record;
  std::size_t outcomes = 0;
  std::size_t covariates = 0;
  Levels levels;
  std::string spec_hash;
};

template <class T>
std::string join(const std::vector<T>& values, char sep) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += sep;
    if constexpr (std::is_floating_point_v<T>) s += format_number(values[i]);
    else s += std::to_string(values[i]);
  }
  return s;
}

inline void write_state_rows(std::ostream& out, std::size_t outcomes, std::size_t covariates, const Levels& levels,
                             const std::vector<ParameterState>& states, std::size_t first_index) {
  out << "draw";
  for (const auto& n : parameter_names(outcomes, covariates, levels)) out << ',' << n;
  out << '\n';
  for (std::size_t d = 0; d < states.size(); ++d) {
    out << (first_index + d);
    for (double v : flatten(states[d])) out << ',' << format_number(v);
    out << '\n';
  }
}

inline void write_chain_csv(std::ostream& out, const ModelSpec& spec, const ChainRecord& rec) {
  out << "# mvreprobit chain\n"
      << "# spec_hash=" << spec.hash() << '\n'
      << "# seed=" << spec.seed << '\n'
      << "# chain=" << rec.chain << '\n'
      << "# outcomes=" << spec.outcomes << '\n'
      << "# covariates=" << spec.covariates << '\n'
      << "# levels=" << spec.levels.to_string() << '\n'
      << "# step_size=" << join(rec.step_size, ';') << '\n'
      << "# accepted=" << join(rec.accepted, ';') << '\n'
      << "# proposed=" << join(rec.proposed, ';') << '\n';
  write_state_rows(out, spec.outcomes, spec.covariates, spec.levels, rec.draws, 1);
}

/// True parameters in the chain row format, draw index 0.
inline void write_truth_csv(std::ostream& out, const ParameterState& truth) {
  const Levels levels = truth.levels();
  out << "# mvreprobit truth\n"
      << "# outcomes=" << truth.B.rows() << '\n'
      << "# covariates=" << truth.B.cols() << '\n'
      << "# levels=" << levels.to_string() << '\n';
  write_state_rows(out, static_cast<std::size_t>(truth.B.rows()), static_cast<std::size_t>(truth.B.cols()), levels,
                   {truth}, 0);
}

namespace detail {

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  if (text.empty()) return parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

inline std::size_t to_size(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ValidationError("chain file: bad " + what + " '" + s + "'");
  }
}

struct ParsedStates {
  std::map<std::string, std::string> header;
  std::vector<ParameterState> states;
  std::size_t outcomes = 0;
  std::size_t covariates = 0;
  Levels levels;
};

inline ParsedStates read_state_rows(std::istream& in, const std::string& source) {
  ParsedStates out;
  std::string line;
  bool columns_seen = false;
  std::vector<std::string> names;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) out.header[trim(line.substr(1, eq - 1))] = trim(line.substr(eq + 1));
      continue;
    }
    const auto fields = split_csv_line(line);
    if (!columns_seen) {
      out.outcomes = to_size(out.header["outcomes"], "outcomes");
      out.covariates = to_size(out.header["covariates"], "covariates");
      out.levels = Levels::parse(out.header["levels"]);
      names = parameter_names(out.outcomes, out.covariates, out.levels);
      if (fields.size() != names.size() + 1 || fields[0] != "draw" ||
          !std::equal(names.begin(), names.end(), fields.begin() + 1)) {
        throw ValidationError(source + ": column header does not match outcomes/covariates/levels");
      }
      columns_seen = true;
      continue;
    }
    if (fields.size() != names.size() + 1) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": wrong field count");
    }
    std::vector<double> values;
    values.reserve(names.size());
    for (std::size_t k = 1; k < fields.size(); ++k) {
      auto v = parse_optional_number(fields[k], source + ":" + std::to_string(line_no));
      if (!v) throw ValidationError(source + ":" + std::to_string(line_no) + ": empty value");
      values.push_back(*v);
    }
    out.states.push_back(unflatten(values, out.outcomes, out.covariates, out.levels));
  }
  if (!columns_seen) throw ValidationError(source + ": no column header");
  return out;
}

}  // namespace detail

inline ChainFile read_chain_csv(std::istream& in, const std::string& source = "chain") {
  auto parsed = detail::read_state_rows(in, source);
  ChainFile f;
  f.outcomes = parsed.outcomes;
  f.covariates = parsed.covariates;
  f.levels = parsed.levels;
  f.spec_hash = parsed.header["spec_hash"];
  f.record.chain = detail::to_size(parsed.header["chain"], "chain");
  f.record.seed = detail::to_size(parsed.header["seed"], "seed");
  for (const auto& s : detail::split(parsed.header["step_size"], ';')) {
    f.record.step_size.push_back(*parse_optional_number(s, source));
  }
  for (const auto& s : detail::split(parsed.header["accepted"], ';')) f.record.accepted.push_back(detail::to_size(s, "accepted"));
  for (const auto& s : detail::split(parsed.header["proposed"], ';')) f.record.proposed.push_back(detail::to_size(s, "proposed"));
  f.record.draws = std::move(parsed.states);
  return f;
}

inline ParameterState read_truth_csv(std::istream& in, const std::string& source = "truth") {
  auto parsed = detail::read_state_rows(in, source);
  if (parsed.states.size() != 1) throw ValidationError(source + ": expected exactly one parameter row");
  return parsed.states.front();
}

inline std::string chain_file_name(std::size_t chain) { return "chain_" + std::to_string(chain + 1) + ".csv"; }

inline void write_chain_store(const std::filesystem::path& dir, const ChainStore& store) {
  std::filesystem::create_directories(dir);
  for (const auto& rec : store.chains) {
    const auto path = dir / chain_file_name(rec.chain);
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    write_chain_csv(out, store.spec, rec);
  }
}

/// Loads every chain_*.csv in `dir`. The returned spec carries the dimensions,
/// levels and seed recorded in the files; all files must agree on them.
inline ChainStore load_chain_store(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("chain directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("chain_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  if (files.empty()) throw ValidationError("no chain_*.csv files in " + dir.string());
  std::sort(files.begin(), files.end());
  ChainStore store;
  std::string hash;
  for (const auto& path : files) {
    std::ifstream in(path);
    auto f = read_chain_csv(in, path.filename().string());
    if (store.chains.empty()) {
      store.spec.outcomes = f.outcomes;
      store.spec.covariates = f.covariates;
      store.spec.levels = f.levels;
      store.spec.seed = f.record.seed;
      hash = f.spec_hash;
    } else if (f.outcomes != store.spec.outcomes || f.covariates != store.spec.covariates ||
               !(f.levels == store.spec.levels) || f.spec_hash != hash) {
      throw ValidationError(path.filename().string() + ": chain does not match the other chains in " + dir.string());
    }
    store.chains.push_back(std::move(f.record));
  }
  std::sort(store.chains.begin(), store.chains.end(), [](const auto& a, const auto& b) { return a.chain < b.chain; });
  return store;
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_CHAIN_IO_HPP
