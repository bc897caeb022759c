#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinn/errors.hpp"
#include "coinn/numio.hpp"
#include "coinn/rng.hpp"

namespace coinn {

/// Phase properties and vapor quality of one measured state.
/// Properties are inputs; nothing here computes them.
struct FluidState {
  double rho_l = 0;  // liquid density [kg/m3]
  double rho_v = 0;  // vapor density [kg/m3]
  double mu_l = 0;   // liquid dynamic viscosity [Pa·s]
  double mu_v = 0;   // vapor dynamic viscosity [Pa·s]
  double sigma = 0;  // surface tension [N/m]
  double x = 0;      // vapor quality, in [0, 1]

  bool operator==(const FluidState&) const = default;

  void validate() const {
    if (!(rho_l > 0) || !(rho_v > 0)) throw std::invalid_argument("FluidState: densities must be > 0");
    if (!(rho_l > rho_v)) throw std::invalid_argument("FluidState: rho_l must exceed rho_v");
    if (!(mu_l > 0) || !(mu_v > 0)) throw std::invalid_argument("FluidState: viscosities must be > 0");
    if (!(sigma > 0)) throw std::invalid_argument("FluidState: sigma must be > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("FluidState: x must lie in [0, 1]");
  }
};

/// Circular micro-channel geometry; SI units internally.
struct ChannelGeometry {
  double id = 0;         // internal diameter [m]
  double roughness = 0;  // absolute roughness [m]
  double d_h = 0;        // hydraulic diameter [m], equals id for circular sections

  bool operator==(const ChannelGeometry&) const = default;

  void validate() const {
    if (!(id > 0)) throw std::invalid_argument("ChannelGeometry: id must be > 0");
    if (!(d_h > 0)) throw std::invalid_argument("ChannelGeometry: d_h must be > 0");
    if (!(roughness >= 0)) throw std::invalid_argument("ChannelGeometry: roughness must be >= 0");
    if (!(roughness < id)) throw std::invalid_argument("ChannelGeometry: roughness must be < id");
  }
};

struct FlowCondition {
  double g_flux = 0;    // mass flux G [kg/(s·m2)]
  double pressure = 0;  // absolute pressure [kPa]
  std::optional<double> temperature;  // [K]

  bool operator==(const FlowCondition&) const = default;

  void validate() const {
    if (!(g_flux > 0)) throw std::invalid_argument("FlowCondition: g_flux must be > 0");
    if (!(pressure > 0)) throw std::invalid_argument("FlowCondition: pressure must be > 0");
  }
};

/// One measured sample: state, geometry, flow condition, and the measured
/// frictional pressure gradient.
struct ExperimentPoint {
  std::string experiment_id;
  FluidState fluid;
  ChannelGeometry geometry;
  FlowCondition flow;
  double dpdz_exp = 0;                // measured frictional gradient [Pa/m]
  std::optional<double> dpdz_std;     // spread of the raw samples behind a binned point [Pa/m]
  std::vector<double> extras;         // aligned with Dataset::extra_names

  bool operator==(const ExperimentPoint&) const = default;

  void validate() const {
    if (experiment_id.empty()) throw std::invalid_argument("ExperimentPoint: experiment_id empty");
    fluid.validate();
    geometry.validate();
    flow.validate();
    if (!(dpdz_exp > 0)) throw std::invalid_argument("ExperimentPoint: dpdz_exp must be > 0");
  }
};

struct Dataset {
  std::vector<ExperimentPoint> points;
  std::vector<std::string> extra_names;  // optional columns carried through from the CSV

  bool operator==(const Dataset&) const = default;

  std::vector<std::string> experiments() const {
    std::set<std::string> ids;
    for (const auto& p : points) ids.insert(p.experiment_id);
    return {ids.begin(), ids.end()};
  }
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

// Canonical required columns. Diameter is accepted in mm and roughness in um;
// both are converted to meters on load.
inline const std::vector<std::string>& csv_required_columns() {
  static const std::vector<std::string> cols = {
      "experiment_id", "x", "G_kg_sm2", "P_kPa", "ID_mm", "roughness_um",
      "rho_l", "rho_v", "mu_l", "mu_v", "sigma", "dpdz_Pa_m"};
  return cols;
}

inline constexpr const char* kStdColumn = "dpdz_std_Pa_m";
inline constexpr const char* kTemperatureColumn = "T_K";

/// Maps canonical column names to the header names actually present in a file.
/// Unlisted columns keep their canonical name.
struct ColumnSchema {
  std::map<std::string, std::string> overrides;

  std::string resolve(const std::string& canonical) const {
    auto it = overrides.find(canonical);
    return it == overrides.end() ? canonical : it->second;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Loads a dataset from CSV. Columns may appear in any order; every row is
/// validated against the type invariants and errors name the offending line.
/// With require_target = false the dpdz column may be absent or empty
/// (prediction inputs); such points carry dpdz_exp = NaN and skip its check.
inline Dataset load_dataset(const std::string& path, const ColumnSchema& schema = {},
                            bool require_target = true) {
  std::string content = read_file(path);
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : content) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }
  if (lines.empty()) throw DataError(path + ": empty file");

  auto header = detail::split_csv_line(lines[0]);
  for (auto& h : header) h = detail::trim(h);

  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].empty()) throw DataError(path + ": empty header name in column " + std::to_string(i + 1));
    if (!col_index.emplace(header[i], i).second)
      throw DataError(path + ": duplicate column '" + header[i] + "'");
  }

  std::map<std::string, std::size_t> canon;  // canonical name -> column index
  for (const auto& name : csv_required_columns()) {
    auto actual = schema.resolve(name);
    auto it = col_index.find(actual);
    if (it == col_index.end()) {
      if (name == "dpdz_Pa_m" && !require_target) continue;
      throw DataError(path + ": missing column '" + actual + "'");
    }
    canon[name] = it->second;
  }
  std::optional<std::size_t> std_col, temp_col;
  if (auto it = col_index.find(schema.resolve(kStdColumn)); it != col_index.end()) std_col = it->second;
  if (auto it = col_index.find(schema.resolve(kTemperatureColumn)); it != col_index.end()) temp_col = it->second;

  // Every remaining numeric column is carried through as an extra feature.
  std::set<std::size_t> claimed;
  for (const auto& [_, idx] : canon) claimed.insert(idx);
  if (std_col) claimed.insert(*std_col);
  if (temp_col) claimed.insert(*temp_col);
  Dataset ds;
  std::vector<std::size_t> extra_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!claimed.count(i)) {
      extra_cols.push_back(i);
      ds.extra_names.push_back(header[i]);
    }
  }

  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (detail::trim(lines[li]).empty()) continue;
    auto cells = detail::split_csv_line(lines[li]);
    const std::string where = path + " line " + std::to_string(li + 1);
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));

    auto cell = [&](std::size_t idx) { return detail::trim(cells[idx]); };
    auto num = [&](const std::string& canonical) {
      const std::string& raw = cells[canon.at(canonical)];
      try {
        return parse_double(detail::trim(raw));
      } catch (const std::exception&) {
        throw DataError(where + ": non-numeric cell '" + detail::trim(raw) + "' in column '" +
                        schema.resolve(canonical) + "'");
      }
    };

    ExperimentPoint p;
    p.experiment_id = cell(canon.at("experiment_id"));
    p.fluid.x = num("x");
    p.fluid.rho_l = num("rho_l");
    p.fluid.rho_v = num("rho_v");
    p.fluid.mu_l = num("mu_l");
    p.fluid.mu_v = num("mu_v");
    p.fluid.sigma = num("sigma");
    p.geometry.id = num("ID_mm") / 1000.0;
    p.geometry.roughness = num("roughness_um") / 1000000.0;
    p.geometry.d_h = p.geometry.id;
    p.flow.g_flux = num("G_kg_sm2");
    p.flow.pressure = num("P_kPa");
    if (temp_col && !cell(*temp_col).empty()) p.flow.temperature = parse_double(cell(*temp_col));
    if (canon.count("dpdz_Pa_m")) {
      p.dpdz_exp = num("dpdz_Pa_m");
    } else {
      p.dpdz_exp = std::numeric_limits<double>::quiet_NaN();
    }
    if (std_col && !cell(*std_col).empty()) p.dpdz_std = parse_double(cell(*std_col));
    for (std::size_t ci : extra_cols) {
      try {
        p.extras.push_back(parse_double(cell(ci)));
      } catch (const std::exception&) {
        throw DataError(where + ": non-numeric cell '" + cell(ci) + "' in column '" + header[ci] + "'");
      }
    }

    try {
      if (require_target) {
        p.validate();
      } else {
        // Validate everything except the (possibly absent) target.
        p.fluid.validate();
        p.geometry.validate();
        p.flow.validate();
        if (p.experiment_id.empty()) throw std::invalid_argument("ExperimentPoint: experiment_id empty");
      }
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    ds.points.push_back(std::move(p));
  }
  return ds;
}

/// Writes a dataset in the canonical column order; inverse of load_dataset.
inline void save_dataset_csv(const Dataset& ds, const std::string& path) {
  bool any_std = std::any_of(ds.points.begin(), ds.points.end(),
                             [](const ExperimentPoint& p) { return p.dpdz_std.has_value(); });
  bool any_temp = std::any_of(ds.points.begin(), ds.points.end(),
                              [](const ExperimentPoint& p) { return p.flow.temperature.has_value(); });
  std::string out;
  for (const auto& c : csv_required_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  if (any_std) out += std::string(",") + kStdColumn;
  if (any_temp) out += std::string(",") + kTemperatureColumn;
  for (const auto& name : ds.extra_names) out += "," + name;
  out += '\n';

  for (const auto& p : ds.points) {
    out += p.experiment_id;
    out += ',' + fmt_double(p.fluid.x);
    out += ',' + fmt_double(p.flow.g_flux);
    out += ',' + fmt_double(p.flow.pressure);
    out += ',' + fmt_double(p.geometry.id * 1000.0);
    out += ',' + fmt_double(p.geometry.roughness * 1000000.0);
    out += ',' + fmt_double(p.fluid.rho_l);
    out += ',' + fmt_double(p.fluid.rho_v);
    out += ',' + fmt_double(p.fluid.mu_l);
    out += ',' + fmt_double(p.fluid.mu_v);
    out += ',' + fmt_double(p.fluid.sigma);
    out += ',' + fmt_double(p.dpdz_exp);
    if (any_std) out += ',' + (p.dpdz_std ? fmt_double(*p.dpdz_std) : std::string());
    if (any_temp) out += ',' + (p.flow.temperature ? fmt_double(*p.flow.temperature) : std::string());
    for (double v : p.extras) out += ',' + fmt_double(v);
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Quality binning
// ---------------------------------------------------------------------------

/// Collapses each experiment's points into n_bins equal-width quality regions
/// over [0, 1]. Points sharing a region are replaced by their arithmetic mean;
/// the spread of the measured gradient within a region is kept as dpdz_std.
/// A region holding a single point passes it through verbatim, which makes the
/// operation idempotent.
inline Dataset bin_by_quality(const Dataset& ds, int n_bins = 50) {
  if (n_bins < 1) throw std::invalid_argument("bin_by_quality: n_bins must be >= 1");

  // Experiments keep their order of first appearance; bins ascend within one.
  std::vector<std::string> exp_order;
  std::map<std::string, std::map<int, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    const auto& p = ds.points[i];
    if (!groups.count(p.experiment_id)) exp_order.push_back(p.experiment_id);
    int bin = static_cast<int>(std::floor(p.fluid.x * n_bins));
    if (bin >= n_bins) bin = n_bins - 1;  // x == 1 goes to the last region
    groups[p.experiment_id][bin].push_back(i);
  }

  Dataset out;
  out.extra_names = ds.extra_names;
  for (const auto& exp : exp_order) {
    // Geometry is a per-experiment constant; averaged fields never include it.
    const ChannelGeometry& geom = ds.points[groups[exp].begin()->second.front()].geometry;
    for (const auto& [bin, idxs] : groups[exp]) {
      for (std::size_t i : idxs) {
        if (!(ds.points[i].geometry == geom))
          throw DataError("bin_by_quality: geometry not constant within experiment '" + exp + "'");
      }
      if (idxs.size() == 1) {
        out.points.push_back(ds.points[idxs[0]]);
        continue;
      }
      ExperimentPoint m;
      m.experiment_id = exp;
      m.geometry = geom;
      const double n = static_cast<double>(idxs.size());
      double sum_dpdz = 0.0;
      bool any_temp = false;
      double sum_temp = 0.0;
      m.extras.assign(ds.extra_names.size(), 0.0);
      for (std::size_t i : idxs) {
        const auto& p = ds.points[i];
        m.fluid.x += p.fluid.x / n;
        m.fluid.rho_l += p.fluid.rho_l / n;
        m.fluid.rho_v += p.fluid.rho_v / n;
        m.fluid.mu_l += p.fluid.mu_l / n;
        m.fluid.mu_v += p.fluid.mu_v / n;
        m.fluid.sigma += p.fluid.sigma / n;
        m.flow.g_flux += p.flow.g_flux / n;
        m.flow.pressure += p.flow.pressure / n;
        if (p.flow.temperature) {
          any_temp = true;
          sum_temp += *p.flow.temperature;
        }
        sum_dpdz += p.dpdz_exp;
        for (std::size_t k = 0; k < m.extras.size(); ++k) m.extras[k] += p.extras[k] / n;
      }
      m.dpdz_exp = sum_dpdz / n;
      if (any_temp) m.flow.temperature = sum_temp / n;
      double var = 0.0;
      for (std::size_t i : idxs) {
        double d = ds.points[i].dpdz_exp - m.dpdz_exp;
        var += d * d;
      }
      m.dpdz_std = std::sqrt(var / n);
      out.points.push_back(std::move(m));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded splitting
// ---------------------------------------------------------------------------

/// Disjoint index sets partitioning a dataset. Hold-out selection operates on
/// whole experiments; the rest is shuffled with the seeded generator.
struct SplitAssignment {
  std::vector<std::size_t> train, validation, test, holdout;
  std::uint64_t seed = 0;
  std::vector<std::string> holdout_ids;
  std::array<double, 3> fractions = {0.70, 0.15, 0.15};
};

/// Canonical pre-shuffle order (experiment_id, then original row index), then
/// a seeded Fisher-Yates shuffle and partition by the fractions: train and
/// validation sizes round down, the remainder goes to test.
inline SplitAssignment make_split(const Dataset& ds, const std::vector<std::string>& holdout_ids,
                                  std::array<double, 3> fractions, std::uint64_t seed) {
  double fsum = fractions[0] + fractions[1] + fractions[2];
  if (std::fabs(fsum - 1.0) > 1e-9)
    throw std::invalid_argument("make_split: fractions must sum to 1");
  for (double f : fractions)
    if (f < 0) throw std::invalid_argument("make_split: fractions must be >= 0");

  auto known = ds.experiments();
  std::set<std::string> holdout_set;
  for (const auto& id : holdout_ids) {
    if (!std::binary_search(known.begin(), known.end(), id))
      throw std::invalid_argument("make_split: unknown holdout label '" + id + "'");
    holdout_set.insert(id);
  }

  SplitAssignment split;
  split.seed = seed;
  split.holdout_ids = {holdout_set.begin(), holdout_set.end()};
  split.fractions = fractions;

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    if (holdout_set.count(ds.points[i].experiment_id)) {
      split.holdout.push_back(i);
    } else {
      rest.push_back(i);
    }
  }
  std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
    return ds.points[a].experiment_id < ds.points[b].experiment_id;
  });

  rng::Engine engine(seed);
  rng::shuffle(rest, engine);

  const auto n = rest.size();
  const auto n_train = static_cast<std::size_t>(std::floor(fractions[0] * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n)));
  split.train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train),
                          rest.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), rest.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

inline nlohmann::json split_to_json(const SplitAssignment& s) {
  return nlohmann::json{{"seed", s.seed},
                        {"generator", rng::kGeneratorName},
                        {"holdout_ids", s.holdout_ids},
                        {"fractions", s.fractions},
                        {"train", s.train},
                        {"validation", s.validation},
                        {"test", s.test},
                        {"holdout", s.holdout}};
}

inline SplitAssignment split_from_json(const nlohmann::json& j) {
  SplitAssignment s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.holdout_ids = j.at("holdout_ids").get<std::vector<std::string>>();
  s.fractions = j.at("fractions").get<std::array<double, 3>>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.validation = j.at("validation").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  s.holdout = j.at("holdout").get<std::vector<std::size_t>>();
  return s;
}

/// Dataset restricted to the given indices, order preserved.
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.extra_names = ds.extra_names;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) out.points.push_back(ds.points.at(i));
  return out;
}

}  // namespace coinn
