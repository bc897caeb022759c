#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinn/correlations.hpp"
#include "coinn/dataset.hpp"
#include "coinn/numio.hpp"

namespace coinn {

// ---------------------------------------------------------------------------
// Correlation coefficients
// ---------------------------------------------------------------------------

/// Pearson product-moment coefficient with population (1/N) normalization in
/// both the covariance and the standard deviations.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least 2 samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  sxx /= static_cast<double>(n);
  syy /= static_cast<double>(n);
  sxy /= static_cast<double>(n);
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson: coefficient undefined for a constant column");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values all receive the mean of the ranks they span.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank-order coefficient: Pearson applied to average-ranked data.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  try {
    return pearson(average_ranks(xs), average_ranks(ys));
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("spearman: coefficient undefined for a constant column");
  }
}

// ---------------------------------------------------------------------------
// Feature table
// ---------------------------------------------------------------------------

/// Column-oriented numeric view of a dataset: measured variables, any extra
/// CSV columns, derived flow parameters, and the measured gradient last.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // one per name, equal lengths

  void validate() const {
    if (names.size() != columns.size())
      throw std::invalid_argument("FeatureTable: names/columns mismatch");
    if (columns.empty()) throw std::invalid_argument("FeatureTable: empty table");
    for (const auto& c : columns)
      if (c.size() != columns.front().size() || c.size() < 2)
        throw std::invalid_argument("FeatureTable: columns must share a length >= 2");
  }

  std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return columns[i];
    throw std::invalid_argument("FeatureTable: no column named '" + name + "'");
  }

  bool has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }
};

/// Measured columns (x, G, P, ID, roughness, extras, target) plus derived
/// ones: homogeneous and phase-alone Reynolds numbers, phase friction
/// factors, and the two correlation predictions. Phase quantities use the
/// quality clamped inside (0, 1) so boundary points stay finite. The
/// homogeneous Reynolds number uses the quality-weighted linear viscosity.
inline FeatureTable build_feature_table(const Dataset& ds, bool literal_mode = false,
                                        double laminar_threshold = 2000.0) {
  if (ds.points.empty()) throw std::invalid_argument("build_feature_table: empty dataset");
  FeatureTable t;
  t.names = {"x", "G", "P", "ID", "roughness"};
  for (const auto& e : ds.extra_names) t.names.push_back(e);
  const std::vector<std::string> derived = {"Re_2ph", "Re_l", "Re_v", "f_l",
                                            "f_v",    "sun_mishima", "awad"};
  t.names.insert(t.names.end(), derived.begin(), derived.end());
  t.names.push_back("dpdz_exp");
  {
    auto sorted = t.names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("build_feature_table: extra column name collides with a built-in feature");
  }
  t.columns.assign(t.names.size(), {});
  for (auto& c : t.columns) c.reserve(ds.points.size());

  for (const auto& p : ds.points) {
    // The target column may be absent (prediction inputs), so validate the
    // physical fields only; targets are checked where they are consumed.
    p.fluid.validate();
    p.geometry.validate();
    p.flow.validate();
    const double xc = std::clamp(p.fluid.x, kQualityEps, 1.0 - kQualityEps);
    const double re_2ph = p.flow.g_flux * p.geometry.id / mixture_viscosity(p.fluid, ViscosityModel::cicchitti);
    const double re_l = p.flow.g_flux * (1.0 - xc) * p.geometry.id / p.fluid.mu_l;
    const double re_v = p.flow.g_flux * xc * p.geometry.id / p.fluid.mu_v;
    const double rel_rough = p.geometry.roughness / p.geometry.id;
    const double f_l = churchill_friction(re_l, rel_rough);
    const double f_v = churchill_friction(re_v, rel_rough);
    const double sm =
        sun_mishima_dpdz(p.fluid, p.geometry, p.flow, literal_mode, laminar_threshold).dpdz();
    const double awad = homogeneous_dpdz(p.fluid, p.geometry, p.flow, ViscosityModel::awad,
                                         literal_mode, laminar_threshold)
                            .dpdz();

    std::size_t c = 0;
    t.columns[c++].push_back(p.fluid.x);
    t.columns[c++].push_back(p.flow.g_flux);
    t.columns[c++].push_back(p.flow.pressure);
    t.columns[c++].push_back(p.geometry.id);
    t.columns[c++].push_back(p.geometry.roughness);
    for (double v : p.extras) t.columns[c++].push_back(v);
    t.columns[c++].push_back(re_2ph);
    t.columns[c++].push_back(re_l);
    t.columns[c++].push_back(re_v);
    t.columns[c++].push_back(f_l);
    t.columns[c++].push_back(f_v);
    t.columns[c++].push_back(sm);
    t.columns[c++].push_back(awad);
    t.columns[c++].push_back(p.dpdz_exp);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Correlation matrix
// ---------------------------------------------------------------------------

enum class CorrMethod { pearson, spearman };

inline std::string to_string(CorrMethod m) {
  return m == CorrMethod::pearson ? "pearson" : "spearman";
}

inline CorrMethod corr_method_from_string(const std::string& s) {
  if (s == "pearson") return CorrMethod::pearson;
  if (s == "spearman") return CorrMethod::spearman;
  throw std::invalid_argument("corr_method_from_string: unknown method '" + s + "'");
}

/// Symmetric matrix of pairwise coefficients. Pairs touching a constant
/// column are undefined and stored as NaN instead of failing the matrix.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // square, NaN where undefined
  CorrMethod method = CorrMethod::pearson;

  double at(std::size_t i, std::size_t j) const { return values[i][j]; }
};

inline CorrelationMatrix correlation_matrix(const FeatureTable& table, CorrMethod method) {
  table.validate();
  const std::size_t F = table.names.size();
  CorrelationMatrix m;
  m.names = table.names;
  m.method = method;
  m.values.assign(F, std::vector<double>(F, std::numeric_limits<double>::quiet_NaN()));

  // For Spearman, rank each column once; a constant column stays constant
  // after ranking, so undefined pairs are detected identically.
  std::vector<const std::vector<double>*> cols(F);
  std::vector<std::vector<double>> ranked;
  if (method == CorrMethod::spearman) {
    ranked.reserve(F);
    for (std::size_t i = 0; i < F; ++i) ranked.push_back(average_ranks(table.columns[i]));
    for (std::size_t i = 0; i < F; ++i) cols[i] = &ranked[i];
  } else {
    for (std::size_t i = 0; i < F; ++i) cols[i] = &table.columns[i];
  }

  std::vector<bool> constant(F);
  for (std::size_t i = 0; i < F; ++i) {
    const auto& c = *cols[i];
    constant[i] = std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); });
  }

  for (std::size_t i = 0; i < F; ++i) {
    if (constant[i]) continue;
    m.values[i][i] = 1.0;
    for (std::size_t j = i + 1; j < F; ++j) {
      if (constant[j]) continue;
      const double v = pearson(*cols[i], *cols[j]);
      m.values[i][j] = v;
      m.values[j][i] = v;
    }
  }
  return m;
}

/// Square CSV with a leading name row and column; undefined entries are empty.
inline std::string matrix_to_csv(const CorrelationMatrix& m) {
  std::string out = "feature";
  for (const auto& n : m.names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    out += m.names[i];
    for (std::size_t j = 0; j < m.names.size(); ++j) {
      out += ',';
      if (std::isfinite(m.values[i][j])) out += fmt_double(m.values[i][j]);
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::json matrix_to_json(const CorrelationMatrix& m) {
  // NaN entries serialize as null.
  return nlohmann::json{{"method", to_string(m.method)}, {"names", m.names}, {"values", m.values}};
}

}  // namespace coinn
