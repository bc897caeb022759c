#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinn/errors.hpp"
#include "coinn/numio.hpp"
#include "coinn/version.hpp"

namespace coinn {

/// Closed interval used by the affine scaling layers.
struct ScaleRange {
  double min = -1.0;
  double max = 1.0;

  bool operator==(const ScaleRange&) const = default;

  double width() const { return max - min; }
  // Affine map [min, max] -> [-1, 1]; inputs outside the range extrapolate.
  double to_unit(double v) const { return 2.0 * (v - min) / width() - 1.0; }
  double from_unit(double u) const { return (u + 1.0) / 2.0 * width() + min; }
};

/// One-hidden-layer tanh regression network with frozen min-max scaling on
/// inputs and output. Trainable parameters are w1, b1, w2, b2; the scale
/// ranges are data statistics, not degrees of freedom.
struct NetworkParams {
  int n_in = 0;
  int n_hidden = 0;
  std::vector<double> w1;  // hidden weights, row-major (n_hidden x n_in)
  std::vector<double> b1;  // hidden biases (n_hidden)
  std::vector<double> w2;  // output weights (n_hidden)
  double b2 = 0.0;
  std::vector<ScaleRange> in_scale;  // per input
  ScaleRange out_scale;

  bool operator==(const NetworkParams&) const = default;

  int n_params() const { return n_hidden * n_in + 2 * n_hidden + 1; }

  void validate() const {
    if (n_in < 1) throw std::invalid_argument("NetworkParams: n_in must be >= 1");
    if (n_hidden < 1) throw std::invalid_argument("NetworkParams: n_hidden must be >= 1");
    if (w1.size() != static_cast<std::size_t>(n_hidden * n_in))
      throw std::invalid_argument("NetworkParams: w1 size mismatch");
    if (b1.size() != static_cast<std::size_t>(n_hidden))
      throw std::invalid_argument("NetworkParams: b1 size mismatch");
    if (w2.size() != static_cast<std::size_t>(n_hidden))
      throw std::invalid_argument("NetworkParams: w2 size mismatch");
    if (in_scale.size() != static_cast<std::size_t>(n_in))
      throw std::invalid_argument("NetworkParams: in_scale size mismatch");
    for (double v : w1)
      if (!std::isfinite(v)) throw std::invalid_argument("NetworkParams: non-finite w1");
    for (double v : b1)
      if (!std::isfinite(v)) throw std::invalid_argument("NetworkParams: non-finite b1");
    for (double v : w2)
      if (!std::isfinite(v)) throw std::invalid_argument("NetworkParams: non-finite w2");
    if (!std::isfinite(b2)) throw std::invalid_argument("NetworkParams: non-finite b2");
    for (const auto& s : in_scale)
      if (!(s.max > s.min)) throw std::invalid_argument("NetworkParams: in_scale needs max > min");
    if (!(out_scale.max > out_scale.min))
      throw std::invalid_argument("NetworkParams: out_scale needs max > min");
  }

  /// Copies the trainable parameters out in the canonical flattened order
  /// (w1 row-major, b1, w2, b2).
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(n_params()));
    flat.insert(flat.end(), w1.begin(), w1.end());
    flat.insert(flat.end(), b1.begin(), b1.end());
    flat.insert(flat.end(), w2.begin(), w2.end());
    flat.push_back(b2);
    return flat;
  }

  void unflatten(const std::vector<double>& flat) {
    if (flat.size() != static_cast<std::size_t>(n_params()))
      throw std::invalid_argument("NetworkParams::unflatten: size mismatch");
    auto it = flat.begin();
    std::copy(it, it + w1.size(), w1.begin());
    it += static_cast<std::ptrdiff_t>(w1.size());
    std::copy(it, it + b1.size(), b1.begin());
    it += static_cast<std::ptrdiff_t>(b1.size());
    std::copy(it, it + w2.size(), w2.begin());
    it += static_cast<std::ptrdiff_t>(w2.size());
    b2 = *it;
  }
};

/// A batch of samples: one input row per sample, optional physical targets.
struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;  // same length as inputs when present, else empty

  void validate(int n_in) const {
    for (const auto& row : inputs)
      if (row.size() != static_cast<std::size_t>(n_in))
        throw std::invalid_argument("Batch: input row width mismatch");
    if (!targets.empty() && targets.size() != inputs.size())
      throw std::invalid_argument("Batch: targets/inputs length mismatch");
  }
};

namespace detail {

/// Pre-activation output z in scaled [-1, 1] space, with the hidden
/// activations and scaled inputs exposed for gradient reuse.
inline double forward_scaled_core(const NetworkParams& p, const std::vector<double>& inputs,
                                  std::vector<double>& u, std::vector<double>& h) {
  u.resize(static_cast<std::size_t>(p.n_in));
  h.resize(static_cast<std::size_t>(p.n_hidden));
  for (int j = 0; j < p.n_in; ++j) u[static_cast<std::size_t>(j)] = p.in_scale[static_cast<std::size_t>(j)].to_unit(inputs[static_cast<std::size_t>(j)]);
  double z = p.b2;
  for (int i = 0; i < p.n_hidden; ++i) {
    double a = p.b1[static_cast<std::size_t>(i)];
    const double* row = p.w1.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(p.n_in);
    for (int j = 0; j < p.n_in; ++j) a += row[j] * u[static_cast<std::size_t>(j)];
    const double hi = std::tanh(a);
    h[static_cast<std::size_t>(i)] = hi;
    z += p.w2[static_cast<std::size_t>(i)] * hi;
  }
  return z;
}

/// Gradient of the scaled output z with respect to the flattened parameter
/// vector, written into grad (size n_params). Returns z.
inline double scaled_gradient(const NetworkParams& p, const std::vector<double>& inputs,
                              std::vector<double>& u, std::vector<double>& h, double* grad) {
  const double z = forward_scaled_core(p, inputs, u, h);
  const std::size_t nw1 = p.w1.size();
  const std::size_t nh = static_cast<std::size_t>(p.n_hidden);
  for (std::size_t i = 0; i < nh; ++i) {
    const double hi = h[i];
    const double sech2 = 1.0 - hi * hi;
    const double back = p.w2[i] * sech2;
    double* row = grad + i * static_cast<std::size_t>(p.n_in);
    for (int j = 0; j < p.n_in; ++j) row[j] = back * u[static_cast<std::size_t>(j)];
    grad[nw1 + i] = back;           // b1
    grad[nw1 + nh + i] = h[i];      // w2
  }
  grad[nw1 + 2 * nh] = 1.0;         // b2
  return z;
}

}  // namespace detail

/// Scaled-space output z (before the output rescaling layer).
inline double forward_scaled(const NetworkParams& p, const std::vector<double>& inputs) {
  if (inputs.size() != static_cast<std::size_t>(p.n_in))
    throw std::invalid_argument("forward_scaled: input width mismatch");
  std::vector<double> u, h;
  return detail::forward_scaled_core(p, inputs, u, h);
}

/// Full forward pass in physical units.
inline double forward(const NetworkParams& p, const std::vector<double>& inputs) {
  return p.out_scale.from_unit(forward_scaled(p, inputs));
}

inline std::vector<double> forward(const NetworkParams& p, const Batch& batch) {
  batch.validate(p.n_in);
  std::vector<double> out;
  out.reserve(batch.inputs.size());
  std::vector<double> u, h;
  for (const auto& row : batch.inputs)
    out.push_back(p.out_scale.from_unit(detail::forward_scaled_core(p, row, u, h)));
  return out;
}

/// Exact derivatives of the physical-units prediction with respect to the
/// flattened parameter vector (w1 row-major, b1, w2, b2); one row per sample.
inline std::vector<std::vector<double>> jacobian(const NetworkParams& p, const Batch& batch) {
  if (batch.inputs.empty()) throw std::invalid_argument("jacobian: batch must be non-empty");
  batch.validate(p.n_in);
  const std::size_t np = static_cast<std::size_t>(p.n_params());
  const double dy_dz = p.out_scale.width() / 2.0;
  std::vector<std::vector<double>> rows;
  rows.reserve(batch.inputs.size());
  std::vector<double> u, h;
  for (const auto& in : batch.inputs) {
    std::vector<double> g(np);
    detail::scaled_gradient(p, in, u, h, g.data());
    for (double& v : g) v *= dy_dz;
    rows.push_back(std::move(g));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Model document (network + provenance) serialization
// ---------------------------------------------------------------------------

/// A trained network plus the provenance needed to reuse it safely: which
/// features it expects (in order), the seed it came from, and which restart
/// won the selection.
struct ModelDocument {
  NetworkParams params;
  std::uint64_t seed_used = 0;
  int chosen_restart = 0;
  std::vector<std::string> input_feature_names;

  bool operator==(const ModelDocument&) const = default;
};

inline nlohmann::json model_to_json(const ModelDocument& m) {
  m.params.validate();
  if (m.input_feature_names.size() != static_cast<std::size_t>(m.params.n_in))
    throw std::invalid_argument("model_to_json: feature-name count must equal n_in");
  nlohmann::json w1 = nlohmann::json::array();
  for (int i = 0; i < m.params.n_hidden; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.params.n_in; ++j)
      row.push_back(m.params.w1[static_cast<std::size_t>(i * m.params.n_in + j)]);
    w1.push_back(std::move(row));
  }
  nlohmann::json in_scale = nlohmann::json::array();
  for (const auto& s : m.params.in_scale) in_scale.push_back({s.min, s.max});
  return nlohmann::json{{"version", kFormatVersion},
                        {"n_in", m.params.n_in},
                        {"n_hidden", m.params.n_hidden},
                        {"w1", std::move(w1)},
                        {"b1", m.params.b1},
                        {"w2", m.params.w2},
                        {"b2", m.params.b2},
                        {"in_scale", std::move(in_scale)},
                        {"out_scale", {m.params.out_scale.min, m.params.out_scale.max}},
                        {"seed_used", m.seed_used},
                        {"chosen_restart", m.chosen_restart},
                        {"input_feature_names", m.input_feature_names}};
}

inline ModelDocument model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("model_from_json: document must be a JSON object");
  if (j.value("version", -1) != kFormatVersion)
    throw DataError("model_from_json: unsupported document version");
  ModelDocument m;
  try {
    m.params.n_in = j.at("n_in").get<int>();
    m.params.n_hidden = j.at("n_hidden").get<int>();
    for (const auto& row : j.at("w1"))
      for (const auto& v : row) m.params.w1.push_back(v.get<double>());
    m.params.b1 = j.at("b1").get<std::vector<double>>();
    m.params.w2 = j.at("w2").get<std::vector<double>>();
    m.params.b2 = j.at("b2").get<double>();
    for (const auto& pr : j.at("in_scale"))
      m.params.in_scale.push_back({pr.at(0).get<double>(), pr.at(1).get<double>()});
    m.params.out_scale = {j.at("out_scale").at(0).get<double>(), j.at("out_scale").at(1).get<double>()};
    m.seed_used = j.at("seed_used").get<std::uint64_t>();
    m.chosen_restart = j.at("chosen_restart").get<int>();
    m.input_feature_names = j.at("input_feature_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model_from_json: malformed document: ") + e.what());
  }
  try {
    m.params.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model_from_json: ") + e.what());
  }
  if (m.input_feature_names.size() != static_cast<std::size_t>(m.params.n_in))
    throw DataError("model_from_json: feature-name count must equal n_in");
  return m;
}

inline void save_model(const ModelDocument& m, const std::string& path) {
  write_file(path, model_to_json(m).dump(2) + "\n");
}

inline ModelDocument load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace coinn
