#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinn/correlations.hpp"
#include "coinn/dataset.hpp"
#include "coinn/errors.hpp"
#include "coinn/experiment.hpp"
#include "coinn/numio.hpp"
#include "coinn/stats.hpp"
#include "coinn/train.hpp"
#include "coinn/version.hpp"

namespace coinn {

/// Declarative run configuration. One JSON document drives every subcommand;
/// unknown keys are rejected so typos fail loudly instead of silently using
/// defaults. The seed is mandatory — there is no wall-clock fallback.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string dataset;  // CSV path; required by commands that read data
  ColumnSchema schema;
  int n_bins = 50;
  bool apply_preprocess = false;  // bin the dataset in-memory before train/sweep/evaluate/analyze
  CorrelationChoice correlation;
  TrainConfig train;
  std::array<double, 3> fractions = {0.70, 0.15, 0.15};
  std::vector<std::string> holdout_ids;
  std::vector<InputSetSpec> input_sets;  // cmd_train uses the first entry
  int n_hidden = 6;
  std::array<int, 2> n_hidden_range = {1, 15};
  std::string model_path;  // saved-model JSON; required by evaluate, optional for predict
  std::string output_dir = ".";
  std::set<std::string> output_formats = {"csv", "json"};
  std::vector<CorrMethod> analysis_methods = {CorrMethod::pearson, CorrMethod::spearman};

  void validate() const {
    if (n_bins < 1) throw ConfigError("config: preprocess.n_bins must be >= 1");
    if (n_hidden < 1) throw ConfigError("config: n_hidden must be >= 1");
    if (n_hidden_range[0] < 1 || n_hidden_range[1] < n_hidden_range[0])
      throw ConfigError("config: n_hidden_range must be [lo, hi] with 1 <= lo <= hi");
    double fsum = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(fsum - 1.0) > 1e-9) throw ConfigError("config: split.fractions must sum to 1");
    for (double f : fractions)
      if (f < 0) throw ConfigError("config: split.fractions must be >= 0");
    if (input_sets.empty()) throw ConfigError("config: input_sets must not be empty");
    for (const auto& s : input_sets) {
      try {
        s.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    if (output_formats.empty()) throw ConfigError("config: output.formats must not be empty");
    for (const auto& f : output_formats)
      if (f != "csv" && f != "json") throw ConfigError("config: unknown output format '" + f + "'");
    try {
      train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(correlation.laminar_threshold > 0))
      throw ConfigError("config: correlation.laminar_threshold must be > 0");
  }

  void require_dataset() const {
    if (dataset.empty()) throw ConfigError("config: 'dataset' path is required for this command");
    if (!std::filesystem::exists(dataset))
      throw ConfigError("config: dataset file not found: " + dataset);
  }

  void require_model() const {
    if (model_path.empty()) throw ConfigError("config: 'model' path is required for this command");
    if (!std::filesystem::exists(model_path))
      throw ConfigError("config: model file not found: " + model_path);
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T get_as(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: bad value for '" + key + "' in " + where);
  }
}

template <typename T>
void maybe(const nlohmann::json& obj, const std::string& key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::get_as;
  using detail::maybe;
  if (!j.is_object()) throw ConfigError("config: document must be a JSON object");
  detail::reject_unknown_keys(
      j,
      {"version", "seed", "dataset", "schema", "preprocess", "correlation", "train", "split",
       "input_sets", "n_hidden", "n_hidden_range", "model", "output", "analysis"},
      "top level");
  if (!j.contains("version")) throw ConfigError("config: missing 'version'");
  if (get_as<int>(j, "version", "top level") != kFormatVersion)
    throw ConfigError("config: unsupported version");
  if (!j.contains("seed")) throw ConfigError("config: missing 'seed' (no wall-clock default)");

  RunConfig cfg;
  cfg.seed = get_as<std::uint64_t>(j, "seed", "top level");
  maybe(j, "dataset", "top level", cfg.dataset);
  maybe(j, "n_hidden", "top level", cfg.n_hidden);
  maybe(j, "model", "top level", cfg.model_path);
  maybe(j, "n_hidden_range", "top level", cfg.n_hidden_range);

  if (j.contains("schema")) {
    const auto& s = j.at("schema");
    if (!s.is_object()) throw ConfigError("config: 'schema' must be an object");
    for (auto it = s.begin(); it != s.end(); ++it) {
      if (!it.value().is_string()) throw ConfigError("config: schema values must be strings");
      cfg.schema.overrides[it.key()] = it.value().get<std::string>();
    }
  }
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    detail::reject_unknown_keys(p, {"n_bins", "apply"}, "preprocess");
    maybe(p, "n_bins", "preprocess", cfg.n_bins);
    maybe(p, "apply", "preprocess", cfg.apply_preprocess);
  }
  if (j.contains("correlation")) {
    const auto& c = j.at("correlation");
    detail::reject_unknown_keys(c, {"kind", "literal_mode", "laminar_threshold"}, "correlation");
    if (c.contains("kind")) {
      try {
        cfg.correlation.kind = correlation_kind_from_string(get_as<std::string>(c, "kind", "correlation"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    maybe(c, "literal_mode", "correlation", cfg.correlation.literal_mode);
    maybe(c, "laminar_threshold", "correlation", cfg.correlation.laminar_threshold);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown_keys(t,
                                {"n_restarts", "max_iter", "lambda_init", "lambda_up",
                                 "lambda_down", "lambda_max", "grad_tol", "selection",
                                 "marquardt_diag"},
                                "train");
    maybe(t, "n_restarts", "train", cfg.train.n_restarts);
    maybe(t, "max_iter", "train", cfg.train.max_iter);
    maybe(t, "lambda_init", "train", cfg.train.lambda_init);
    maybe(t, "lambda_up", "train", cfg.train.lambda_up);
    maybe(t, "lambda_down", "train", cfg.train.lambda_down);
    maybe(t, "lambda_max", "train", cfg.train.lambda_max);
    maybe(t, "grad_tol", "train", cfg.train.grad_tol);
    maybe(t, "marquardt_diag", "train", cfg.train.marquardt_diag);
    if (t.contains("selection")) {
      try {
        cfg.train.selection = selection_set_from_string(get_as<std::string>(t, "selection", "train"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    detail::reject_unknown_keys(s, {"fractions", "holdout_ids"}, "split");
    maybe(s, "fractions", "split", cfg.fractions);
    maybe(s, "holdout_ids", "split", cfg.holdout_ids);
  }
  if (j.contains("input_sets")) {
    const auto& arr = j.at("input_sets");
    if (!arr.is_array() || arr.empty())
      throw ConfigError("config: 'input_sets' must be a non-empty array");
    for (const auto& e : arr) {
      detail::reject_unknown_keys(e, {"name", "features"}, "input_sets entry");
      InputSetSpec spec;
      spec.name = get_as<std::string>(e, "name", "input_sets entry");
      spec.features = get_as<std::vector<std::string>>(e, "features", "input_sets entry");
      cfg.input_sets.push_back(std::move(spec));
    }
  } else {
    cfg.input_sets.push_back({"coinn", {"x", "ID", "sun_mishima"}});
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown_keys(o, {"dir", "formats"}, "output");
    maybe(o, "dir", "output", cfg.output_dir);
    if (o.contains("formats")) {
      cfg.output_formats.clear();
      for (const auto& f : get_as<std::vector<std::string>>(o, "formats", "output"))
        cfg.output_formats.insert(f);
    }
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    detail::reject_unknown_keys(a, {"methods"}, "analysis");
    if (a.contains("methods")) {
      cfg.analysis_methods.clear();
      for (const auto& name : get_as<std::vector<std::string>>(a, "methods", "analysis")) {
        try {
          cfg.analysis_methods.push_back(corr_method_from_string(name));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      }
      if (cfg.analysis_methods.empty())
        throw ConfigError("config: analysis.methods must not be empty");
    }
  }

  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Canonical JSON echo of the effective configuration, embedded in manifests
/// so a run can be reproduced from its manifest alone.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json schema = nlohmann::json::object();
  for (const auto& [k, v] : cfg.schema.overrides) schema[k] = v;
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& s : cfg.input_sets)
    sets.push_back(nlohmann::json{{"name", s.name}, {"features", s.features}});
  std::vector<std::string> methods;
  for (auto m : cfg.analysis_methods) methods.push_back(to_string(m));
  return nlohmann::json{
      {"version", kFormatVersion},
      {"seed", cfg.seed},
      {"dataset", cfg.dataset},
      {"schema", std::move(schema)},
      {"preprocess", {{"n_bins", cfg.n_bins}, {"apply", cfg.apply_preprocess}}},
      {"correlation",
       {{"kind", to_string(cfg.correlation.kind)},
        {"literal_mode", cfg.correlation.literal_mode},
        {"laminar_threshold", cfg.correlation.laminar_threshold}}},
      {"train",
       {{"n_restarts", cfg.train.n_restarts},
        {"max_iter", cfg.train.max_iter},
        {"lambda_init", cfg.train.lambda_init},
        {"lambda_up", cfg.train.lambda_up},
        {"lambda_down", cfg.train.lambda_down},
        {"lambda_max", cfg.train.lambda_max},
        {"grad_tol", cfg.train.grad_tol},
        {"selection", to_string(cfg.train.selection)},
        {"marquardt_diag", cfg.train.marquardt_diag}}},
      {"split", {{"fractions", cfg.fractions}, {"holdout_ids", cfg.holdout_ids}}},
      {"input_sets", std::move(sets)},
      {"n_hidden", cfg.n_hidden},
      {"n_hidden_range", cfg.n_hidden_range},
      {"model", cfg.model_path},
      {"output",
       {{"dir", cfg.output_dir},
        {"formats", std::vector<std::string>(cfg.output_formats.begin(), cfg.output_formats.end())}}},
      {"analysis", {{"methods", methods}}}};
}

}  // namespace coinn
