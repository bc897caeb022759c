#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinn/config.hpp"
#include "coinn/correlations.hpp"
#include "coinn/dataset.hpp"
#include "coinn/errors.hpp"
#include "coinn/experiment.hpp"
#include "coinn/manifest.hpp"
#include "coinn/network.hpp"
#include "coinn/stats.hpp"
#include "coinn/train.hpp"

namespace coinn {

/// Command-line level options shared by all subcommands. They refine the
/// config, never replace it: --seed and --out override the corresponding
/// config values, --threads controls execution only (results are identical
/// for any thread count), --json switches stdout to machine-readable output.
struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool json_stdout = false;
  int threads = 1;
};

/// Exit-code policy: 2 configuration, 3 data, 4 numerical divergence,
/// 1 anything else.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const DivergenceError*>(&e)) return 4;
  return 1;
}

namespace detail {

inline void apply_overrides(RunConfig& cfg, const GlobalOptions& g) {
  if (g.threads < 1) throw ConfigError("--threads must be >= 1");
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  if (g.out_dir) cfg.output_dir = *g.out_dir;
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void ensure_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
}

/// Dataset as the non-preprocess commands see it: loaded, non-empty, and
/// binned in memory when preprocess.apply is set.
inline Dataset load_input_dataset(const RunConfig& cfg) {
  cfg.require_dataset();
  Dataset ds = load_dataset(cfg.dataset, cfg.schema, /*require_target=*/true);
  if (ds.points.empty()) throw DataError(cfg.dataset + ": no data rows");
  if (cfg.apply_preprocess) ds = bin_by_quality(ds, cfg.n_bins);
  return ds;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

inline nlohmann::json cmd_preprocess(RunConfig cfg, const GlobalOptions& g) {
  detail::apply_overrides(cfg, g);
  cfg.require_dataset();
  const Dataset raw = load_dataset(cfg.dataset, cfg.schema, /*require_target=*/true);
  if (raw.points.empty()) throw DataError(cfg.dataset + ": no data rows");
  const Dataset binned = bin_by_quality(raw, cfg.n_bins);

  detail::ensure_output_dir(cfg);
  const std::string out_csv = detail::join_path(cfg.output_dir, "preprocessed.csv");
  save_dataset_csv(binned, out_csv);

  nlohmann::json bins = nlohmann::json::array();
  for (const auto& p : binned.points) {
    nlohmann::json b{{"experiment_id", p.experiment_id}, {"x", p.fluid.x}};
    if (p.dpdz_std) {
      b["dpdz_std"] = *p.dpdz_std;
    } else {
      b["dpdz_std"] = nullptr;
    }
    bins.push_back(std::move(b));
  }
  const nlohmann::json extra{{"n_bins", cfg.n_bins},
                             {"n_points_in", raw.points.size()},
                             {"n_points_out", binned.points.size()},
                             {"bins", std::move(bins)}};
  const std::string man_path = detail::join_path(cfg.output_dir, "preprocess_manifest.json");
  write_manifest(man_path, make_manifest("preprocess", config_to_json(cfg), {cfg.dataset}, {out_csv}, extra));

  return nlohmann::json{{"command", "preprocess"},
                        {"n_points_in", raw.points.size()},
                        {"n_points_out", binned.points.size()},
                        {"output", out_csv},
                        {"manifest", man_path}};
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

inline nlohmann::json cmd_train(RunConfig cfg, const GlobalOptions& g) {
  detail::apply_overrides(cfg, g);
  const Dataset ds = detail::load_input_dataset(cfg);
  SplitAssignment split;
  try {
    split = make_split(ds, cfg.holdout_ids, cfg.fractions, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  if (split.train.empty() || split.validation.empty())
    throw DataError("train: split leaves the train or validation set empty");

  const InputSetSpec& spec = cfg.input_sets.front();
  const AssembledInputs assembled =
      assemble_inputs(spec, ds, cfg.correlation.literal_mode, cfg.correlation.laminar_threshold);
  const Batch train_b = detail::subset_batch(assembled.batch, split.train);
  const Batch val_b = detail::subset_batch(assembled.batch, split.validation);

  const TrainedModel model = train_multistart(train_b, val_b, cfg.train, cfg.n_hidden, g.threads);

  detail::ensure_output_dir(cfg);
  const std::string model_path = detail::join_path(cfg.output_dir, "model.json");
  const ModelDocument doc{model.params, model.seed_used, model.chosen_restart,
                          assembled.feature_names};
  save_model(doc, model_path);

  const std::string split_path = detail::join_path(cfg.output_dir, "split.json");
  write_file(split_path, split_to_json(split).dump(2) + "\n");

  std::vector<std::string> outputs = {model_path, split_path};
  if (cfg.output_formats.count("csv")) {
    std::string hist = "restart,train_mse,selection_mre,stop,n_iter,lambda_capped\n";
    for (const auto& r : model.history) {
      hist += std::to_string(r.restart);
      hist += ',' + (std::isfinite(r.train_mse) ? fmt_double(r.train_mse) : std::string());
      hist += ',' + (std::isfinite(r.selection_mre) ? fmt_double(r.selection_mre) : std::string());
      hist += ',' + to_string(r.stop);
      hist += ',' + std::to_string(r.n_iter);
      hist += ',' + std::string(r.lambda_capped ? "true" : "false");
      hist += '\n';
    }
    const std::string hist_path = detail::join_path(cfg.output_dir, "train_history.csv");
    write_file(hist_path, hist);
    outputs.push_back(hist_path);
  }

  const RestartRecord& winner = model.history[static_cast<std::size_t>(model.chosen_restart)];
  if (cfg.output_formats.count("json")) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& r : model.history)
      hist.push_back(nlohmann::json{{"restart", r.restart},
                                    {"train_mse", r.train_mse},
                                    {"selection_mre", r.selection_mre},
                                    {"stop", to_string(r.stop)},
                                    {"n_iter", r.n_iter},
                                    {"lambda_capped", r.lambda_capped}});
    const nlohmann::json report{{"seed", model.seed_used},
                                {"chosen_restart", model.chosen_restart},
                                {"selection_set", to_string(cfg.train.selection)},
                                {"selection_mre", winner.selection_mre},
                                {"train_mse", winner.train_mse},
                                {"input_set", spec.name},
                                {"feature_names", assembled.feature_names},
                                {"n_hidden", cfg.n_hidden},
                                {"restarts", std::move(hist)}};
    const std::string report_path = detail::join_path(cfg.output_dir, "train_report.json");
    write_file(report_path, report.dump(2) + "\n");
    outputs.push_back(report_path);
  }

  const std::string man_path = detail::join_path(cfg.output_dir, "train_manifest.json");
  write_manifest(man_path, make_manifest("train", config_to_json(cfg), {cfg.dataset}, outputs));

  return nlohmann::json{{"command", "train"},
                        {"model", model_path},
                        {"split", split_path},
                        {"manifest", man_path},
                        {"chosen_restart", model.chosen_restart},
                        {"selection_mre", winner.selection_mre},
                        {"train_mse", winner.train_mse},
                        {"n_restarts", cfg.train.n_restarts}};
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

inline nlohmann::json cmd_sweep(RunConfig cfg, const GlobalOptions& g) {
  detail::apply_overrides(cfg, g);
  const Dataset ds = detail::load_input_dataset(cfg);
  std::vector<int> n_hidden_values;
  for (int h = cfg.n_hidden_range[0]; h <= cfg.n_hidden_range[1]; ++h) n_hidden_values.push_back(h);

  SweepReport report;
  try {
    report = run_sweep(ds, cfg.input_sets, n_hidden_values, cfg.train, cfg.holdout_ids,
                       cfg.fractions, cfg.correlation.literal_mode,
                       cfg.correlation.laminar_threshold, g.threads);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  }

  detail::ensure_output_dir(cfg);
  std::vector<std::string> outputs;
  nlohmann::json summary{{"command", "sweep"}, {"cells", report.cells.size()}};
  if (cfg.output_formats.count("csv")) {
    const std::string p = detail::join_path(cfg.output_dir, "sweep_report.csv");
    write_file(p, sweep_report_to_csv(report));
    outputs.push_back(p);
    summary["report_csv"] = p;
  }
  if (cfg.output_formats.count("json")) {
    const std::string p = detail::join_path(cfg.output_dir, "sweep_report.json");
    write_file(p, sweep_report_to_json(report).dump(2) + "\n");
    outputs.push_back(p);
    summary["report_json"] = p;
  }

  // Wall-clock timings are useful but inherently non-reproducible, so they go
  // in a sidecar that is excluded from the manifest digests.
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& c : report.cells)
    timings.push_back(nlohmann::json{{"input_set", c.input_set},
                                     {"n_hidden", c.n_hidden},
                                     {"runtime_seconds", c.runtime_seconds}});
  write_file(detail::join_path(cfg.output_dir, "sweep_timings.json"),
             nlohmann::json{{"cells", std::move(timings)}}.dump(2) + "\n");

  const std::string man_path = detail::join_path(cfg.output_dir, "sweep_manifest.json");
  write_manifest(man_path, make_manifest("sweep", config_to_json(cfg), {cfg.dataset}, outputs));
  summary["manifest"] = man_path;

  nlohmann::json best = nlohmann::json::array();
  for (const auto& b : report.best)
    best.push_back(nlohmann::json{
        {"input_set", b.input_set}, {"n_hidden", b.n_hidden}, {"mre_avg", b.mre_avg}});
  summary["best"] = std::move(best);
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

inline nlohmann::json cmd_evaluate(RunConfig cfg, const GlobalOptions& g) {
  detail::apply_overrides(cfg, g);
  const Dataset ds = detail::load_input_dataset(cfg);
  cfg.require_model();
  const ModelDocument doc = load_model(cfg.model_path);

  EvaluationReport report;
  try {
    report = evaluate_model(doc, ds, cfg.correlation, cfg.holdout_ids);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("evaluate: ") + e.what());
  }

  detail::ensure_output_dir(cfg);
  std::vector<std::string> outputs;
  nlohmann::json summary{{"command", "evaluate"},
                         {"reference", report.reference},
                         {"n_experiments", report.rows.size()},
                         {"avg_mre_model", report.avg_mre_model},
                         {"avg_mre_reference", report.avg_mre_reference},
                         {"holdout_avg_mre_model", report.holdout_avg_mre_model},
                         {"holdout_avg_mre_reference", report.holdout_avg_mre_reference},
                         {"retained_avg_mre_model", report.retained_avg_mre_model},
                         {"retained_avg_mre_reference", report.retained_avg_mre_reference}};
  if (cfg.output_formats.count("csv")) {
    const std::string p = detail::join_path(cfg.output_dir, "evaluation.csv");
    write_file(p, evaluation_report_to_csv(report));
    outputs.push_back(p);
    summary["report_csv"] = p;
  }
  if (cfg.output_formats.count("json")) {
    const std::string p = detail::join_path(cfg.output_dir, "evaluation.json");
    write_file(p, evaluation_report_to_json(report).dump(2) + "\n");
    outputs.push_back(p);
    summary["report_json"] = p;
  }
  const std::string man_path = detail::join_path(cfg.output_dir, "evaluate_manifest.json");
  write_manifest(man_path,
                 make_manifest("evaluate", config_to_json(cfg), {cfg.dataset, cfg.model_path}, outputs));
  summary["manifest"] = man_path;
  return summary;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

inline nlohmann::json cmd_analyze(RunConfig cfg, const GlobalOptions& g) {
  detail::apply_overrides(cfg, g);
  const Dataset ds = detail::load_input_dataset(cfg);
  FeatureTable table;
  try {
    table = build_feature_table(ds, cfg.correlation.literal_mode, cfg.correlation.laminar_threshold);
    table.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("analyze: ") + e.what());
  }

  detail::ensure_output_dir(cfg);
  std::vector<std::string> outputs;
  nlohmann::json files = nlohmann::json::array();
  for (CorrMethod method : cfg.analysis_methods) {
    const CorrelationMatrix m = correlation_matrix(table, method);
    if (cfg.output_formats.count("csv")) {
      const std::string p =
          detail::join_path(cfg.output_dir, "analysis_" + to_string(method) + ".csv");
      write_file(p, matrix_to_csv(m));
      outputs.push_back(p);
      files.push_back(p);
    }
    if (cfg.output_formats.count("json")) {
      const std::string p =
          detail::join_path(cfg.output_dir, "analysis_" + to_string(method) + ".json");
      write_file(p, matrix_to_json(m).dump(2) + "\n");
      outputs.push_back(p);
      files.push_back(p);
    }
  }
  const std::string man_path = detail::join_path(cfg.output_dir, "analyze_manifest.json");
  write_manifest(man_path, make_manifest("analyze", config_to_json(cfg), {cfg.dataset}, outputs));

  std::vector<std::string> method_names;
  for (auto m : cfg.analysis_methods) method_names.push_back(to_string(m));
  return nlohmann::json{{"command", "analyze"},
                        {"methods", method_names},
                        {"n_features", table.names.size()},
                        {"n_rows", table.n_rows()},
                        {"files", std::move(files)},
                        {"manifest", man_path}};
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictOptions {
  std::string model_path;                    // --model: predict with a saved network
  std::optional<std::string> correlation;    // --correlation: predict with a closed-form model
  std::string input_csv;                     // --input: batch of points (target column optional)
  std::vector<std::string> point_kvs;        // --point key=value, repeatable; single point
  bool breakdown = false;                    // --breakdown: emit correlation internals
};

namespace detail {

inline ExperimentPoint point_from_kvs(const std::vector<std::string>& kvs) {
  std::map<std::string, std::string> kv;
  for (const auto& s : kvs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("predict: --point expects key=value, got '" + s + "'");
    if (!kv.emplace(s.substr(0, eq), s.substr(eq + 1)).second)
      throw ConfigError("predict: duplicate --point key '" + s.substr(0, eq) + "'");
  }
  auto take_num = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("predict: --point is missing required field '" + key + "'");
    double v = 0;
    try {
      v = parse_double(it->second);
    } catch (const std::exception&) {
      throw ConfigError("predict: non-numeric value for --point field '" + key + "'");
    }
    kv.erase(it);
    return v;
  };

  ExperimentPoint p;
  p.fluid.x = take_num("x");
  p.flow.g_flux = take_num("G_kg_sm2");
  p.flow.pressure = take_num("P_kPa");
  p.geometry.id = take_num("ID_mm") / 1000.0;
  p.geometry.roughness = take_num("roughness_um") / 1000000.0;
  p.geometry.d_h = p.geometry.id;
  p.fluid.rho_l = take_num("rho_l");
  p.fluid.rho_v = take_num("rho_v");
  p.fluid.mu_l = take_num("mu_l");
  p.fluid.mu_v = take_num("mu_v");
  p.fluid.sigma = take_num("sigma");
  p.experiment_id = "point";
  if (auto it = kv.find("experiment_id"); it != kv.end()) {
    p.experiment_id = it->second;
    kv.erase(it);
  }
  if (kv.count("dpdz_Pa_m")) {
    p.dpdz_exp = take_num("dpdz_Pa_m");
  } else {
    p.dpdz_exp = std::numeric_limits<double>::quiet_NaN();
  }
  if (!kv.empty()) throw ConfigError("predict: unknown --point field '" + kv.begin()->first + "'");
  try {
    p.fluid.validate();
    p.geometry.validate();
    p.flow.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("predict: ") + e.what());
  }
  return p;
}

inline void append_breakdown_json(nlohmann::json& row, const CorrelationBreakdown& b) {
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) {
      row[key] = *v;
    } else {
      row[key] = nullptr;
    }
  };
  put("re_2ph", b.re_2ph);
  put("re_l", b.re_l);
  put("re_v", b.re_v);
  put("f_2ph", b.f_2ph);
  put("f_l", b.f_l);
  put("f_v", b.f_v);
  put("mu_2ph", b.mu_2ph);
  put("x_mart", b.x_mart);
  put("c_chisholm", b.c_chisholm);
  put("laplace", b.laplace);
  put("phi_l_sq", b.phi_l_sq);
  if (b.regime) {
    row["regime"] = to_string(*b.regime);
  } else {
    row["regime"] = nullptr;
  }
}

}  // namespace detail

/// Predicts the frictional gradient for each input point, either with a saved
/// network (--model) or a closed-form correlation (--correlation). Points come
/// from --input CSV, repeated --point fields, or the config dataset.
inline nlohmann::json cmd_predict(std::optional<RunConfig> maybe_cfg, const GlobalOptions& g,
                                  const PredictOptions& opts) {
  RunConfig cfg = maybe_cfg ? *maybe_cfg : RunConfig{};
  detail::apply_overrides(cfg, g);

  if (!opts.model_path.empty() && opts.correlation)
    throw ConfigError("predict: --model and --correlation are mutually exclusive");

  // Resolve input points.
  Dataset ds;
  std::vector<std::string> input_files;
  if (!opts.input_csv.empty() && !opts.point_kvs.empty())
    throw ConfigError("predict: --input and --point are mutually exclusive");
  if (!opts.input_csv.empty()) {
    if (!std::filesystem::exists(opts.input_csv))
      throw ConfigError("predict: input file not found: " + opts.input_csv);
    ds = load_dataset(opts.input_csv, cfg.schema, /*require_target=*/false);
    input_files.push_back(opts.input_csv);
  } else if (!opts.point_kvs.empty()) {
    ds.points.push_back(detail::point_from_kvs(opts.point_kvs));
  } else if (!cfg.dataset.empty()) {
    cfg.require_dataset();
    ds = load_dataset(cfg.dataset, cfg.schema, /*require_target=*/false);
    input_files.push_back(cfg.dataset);
  } else {
    throw ConfigError("predict: provide --input, --point fields, or a config dataset");
  }
  if (ds.points.empty()) throw DataError("predict: no input points");

  // Resolve the predictor.
  std::string model_path = !opts.model_path.empty() ? opts.model_path : cfg.model_path;
  CorrelationChoice choice = cfg.correlation;
  if (opts.correlation) {
    try {
      choice.kind = correlation_kind_from_string(*opts.correlation);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("predict: ") + e.what());
    }
    model_path.clear();
  }
  const bool use_model = !model_path.empty();
  if (use_model && opts.breakdown)
    throw ConfigError("predict: --breakdown applies to correlation predictions only");

  nlohmann::json rows = nlohmann::json::array();
  std::string csv;
  if (use_model) {
    if (!std::filesystem::exists(model_path))
      throw ConfigError("predict: model file not found: " + model_path);
    const ModelDocument doc = load_model(model_path);
    input_files.push_back(model_path);
    AssembledInputs assembled;
    try {
      assembled = assemble_named_inputs(doc.input_feature_names, ds, choice.literal_mode,
                                        choice.laminar_threshold, /*with_targets=*/false);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("predict: ") + e.what());
    }
    csv = "experiment_id,dpdz_pred_Pa_m\n";
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
      const double y = forward(doc.params, assembled.batch.inputs[i]);
      rows.push_back(nlohmann::json{{"experiment_id", ds.points[i].experiment_id}, {"dpdz_pred", y}});
      csv += ds.points[i].experiment_id + ',' + fmt_double(y) + '\n';
    }
  } else {
    csv = "experiment_id,dpdz_pred_Pa_m";
    if (opts.breakdown)
      csv += ",re_2ph,re_l,re_v,f_2ph,f_l,f_v,mu_2ph,x_mart,c_chisholm,laplace,phi_l_sq,regime";
    csv += '\n';
    for (const auto& p : ds.points) {
      CorrelationResult res;
      try {
        res = evaluate_correlation(choice, p);
      } catch (const std::invalid_argument& e) {
        throw DataError("predict: point '" + p.experiment_id + "': " + e.what());
      }
      nlohmann::json row{{"experiment_id", p.experiment_id}, {"dpdz_pred", res.dpdz()}};
      csv += p.experiment_id + ',' + fmt_double(res.dpdz());
      if (opts.breakdown) {
        detail::append_breakdown_json(row, res.breakdown);
        const auto& b = res.breakdown;
        auto cell = [](const std::optional<double>& v) {
          return v ? fmt_double(*v) : std::string();
        };
        csv += ',' + cell(b.re_2ph) + ',' + cell(b.re_l) + ',' + cell(b.re_v) + ',' + cell(b.f_2ph) +
               ',' + cell(b.f_l) + ',' + cell(b.f_v) + ',' + cell(b.mu_2ph) + ',' + cell(b.x_mart) +
               ',' + cell(b.c_chisholm) + ',' + cell(b.laplace) + ',' + cell(b.phi_l_sq) + ',' +
               (b.regime ? to_string(*b.regime) : std::string());
      }
      rows.push_back(std::move(row));
      csv += '\n';
    }
  }

  nlohmann::json summary{{"command", "predict"},
                         {"mode", use_model ? "model" : "correlation"},
                         {"n_points", ds.points.size()},
                         {"predictions", rows}};
  if (!use_model) summary["correlation"] = to_string(choice.kind);
  if (use_model) summary["model"] = model_path;

  // Files are written only when an output directory was requested.
  if (g.out_dir || maybe_cfg) {
    detail::ensure_output_dir(cfg);
    const std::string pred_path = detail::join_path(cfg.output_dir, "predictions.csv");
    write_file(pred_path, csv);
    const std::string man_path = detail::join_path(cfg.output_dir, "predict_manifest.json");
    write_manifest(man_path,
                   make_manifest("predict", config_to_json(cfg), input_files, {pred_path},
                                 nlohmann::json{{"mode", use_model ? "model" : "correlation"}}));
    summary["output"] = pred_path;
    summary["manifest"] = man_path;
  }
  return summary;
}

}  // namespace coinn
