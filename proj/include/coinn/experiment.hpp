#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinn/dataset.hpp"
#include "coinn/network.hpp"
#include "coinn/numio.hpp"
#include "coinn/rng.hpp"
#include "coinn/stats.hpp"
#include "coinn/train.hpp"

namespace coinn {

// ---------------------------------------------------------------------------
// Input-set specification
// ---------------------------------------------------------------------------

/// A named choice of network inputs. Features come from a fixed vocabulary;
/// "all" stands for every feature-table column except the target and must
/// appear alone.
struct InputSetSpec {
  std::string name;
  std::vector<std::string> features;

  static const std::set<std::string>& vocabulary() {
    static const std::set<std::string> v = {"x",      "ID",          "roughness", "G",
                                            "Re_2ph", "sun_mishima", "awad",      "all"};
    return v;
  }

  void validate() const {
    if (name.empty()) throw std::invalid_argument("InputSetSpec: name empty");
    if (features.empty()) throw std::invalid_argument("InputSetSpec: features empty");
    std::set<std::string> seen;
    for (const auto& f : features) {
      if (!vocabulary().count(f))
        throw std::invalid_argument("InputSetSpec: unknown feature '" + f + "'");
      if (!seen.insert(f).second)
        throw std::invalid_argument("InputSetSpec: duplicate feature '" + f + "'");
    }
    if (seen.count("all") && features.size() > 1)
      throw std::invalid_argument("InputSetSpec: 'all' must be the only feature");
  }
};

/// A batch plus the resolved (expanded) feature names behind its columns.
struct AssembledInputs {
  Batch batch;
  std::vector<std::string> feature_names;
};

namespace detail {

inline AssembledInputs assemble_from_names(const FeatureTable& table,
                                           const std::vector<std::string>& names,
                                           bool with_targets) {
  AssembledInputs out;
  out.feature_names = names;
  std::vector<const std::vector<double>*> cols;
  cols.reserve(names.size());
  for (const auto& n : names) cols.push_back(&table.column(n));  // throws on mismatch
  const std::size_t n_rows = table.n_rows();
  out.batch.inputs.assign(n_rows, std::vector<double>(names.size()));
  for (std::size_t r = 0; r < n_rows; ++r)
    for (std::size_t c = 0; c < names.size(); ++c) out.batch.inputs[r][c] = (*cols[c])[r];
  if (with_targets) {
    const auto& t = table.column("dpdz_exp");
    for (double v : t)
      if (!std::isfinite(v))
        throw std::invalid_argument("assemble_inputs: non-finite target in dataset");
    out.batch.targets = t;
  }
  return out;
}

/// Rows of a batch restricted to the given indices, order preserved.
inline Batch subset_batch(const Batch& all, const std::vector<std::size_t>& idx) {
  Batch b;
  b.inputs.reserve(idx.size());
  for (std::size_t i : idx) b.inputs.push_back(all.inputs.at(i));
  if (!all.targets.empty()) {
    b.targets.reserve(idx.size());
    for (std::size_t i : idx) b.targets.push_back(all.targets.at(i));
  }
  return b;
}

}  // namespace detail

/// Builds (inputs, targets) for a named input set. Correlation-valued
/// features are computed per point; the target is the measured gradient.
inline AssembledInputs assemble_inputs(const InputSetSpec& spec, const Dataset& ds,
                                       bool literal_mode = false,
                                       double laminar_threshold = 2000.0,
                                       bool with_targets = true) {
  spec.validate();
  const FeatureTable table = build_feature_table(ds, literal_mode, laminar_threshold);
  std::vector<std::string> names;
  if (spec.features.size() == 1 && spec.features.front() == "all") {
    for (const auto& n : table.names)
      if (n != "dpdz_exp") names.push_back(n);
  } else {
    names = spec.features;
  }
  return detail::assemble_from_names(table, names, with_targets);
}

/// Same expansion but from explicit feature-table column names (as recorded
/// in a saved model document). Unknown names fail loudly.
inline AssembledInputs assemble_named_inputs(const std::vector<std::string>& feature_names,
                                             const Dataset& ds, bool literal_mode = false,
                                             double laminar_threshold = 2000.0,
                                             bool with_targets = true) {
  if (feature_names.empty())
    throw std::invalid_argument("assemble_named_inputs: empty feature list");
  const FeatureTable table = build_feature_table(ds, literal_mode, laminar_threshold);
  return detail::assemble_from_names(table, feature_names, with_targets);
}

// ---------------------------------------------------------------------------
// Architecture / input-set sweep
// ---------------------------------------------------------------------------

/// Seed for one sweep cell, derived from the master seed, the input-set name,
/// and the hidden-layer width; stable under re-running the cell in isolation.
inline std::uint64_t derive_cell_seed(std::uint64_t master, const std::string& set_name,
                                      int n_hidden) {
  return rng::derive_seed(rng::derive_seed(master, fnv1a64(set_name)),
                          static_cast<std::uint64_t>(n_hidden));
}

struct SweepCell {
  std::string input_set;
  int n_hidden = 0;
  std::uint64_t cell_seed = 0;
  double mre_test = std::numeric_limits<double>::quiet_NaN();
  double mre_holdout = std::numeric_limits<double>::quiet_NaN();
  double mre_avg = std::numeric_limits<double>::quiet_NaN();  // selection score of the cell
  double selection_mre = std::numeric_limits<double>::quiet_NaN();
  int chosen_restart = -1;
  bool diverged = false;
  double runtime_seconds = 0.0;  // informational; kept out of report files
};

struct SweepBest {
  std::string input_set;
  int n_hidden = 0;
  double mre_avg = std::numeric_limits<double>::quiet_NaN();
};

struct SweepReport {
  std::vector<SweepCell> cells;       // ordered: input sets outer, n_hidden inner
  std::vector<SweepBest> best;        // per input set, minimal mre_avg
  std::uint64_t seed = 0;
  std::array<double, 3> fractions = {0.70, 0.15, 0.15};
  std::vector<std::string> holdout_ids;
};

/// Trains one network per (input set, hidden width) cell on a shared split
/// and scores each cell by the unweighted mean of the test-set mre and the
/// held-out-experiments mre (test alone when no experiments are held out).
/// Cell divergence is recorded, not fatal. Deterministic given cfg.seed.
inline SweepReport run_sweep(const Dataset& ds, const std::vector<InputSetSpec>& specs,
                             const std::vector<int>& n_hidden_values, const TrainConfig& cfg,
                             const std::vector<std::string>& holdout_ids,
                             std::array<double, 3> fractions = {0.70, 0.15, 0.15},
                             bool literal_mode = false, double laminar_threshold = 2000.0,
                             int threads = 1) {
  cfg.validate();
  if (specs.empty()) throw std::invalid_argument("run_sweep: no input sets");
  if (n_hidden_values.empty()) throw std::invalid_argument("run_sweep: empty n_hidden range");
  for (int h : n_hidden_values)
    if (h < 1) throw std::invalid_argument("run_sweep: n_hidden must be >= 1");

  const SplitAssignment split = make_split(ds, holdout_ids, fractions, cfg.seed);
  if (split.train.empty() || split.validation.empty() || split.test.empty())
    throw std::invalid_argument("run_sweep: split leaves an empty train/validation/test set");

  SweepReport report;
  report.seed = cfg.seed;
  report.fractions = fractions;
  report.holdout_ids = split.holdout_ids;

  for (const auto& spec : specs) {
    const AssembledInputs assembled = assemble_inputs(spec, ds, literal_mode, laminar_threshold);
    const Batch train_b = detail::subset_batch(assembled.batch, split.train);
    const Batch val_b = detail::subset_batch(assembled.batch, split.validation);
    const Batch test_b = detail::subset_batch(assembled.batch, split.test);
    const Batch holdout_b = detail::subset_batch(assembled.batch, split.holdout);

    SweepBest best{spec.name, 0, std::numeric_limits<double>::quiet_NaN()};
    for (int h : n_hidden_values) {
      SweepCell cell;
      cell.input_set = spec.name;
      cell.n_hidden = h;
      cell.cell_seed = derive_cell_seed(cfg.seed, spec.name, h);
      TrainConfig cell_cfg = cfg;
      cell_cfg.seed = cell.cell_seed;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const TrainedModel model = train_multistart(train_b, val_b, cell_cfg, h, threads);
        cell.chosen_restart = model.chosen_restart;
        cell.selection_mre = model.history[static_cast<std::size_t>(model.chosen_restart)].selection_mre;
        cell.mre_test = mre(test_b.targets, forward(model.params, test_b));
        if (!holdout_b.inputs.empty()) {
          cell.mre_holdout = mre(holdout_b.targets, forward(model.params, holdout_b));
          cell.mre_avg = (cell.mre_test + cell.mre_holdout) / 2.0;
        } else {
          cell.mre_avg = cell.mre_test;
        }
      } catch (const DivergenceError&) {
        cell.diverged = true;
      }
      cell.runtime_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!cell.diverged && std::isfinite(cell.mre_avg) &&
          (!std::isfinite(best.mre_avg) || cell.mre_avg < best.mre_avg)) {
        best.n_hidden = h;
        best.mre_avg = cell.mre_avg;
      }
      report.cells.push_back(cell);
    }
    report.best.push_back(best);
  }
  return report;
}

/// Report rows without runtimes, so report bytes depend only on inputs and
/// seed. Runtimes travel separately (see cmd_sweep's timing sidecar).
inline std::string sweep_report_to_csv(const SweepReport& r) {
  std::string out =
      "input_set,n_hidden,cell_seed,mre_test,mre_holdout,mre_avg,selection_mre,chosen_restart,diverged\n";
  for (const auto& c : r.cells) {
    out += c.input_set;
    out += ',' + std::to_string(c.n_hidden);
    out += ',' + std::to_string(c.cell_seed);
    out += ',' + (std::isfinite(c.mre_test) ? fmt_double(c.mre_test) : std::string());
    out += ',' + (std::isfinite(c.mre_holdout) ? fmt_double(c.mre_holdout) : std::string());
    out += ',' + (std::isfinite(c.mre_avg) ? fmt_double(c.mre_avg) : std::string());
    out += ',' + (std::isfinite(c.selection_mre) ? fmt_double(c.selection_mre) : std::string());
    out += ',' + std::to_string(c.chosen_restart);
    out += ',' + std::string(c.diverged ? "true" : "false");
    out += '\n';
  }
  return out;
}

inline nlohmann::json sweep_report_to_json(const SweepReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back(nlohmann::json{{"input_set", c.input_set},
                                   {"n_hidden", c.n_hidden},
                                   {"cell_seed", c.cell_seed},
                                   {"mre_test", c.mre_test},
                                   {"mre_holdout", c.mre_holdout},
                                   {"mre_avg", c.mre_avg},
                                   {"selection_mre", c.selection_mre},
                                   {"chosen_restart", c.chosen_restart},
                                   {"diverged", c.diverged}});
  }
  nlohmann::json best = nlohmann::json::array();
  for (const auto& b : r.best)
    best.push_back(nlohmann::json{
        {"input_set", b.input_set}, {"n_hidden", b.n_hidden}, {"mre_avg", b.mre_avg}});
  return nlohmann::json{{"seed", r.seed},
                        {"fractions", r.fractions},
                        {"holdout_ids", r.holdout_ids},
                        {"cells", std::move(cells)},
                        {"best", std::move(best)}};
}

// ---------------------------------------------------------------------------
// Per-experiment evaluation
// ---------------------------------------------------------------------------

struct ExperimentScore {
  std::string experiment_id;
  std::size_t n_points = 0;
  double mre_model = std::numeric_limits<double>::quiet_NaN();
  double mre_reference = std::numeric_limits<double>::quiet_NaN();
  bool holdout = false;
};

struct EvaluationReport {
  std::vector<ExperimentScore> rows;  // one per experiment, id ascending
  std::string reference;              // correlation the model is compared to
  // Unweighted means of the per-experiment values.
  double avg_mre_model = std::numeric_limits<double>::quiet_NaN();
  double avg_mre_reference = std::numeric_limits<double>::quiet_NaN();
  // Same means restricted to held-out / retained experiments (NaN when empty).
  double holdout_avg_mre_model = std::numeric_limits<double>::quiet_NaN();
  double holdout_avg_mre_reference = std::numeric_limits<double>::quiet_NaN();
  double retained_avg_mre_model = std::numeric_limits<double>::quiet_NaN();
  double retained_avg_mre_reference = std::numeric_limits<double>::quiet_NaN();
};

/// Scores a saved model against a reference correlation, experiment by
/// experiment, and reports unweighted averages over experiments.
inline EvaluationReport evaluate_model(const ModelDocument& model, const Dataset& ds,
                                       const CorrelationChoice& reference,
                                       const std::vector<std::string>& holdout_ids) {
  model.params.validate();
  const AssembledInputs assembled =
      assemble_named_inputs(model.input_feature_names, ds, reference.literal_mode,
                            reference.laminar_threshold);
  if (model.input_feature_names.size() != static_cast<std::size_t>(model.params.n_in))
    throw std::invalid_argument("evaluate_model: model feature names do not match n_in");

  std::set<std::string> holdout_set(holdout_ids.begin(), holdout_ids.end());
  std::map<std::string, std::vector<std::size_t>> by_exp;
  for (std::size_t i = 0; i < ds.points.size(); ++i)
    by_exp[ds.points[i].experiment_id].push_back(i);

  EvaluationReport report;
  report.reference = to_string(reference.kind);
  double sum_m = 0, sum_r = 0, hold_m = 0, hold_r = 0, ret_m = 0, ret_r = 0;
  std::size_t n_hold = 0, n_ret = 0;
  for (const auto& [exp_id, idxs] : by_exp) {
    std::vector<double> targets, pred_model, pred_ref;
    targets.reserve(idxs.size());
    for (std::size_t i : idxs) {
      targets.push_back(ds.points[i].dpdz_exp);
      pred_model.push_back(forward(model.params, assembled.batch.inputs[i]));
      pred_ref.push_back(evaluate_correlation(reference, ds.points[i]).dpdz());
    }
    ExperimentScore s;
    s.experiment_id = exp_id;
    s.n_points = idxs.size();
    s.mre_model = mre(targets, pred_model);
    s.mre_reference = mre(targets, pred_ref);
    s.holdout = holdout_set.count(exp_id) > 0;
    sum_m += s.mre_model;
    sum_r += s.mre_reference;
    if (s.holdout) {
      hold_m += s.mre_model;
      hold_r += s.mre_reference;
      ++n_hold;
    } else {
      ret_m += s.mre_model;
      ret_r += s.mre_reference;
      ++n_ret;
    }
    report.rows.push_back(std::move(s));
  }
  if (report.rows.empty()) throw std::invalid_argument("evaluate_model: empty dataset");
  report.avg_mre_model = sum_m / static_cast<double>(report.rows.size());
  report.avg_mre_reference = sum_r / static_cast<double>(report.rows.size());
  if (n_hold > 0) {
    report.holdout_avg_mre_model = hold_m / static_cast<double>(n_hold);
    report.holdout_avg_mre_reference = hold_r / static_cast<double>(n_hold);
  }
  if (n_ret > 0) {
    report.retained_avg_mre_model = ret_m / static_cast<double>(n_ret);
    report.retained_avg_mre_reference = ret_r / static_cast<double>(n_ret);
  }
  return report;
}

inline std::string evaluation_report_to_csv(const EvaluationReport& r) {
  std::string out = "experiment_id,n_points,mre_model,mre_reference,holdout\n";
  for (const auto& s : r.rows) {
    out += s.experiment_id;
    out += ',' + std::to_string(s.n_points);
    out += ',' + fmt_double(s.mre_model);
    out += ',' + fmt_double(s.mre_reference);
    out += ',' + std::string(s.holdout ? "true" : "false");
    out += '\n';
  }
  return out;
}

inline nlohmann::json evaluation_report_to_json(const EvaluationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.rows)
    rows.push_back(nlohmann::json{{"experiment_id", s.experiment_id},
                                  {"n_points", s.n_points},
                                  {"mre_model", s.mre_model},
                                  {"mre_reference", s.mre_reference},
                                  {"holdout", s.holdout}});
  return nlohmann::json{{"reference", r.reference},
                        {"rows", std::move(rows)},
                        {"avg_mre_model", r.avg_mre_model},
                        {"avg_mre_reference", r.avg_mre_reference},
                        {"holdout_avg_mre_model", r.holdout_avg_mre_model},
                        {"holdout_avg_mre_reference", r.holdout_avg_mre_reference},
                        {"retained_avg_mre_model", r.retained_avg_mre_model},
                        {"retained_avg_mre_reference", r.retained_avg_mre_reference}};
}

}  // namespace coinn
