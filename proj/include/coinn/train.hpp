#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "coinn/network.hpp"
#include "coinn/rng.hpp"

namespace coinn {

/// Mean relative error in percent: 100 · (1/N) · Σ |tᵢ − yᵢ| / |tᵢ|.
inline double mre(const std::vector<double>& targets, const std::vector<double>& predictions) {
  if (targets.empty()) throw std::invalid_argument("mre: empty sequences");
  if (targets.size() != predictions.size())
    throw std::invalid_argument("mre: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == 0.0) throw std::invalid_argument("mre: zero target is undefined");
    sum += std::fabs(targets[i] - predictions[i]) / std::fabs(targets[i]);
  }
  return 100.0 * sum / static_cast<double>(targets.size());
}

enum class StopReason { max_iter, grad_tol, lambda_cap };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::max_iter: return "max_iter";
    case StopReason::grad_tol: return "grad_tol";
    case StopReason::lambda_cap: return "lambda_cap";
  }
  throw std::invalid_argument("to_string: bad StopReason");
}

enum class SelectionSet { validation, train };

inline std::string to_string(SelectionSet s) {
  return s == SelectionSet::validation ? "validation" : "train";
}

inline SelectionSet selection_set_from_string(const std::string& s) {
  if (s == "validation") return SelectionSet::validation;
  if (s == "train") return SelectionSet::train;
  throw std::invalid_argument("selection_set_from_string: unknown set '" + s + "'");
}

struct TrainConfig {
  int n_restarts = 1000;
  int max_iter = 1000;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double lambda_max = 1e10;
  double grad_tol = 1e-10;
  std::uint64_t seed = 0;
  SelectionSet selection = SelectionSet::validation;
  // Damping matrix D in (JᵀJ + λD): identity by default, diag(JᵀJ) if set.
  bool marquardt_diag = false;

  void validate() const {
    if (n_restarts < 1) throw std::invalid_argument("TrainConfig: n_restarts must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("TrainConfig: max_iter must be >= 1");
    if (!(lambda_up > 1.0)) throw std::invalid_argument("TrainConfig: lambda_up must be > 1");
    if (!(lambda_down > 0.0 && lambda_down < 1.0))
      throw std::invalid_argument("TrainConfig: lambda_down must be in (0, 1)");
    if (!(lambda_init > 0.0)) throw std::invalid_argument("TrainConfig: lambda_init must be > 0");
    if (!(lambda_max > lambda_init))
      throw std::invalid_argument("TrainConfig: lambda_max must exceed lambda_init");
    if (!(grad_tol >= 0.0)) throw std::invalid_argument("TrainConfig: grad_tol must be >= 0");
  }
};

/// One damped least-squares run from a fixed initialization.
struct LmResult {
  NetworkParams params;
  std::vector<double> mse_history;  // initial mse followed by one entry per accepted step
  StopReason stop = StopReason::max_iter;
  int n_iter = 0;            // outer iterations entered
  bool lambda_capped = false;

  double final_mse() const { return mse_history.back(); }
};

struct RestartRecord {
  int restart = -1;
  double train_mse = std::numeric_limits<double>::quiet_NaN();   // scaled-space mse
  double selection_mre = std::numeric_limits<double>::quiet_NaN();  // percent, physical units
  StopReason stop = StopReason::max_iter;
  int n_iter = 0;
  bool lambda_capped = false;
};

struct TrainedModel {
  NetworkParams params;
  std::vector<RestartRecord> history;  // one per restart, indexed by restart
  int chosen_restart = -1;
  std::uint64_t seed_used = 0;
};

/// Raised when no restart produced a usable (finite-metric) solution. Carries
/// the per-restart history for diagnosis.
struct DivergenceError : std::runtime_error {
  std::vector<RestartRecord> history;
  DivergenceError(const std::string& msg, std::vector<RestartRecord> h)
      : std::runtime_error(msg), history(std::move(h)) {}
};

// ---------------------------------------------------------------------------
// Scaling helpers
// ---------------------------------------------------------------------------

/// Per-column min/max over the batch inputs. A constant column is widened by
/// ±0.5 so the affine map stays invertible.
inline std::vector<ScaleRange> fit_input_scales(const Batch& batch) {
  if (batch.inputs.empty()) throw std::invalid_argument("fit_input_scales: empty batch");
  const std::size_t n_in = batch.inputs.front().size();
  std::vector<ScaleRange> scales(n_in);
  for (std::size_t j = 0; j < n_in; ++j) {
    double lo = batch.inputs[0][j], hi = batch.inputs[0][j];
    for (const auto& row : batch.inputs) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    scales[j] = {lo, hi};
  }
  return scales;
}

inline ScaleRange fit_output_scale(const Batch& batch) {
  if (batch.targets.empty()) throw std::invalid_argument("fit_output_scale: batch has no targets");
  double lo = batch.targets.front(), hi = batch.targets.front();
  for (double t : batch.targets) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

/// Mean squared error of the scaled-space residuals over a batch.
inline double scaled_mse(const NetworkParams& p, const Batch& batch) {
  batch.validate(p.n_in);
  if (batch.targets.empty()) throw std::invalid_argument("scaled_mse: batch has no targets");
  std::vector<double> u, h;
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    const double z = detail::forward_scaled_core(p, batch.inputs[i], u, h);
    const double r = p.out_scale.to_unit(batch.targets[i]) - z;
    acc += r * r;
  }
  return acc / static_cast<double>(batch.inputs.size());
}

/// Fresh parameters with every trainable entry drawn uniformly from [-1, 1]
/// in the canonical flattened order.
inline NetworkParams random_params(int n_in, int n_hidden, const std::vector<ScaleRange>& in_scale,
                                   ScaleRange out_scale, rng::Engine& engine) {
  NetworkParams p;
  p.n_in = n_in;
  p.n_hidden = n_hidden;
  p.w1.resize(static_cast<std::size_t>(n_hidden * n_in));
  p.b1.resize(static_cast<std::size_t>(n_hidden));
  p.w2.resize(static_cast<std::size_t>(n_hidden));
  p.in_scale = in_scale;
  p.out_scale = out_scale;
  std::vector<double> flat(static_cast<std::size_t>(p.n_params()));
  for (double& v : flat) v = engine.uniform(-1.0, 1.0);
  p.unflatten(flat);
  return p;
}

// ---------------------------------------------------------------------------
// Damped least squares
// ---------------------------------------------------------------------------

/// Levenberg–Marquardt on the scaled-output residuals. A step is accepted
/// only when it strictly decreases the mse, so mse_history is strictly
/// decreasing after its first entry. Stops on max_iter, on ‖Jᵀr‖∞ ≤ grad_tol
/// (checked before stepping), or when λ escalates past lambda_max — the last
/// is flagged but still returns the best parameters found.
inline LmResult lm_fit(const NetworkParams& initial, const Batch& train, const TrainConfig& cfg) {
  initial.validate();
  cfg.validate();
  if (train.inputs.empty()) throw std::invalid_argument("lm_fit: empty training batch");
  if (train.targets.empty()) throw std::invalid_argument("lm_fit: training batch has no targets");
  train.validate(initial.n_in);
  for (double t : train.targets)
    if (!std::isfinite(t)) throw std::invalid_argument("lm_fit: non-finite target");

  const int N = static_cast<int>(train.inputs.size());
  const int P = initial.n_params();

  NetworkParams work = initial;
  std::vector<double> flat = initial.flatten();
  std::vector<double> ts(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i)
    ts[static_cast<std::size_t>(i)] = initial.out_scale.to_unit(train.targets[static_cast<std::size_t>(i)]);

  using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajorMatrix J(N, P);
  Eigen::VectorXd r(N), r_cand(N);
  Eigen::MatrixXd A(P, P), M(P, P);
  Eigen::VectorXd g(P), delta(P);
  std::vector<double> u_buf, h_buf, cand(flat.size());

  auto fill_jacobian_and_residuals = [&]() {
    work.unflatten(flat);
    for (int i = 0; i < N; ++i) {
      const double z = detail::scaled_gradient(work, train.inputs[static_cast<std::size_t>(i)],
                                               u_buf, h_buf, J.row(i).data());
      r(i) = ts[static_cast<std::size_t>(i)] - z;
    }
  };
  auto residuals_at = [&](const std::vector<double>& w, Eigen::VectorXd& out) {
    work.unflatten(w);
    for (int i = 0; i < N; ++i) {
      const double z = detail::forward_scaled_core(work, train.inputs[static_cast<std::size_t>(i)], u_buf, h_buf);
      out(i) = ts[static_cast<std::size_t>(i)] - z;
    }
  };

  fill_jacobian_and_residuals();
  double mse = r.squaredNorm() / N;

  LmResult result;
  result.mse_history.push_back(mse);
  double lambda = cfg.lambda_init;
  constexpr double kLambdaFloor = 1e-12;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    result.n_iter = iter;
    g.noalias() = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      result.stop = StopReason::grad_tol;
      work.unflatten(flat);
      result.params = work;
      return result;
    }
    A.setZero();
    A.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());

    // Escalate λ until a strictly decreasing step is found or λ caps out.
    while (true) {
      M = A;
      if (cfg.marquardt_diag) {
        M.diagonal().array() += lambda * A.diagonal().array();
      } else {
        M.diagonal().array() += lambda;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(M);  // reads the lower triangle
      delta = ldlt.solve(g);
      bool ok = ldlt.info() == Eigen::Success && delta.allFinite();
      double mse_cand = std::numeric_limits<double>::infinity();
      if (ok) {
        for (std::size_t k = 0; k < flat.size(); ++k) cand[k] = flat[k] + delta(static_cast<Eigen::Index>(k));
        residuals_at(cand, r_cand);
        mse_cand = r_cand.squaredNorm() / N;
      }
      if (ok && std::isfinite(mse_cand) && mse_cand < mse) {
        flat = cand;
        mse = mse_cand;
        result.mse_history.push_back(mse);
        lambda = std::max(lambda * cfg.lambda_down, kLambdaFloor);
        break;
      }
      lambda *= cfg.lambda_up;
      if (lambda > cfg.lambda_max) {
        result.stop = StopReason::lambda_cap;
        result.lambda_capped = true;
        work.unflatten(flat);
        result.params = work;
        return result;
      }
    }
    if (iter < cfg.max_iter) fill_jacobian_and_residuals();
  }
  result.stop = StopReason::max_iter;
  result.n_iter = cfg.max_iter;
  work.unflatten(flat);
  result.params = work;
  return result;
}

// ---------------------------------------------------------------------------
// Multi-start orchestration
// ---------------------------------------------------------------------------

/// Runs cfg.n_restarts independent fits, each initialized from a stream
/// derived from (cfg.seed, restart index), and keeps the restart with the
/// lowest mean relative error on the selection set (ties broken by lowest
/// index). Results are slotted by restart index, so the outcome does not
/// depend on how restarts are scheduled across threads.
inline TrainedModel train_multistart(const Batch& train, const Batch& validation,
                                     const TrainConfig& cfg, int n_hidden, int threads = 1) {
  cfg.validate();
  if (n_hidden < 1) throw std::invalid_argument("train_multistart: n_hidden must be >= 1");
  if (threads < 1) throw std::invalid_argument("train_multistart: threads must be >= 1");
  if (train.inputs.empty()) throw std::invalid_argument("train_multistart: empty training batch");
  if (train.targets.empty())
    throw std::invalid_argument("train_multistart: training batch has no targets");
  const Batch& sel_batch = cfg.selection == SelectionSet::validation ? validation : train;
  if (sel_batch.inputs.empty() || sel_batch.targets.empty())
    throw std::invalid_argument("train_multistart: selection batch must have targets");
  const int n_in = static_cast<int>(train.inputs.front().size());
  train.validate(n_in);
  sel_batch.validate(n_in);
  for (double t : sel_batch.targets)
    if (t == 0.0) throw std::invalid_argument("train_multistart: zero selection target");

  const std::vector<ScaleRange> in_scale = fit_input_scales(train);
  const ScaleRange out_scale = fit_output_scale(train);

  std::vector<NetworkParams> fitted(static_cast<std::size_t>(cfg.n_restarts));
  std::vector<RestartRecord> records(static_cast<std::size_t>(cfg.n_restarts));

  std::atomic<int> cursor{0};
  auto worker = [&]() {
    std::vector<double> u, h;
    for (;;) {
      const int i = cursor.fetch_add(1);
      if (i >= cfg.n_restarts) return;
      rng::Engine engine(rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
      NetworkParams init = random_params(n_in, n_hidden, in_scale, out_scale, engine);
      LmResult fit = lm_fit(init, train, cfg);

      RestartRecord rec;
      rec.restart = i;
      rec.train_mse = fit.final_mse();
      rec.stop = fit.stop;
      rec.n_iter = fit.n_iter;
      rec.lambda_capped = fit.lambda_capped;

      bool finite_params = true;
      for (double v : fit.params.flatten())
        if (!std::isfinite(v)) finite_params = false;
      if (finite_params) {
        double acc = 0.0;
        bool ok = true;
        for (std::size_t k = 0; k < sel_batch.inputs.size(); ++k) {
          const double y = fit.params.out_scale.from_unit(
              detail::forward_scaled_core(fit.params, sel_batch.inputs[k], u, h));
          const double t = sel_batch.targets[k];
          if (!std::isfinite(y)) {
            ok = false;
            break;
          }
          acc += std::fabs(t - y) / std::fabs(t);
        }
        if (ok) rec.selection_mre = 100.0 * acc / static_cast<double>(sel_batch.inputs.size());
      }
      fitted[static_cast<std::size_t>(i)] = std::move(fit.params);
      records[static_cast<std::size_t>(i)] = rec;
    }
  };

  const int n_workers = std::min(threads, cfg.n_restarts);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  int best = -1;
  for (int i = 0; i < cfg.n_restarts; ++i) {
    const double m = records[static_cast<std::size_t>(i)].selection_mre;
    if (!std::isfinite(m)) continue;
    if (best < 0 || m < records[static_cast<std::size_t>(best)].selection_mre) best = i;
  }
  if (best < 0)
    throw DivergenceError("train_multistart: no restart produced a finite selection metric",
                          std::move(records));

  TrainedModel model;
  model.params = std::move(fitted[static_cast<std::size_t>(best)]);
  model.history = std::move(records);
  model.chosen_restart = best;
  model.seed_used = cfg.seed;
  return model;
}

}  // namespace coinn
