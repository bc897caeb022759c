#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <coinn/rng.hpp>
#include <coinn/train.hpp>

namespace {

// y = sin(x) sampled on [0, 2*pi].
coinn::Batch sine_batch(int n) {
  coinn::Batch b;
  const double two_pi = 6.283185307179586;
  for (int i = 0; i < n; ++i) {
    const double x = two_pi * static_cast<double>(i) / static_cast<double>(n - 1);
    b.inputs.push_back({x});
    b.targets.push_back(std::sin(x) + 2.0);  // shifted away from zero targets
  }
  return b;
}

coinn::NetworkParams seeded_init(const coinn::Batch& train, int n_hidden, std::uint64_t seed) {
  coinn::rng::Engine eng(seed);
  return coinn::random_params(static_cast<int>(train.inputs.front().size()), n_hidden,
                              coinn::fit_input_scales(train), coinn::fit_output_scale(train), eng);
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Error metric
// ---------------------------------------------------------------------------

TEST_CASE("mean relative error hand values") {
  CHECK_THAT(coinn::mre({1.0, 2.0}, {1.1, 1.8}), Catch::Matchers::WithinRel(10.0, 1e-12));
  CHECK_THAT(coinn::mre({10.0}, {12.5}), Catch::Matchers::WithinRel(25.0, 1e-12));
  CHECK(coinn::mre({3.0, -4.0, 5.5}, {3.0, -4.0, 5.5}) == 0.0);
}

TEST_CASE("mean relative error is scale invariant and strict about input") {
  coinn::rng::Engine eng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> t, y;
    for (int i = 0; i < 10; ++i) {
      t.push_back(eng.uniform(0.5, 10.0));
      y.push_back(eng.uniform(0.5, 10.0));
    }
    const double alpha = eng.uniform(0.01, 100.0);
    auto ts = t, ys = y;
    for (auto& v : ts) v *= alpha;
    for (auto& v : ys) v *= alpha;
    REQUIRE_THAT(coinn::mre(ts, ys), Catch::Matchers::WithinRel(coinn::mre(t, y), 1e-12));
  }

  CHECK_THROWS_AS(coinn::mre({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(coinn::mre({1.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(coinn::mre({0.0}, {1.0}), std::invalid_argument);  // zero target undefined
}

// ---------------------------------------------------------------------------
// Scaling helpers
// ---------------------------------------------------------------------------

TEST_CASE("input and output scales track the training data") {
  coinn::Batch b;
  b.inputs = {{1.0, 7.0}, {-2.0, 7.0}, {0.5, 7.0}};
  b.targets = {10.0, 30.0, 20.0};

  const auto in = coinn::fit_input_scales(b);
  REQUIRE(in.size() == 2);
  CHECK(in[0].min == -2.0);
  CHECK(in[0].max == 1.0);
  // Constant column widened so the map stays invertible.
  CHECK(in[1].min == 6.5);
  CHECK(in[1].max == 7.5);

  const auto out = coinn::fit_output_scale(b);
  CHECK(out.min == 10.0);
  CHECK(out.max == 30.0);

  CHECK_THROWS_AS(coinn::fit_input_scales(coinn::Batch{}), std::invalid_argument);
  coinn::Batch no_targets;
  no_targets.inputs = {{1.0}};
  CHECK_THROWS_AS(coinn::fit_output_scale(no_targets), std::invalid_argument);
}

TEST_CASE("scaled mse hand value") {
  coinn::NetworkParams p;
  p.n_in = 1;
  p.n_hidden = 1;
  p.w1 = {0.0};
  p.b1 = {0.0};
  p.w2 = {0.0};
  p.b2 = 0.0;
  p.in_scale = {coinn::ScaleRange{-1.0, 1.0}};
  p.out_scale = coinn::ScaleRange{0.0, 2.0};
  coinn::Batch b;
  b.inputs = {{0.3}};
  b.targets = {1.5};  // unit value 0.5; network output z = 0
  CHECK_THAT(coinn::scaled_mse(p, b), Catch::Matchers::WithinRel(0.25, 1e-14));
}

TEST_CASE("random parameter draws follow the canonical flattened order") {
  const std::vector<coinn::ScaleRange> in_scale = {{0.0, 1.0}, {0.0, 2.0}};
  const coinn::ScaleRange out_scale{0.0, 10.0};

  coinn::rng::Engine e1(77);
  const auto p = coinn::random_params(2, 3, in_scale, out_scale, e1);

  coinn::rng::Engine e2(77);
  std::vector<double> expect(static_cast<std::size_t>(p.n_params()));
  for (auto& v : expect) v = e2.uniform(-1.0, 1.0);
  CHECK(p.flatten() == expect);
  CHECK(p.in_scale == in_scale);
  CHECK(p.out_scale == out_scale);
}

// ---------------------------------------------------------------------------
// Damped least squares
// ---------------------------------------------------------------------------

TEST_CASE("lm_fit solves a nearly-linear task to numerical zero") {
  coinn::Batch b;
  for (int i = 0; i < 16; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / 15.0;
    b.inputs.push_back({x});
    b.targets.push_back(5.0 + 2.0 * x);
  }
  coinn::TrainConfig cfg;
  cfg.max_iter = 200;
  cfg.n_restarts = 1;

  const auto fit = coinn::lm_fit(seeded_init(b, 1, 1), b, cfg);
  // A single tanh unit can only approximate an affine map near its linear
  // range; curvature leaves a small residual floor well above machine zero.
  CHECK(fit.final_mse() < 1e-6);
  CHECK(strictly_decreasing(fit.mse_history));
}

TEST_CASE("lm_fit accepted-step history is strictly decreasing on random tasks") {
  coinn::rng::Engine eng(32);
  for (int trial = 0; trial < 10; ++trial) {
    coinn::Batch b;
    for (int i = 0; i < 24; ++i) {
      const double x = eng.uniform(-2.0, 2.0);
      b.inputs.push_back({x, eng.uniform(-1.0, 1.0)});
      b.targets.push_back(std::exp(0.3 * x) + eng.uniform(0.0, 0.05) + 1.0);
    }
    coinn::TrainConfig cfg;
    cfg.max_iter = 60;
    const auto fit = coinn::lm_fit(seeded_init(b, 3, 1000 + static_cast<std::uint64_t>(trial)), b, cfg);
    REQUIRE(strictly_decreasing(fit.mse_history));
    REQUIRE(fit.mse_history.front() >= fit.final_mse());
  }
}

TEST_CASE("lm_fit stops immediately at an already-optimal point") {
  coinn::Batch b = sine_batch(20);
  const auto init = seeded_init(b, 2, 5);
  // Replace the targets with the network's own outputs: zero residuals.
  coinn::Batch exact = b;
  exact.targets = coinn::forward(init, b);

  coinn::TrainConfig cfg;
  const auto fit = coinn::lm_fit(init, exact, cfg);
  CHECK(fit.stop == coinn::StopReason::grad_tol);
  CHECK(fit.n_iter == 1);
  CHECK(fit.mse_history.size() == 1);
  CHECK(fit.params == init);
}

TEST_CASE("lm_fit reports the lambda cap as a flagged, normal termination") {
  // grad_tol = 0 removes the gradient stop; a hair-thin lambda ceiling turns
  // the first rejected step into a cap. Fixed seeds make the path stable.
  coinn::Batch b = sine_batch(16);
  coinn::TrainConfig cfg;
  cfg.max_iter = 500;
  cfg.grad_tol = 0.0;
  cfg.lambda_init = 1e-3;
  cfg.lambda_up = 10.0;
  cfg.lambda_max = 1.5e-3;  // any single rejection escalates beyond this

  const auto fit = coinn::lm_fit(seeded_init(b, 3, 99), b, cfg);
  INFO("stop = " << coinn::to_string(fit.stop) << ", iters = " << fit.n_iter);
  CHECK(fit.stop == coinn::StopReason::lambda_cap);
  CHECK(fit.lambda_capped);
  CHECK(strictly_decreasing(fit.mse_history));
  for (double v : fit.params.flatten()) REQUIRE(std::isfinite(v));

  // The flag and the stop reason always travel together.
  coinn::TrainConfig normal;
  normal.max_iter = 50;
  const auto tame = coinn::lm_fit(seeded_init(b, 3, 99), b, normal);
  CHECK(tame.lambda_capped == (tame.stop == coinn::StopReason::lambda_cap));
}

TEST_CASE("lm_fit with the diagonal damping variant still converges") {
  coinn::Batch b = sine_batch(32);
  coinn::TrainConfig cfg;
  cfg.max_iter = 300;
  cfg.marquardt_diag = true;
  const auto fit = coinn::lm_fit(seeded_init(b, 4, 7), b, cfg);
  CHECK(fit.final_mse() < 1e-3);
  CHECK(strictly_decreasing(fit.mse_history));

  cfg.marquardt_diag = false;
  const auto plain = coinn::lm_fit(seeded_init(b, 4, 7), b, cfg);
  CHECK(plain.final_mse() != fit.final_mse());  // genuinely different damping
}

TEST_CASE("lm_fit input validation") {
  coinn::Batch b = sine_batch(8);
  const auto init = seeded_init(b, 2, 1);
  coinn::TrainConfig cfg;

  coinn::Batch empty;
  CHECK_THROWS_AS(coinn::lm_fit(init, empty, cfg), std::invalid_argument);

  coinn::Batch bad = b;
  bad.targets[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(coinn::lm_fit(init, bad, cfg), std::invalid_argument);

  coinn::TrainConfig bad_cfg;
  bad_cfg.lambda_down = 1.5;
  CHECK_THROWS_AS(coinn::lm_fit(init, b, bad_cfg), std::invalid_argument);
  bad_cfg = {};
  bad_cfg.lambda_max = bad_cfg.lambda_init;
  CHECK_THROWS_AS(coinn::lm_fit(init, b, bad_cfg), std::invalid_argument);
  bad_cfg = {};
  bad_cfg.n_restarts = 0;
  CHECK_THROWS_AS(coinn::lm_fit(init, b, bad_cfg), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Multi-start orchestration
// ---------------------------------------------------------------------------

TEST_CASE("single-restart training equals a hand-seeded fit") {
  coinn::Batch train = sine_batch(32);
  coinn::Batch val = sine_batch(13);

  coinn::TrainConfig cfg;
  cfg.n_restarts = 1;
  cfg.max_iter = 80;
  cfg.seed = 2024;

  const auto model = coinn::train_multistart(train, val, cfg, 3);

  coinn::rng::Engine eng(coinn::rng::derive_seed(cfg.seed, 0));
  const auto init = coinn::random_params(1, 3, coinn::fit_input_scales(train),
                                         coinn::fit_output_scale(train), eng);
  const auto fit = coinn::lm_fit(init, train, cfg);
  CHECK(model.params == fit.params);
  CHECK(model.chosen_restart == 0);
  CHECK(model.seed_used == cfg.seed);
  REQUIRE(model.history.size() == 1);
  CHECK(model.history[0].train_mse == fit.final_mse());
}

TEST_CASE("training is reproducible and schedule independent") {
  coinn::Batch train = sine_batch(32);
  coinn::Batch val = sine_batch(13);

  coinn::TrainConfig cfg;
  cfg.n_restarts = 6;
  cfg.max_iter = 50;
  cfg.seed = 99;

  const auto a = coinn::train_multistart(train, val, cfg, 3, 1);
  const auto b = coinn::train_multistart(train, val, cfg, 3, 1);
  CHECK(a.params == b.params);
  CHECK(a.chosen_restart == b.chosen_restart);

  const auto c = coinn::train_multistart(train, val, cfg, 3, 4);
  CHECK(a.params == c.params);  // bit-identical across thread counts
  CHECK(a.chosen_restart == c.chosen_restart);
  REQUIRE(a.history.size() == c.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_mse == c.history[i].train_mse);
    CHECK(a.history[i].selection_mre == c.history[i].selection_mre);
  }
}

TEST_CASE("the selected restart minimizes the selection error with lowest-index ties") {
  coinn::Batch train = sine_batch(32);
  coinn::Batch val = sine_batch(13);

  coinn::TrainConfig cfg;
  cfg.n_restarts = 8;
  cfg.max_iter = 40;
  cfg.seed = 5;

  const auto model = coinn::train_multistart(train, val, cfg, 2);

  // Recompute the argmin over the recorded history with strict comparison:
  // the first index attaining the minimum wins.
  int best = -1;
  for (int i = 0; i < static_cast<int>(model.history.size()); ++i) {
    const double m = model.history[static_cast<std::size_t>(i)].selection_mre;
    if (!std::isfinite(m)) continue;
    if (best < 0 || m < model.history[static_cast<std::size_t>(best)].selection_mre) best = i;
  }
  CHECK(model.chosen_restart == best);

  // The winner is no worse than the median finite restart.
  std::vector<double> finite;
  for (const auto& r : model.history)
    if (std::isfinite(r.selection_mre)) finite.push_back(r.selection_mre);
  REQUIRE_FALSE(finite.empty());
  std::sort(finite.begin(), finite.end());
  const double chosen = model.history[static_cast<std::size_t>(model.chosen_restart)].selection_mre;
  CHECK(chosen <= finite[finite.size() / 2]);
  CHECK(chosen == finite.front());
}

TEST_CASE("training refuses zero selection targets up front") {
  coinn::Batch train = sine_batch(16);
  coinn::Batch val = sine_batch(5);
  val.targets[2] = 0.0;
  coinn::TrainConfig cfg;
  cfg.n_restarts = 2;
  cfg.max_iter = 5;
  CHECK_THROWS_AS(coinn::train_multistart(train, val, cfg, 2), std::invalid_argument);
}

TEST_CASE("an unusable validation set raises a divergence error with full history") {
  coinn::Batch train = sine_batch(16);
  coinn::Batch val = sine_batch(5);
  val.inputs[1][0] = std::numeric_limits<double>::quiet_NaN();  // poisons every prediction

  coinn::TrainConfig cfg;
  cfg.n_restarts = 3;
  cfg.max_iter = 5;
  cfg.seed = 1;

  try {
    coinn::train_multistart(train, val, cfg, 2);
    FAIL("expected DivergenceError");
  } catch (const coinn::DivergenceError& e) {
    CHECK(e.history.size() == 3);
    for (const auto& r : e.history) {
      CHECK_FALSE(std::isfinite(r.selection_mre));
      CHECK(std::isfinite(r.train_mse));  // the fits themselves were fine
    }
  }
}

TEST_CASE("selection can run on the training set instead") {
  coinn::Batch train = sine_batch(32);
  coinn::Batch val;  // unused in train-selection mode but must not be touched

  coinn::TrainConfig cfg;
  cfg.n_restarts = 2;
  cfg.max_iter = 30;
  cfg.seed = 3;
  cfg.selection = coinn::SelectionSet::train;

  const auto model = coinn::train_multistart(train, val, cfg, 2);
  CHECK(std::isfinite(model.history[0].selection_mre));
}

TEST_CASE("stop reasons and selection sets have stable names") {
  CHECK(coinn::to_string(coinn::StopReason::max_iter) == "max_iter");
  CHECK(coinn::to_string(coinn::StopReason::grad_tol) == "grad_tol");
  CHECK(coinn::to_string(coinn::StopReason::lambda_cap) == "lambda_cap");
  CHECK(coinn::selection_set_from_string("validation") == coinn::SelectionSet::validation);
  CHECK(coinn::selection_set_from_string("train") == coinn::SelectionSet::train);
  CHECK(coinn::selection_set_from_string(coinn::to_string(coinn::SelectionSet::train)) ==
        coinn::SelectionSet::train);
  CHECK_THROWS_AS(coinn::selection_set_from_string("test"), std::invalid_argument);
}
