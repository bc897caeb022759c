#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <coinn/coinn.hpp>

#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

namespace {

std::string data_file(const std::string& name) {
  return std::string(COINN_TEST_DATA_DIR) + "/" + name;
}

/// Synthetic experiments written once per test binary; commands read it like
/// any user-supplied CSV.
const std::string& synthetic_csv() {
  static testutil::TempDir dir;
  static const std::string path = [] {
    synthetic::TaskSpec spec;
    spec.n_experiments = 3;
    spec.points_per_experiment = 12;
    spec.seed = 501;
    const std::string p = dir.file("synthetic.csv");
    coinn::save_dataset_csv(synthetic::make_dataset(spec), p);
    return p;
  }();
  return path;
}

nlohmann::json base_config(const std::string& dataset, const std::string& out_dir) {
  return nlohmann::json{
      {"version", coinn::kFormatVersion},
      {"seed", 424},
      {"dataset", dataset},
      {"n_hidden", 2},
      {"train", {{"n_restarts", 3}, {"max_iter", 30}}},
      {"input_sets",
       nlohmann::json::array({{{"name", "coinn"}, {"features", {"x", "sun_mishima"}}}})},
      {"output", {{"dir", out_dir}}}};
}

std::string slurp(const std::string& path) { return coinn::read_file(path); }

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

TEST_CASE("a minimal config gets defaults and copies the seed into training") {
  const auto cfg = coinn::parse_config({{"version", coinn::kFormatVersion}, {"seed", 123}});
  CHECK(cfg.seed == 123);
  CHECK(cfg.train.seed == 123);
  CHECK(cfg.n_bins == 50);
  CHECK(cfg.n_hidden == 6);
  CHECK(cfg.n_hidden_range == std::array<int, 2>{1, 15});
  CHECK(cfg.fractions == std::array<double, 3>{0.70, 0.15, 0.15});
  REQUIRE(cfg.input_sets.size() == 1);
  CHECK(cfg.input_sets[0].name == "coinn");
  CHECK(cfg.input_sets[0].features == std::vector<std::string>{"x", "ID", "sun_mishima"});
  CHECK(cfg.output_formats == std::set<std::string>{"csv", "json"});
  CHECK(cfg.correlation.kind == coinn::CorrelationKind::sun_mishima);
  CHECK(!cfg.correlation.literal_mode);
}

TEST_CASE("config parsing fails loudly") {
  auto ok = base_config("d.csv", "out");

  SECTION("missing seed has no wall-clock fallback") {
    auto j = ok;
    j.erase("seed");
    CHECK_THROWS_MATCHES(coinn::parse_config(j), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("no wall-clock default")));
  }
  SECTION("missing or wrong version") {
    auto j = ok;
    j.erase("version");
    CHECK_THROWS_AS(coinn::parse_config(j), coinn::ConfigError);
    j["version"] = 999;
    CHECK_THROWS_MATCHES(coinn::parse_config(j), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("version")));
  }
  SECTION("unknown keys at every level") {
    auto j = ok;
    j["sedd"] = 1;
    CHECK_THROWS_MATCHES(coinn::parse_config(j), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("unknown key 'sedd'")));

    auto p = ok;
    p["preprocess"] = {{"bins", 5}};
    CHECK_THROWS_AS(coinn::parse_config(p), coinn::ConfigError);

    auto t = ok;
    t["train"]["restarts"] = 7;
    CHECK_THROWS_AS(coinn::parse_config(t), coinn::ConfigError);

    auto c = ok;
    c["correlation"] = {{"mode", "literal"}};
    CHECK_THROWS_AS(coinn::parse_config(c), coinn::ConfigError);

    auto s = ok;
    s["split"] = {{"holdout", nlohmann::json::array()}};
    CHECK_THROWS_AS(coinn::parse_config(s), coinn::ConfigError);

    auto i = ok;
    i["input_sets"][0]["title"] = "x";
    CHECK_THROWS_AS(coinn::parse_config(i), coinn::ConfigError);

    auto o = ok;
    o["output"]["format"] = "csv";
    CHECK_THROWS_AS(coinn::parse_config(o), coinn::ConfigError);

    auto a = ok;
    a["analysis"] = {{"method", "pearson"}};
    CHECK_THROWS_AS(coinn::parse_config(a), coinn::ConfigError);
  }
  SECTION("bad values") {
    auto j = ok;
    j["seed"] = "tomorrow";
    CHECK_THROWS_MATCHES(coinn::parse_config(j), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("bad value for 'seed'")));

    auto f = ok;
    f["split"] = {{"fractions", {0.5, 0.2, 0.2}}};
    CHECK_THROWS_MATCHES(coinn::parse_config(f), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("sum to 1")));

    auto k = ok;
    k["correlation"] = {{"kind", "chisholm"}};
    CHECK_THROWS_AS(coinn::parse_config(k), coinn::ConfigError);

    auto sel = ok;
    sel["train"]["selection"] = "test";
    CHECK_THROWS_AS(coinn::parse_config(sel), coinn::ConfigError);

    auto m = ok;
    m["analysis"] = {{"methods", {"kendall"}}};
    CHECK_THROWS_AS(coinn::parse_config(m), coinn::ConfigError);

    auto feat = ok;
    feat["input_sets"][0]["features"] = {"x", "bogus"};
    CHECK_THROWS_AS(coinn::parse_config(feat), coinn::ConfigError);

    auto doc = nlohmann::json::array({1, 2});
    CHECK_THROWS_AS(coinn::parse_config(doc), coinn::ConfigError);
  }
  SECTION("config files that do not exist or do not parse") {
    CHECK_THROWS_AS(coinn::load_config("/nonexistent/config.json"), coinn::ConfigError);
    testutil::TempDir dir;
    const auto p = dir.file("bad.json");
    coinn::write_file(p, "{ not json");
    CHECK_THROWS_MATCHES(coinn::load_config(p), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("invalid JSON")));
  }
}

TEST_CASE("config echo round-trips through the parser") {
  auto j = base_config(synthetic_csv(), "out");
  j["split"] = {{"fractions", {0.6, 0.2, 0.2}}, {"holdout_ids", {"S03"}}};
  j["correlation"] = {{"kind", "awad_muzychka"}, {"literal_mode", true}};
  j["schema"] = {{"x", "quality"}};
  const auto cfg = coinn::parse_config(j);
  const auto echoed = coinn::config_to_json(cfg);
  const auto cfg2 = coinn::parse_config(echoed);
  CHECK(coinn::config_to_json(cfg2) == echoed);
  CHECK(cfg2.correlation.kind == coinn::CorrelationKind::awad_muzychka);
  CHECK(cfg2.correlation.literal_mode);
  CHECK(cfg2.schema.overrides.at("x") == "quality");
  CHECK(cfg2.holdout_ids == std::vector<std::string>{"S03"});
}

TEST_CASE("exceptions map onto the documented exit codes") {
  CHECK(coinn::exit_code_for(coinn::ConfigError("x")) == 2);
  CHECK(coinn::exit_code_for(coinn::DataError("x")) == 3);
  CHECK(coinn::exit_code_for(coinn::DivergenceError("x", {})) == 4);
  CHECK(coinn::exit_code_for(std::runtime_error("x")) == 1);
  CHECK(coinn::exit_code_for(std::invalid_argument("x")) == 1);
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

TEST_CASE("cmd_preprocess bins, writes a digest manifest, and is idempotent") {
  testutil::TempDir dir;
  auto j = base_config(data_file("points_small.csv"), dir.file("out1"));
  j["preprocess"] = {{"n_bins", 5}};
  const auto cfg = coinn::parse_config(j);

  const auto summary = coinn::cmd_preprocess(cfg, {});
  CHECK(summary.at("command") == "preprocess");
  CHECK(summary.at("n_points_in").get<std::size_t>() == 6);
  CHECK(summary.at("n_points_out").get<std::size_t>() == 4);

  const std::string out_csv = summary.at("output").get<std::string>();
  REQUIRE(std::filesystem::exists(out_csv));
  CHECK(slurp(out_csv) == slurp(data_file("golden/preprocessed_small.csv")));

  SECTION("manifest digests match the actual file bytes") {
    const auto man = nlohmann::json::parse(slurp(summary.at("manifest").get<std::string>()));
    CHECK(man.at("command") == "preprocess");
    CHECK(man.at("tool") == "coinn");
    CHECK(man.at("generator") == coinn::rng::kGeneratorName);
    CHECK(man.at("inputs").at(cfg.dataset) == coinn::fnv1a64_hex(slurp(cfg.dataset)));
    CHECK(man.at("outputs").at(out_csv) == coinn::fnv1a64_hex(slurp(out_csv)));
    CHECK(man.at("extra").at("n_bins").get<int>() == 5);
    CHECK(man.at("extra").at("bins").size() == 4);
    CHECK(!man.contains("timestamp"));
    // The embedded config reproduces the run.
    CHECK_NOTHROW(coinn::parse_config(man.at("config")));
  }

  SECTION("preprocessing its own output changes nothing") {
    auto j2 = base_config(out_csv, dir.file("out2"));
    j2["preprocess"] = {{"n_bins", 5}};
    const auto summary2 = coinn::cmd_preprocess(coinn::parse_config(j2), {});
    CHECK(slurp(summary2.at("output").get<std::string>()) == slurp(out_csv));
  }

  SECTION("--out and --seed overrides land in the effective config") {
    coinn::GlobalOptions g;
    g.out_dir = dir.file("out3");
    g.seed = 99;
    const auto summary3 = coinn::cmd_preprocess(cfg, g);
    CHECK(summary3.at("output").get<std::string>() ==
          (std::filesystem::path(dir.file("out3")) / "preprocessed.csv").string());
    const auto man = nlohmann::json::parse(slurp(summary3.at("manifest").get<std::string>()));
    CHECK(man.at("config").at("seed").get<std::uint64_t>() == 99);
  }
}

TEST_CASE("cmd_preprocess propagates data errors") {
  testutil::TempDir dir;
  const auto missing = base_config(dir.file("nope.csv"), dir.file("out"));
  CHECK_THROWS_AS(coinn::cmd_preprocess(coinn::parse_config(missing), {}), coinn::ConfigError);

  const auto bad_path = dir.file("bad.csv");
  coinn::write_file(bad_path, "experiment_id,x\n");  // missing required columns
  auto j = base_config(bad_path, dir.file("out"));
  CHECK_THROWS_AS(coinn::cmd_preprocess(coinn::parse_config(j), {}), coinn::DataError);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TEST_CASE("cmd_train writes a loadable model, split, history, and manifest") {
  testutil::TempDir dir;
  const auto cfg = coinn::parse_config(base_config(synthetic_csv(), dir.file("out")));
  const auto summary = coinn::cmd_train(cfg, {});

  CHECK(summary.at("command") == "train");
  CHECK(summary.at("n_restarts").get<int>() == 3);
  CHECK(summary.at("chosen_restart").get<int>() >= 0);
  CHECK(std::isfinite(summary.at("selection_mre").get<double>()));

  const auto doc = coinn::load_model(summary.at("model").get<std::string>());
  CHECK(doc.params.n_in == 2);
  CHECK(doc.params.n_hidden == 2);
  CHECK(doc.input_feature_names == std::vector<std::string>{"x", "sun_mishima"});
  CHECK(doc.seed_used == 424);
  CHECK(doc.chosen_restart == summary.at("chosen_restart").get<int>());

  const auto split = coinn::split_from_json(
      nlohmann::json::parse(slurp(summary.at("split").get<std::string>())));
  CHECK(split.seed == 424);
  CHECK(split.train.size() + split.validation.size() + split.test.size() == 36);

  const auto hist = slurp((std::filesystem::path(dir.file("out")) / "train_history.csv").string());
  CHECK(hist.rfind("restart,train_mse,selection_mre,stop,n_iter,lambda_capped\n", 0) == 0);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 4);  // header + one row per restart

  const auto report = nlohmann::json::parse(
      slurp((std::filesystem::path(dir.file("out")) / "train_report.json").string()));
  CHECK(report.at("restarts").size() == 3);
  CHECK(report.at("seed").get<std::uint64_t>() == 424);
  CHECK(report.at("input_set") == "coinn");
  CHECK(report.at("selection_set") == "validation");

  const auto man = nlohmann::json::parse(slurp(summary.at("manifest").get<std::string>()));
  for (const auto& [path, digest] : man.at("outputs").items())
    CHECK(digest.get<std::string>() == coinn::fnv1a64_hex(slurp(path)));
}

TEST_CASE("cmd_train is byte-reproducible across reruns and thread counts") {
  testutil::TempDir dir;
  const auto run = [&](const std::string& out, int threads) {
    coinn::GlobalOptions g;
    g.threads = threads;
    const auto cfg = coinn::parse_config(base_config(synthetic_csv(), dir.file(out)));
    const auto summary = coinn::cmd_train(cfg, g);
    return slurp(summary.at("model").get<std::string>());
  };
  const std::string serial = run("a", 1);
  CHECK(run("b", 1) == serial);
  CHECK(run("c", 4) == serial);
}

TEST_CASE("cmd_train surfaces split problems as config errors") {
  testutil::TempDir dir;
  auto j = base_config(synthetic_csv(), dir.file("out"));
  j["split"] = {{"holdout_ids", {"NOT_THERE"}}};
  CHECK_THROWS_AS(coinn::cmd_train(coinn::parse_config(j), {}), coinn::ConfigError);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

TEST_CASE("cmd_sweep reports every cell and keeps timings out of the reports") {
  testutil::TempDir dir;
  auto j = base_config(synthetic_csv(), dir.file("out"));
  j["n_hidden_range"] = {1, 2};
  j["train"] = {{"n_restarts", 2}, {"max_iter", 20}};
  j["split"] = {{"fractions", {0.70, 0.15, 0.15}}, {"holdout_ids", {"S03"}}};
  const auto summary = coinn::cmd_sweep(coinn::parse_config(j), {});

  CHECK(summary.at("command") == "sweep");
  CHECK(summary.at("cells").get<std::size_t>() == 2);
  REQUIRE(summary.at("best").size() == 1);
  CHECK(summary.at("best")[0].at("input_set") == "coinn");

  const auto csv = slurp(summary.at("report_csv").get<std::string>());
  CHECK(csv.rfind("input_set,n_hidden,cell_seed,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("runtime") == std::string::npos);

  const auto rep = nlohmann::json::parse(slurp(summary.at("report_json").get<std::string>()));
  REQUIRE(rep.at("cells").size() == 2);
  for (const auto& cell : rep.at("cells")) {
    CHECK(!cell.contains("runtime_seconds"));
    CHECK(cell.at("cell_seed").get<std::uint64_t>() ==
          coinn::derive_cell_seed(424, "coinn", cell.at("n_hidden").get<int>()));
    CHECK(!cell.at("diverged").get<bool>());
  }

  // Timings live in the sidecar only, and the sidecar stays out of the manifest.
  const auto timings = nlohmann::json::parse(
      slurp((std::filesystem::path(dir.file("out")) / "sweep_timings.json").string()));
  REQUIRE(timings.at("cells").size() == 2);
  for (const auto& cell : timings.at("cells"))
    CHECK(cell.at("runtime_seconds").get<double>() >= 0.0);
  const auto man = nlohmann::json::parse(slurp(summary.at("manifest").get<std::string>()));
  for (const auto& [path, digest] : man.at("outputs").items()) {
    CHECK(path.find("timings") == std::string::npos);
    CHECK(digest.get<std::string>() == coinn::fnv1a64_hex(slurp(path)));
  }
}

TEST_CASE("cmd_sweep rejects a starving split as configuration") {
  testutil::TempDir dir;
  auto j = base_config(synthetic_csv(), dir.file("out"));
  j["split"] = {{"holdout_ids", {"S01", "S02", "S03"}}};
  CHECK_THROWS_AS(coinn::cmd_sweep(coinn::parse_config(j), {}), coinn::ConfigError);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

TEST_CASE("cmd_evaluate scores a saved model against the reference correlation") {
  testutil::TempDir dir;

  // A pass-through network reproduces the correlation, so both mre columns
  // must agree. Build it from the actual feature-column range.
  const auto ds = coinn::load_dataset(synthetic_csv());
  const auto table = coinn::build_feature_table(ds);
  const auto& col = table.column("sun_mishima");
  const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
  coinn::ModelDocument m;
  m.params.n_in = 1;
  m.params.n_hidden = 1;
  m.params.w1 = {1e-8};
  m.params.b1 = {0.0};
  m.params.w2 = {1e8};
  m.params.b2 = 0.0;
  m.params.in_scale = {{*lo, *hi}};
  m.params.out_scale = {*lo, *hi};
  m.input_feature_names = {"sun_mishima"};
  const std::string model_path = dir.file("model.json");
  coinn::save_model(m, model_path);

  auto j = base_config(synthetic_csv(), dir.file("out"));
  j["model"] = model_path;
  j["split"] = {{"fractions", {0.70, 0.15, 0.15}}, {"holdout_ids", {"S02"}}};
  const auto summary = coinn::cmd_evaluate(coinn::parse_config(j), {});

  CHECK(summary.at("command") == "evaluate");
  CHECK(summary.at("reference") == "sun_mishima");
  CHECK(summary.at("n_experiments").get<std::size_t>() == 3);
  CHECK_THAT(summary.at("avg_mre_model").get<double>(),
             Catch::Matchers::WithinRel(summary.at("avg_mre_reference").get<double>(), 1e-9));
  CHECK(std::isfinite(summary.at("holdout_avg_mre_model").get<double>()));

  const auto csv = slurp(summary.at("report_csv").get<std::string>());
  CHECK(csv.rfind("experiment_id,n_points,mre_model,mre_reference,holdout\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("S02") != std::string::npos);

  const auto man = nlohmann::json::parse(slurp(summary.at("manifest").get<std::string>()));
  CHECK(man.at("inputs").contains(synthetic_csv()));
  CHECK(man.at("inputs").contains(model_path));

  SECTION("a missing model path is a configuration error") {
    auto j2 = base_config(synthetic_csv(), dir.file("out2"));
    CHECK_THROWS_MATCHES(coinn::cmd_evaluate(coinn::parse_config(j2), {}), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("'model' path is required")));
    j2["model"] = dir.file("missing_model.json");
    CHECK_THROWS_AS(coinn::cmd_evaluate(coinn::parse_config(j2), {}), coinn::ConfigError);
  }
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

TEST_CASE("cmd_analyze writes one matrix per method and format") {
  testutil::TempDir dir;
  const auto summary =
      coinn::cmd_analyze(coinn::parse_config(base_config(synthetic_csv(), dir.file("out"))), {});

  CHECK(summary.at("command") == "analyze");
  CHECK(summary.at("methods") == nlohmann::json::array({"pearson", "spearman"}));
  CHECK(summary.at("n_features").get<std::size_t>() == 13);
  CHECK(summary.at("n_rows").get<std::size_t>() == 36);
  REQUIRE(summary.at("files").size() == 4);

  for (const auto& method : {"pearson", "spearman"}) {
    const auto p = std::filesystem::path(dir.file("out")) / ("analysis_" + std::string(method) + ".json");
    const auto mat = nlohmann::json::parse(slurp(p.string()));
    CHECK(mat.at("method") == method);
    const auto names = mat.at("names").get<std::vector<std::string>>();
    REQUIRE(names.size() == 13);
    CHECK(names.front() == "x");
    CHECK(names.back() == "dpdz_exp");
    const auto& v = mat.at("values");
    for (std::size_t i = 0; i < names.size(); ++i) {
      CHECK(v[i][i].get<double>() == 1.0);
      for (std::size_t k = 0; k < names.size(); ++k) CHECK(v[i][k] == v[k][i]);
    }
  }

  const auto csv = slurp((std::filesystem::path(dir.file("out")) / "analysis_pearson.csv").string());
  CHECK(csv.rfind("feature,x,G,P,ID,roughness,", 0) == 0);
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> full_point() {
  return {"x=0.3",      "G_kg_sm2=200", "P_kPa=500", "ID_mm=1",  "roughness_um=1.25",
          "rho_l=520",  "rho_v=18",     "mu_l=0.00011", "mu_v=9e-06", "sigma=0.01"};
}

coinn::ExperimentPoint hand_point() {
  coinn::ExperimentPoint p;
  p.experiment_id = "point";
  p.fluid = {520.0, 18.0, 0.00011, 9e-06, 0.01, 0.3};
  p.geometry = {1.0 / 1000.0, 1.25 / 1000000.0, 1.0 / 1000.0};
  p.flow.g_flux = 200.0;
  p.flow.pressure = 500.0;
  p.dpdz_exp = std::numeric_limits<double>::quiet_NaN();
  return p;
}

}  // namespace

TEST_CASE("cmd_predict evaluates a correlation for a single --point") {
  coinn::PredictOptions opts;
  opts.point_kvs = full_point();
  opts.correlation = "sun_mishima";
  const auto summary = coinn::cmd_predict(std::nullopt, {}, opts);

  CHECK(summary.at("command") == "predict");
  CHECK(summary.at("mode") == "correlation");
  CHECK(summary.at("correlation") == "sun_mishima");
  CHECK(summary.at("n_points").get<std::size_t>() == 1);
  CHECK(!summary.contains("output"));  // no output dir requested, no files

  const double expect = coinn::evaluate_correlation({}, hand_point()).dpdz();
  CHECK(summary.at("predictions")[0].at("dpdz_pred").get<double>() == expect);

  SECTION("breakdown adds the correlation internals") {
    opts.breakdown = true;
    const auto s2 = coinn::cmd_predict(std::nullopt, {}, opts);
    const auto& row = s2.at("predictions")[0];
    CHECK(row.at("phi_l_sq").get<double>() > 1.0);
    CHECK(row.at("re_l").get<double>() > 0.0);
    CHECK(row.at("c_chisholm").get<double>() > 0.0);
    CHECK(row.at("regime").is_string());
    CHECK(row.at("mu_2ph").is_null());  // not defined by the separated-flow model
  }

  SECTION("an output directory turns on file outputs") {
    testutil::TempDir dir;
    coinn::GlobalOptions g;
    g.out_dir = dir.file("out");
    opts.breakdown = true;
    const auto s3 = coinn::cmd_predict(std::nullopt, g, opts);
    const auto csv = slurp(s3.at("output").get<std::string>());
    CHECK(csv.rfind("experiment_id,dpdz_pred_Pa_m,re_2ph,re_l,re_v,", 0) == 0);
    CHECK(csv.find("point,") != std::string::npos);
    const auto man = nlohmann::json::parse(slurp(s3.at("manifest").get<std::string>()));
    CHECK(man.at("extra").at("mode") == "correlation");
  }
}

TEST_CASE("cmd_predict runs a saved model over an input CSV") {
  testutil::TempDir dir;

  const auto ds = coinn::load_dataset(data_file("points_small.csv"));
  const auto table = coinn::build_feature_table(ds);
  const auto& col = table.column("sun_mishima");
  const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
  coinn::ModelDocument m;
  m.params.n_in = 1;
  m.params.n_hidden = 1;
  m.params.w1 = {1e-8};
  m.params.b1 = {0.0};
  m.params.w2 = {1e8};
  m.params.b2 = 0.0;
  m.params.in_scale = {{*lo, *hi}};
  m.params.out_scale = {*lo, *hi};
  m.input_feature_names = {"sun_mishima"};
  const std::string model_path = dir.file("model.json");
  coinn::save_model(m, model_path);

  coinn::PredictOptions opts;
  opts.model_path = model_path;
  opts.input_csv = data_file("points_small.csv");
  const auto summary = coinn::cmd_predict(std::nullopt, {}, opts);

  CHECK(summary.at("mode") == "model");
  CHECK(summary.at("model") == model_path);
  REQUIRE(summary.at("predictions").size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    const double got = summary.at("predictions")[i].at("dpdz_pred").get<double>();
    CHECK(got == coinn::forward(m.params, {col[i]}));
  }
}

TEST_CASE("cmd_predict option conflicts and bad points fail with the right class") {
  coinn::PredictOptions opts;
  opts.point_kvs = full_point();

  SECTION("model and correlation are mutually exclusive") {
    opts.model_path = "m.json";
    opts.correlation = "sun_mishima";
    CHECK_THROWS_AS(coinn::cmd_predict(std::nullopt, {}, opts), coinn::ConfigError);
  }
  SECTION("input and point are mutually exclusive") {
    opts.input_csv = data_file("points_small.csv");
    CHECK_THROWS_AS(coinn::cmd_predict(std::nullopt, {}, opts), coinn::ConfigError);
  }
  SECTION("no input source at all") {
    coinn::PredictOptions none;
    CHECK_THROWS_MATCHES(coinn::cmd_predict(std::nullopt, {}, none), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("provide --input")));
  }
  SECTION("breakdown needs a correlation") {
    coinn::PredictOptions b;
    b.point_kvs = full_point();
    b.model_path = "m.json";
    b.breakdown = true;
    CHECK_THROWS_AS(coinn::cmd_predict(std::nullopt, {}, b), coinn::ConfigError);
  }
  SECTION("missing model file") {
    coinn::PredictOptions b;
    b.point_kvs = full_point();
    b.model_path = "/nonexistent/model.json";
    CHECK_THROWS_MATCHES(coinn::cmd_predict(std::nullopt, {}, b), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("model file not found")));
  }
  SECTION("unknown correlation name") {
    opts.correlation = "friedel";
    CHECK_THROWS_AS(coinn::cmd_predict(std::nullopt, {}, opts), coinn::ConfigError);
  }
  SECTION("point parsing: unknown, missing, duplicate, and non-numeric keys") {
    auto bad = opts;
    bad.point_kvs.push_back("extra_key=1");
    CHECK_THROWS_MATCHES(coinn::cmd_predict(std::nullopt, {}, bad), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("unknown --point field")));

    auto missing = opts;
    missing.point_kvs.pop_back();  // drop sigma
    CHECK_THROWS_MATCHES(coinn::cmd_predict(std::nullopt, {}, missing), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("missing required field 'sigma'")));

    auto dup = opts;
    dup.point_kvs.push_back("x=0.4");
    CHECK_THROWS_MATCHES(coinn::cmd_predict(std::nullopt, {}, dup), coinn::ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("duplicate --point key")));

    auto nonnum = opts;
    nonnum.point_kvs[0] = "x=high";
    CHECK_THROWS_AS(coinn::cmd_predict(std::nullopt, {}, nonnum), coinn::ConfigError);

    auto noeq = opts;
    noeq.point_kvs[0] = "x";
    CHECK_THROWS_AS(coinn::cmd_predict(std::nullopt, {}, noeq), coinn::ConfigError);
  }
  SECTION("physically invalid points are data errors") {
    auto bad = opts;
    bad.point_kvs[0] = "x=1.5";
    CHECK_THROWS_AS(coinn::cmd_predict(std::nullopt, {}, bad), coinn::DataError);
  }
}
