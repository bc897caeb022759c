// Command-line front end: wires the library's commands to subcommands with a
// shared set of global flags. All real work lives in the library headers.

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <coinn/coinn.hpp>

namespace {

struct CliState {
  std::string config_path;
  std::uint64_t seed_value = 0;
  std::string out_dir;
  coinn::GlobalOptions global;
  coinn::PredictOptions predict;
  std::string correlation_name;
  std::function<nlohmann::json()> action;
};

void add_global_flags(CLI::App* cmd, CliState& st, bool config_required) {
  auto* config = cmd->add_option("-c,--config", st.config_path, "run configuration JSON file");
  if (config_required) config->required();
  cmd->add_option("--seed", st.seed_value, "override the config seed");
  cmd->add_option("-o,--out", st.out_dir, "override the output directory");
  cmd->add_flag("--json", st.global.json_stdout, "machine-readable stdout");
  cmd->add_option("--threads", st.global.threads, "worker threads (results are thread-count independent)");
}

void collect_overrides(CLI::App* cmd, CliState& st) {
  if (cmd->count("--seed")) st.global.seed = st.seed_value;
  if (cmd->count("--out") || cmd->count("-o")) st.global.out_dir = st.out_dir;
}

void print_human(const nlohmann::json& summary) {
  if (summary.value("command", "") == "predict" && summary.contains("predictions")) {
    for (const auto& r : summary.at("predictions"))
      std::cout << r.at("experiment_id").get<std::string>() << " "
                << r.at("dpdz_pred").dump() << "\n";
    if (summary.contains("output"))
      std::cout << "output: " << summary.at("output").get<std::string>() << "\n";
    return;
  }
  for (const auto& [key, value] : summary.items()) {
    if (value.is_string()) {
      std::cout << key << ": " << value.get<std::string>() << "\n";
    } else {
      std::cout << key << ": " << value.dump() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-phase pressure-gradient prediction: correlations, a correlation-informed "
               "network, and the studies around them"};
  app.require_subcommand(1);
  CliState st;

  auto* preprocess = app.add_subcommand("preprocess", "bin raw points into quality regions");
  add_global_flags(preprocess, st, true);
  preprocess->callback([&, preprocess]() {
    collect_overrides(preprocess, st);
    st.action = [&]() { return coinn::cmd_preprocess(coinn::load_config(st.config_path), st.global); };
  });

  auto* train = app.add_subcommand("train", "multi-start training of the regression network");
  add_global_flags(train, st, true);
  train->callback([&, train]() {
    collect_overrides(train, st);
    st.action = [&]() { return coinn::cmd_train(coinn::load_config(st.config_path), st.global); };
  });

  auto* sweep = app.add_subcommand("sweep", "input-set and hidden-width architecture sweep");
  add_global_flags(sweep, st, true);
  sweep->callback([&, sweep]() {
    collect_overrides(sweep, st);
    st.action = [&]() { return coinn::cmd_sweep(coinn::load_config(st.config_path), st.global); };
  });

  auto* evaluate = app.add_subcommand("evaluate", "per-experiment model vs correlation scoring");
  add_global_flags(evaluate, st, true);
  evaluate->callback([&, evaluate]() {
    collect_overrides(evaluate, st);
    st.action = [&]() { return coinn::cmd_evaluate(coinn::load_config(st.config_path), st.global); };
  });

  auto* analyze = app.add_subcommand("analyze", "feature correlation matrices");
  add_global_flags(analyze, st, true);
  analyze->callback([&, analyze]() {
    collect_overrides(analyze, st);
    st.action = [&]() { return coinn::cmd_analyze(coinn::load_config(st.config_path), st.global); };
  });

  auto* predict = app.add_subcommand("predict", "gradient predictions from a model or correlation");
  add_global_flags(predict, st, false);
  predict->add_option("--model", st.predict.model_path, "saved model JSON");
  predict->add_option("--correlation", st.correlation_name,
                      "closed-form model: sun_mishima | awad_muzychka | cicchitti");
  predict->add_option("--input", st.predict.input_csv, "points CSV (target column optional)");
  predict->add_option("--point", st.predict.point_kvs,
                      "single point as repeated key=value fields");
  predict->add_flag("--breakdown", st.predict.breakdown, "emit correlation internals per point");
  predict->callback([&, predict]() {
    collect_overrides(predict, st);
    if (predict->count("--correlation")) st.predict.correlation = st.correlation_name;
    st.action = [&]() {
      std::optional<coinn::RunConfig> cfg;
      if (!st.config_path.empty()) cfg = coinn::load_config(st.config_path);
      return coinn::cmd_predict(cfg, st.global, st.predict);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // command-line usage problems are configuration errors
  }

  try {
    const nlohmann::json summary = st.action();
    if (st.global.json_stdout) {
      std::cout << summary.dump(2) << "\n";
    } else {
      print_human(summary);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return coinn::exit_code_for(e);
  }
}
