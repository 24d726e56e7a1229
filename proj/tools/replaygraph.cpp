#include "replaygraph/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace replaygraph;

namespace {

/// Flags shared by all subcommands; only flags actually given become overrides.
struct Flags {
  std::string config;
  nlohmann::json overrides = nlohmann::json::object();
  std::vector<std::pair<CLI::Option*, std::function<void()>>> setters;

  template <class T>
  void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help,
           const std::vector<std::string>& choices = {}) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app.add_option(flag, *value, help);
    if (!choices.empty()) opt->check(CLI::IsMember(choices));
    setters.emplace_back(opt, [this, value, key] { overrides[key] = *value; });
  }

  void attach(CLI::App& app) {
    app.add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    add<std::string>(app, "--dataset", "dataset", "dataset kind", {"cora", "citeseer", "synthetic-sbm", "permuted-mnist"});
    add<std::string>(app, "--content", "content", "citation .content file");
    add<std::string>(app, "--cites", "cites", "citation .cites file");
    add<std::string>(app, "--mnist-dir", "mnist_dir", "directory with train-images/labels IDX files");
    add<std::string>(app, "--model", "model", "model", {"sgc", "mlp"});
    add<std::string>(app, "--strategy", "strategy", "experience selection",
                     {"none", "random", "mf", "mf-embed", "cm", "cm-embed", "im"});
    add<Index>(app, "--e", "e", "experiences stored per class");
    add<Index>(app, "--k", "k", "propagation depth");
    add<Index>(app, "--epochs", "epochs", "training epochs per task");
    add<double>(app, "--lr", "lr", "Adam learning rate");
    add<double>(app, "--decay", "decay", "L2 weight decay");
    add<Index>(app, "--tasks", "tasks", "number of tasks");
    add<Index>(app, "--classes-per-task", "classes_per_task", "classes per graph task");
    add<Index>(app, "--train-per-class", "train_per_class", "training nodes per class");
    add<std::string>(app, "--eval-mode", "eval_mode", "evaluation mode", {"task-aware", "class-incremental"});
    add<std::string>(app, "--fm-denominator", "fm_denominator", "forgetting mean denominator", {"m-1", "m"});
    add<std::string>(app, "--probe", "probe", "influence probe set", {"holdout", "test"});
    add<std::string>(app, "--seeds", "seeds", "seed list: N, A..B or A,B,C");
    add<Index>(app, "--jobs", "jobs", "parallel seed workers");
    add<std::string>(app, "--out", "out", "output directory");
  }

  ExperimentConfig resolve() {
    for (auto& [opt, set] : setters)
      if (opt->count() > 0) set();
    return load_config(config, overrides);
  }
};

std::vector<Index> parse_e_values(const std::string& text) {
  std::vector<Index> values;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ',');) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw Error("--e-values: '" + text + "' is not a comma-separated list of integers");
    values.push_back(static_cast<Index>(std::stoll(part)));
  }
  return values;
}

void print_summary(const std::string& label, const Aggregate& pm, const Aggregate& fm) {
  std::printf("%sPM %.2f%% ± %.2f  FM %.2f%% ± %.2f\n", label.c_str(), 100 * pm.mean, 100 * pm.std, 100 * fm.mean,
              100 * fm.std);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experience replay for continual graph learning"};
  app.require_subcommand(1);

  Flags run_flags, sweep_flags, validate_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "run every seed and write report.json, matrix and run-log files");
  run_flags.attach(*run_cmd);

  CLI::App* sweep_cmd = app.add_subcommand("sweep-e", "repeat the run for several e values and write sweep_e.csv");
  sweep_flags.attach(*sweep_cmd);
  std::string e_values = "1,5,10,20";
  sweep_cmd->add_option("--e-values", e_values, "comma-separated e values")->capture_default_str();

  CLI::App* validate_cmd = app.add_subcommand("validate-config", "validate a config without running anything");
  validate_flags.attach(*validate_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const ExperimentConfig c = run_flags.resolve();
      const ExperimentResult r = run(c);
      print_summary("", r.pm, r.fm);
    } else if (sweep_cmd->parsed()) {
      const ExperimentConfig c = sweep_flags.resolve();
      for (const auto& row : sweep_e(c, parse_e_values(e_values)))
        print_summary("e=" + std::to_string(row.e) + "  ", row.pm, row.fm);
    } else if (validate_cmd->parsed()) {
      validate_flags.resolve();
      std::cout << "ok\n";
    }
  } catch (const ConfigError& ex) {
    for (const auto& p : ex.problems()) std::cerr << "config error: " << p << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
