// Command-line front end.
//
//   arousal generate  --out DIR [--config FILE] [--force]
//   arousal train     --experiment {fm,se,pt,ft} --data DIR [--config FILE] [--runs DIR]
//   arousal evaluate  --data DIR [--runs DIR] [--out DIR]
//   arousal selftest
//   arousal gradcheck [--trials N] [--perturb X]
//
// Exit codes: 0 success, 1 failure, 2 usage error. The run-directory root
// defaults to $AROUSAL_RUNS, else ./runs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "arousal/core/version.hpp"
#include "arousal/experiments/report.hpp"
#include "arousal/experiments/runner.hpp"
#include "arousal/synthdata/dataset.hpp"
#include "arousal/testing/selftest.hpp"

namespace fs = std::filesystem;
using namespace arousal;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("config file '" + path + "': " + ex.what());
  }
}

int print_checks(const std::vector<testing::CheckResult>& checks) {
  for (const auto& c : checks)
    std::cout << (c.pass ? "PASS" : "FAIL") << "  [" << c.suite << "] " << c.name << ": " << c.detail << "\n";
  const bool ok = testing::all_pass(checks);
  std::cout << (ok ? "all checks passed" : "some checks FAILED") << "\n";
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arousal event detection with transfer learning across channel montages"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, runs_dir, experiment;
  bool force = false;
  std::optional<std::size_t> max_steps, records;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr;
  std::size_t trials = 10;
  double perturb = 0.0;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--out", out_dir, "Output dataset directory")->required();
  gen->add_option("--config", config_path, "JSON file with optional 'generator' and 'partition' blocks");
  gen->add_flag("--force", force, "Overwrite a non-empty output directory");
  gen->add_option("--records", records, "Override generator.n_records");
  gen->add_option("--seed", seed, "Override generator.rng_seed");
  gen->add_option("--snr", snr, "Override generator.event_snr");

  auto* train_cmd = app.add_subcommand("train", "Train one experiment and select its threshold");
  train_cmd->add_option("--experiment", experiment, "fm, se, pt or ft")->required();
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  train_cmd->add_option("--config", config_path, "JSON experiment config");
  train_cmd->add_option("--runs", runs_dir, "Run-directory root");
  train_cmd->add_option("--max-steps", max_steps, "Override train.max_steps");
  train_cmd->add_option("--seed", seed, "Override the experiment seed");

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate all four runs on test2 and compare them");
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  eval_cmd->add_option("--runs", runs_dir, "Run-directory root");
  eval_cmd->add_option("--out", out_dir, "Report directory (default <runs>/report)");

  auto* self_cmd = app.add_subcommand("selftest", "Run the built-in verification suites");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks only");
  grad_cmd->add_option("--trials", trials, "Random trials per layer")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--perturb", perturb, "Add this to one analytic gradient entry (harness check)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const fs::path runs = runs_dir.empty() ? default_runs_root() : fs::path(runs_dir);

    if (*gen) {
      const auto j = load_config(config_path);
      GeneratorConfig g;
      PartitionSpec p;
      if (j.contains("generator")) j.at("generator").get_to(g);
      if (j.contains("partition")) j.at("partition").get_to(p);
      if (records) g.n_records = *records;
      if (seed) g.rng_seed = *seed;
      if (snr) g.event_snr = *snr;
      validate(g);
      validate(p);
      write_dataset(out_dir, g, p, force);
      std::cout << "wrote " << g.n_records << " records to " << out_dir << "\n";
      return kOk;
    }

    if (*train_cmd) {
      const auto e = parse_experiment(experiment);
      ExperimentConfig cfg;
      load_config(config_path).get_to(cfg);
      if (max_steps) cfg.train.max_steps = *max_steps;
      if (seed) cfg.seed = *seed;
      const auto ds = Dataset::open(data_dir);
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = run_experiment(e, ds, cfg, runs, dataset_loader(ds), &std::cerr);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << experiment_name(e) << ": " << res.outcome.steps_run << " steps, best validation loss "
                << res.outcome.best_val_loss << " at step " << res.outcome.best_step << ", threshold " << res.sweep.tau
                << ", " << secs << " s\n"
                << "run directory: " << res.paths.dir.string() << "\n";
      return kOk;
    }

    if (*eval_cmd) {
      const auto ds = Dataset::open(data_dir);
      const auto rep = evaluate_experiments(ds, runs, dataset_loader(ds));
      const fs::path out = out_dir.empty() ? runs / "report" : fs::path(out_dir);
      write_report(rep, out);
      std::cout << report_text(rep) << "\nreport written to " << out.string() << "\n";
      return kOk;
    }

    if (*self_cmd) {
      std::vector<testing::CheckResult> all;
      for (auto&& suite : {testing::gradient_suite(), testing::dsp_suite(), testing::loss_suite(),
                           testing::statistics_suite(), testing::module_suite()})
        all.insert(all.end(), suite.begin(), suite.end());
      all.push_back(testing::nms_oracle_check());
      all.push_back(testing::matching_oracle_check());
      all.push_back(testing::anchor_roundtrip_check());
      return print_checks(all);
    }

    if (*grad_cmd) {
      testing::GradSuiteOptions opt;
      opt.trials = trials;
      opt.perturbation = perturb;
      return print_checks(testing::gradient_suite(opt));
    }
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kFailure;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
