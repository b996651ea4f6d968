/*
 * Copyright 2026 The subpop-lab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// subpop-lab: dataset generation, shift quantification, training, sweeps,
// model selection and report generation for the synthetic subpopulation
// shift laboratory.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "subpop/algorithms.hpp"
#include "subpop/harness.hpp"
#include "subpop/shiftgen.hpp"

namespace fs = std::filesystem;
using namespace subpop;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
  std::string out;
};

int cmd_generate(const std::string& spec_path, const GlobalOptions& global) {
  gen::GenSpec spec = gen::spec_from_json_string(read_file(spec_path));
  if (global.seed_set) spec.seed = global.seed;
  const std::string out_dir = global.out.empty() ? "." : global.out;
  const DataBundle data = gen::generate(spec);
  gen::write_dataset_dir(spec, data, out_dir);

  const quantify::ShiftFingerprint fp = quantify::fingerprint(data.train, &data.test);
  std::cout << "wrote " << out_dir << "/{train,val,test}.csv (" << data.train.size() << "/"
            << data.val.size() << "/" << data.test.size() << " examples), dominant shift "
            << quantify::to_string(quantify::dominant_shift(fp)) << "\n";
  return 0;
}

int cmd_quantify(const std::string& data_dir, const std::string& out_path) {
  const DataBundle data = load_dataset_dir(data_dir);
  const quantify::ShiftFingerprint fp = quantify::fingerprint(data.train, &data.test);
  const quantify::ShiftType dominant = quantify::dominant_shift(fp);
  const std::string json = quantify::to_json_string(fp, dominant);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << json << "\n";
  }
  std::cout << json << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& algorithm_name,
              const std::string& regime_name, const std::string& hyperparams_path,
              const std::string& config_path, int hidden_width, const GlobalOptions& global) {
  const DataBundle data = load_dataset_dir(data_dir);
  const algo::AlgorithmId algorithm = algo::algorithm_from_string(algorithm_name);
  const select::AvailabilityRegime regime = select::regime_from_string(regime_name);

  algo::AlgorithmSpec spec;
  spec.id = algorithm;
  spec.hyperparams = algo::default_hyperparams(algorithm);
  if (!hyperparams_path.empty()) {
    const nlohmann::json j = nlohmann::json::parse(read_file(hyperparams_path));
    for (const auto& [k, v] : j.items()) spec.hyperparams[k] = v.get<double>();
  }

  train::TrainConfig config;
  if (!config_path.empty()) {
    const nlohmann::json j = nlohmann::json::parse(read_file(config_path));
    if (j.contains("num_steps")) config.num_steps = j["num_steps"].get<int>();
    if (j.contains("eval_every")) config.eval_every = j["eval_every"].get<int>();
    if (j.contains("momentum")) config.momentum = j["momentum"].get<double>();
    if (j.contains("sampling")) config.sampling = train::sampling_from_string(j["sampling"].get<std::string>());
    if (j.contains("weighting")) config.weighting = train::weighting_from_string(j["weighting"].get<std::string>());
  }

  train::Architecture arch;
  arch.input_dim = data.train.feature_dim();
  arch.hidden_width = hidden_width;
  arch.num_classes = data.train.num_classes();

  const std::uint64_t seed = global.seed_set ? global.seed : 0;
  const algo::RunOutput out =
      algo::run_algorithm(spec, data, arch, regime, config, seed, /*allow_degeneration=*/true);

  const std::string out_dir = global.out.empty() ? "." : global.out;
  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "run_log.jsonl").string();
  train::write_run_log(out.checkpoints, log_path);

  const metrics::MetricsReport& final_report = out.checkpoints.back().test_report;
  std::cout << "algorithm " << algorithm_name << " on " << data_dir << " (" << regime_name
            << "): test worst-group acc " << final_report.worst_acc << ", avg acc "
            << final_report.avg_acc << "\n"
            << "run log: " << log_path << "\n";
  return 0;
}

int cmd_sweep(const std::string& plan_path, const GlobalOptions& global) {
  harness::ExperimentPlan plan = harness::plan_from_json_file(plan_path);
  if (global.seed_set) plan.plan_seed = global.seed;
  if (!global.out.empty()) plan.out_dir = global.out;
  if (plan.out_dir.empty()) throw std::runtime_error("sweep: set out_dir in the plan or pass --out");

  const harness::PlanResult result = harness::run_plan(plan, global.workers);
  std::cout << "sweep complete: " << result.records.size() << " records (" << result.executed
            << " trained, " << result.cached << " cached, " << result.failed << " failed)\n"
            << "records under " << plan.out_dir << "/records\n";
  // Individual run failures are data, not sweep failures.
  return 0;
}

int cmd_select(const std::string& runs_dir, const std::string& strategy_name,
               const std::string& regime_name) {
  const select::Strategy strategy = select::strategy_from_string(strategy_name);
  const select::AvailabilityRegime regime = select::regime_from_string(regime_name);

  std::vector<fs::path> log_paths;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.path().extension() == ".jsonl") log_paths.push_back(entry.path());
  }
  std::sort(log_paths.begin(), log_paths.end());
  if (log_paths.empty()) throw std::runtime_error("select: no .jsonl run logs under " + runs_dir);

  std::vector<select::RunLog> trials;
  trials.reserve(log_paths.size());
  for (const fs::path& p : log_paths) trials.push_back(select::load_run_log(p.string()));

  const select::SelectionOutcome outcome = select::select_outcome(trials, strategy, regime);
  nlohmann::json j = nlohmann::json::parse(select::to_json_string(outcome));
  j["trial_log"] = log_paths[static_cast<std::size_t>(outcome.trial)].filename().string();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& runs_dir, const GlobalOptions& global) {
  const std::vector<harness::RunRecord> records = harness::load_records(runs_dir);
  if (records.empty()) throw std::runtime_error("report: no records under " + runs_dir);
  const std::string out_dir = global.out.empty() ? runs_dir : global.out;
  fs::create_directories(out_dir);

  int failed = 0;
  for (const auto& r : records) failed += r.status == "failed" ? 1 : 0;

  const auto improvement = harness::report_improvement_over_erm(records);
  harness::write_improvement_csv(improvement, (fs::path(out_dir) / "improvement_over_erm.csv").string());

  const auto correlations =
      harness::report_metric_correlations(records, (fs::path(out_dir) / "scatter").string());
  harness::write_correlation_csv(correlations, (fs::path(out_dir) / "metric_correlations.csv").string());

  std::cout << "reports written to " << out_dir << " (improvement_over_erm.csv, "
            << "metric_correlations.csv, scatter/)\n"
            << records.size() << " records, " << failed << " failed runs excluded from aggregation\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subpop-lab: a desk-scale laboratory for subpopulation shift"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags parse on either side of the subcommand

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Override the seed of the invoked stage")
      ->each([&](const std::string&) { global.seed_set = true; });
  app.add_option("--workers", global.workers, "Worker threads for sweep execution");
  app.add_option("--out", global.out, "Output directory of the invoked stage");

  std::string spec_path, data_dir, algorithm, regime = "TT";
  std::string hyperparams_path, config_path, plan_path, runs_dir, strategy;
  int hidden_width = 32;

  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic dataset directory");
  generate->add_option("--spec", spec_path, "GenSpec JSON file")->required();

  CLI::App* quantify_cmd = app.add_subcommand("quantify", "Fingerprint a dataset directory");
  quantify_cmd->add_option("--data", data_dir, "Dataset directory")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "Train one algorithm on a dataset");
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  train_cmd->add_option("--algorithm", algorithm, "Algorithm name (e.g. ERM, GroupDRO)")->required();
  train_cmd->add_option("--regime", regime, "Attribute availability: TT, FT or FF");
  train_cmd->add_option("--hyperparams", hyperparams_path, "Hyperparameter JSON overrides");
  train_cmd->add_option("--config", config_path, "Train config JSON");
  train_cmd->add_option("--hidden-width", hidden_width, "MLP hidden width (0 = linear)");

  CLI::App* sweep = app.add_subcommand("sweep", "Run a full experiment plan");
  sweep->add_option("--plan", plan_path, "ExperimentPlan JSON file")->required();

  CLI::App* select_cmd = app.add_subcommand("select", "Apply a selection strategy to run logs");
  select_cmd->add_option("--runs", runs_dir, "Directory of .jsonl run logs")->required();
  select_cmd->add_option("--strategy", strategy, "Selection strategy name")->required();
  select_cmd->add_option("--regime", regime, "Attribute availability: TT, FT or FF");

  CLI::App* report = app.add_subcommand("report", "Generate report tables from sweep records");
  report->add_option("--runs", runs_dir, "Sweep output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(spec_path, global);
    if (quantify_cmd->parsed()) return cmd_quantify(data_dir, global.out);
    if (train_cmd->parsed()) {
      return cmd_train(data_dir, algorithm, regime, hyperparams_path, config_path, hidden_width,
                       global);
    }
    if (sweep->parsed()) return cmd_sweep(plan_path, global);
    if (select_cmd->parsed()) return cmd_select(runs_dir, strategy, regime);
    if (report->parsed()) return cmd_report(runs_dir, global);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
