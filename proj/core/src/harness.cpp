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

#include "subpop/harness.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace subpop::harness {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

std::uint64_t coordinate_hash(const ExperimentPlan& plan, const std::string& dataset,
                              const std::string& algorithm, const std::string& regime, int trial,
                              int seed_index) {
  std::uint64_t h = stable_hash("subpop_run");
  h = stable_hash_combine(h, std::to_string(plan.plan_seed));
  h = stable_hash_combine(h, dataset);
  h = stable_hash_combine(h, algorithm);
  h = stable_hash_combine(h, regime);
  h = stable_hash_combine(h, std::to_string(trial));
  h = stable_hash_combine(h, std::to_string(seed_index));
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

nlohmann::json hyperparams_to_json(const std::map<std::string, double>& hp) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : hp) j[k] = v;
  return j;
}

}  // namespace

ExperimentPlan plan_from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ExperimentPlan plan;
  for (const auto& d : j.at("datasets")) {
    DatasetSpec spec;
    spec.name = d.at("name").get<std::string>();
    if (d.contains("gen")) spec.generator = gen::spec_from_json_string(d["gen"].dump());
    if (d.contains("csv_dir")) spec.csv_dir = d["csv_dir"].get<std::string>();
    if (!spec.generator.has_value() && !spec.csv_dir.has_value()) {
      throw std::invalid_argument("dataset '" + spec.name + "' needs either gen or csv_dir");
    }
    plan.datasets.push_back(std::move(spec));
  }
  for (const auto& a : j.at("algorithms")) {
    plan.algorithms.push_back(algo::algorithm_from_string(a.get<std::string>()));
  }
  for (const auto& r : j.at("regimes")) {
    plan.regimes.push_back(select::regime_from_string(r.get<std::string>()));
  }
  if (j.contains("num_seeds")) plan.num_seeds = j["num_seeds"].get<int>();
  if (j.contains("num_trials")) plan.num_trials = j["num_trials"].get<int>();
  if (j.contains("selection")) plan.selection = select::strategy_from_string(j["selection"].get<std::string>());
  if (j.contains("plan_seed")) plan.plan_seed = j["plan_seed"].get<std::uint64_t>();
  if (j.contains("hidden_width")) plan.hidden_width = j["hidden_width"].get<int>();
  if (j.contains("out_dir")) plan.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("base_config")) {
    const auto& c = j["base_config"];
    if (c.contains("learning_rate")) plan.base_config.learning_rate = c["learning_rate"].get<double>();
    if (c.contains("momentum")) plan.base_config.momentum = c["momentum"].get<double>();
    if (c.contains("batch_size")) plan.base_config.batch_size = c["batch_size"].get<int>();
    if (c.contains("num_steps")) plan.base_config.num_steps = c["num_steps"].get<int>();
    if (c.contains("eval_every")) plan.base_config.eval_every = c["eval_every"].get<int>();
    if (c.contains("sampling")) plan.base_config.sampling = train::sampling_from_string(c["sampling"].get<std::string>());
    if (c.contains("weighting")) plan.base_config.weighting = train::weighting_from_string(c["weighting"].get<std::string>());
  }
  return plan;
}

ExperimentPlan plan_from_json_file(const std::string& path) {
  return plan_from_json_string(read_file(path));
}

std::string to_json_string(const RunRecord& r) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["algorithm"] = r.algorithm;
  j["regime"] = r.regime;
  j["trial"] = r.trial;
  j["seed_index"] = r.seed_index;
  j["is_final"] = r.is_final;
  j["run_seed"] = r.run_seed;
  j["hyperparams"] = hyperparams_to_json(r.hyperparams);
  j["run_log_path"] = r.run_log_path;
  j["selected_checkpoint"] = r.selected_checkpoint;
  j["validation_score"] = r.validation_score;
  j["test"] = nlohmann::json::parse(metrics::to_json_string(r.test_report));
  j["dominant_shift"] = r.dominant_shift;
  j["wall_time_sec"] = r.wall_time_sec;
  j["status"] = r.status;
  j["diagnostic"] = r.diagnostic;
  return j.dump();
}

RunRecord record_from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RunRecord r;
  r.dataset = j.at("dataset").get<std::string>();
  r.algorithm = j.at("algorithm").get<std::string>();
  r.regime = j.at("regime").get<std::string>();
  r.trial = j.at("trial").get<int>();
  r.seed_index = j.at("seed_index").get<int>();
  r.is_final = j.at("is_final").get<bool>();
  r.run_seed = j.at("run_seed").get<std::uint64_t>();
  for (const auto& [k, v] : j.at("hyperparams").items()) r.hyperparams[k] = v.get<double>();
  r.run_log_path = j.at("run_log_path").get<std::string>();
  r.selected_checkpoint = j.at("selected_checkpoint").get<int>();
  r.validation_score = j.at("validation_score").get<double>();
  if (j.at("status").get<std::string>() == "ok") {
    r.test_report = metrics::report_from_json_string(j.at("test").dump());
  }
  r.dominant_shift = j.at("dominant_shift").get<std::string>();
  r.wall_time_sec = j.at("wall_time_sec").get<double>();
  r.status = j.at("status").get<std::string>();
  r.diagnostic = j.at("diagnostic").get<std::string>();
  return r;
}

bool records_equivalent(const RunRecord& a, const RunRecord& b) {
  RunRecord a_copy = a;
  RunRecord b_copy = b;
  a_copy.wall_time_sec = 0.0;
  b_copy.wall_time_sec = 0.0;
  return to_json_string(a_copy) == to_json_string(b_copy);
}

DataBundle realize_dataset(const DatasetSpec& spec) {
  if (spec.generator.has_value()) return gen::generate(*spec.generator);
  if (spec.csv_dir.has_value()) return load_dataset_dir(*spec.csv_dir);
  throw std::invalid_argument("dataset spec '" + spec.name + "' has no source");
}

namespace {

struct ComboTask {
  int dataset_index = 0;
  algo::AlgorithmId algorithm = algo::AlgorithmId::kErm;
  select::AvailabilityRegime regime;
};

struct RunOutcome {
  RunRecord record;
  bool executed = false;
};

// Runs (or loads) one training run and persists its record and log.
RunOutcome execute_run(const ExperimentPlan& plan, const DataBundle& data,
                       const std::string& dataset_name, const std::string& shift_label,
                       algo::AlgorithmId algorithm, const select::AvailabilityRegime& regime,
                       int trial, int seed_index, const std::map<std::string, double>& hyperparams) {
  const std::string regime_name = select::to_string(regime);
  const std::uint64_t coord =
      coordinate_hash(plan, dataset_name, to_string(algorithm), regime_name, trial, seed_index);
  const std::string stem = hash_hex(coord);
  const fs::path record_path = fs::path(plan.out_dir) / "records" / (stem + ".json");
  const fs::path log_rel = fs::path("logs") / (stem + ".jsonl");

  RunOutcome outcome;
  if (fs::exists(record_path)) {
    outcome.record = record_from_json_string(read_file(record_path.string()));
    return outcome;
  }

  RunRecord record;
  record.dataset = dataset_name;
  record.algorithm = to_string(algorithm);
  record.regime = regime_name;
  record.trial = trial;
  record.seed_index = seed_index;
  record.is_final = seed_index > 0;
  record.run_seed = coord;
  record.hyperparams = hyperparams;
  record.run_log_path = log_rel.string();
  record.dominant_shift = shift_label;

  train::Architecture arch;
  arch.input_dim = data.train.feature_dim();
  arch.hidden_width = plan.hidden_width;
  arch.num_classes = data.train.num_classes();

  const auto start = std::chrono::steady_clock::now();
  try {
    algo::AlgorithmSpec spec{algorithm, hyperparams};
    const algo::RunOutput run = algo::run_algorithm(spec, data, arch, regime, plan.base_config,
                                                    record.run_seed, /*allow_degeneration=*/true);
    train::write_run_log(run.checkpoints, (fs::path(plan.out_dir) / log_rel).string());

    // The record carries the plan-strategy choice over this run's own
    // checkpoints; trial comparison happens later from the logs.
    select::RunLog log;
    for (int i = 0; i < static_cast<int>(run.checkpoints.size()); ++i) {
      const train::Checkpoint& c = run.checkpoints[static_cast<std::size_t>(i)];
      log.push_back(select::CheckpointRow{i, c.step, c.stage, c.val_report, c.test_report});
    }
    const int chosen = select::select_checkpoint(log, plan.selection, regime);
    record.selected_checkpoint = chosen;
    record.validation_score =
        select::strategy_score(plan.selection, log[static_cast<std::size_t>(chosen)], regime);
    record.test_report = run.checkpoints[static_cast<std::size_t>(chosen)].test_report;
    record.status = "ok";
  } catch (const std::exception& e) {
    record.status = "failed";
    record.diagnostic = e.what();
  }
  record.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_file_atomic(record_path.string(), to_json_string(record) + "\n");
  outcome.record = record;
  outcome.executed = true;
  return outcome;
}

}  // namespace

PlanResult run_plan(const ExperimentPlan& plan, int workers) {
  if (plan.out_dir.empty()) throw std::invalid_argument("run_plan: out_dir must be set");
  if (plan.num_trials < 1 || plan.num_seeds < 1) {
    throw std::invalid_argument("run_plan: num_trials and num_seeds must be positive");
  }
  fs::create_directories(fs::path(plan.out_dir) / "records");
  fs::create_directories(fs::path(plan.out_dir) / "logs");

  // Datasets realize once, up front; bundles are immutable and shared.
  std::vector<DataBundle> bundles;
  std::vector<std::string> shift_labels;
  bundles.reserve(plan.datasets.size());
  for (const DatasetSpec& spec : plan.datasets) {
    bundles.push_back(realize_dataset(spec));
    const quantify::ShiftFingerprint fp = quantify::fingerprint(bundles.back().train, &bundles.back().test);
    shift_labels.push_back(quantify::to_string(quantify::dominant_shift(fp)));
  }

  std::vector<ComboTask> combos;
  for (int d = 0; d < static_cast<int>(plan.datasets.size()); ++d) {
    for (algo::AlgorithmId a : plan.algorithms) {
      for (const select::AvailabilityRegime& r : plan.regimes) {
        combos.push_back(ComboTask{d, a, r});
      }
    }
  }

  std::mutex mu;
  PlanResult result;
  std::size_t next_combo = 0;

  auto worker_fn = [&]() {
    while (true) {
      ComboTask task;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next_combo >= combos.size()) return;
        task = combos[next_combo++];
      }
      const std::string& dataset_name = plan.datasets[static_cast<std::size_t>(task.dataset_index)].name;
      const DataBundle& data = bundles[static_cast<std::size_t>(task.dataset_index)];
      const std::string& shift = shift_labels[static_cast<std::size_t>(task.dataset_index)];
      const std::string regime_name = select::to_string(task.regime);

      std::vector<RunOutcome> outcomes;
      auto trial_hyperparams = [&](int t) {
        Rng hp_rng(coordinate_hash(plan, dataset_name, to_string(task.algorithm), regime_name, t, -1));
        return algo::sample_hyperparams(task.algorithm, hp_rng);
      };

      int winning_trial = 0;
      bool have_winner = plan.num_trials == 1;  // nothing to search over

      if (plan.num_trials > 1) {
        // Phase 1: the random search. Trial t's hyperparameters come from a
        // coordinate-derived stream, so they are stable across reruns.
        for (int t = 0; t < plan.num_trials; ++t) {
          outcomes.push_back(execute_run(plan, data, dataset_name, shift, task.algorithm,
                                         task.regime, t, /*seed_index=*/0, trial_hyperparams(t)));
        }

        // Phase 2: pick the winning trial from the persisted logs.
        std::vector<select::RunLog> logs(static_cast<std::size_t>(plan.num_trials));
        for (int t = 0; t < plan.num_trials; ++t) {
          const RunRecord& rec = outcomes[static_cast<std::size_t>(t)].record;
          if (rec.status == "ok") {
            logs[static_cast<std::size_t>(t)] =
                select::load_run_log((fs::path(plan.out_dir) / rec.run_log_path).string());
          }
        }
        bool any_ok = false;
        for (const auto& log : logs) any_ok |= !log.empty();
        if (any_ok) {
          winning_trial = select::select_trial(logs, plan.selection, task.regime).trial;
          have_winner = true;
        }
      }

      // Phase 3: fresh-seed reruns of the winner.
      if (have_winner) {
        const std::map<std::string, double> winning_hp = trial_hyperparams(winning_trial);
        for (int s = 1; s <= plan.num_seeds; ++s) {
          outcomes.push_back(execute_run(plan, data, dataset_name, shift, task.algorithm,
                                         task.regime, winning_trial, s, winning_hp));
        }
      }

      std::lock_guard<std::mutex> lock(mu);
      for (RunOutcome& o : outcomes) {
        if (o.executed) {
          ++result.executed;
        } else {
          ++result.cached;
        }
        if (o.record.status == "failed") ++result.failed;
        result.records.push_back(std::move(o.record));
      }
    }
  };

  const int thread_count = std::max(1, workers);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(thread_count));
  for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker_fn);
  for (std::thread& t : pool) t.join();

  // Deterministic record order regardless of thread interleaving.
  std::sort(result.records.begin(), result.records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.dataset, a.algorithm, a.regime, a.trial, a.seed_index) <
           std::tie(b.dataset, b.algorithm, b.regime, b.trial, b.seed_index);
  });

  // Consolidated stream next to the per-run files.
  {
    std::ofstream jsonl(fs::path(plan.out_dir) / "records.jsonl");
    for (const RunRecord& r : result.records) jsonl << to_json_string(r) << "\n";
  }
  return result;
}

std::vector<ImprovementRow> report_improvement_over_erm(const std::vector<RunRecord>& records) {
  // Mean final-phase WGA per (dataset, algorithm).
  std::map<std::pair<std::string, std::string>, std::vector<double>> wga;
  std::map<std::string, std::string> dataset_shift;
  for (const RunRecord& r : records) {
    if (!r.is_final || r.status != "ok") continue;
    wga[{r.dataset, r.algorithm}].push_back(r.test_report.worst_acc);
    dataset_shift[r.dataset] = r.dominant_shift;
  }

  std::map<std::string, double> erm_baseline;
  std::set<std::string> datasets;
  for (const auto& [key, values] : wga) {
    datasets.insert(key.first);
    if (key.second == "ERM") erm_baseline[key.first] = mean_sd(values).mean;
  }
  for (const std::string& d : datasets) {
    if (!erm_baseline.count(d)) {
      throw std::invalid_argument("report_improvement_over_erm: dataset '" + d +
                                  "' has no ERM baseline");
    }
  }

  // Delta per dataset, then averaged within (shift, algorithm).
  std::map<std::pair<std::string, std::string>, std::vector<double>> deltas;
  for (const auto& [key, values] : wga) {
    const double delta = mean_sd(values).mean - erm_baseline[key.first];
    deltas[{dataset_shift[key.first], key.second}].push_back(delta);
  }
  std::vector<ImprovementRow> rows;
  for (const auto& [key, values] : deltas) {
    ImprovementRow row;
    row.shift = key.first;
    row.algorithm = key.second;
    row.delta_wga = mean_sd(values).mean;
    row.num_datasets = static_cast<int>(values.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_improvement_csv(const std::vector<ImprovementRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "shift,algorithm,delta_wga,num_datasets\n";
  for (const ImprovementRow& r : rows) {
    out << r.shift << "," << r.algorithm << "," << r.delta_wga << "," << r.num_datasets << "\n";
  }
}

const char* to_string(StageScheme scheme) {
  switch (scheme) {
    case StageScheme::kUniform: return "uniform";
    case StageScheme::kBalanced: return "balanced";
    case StageScheme::kReweight: return "reweight";
  }
  return "?";
}

namespace {

void apply_scheme(train::TrainConfig* config, StageScheme scheme) {
  switch (scheme) {
    case StageScheme::kUniform:
      config->sampling = train::Sampling::kUniform;
      config->weighting = train::Weighting::kNone;
      break;
    case StageScheme::kBalanced:
      config->sampling = train::Sampling::kGroupBalanced;
      config->weighting = train::Weighting::kNone;
      break;
    case StageScheme::kReweight:
      config->sampling = train::Sampling::kUniform;
      config->weighting = train::Weighting::kGroupInverse;
      break;
  }
}

}  // namespace

std::vector<GridRecord> run_stage_grid(const DataBundle& data, const std::string& dataset_name,
                                       const std::string& shift_label,
                                       const train::Architecture& arch,
                                       const train::TrainConfig& base_config, int num_seeds,
                                       std::uint64_t seed) {
  constexpr StageScheme kSchemes[] = {StageScheme::kUniform, StageScheme::kBalanced,
                                      StageScheme::kReweight};
  const train::LossFn erm = [](ad::Tape& t, const train::ModelVars& v, const train::Batch& b, int) {
    return algo::erm_loss(t, v, b);
  };

  std::vector<GridRecord> records;
  for (StageScheme rep : kSchemes) {
    for (StageScheme cls : kSchemes) {
      for (int s = 0; s < num_seeds; ++s) {
        const std::uint64_t run_seed = stable_hash_combine(
            seed, dataset_name + "/" + to_string(rep) + "/" + to_string(cls) + "/" + std::to_string(s));
        train::TrainConfig cfg1 = base_config;
        cfg1.seed = run_seed;
        apply_scheme(&cfg1, rep);
        train::TrainConfig cfg2 = base_config;
        cfg2.seed = stable_hash_combine(run_seed, "stage2");
        cfg2.num_steps = std::max(1, base_config.num_steps / 2);
        apply_scheme(&cfg2, cls);

        train::Model model = train::Model::init(arch, stable_hash_combine(run_seed, "model"));
        train::EvalContext eval;
        eval.test = &data.test;
        const std::vector<train::Checkpoint> checkpoints = train::two_stage_train(
            model, data.train, eval, cfg1, cfg2, train::Stage2Target::kHeadOnly, erm, erm);
        if (checkpoints.empty()) throw std::logic_error("run_stage_grid: no checkpoints");

        GridRecord record;
        record.dataset = dataset_name;
        record.shift = shift_label;
        record.representation = rep;
        record.classifier = cls;
        record.seed_index = s;
        record.test_wga = checkpoints.back().test_report.worst_acc;
        records.push_back(std::move(record));
      }
    }
  }
  return records;
}

std::map<std::string, std::vector<std::vector<double>>> report_rep_vs_classifier(
    const std::vector<GridRecord>& records) {
  std::map<std::string, std::vector<std::vector<std::vector<double>>>> samples;
  for (const GridRecord& r : records) {
    auto& table = samples[r.shift];
    if (table.empty()) table.assign(3, std::vector<std::vector<double>>(3));
    table[static_cast<std::size_t>(r.representation)][static_cast<std::size_t>(r.classifier)]
        .push_back(r.test_wga);
  }
  std::map<std::string, std::vector<std::vector<double>>> out;
  for (const auto& [shift, table] : samples) {
    std::vector<std::vector<double>> means(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (table[i][j].empty()) throw std::invalid_argument("report_rep_vs_classifier: missing cell");
        means[i][j] = mean_sd(table[i][j]).mean;
      }
    }
    out[shift] = std::move(means);
  }
  return out;
}

void write_grid_csv(const std::map<std::string, std::vector<std::vector<double>>>& tables,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "shift,representation,classifier,mean_wga\n";
  constexpr const char* kNames[] = {"uniform", "balanced", "reweight"};
  for (const auto& [shift, table] : tables) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        out << shift << "," << kNames[i] << "," << kNames[j] << "," << table[i][j] << "\n";
      }
    }
  }
}

std::vector<CorrelationRow> report_metric_correlations(const std::vector<RunRecord>& records,
                                                       const std::string& scatter_dir) {
  struct MetricAccessor {
    const char* name;
    double (*get)(const metrics::MetricsReport&);
  };
  static const MetricAccessor kMetrics[] = {
      {"adjusted_acc", [](const metrics::MetricsReport& m) { return m.adjusted_acc; }},
      {"balanced_acc", [](const metrics::MetricsReport& m) { return m.balanced_acc; }},
      {"avg_acc", [](const metrics::MetricsReport& m) { return m.avg_acc; }},
      {"worst_precision", [](const metrics::MetricsReport& m) { return m.worst_precision; }},
      {"avg_precision", [](const metrics::MetricsReport& m) { return m.avg_precision; }},
      {"worst_f1", [](const metrics::MetricsReport& m) { return m.worst_f1; }},
      {"ece", [](const metrics::MetricsReport& m) { return m.ece; }},
  };

  if (!scatter_dir.empty()) fs::create_directories(scatter_dir);
  std::map<std::string, std::vector<const RunRecord*>> by_dataset;
  for (const RunRecord& r : records) {
    if (r.status == "ok") by_dataset[r.dataset].push_back(&r);
  }

  std::vector<CorrelationRow> rows;
  for (const auto& [dataset, recs] : by_dataset) {
    std::vector<double> wga;
    wga.reserve(recs.size());
    for (const RunRecord* r : recs) wga.push_back(r->test_report.worst_acc);
    for (const MetricAccessor& metric : kMetrics) {
      std::vector<double> values;
      values.reserve(recs.size());
      for (const RunRecord* r : recs) values.push_back(metric.get(r->test_report));

      CorrelationRow row;
      row.dataset = dataset;
      row.metric = metric.name;
      row.num_points = static_cast<int>(values.size());
      double r_val = 0.0, slope = 0.0;
      row.defined = pearson(wga, values, &r_val, &slope);
      row.pearson_r = r_val;
      row.slope = slope;
      rows.push_back(row);

      if (!scatter_dir.empty()) {
        std::ofstream scatter(fs::path(scatter_dir) / (dataset + "_" + metric.name + ".csv"));
        scatter << "wga," << metric.name << "\n";
        for (std::size_t i = 0; i < wga.size(); ++i) scatter << wga[i] << "," << values[i] << "\n";
      }
    }
  }
  return rows;
}

void write_correlation_csv(const std::vector<CorrelationRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "dataset,metric,defined,pearson_r,slope,num_points\n";
  for (const CorrelationRow& r : rows) {
    out << r.dataset << "," << r.metric << "," << (r.defined ? "true" : "false") << ","
        << r.pearson_r << "," << r.slope << "," << r.num_points << "\n";
  }
}

std::vector<RunRecord> load_records(const std::string& out_dir) {
  std::vector<RunRecord> records;
  const fs::path dir = fs::path(out_dir) / "records";
  if (!fs::exists(dir)) return records;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  records.reserve(paths.size());
  for (const fs::path& p : paths) records.push_back(record_from_json_string(read_file(p.string())));
  return records;
}

}  // namespace subpop::harness
