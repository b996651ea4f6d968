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

#include <benchmark/benchmark.h>

#include "subpop/algorithms.hpp"
#include "subpop/metrics.hpp"
#include "subpop/quantify.hpp"
#include "subpop/shiftgen.hpp"
#include "subpop/trainer.hpp"

namespace {

using namespace subpop;

gen::GenSpec bench_spec(int n_train) {
  gen::GenSpec spec;
  spec.shift_type = quantify::ShiftType::kSC;
  spec.rho = 0.9;
  spec.noise_sigma = 0.85;
  spec.n_train = n_train;
  spec.n_val = 500;
  spec.n_test = 1000;
  spec.seed = 1;
  return spec;
}

void BM_GenerateDataset(benchmark::State& state) {
  const gen::GenSpec spec = bench_spec(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const DataBundle data = gen::generate(spec);
    benchmark::DoNotOptimize(data.train.size());
  }
  state.SetItemsProcessed(state.iterations() * (spec.n_train + spec.n_val + spec.n_test));
}
BENCHMARK(BM_GenerateDataset)->Arg(1000)->Arg(10000);

void BM_Fingerprint(benchmark::State& state) {
  const DataBundle data = gen::generate(bench_spec(static_cast<int>(state.range(0))));
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantify::fingerprint(data.train, &data.test).nmi);
  }
}
BENCHMARK(BM_Fingerprint)->Arg(10000);

// One forward/backward/update cycle of the default MLP on one minibatch.
void BM_TrainStep(benchmark::State& state) {
  const int batch_size = static_cast<int>(state.range(0));
  const DataBundle data = gen::generate(bench_spec(4000));
  train::Model model = train::Model::init(train::Architecture{4, 32, 2}, 3);
  const train::StratumIndex strata(data.train);
  Rng rng(7);
  Mat v_w1(model.w1.rows, model.w1.cols), v_b1(model.b1.rows, model.b1.cols);
  Mat v_hw(model.head_w.rows, model.head_w.cols), v_hb(model.head_b.rows, model.head_b.cols);

  for (auto _ : state) {
    const auto indices =
        train::sample_indices(data.train, strata, train::Sampling::kUniform, batch_size, rng);
    const train::Batch batch = train::make_batch(data.train, indices);
    ad::Tape tape;
    const train::ModelVars vars = train::forward(tape, model, batch.x);
    const ad::VarId loss = algo::erm_loss(tape, vars, batch);
    tape.backward(loss);
    auto sgd = [](Mat* p, Mat* v, const Mat& g) {
      for (int i = 0; i < p->size(); ++i) {
        v->v[i] = 0.9 * v->v[i] + g.v[i];
        p->v[i] -= 0.01 * v->v[i];
      }
    };
    sgd(&model.w1, &v_w1, tape.grad(vars.w1));
    sgd(&model.b1, &v_b1, tape.grad(vars.b1));
    sgd(&model.head_w, &v_hw, tape.grad(vars.head_w));
    sgd(&model.head_b, &v_hb, tape.grad(vars.head_b));
  }
  state.SetItemsProcessed(state.iterations() * batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(128)->Arg(512);

void BM_GroupDroStep(benchmark::State& state) {
  const DataBundle data = gen::generate(bench_spec(4000));
  train::Model model = train::Model::init(train::Architecture{4, 32, 2}, 3);
  const train::StratumIndex strata(data.train);
  Rng rng(7);
  algo::GroupDroState dro = algo::GroupDroState::uniform(4);
  for (auto _ : state) {
    const auto indices =
        train::sample_indices(data.train, strata, train::Sampling::kUniform, 128, rng);
    const train::Batch batch = train::make_batch(data.train, indices);
    ad::Tape tape;
    const train::ModelVars vars = train::forward(tape, model, batch.x);
    const ad::VarId loss = algo::groupdro_loss(tape, vars, batch, &dro, 0.01);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(vars.head_w).v.data());
  }
}
BENCHMARK(BM_GroupDroStep);

void BM_MmdPenalty(benchmark::State& state) {
  const DataBundle data = gen::generate(bench_spec(4000));
  train::Model model = train::Model::init(train::Architecture{4, 32, 2}, 3);
  const train::StratumIndex strata(data.train);
  Rng rng(7);
  const auto indices = train::sample_indices(data.train, strata, train::Sampling::kUniform,
                                             static_cast<int>(state.range(0)), rng);
  const train::Batch batch = train::make_batch(data.train, indices);
  for (auto _ : state) {
    ad::Tape tape;
    const train::ModelVars vars = train::forward(tape, model, batch.x);
    const ad::VarId loss = tape.add(algo::erm_loss(tape, vars, batch),
                                    tape.scale(algo::mmd_penalty(tape, vars, batch), 1.0));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(vars.w1).v.data());
  }
}
BENCHMARK(BM_MmdPenalty)->Arg(64)->Arg(128);

void BM_EvaluateMetrics(benchmark::State& state) {
  set_warning_output(false);
  const DataBundle data = gen::generate(bench_spec(4000));
  const train::Model model = train::Model::init(train::Architecture{4, 32, 2}, 3);
  const std::vector<Prediction> preds = train::predict(model, data.test);
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::evaluate(preds, data.test, true).worst_acc);
  }
  state.SetItemsProcessed(state.iterations() * data.test.size());
}
BENCHMARK(BM_EvaluateMetrics);

}  // namespace

BENCHMARK_MAIN();
