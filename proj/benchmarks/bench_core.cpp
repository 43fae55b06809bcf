// Microbenchmarks for the per-step hot paths: plant integration, network
// forwards, crossbar update rules, the on-chip byte generator, and one full
// training trial.

#include <benchmark/benchmark.h>

#include <random>

#include "memrl/device.hpp"
#include "memrl/networks.hpp"
#include "memrl/pendulum.hpp"
#include "memrl/seeds.hpp"
#include "memrl/training.hpp"

namespace {

using namespace memrl;

void BM_PlantStep(benchmark::State& state) {
  const PendulumConfig cfg;
  PendulumState s{0.0, 0.1, 0.05, -0.2};
  Action a = Action::CW;
  for (auto _ : state) {
    const StepResult r = step(s, a, cfg);
    benchmark::DoNotOptimize(r.state.alpha);
    a = flip(a);  // keep the trajectory bounded
    if (r.failed) s = PendulumState{0.0, 0.1, 0.05, -0.2};
  }
}
BENCHMARK(BM_PlantStep);

void BM_SeparateForward(benchmark::State& state) {
  std::mt19937_64 rng = make_rng(7);
  const SeparateNetWeights w = random_separate_weights(rng);
  const InputVector x{0.1, -0.2, 0.3, -0.4, 1.0};
  for (auto _ : state) {
    const ForwardTrace e = eval_forward(w, x);
    const ForwardTrace a = action_forward(w, x);
    benchmark::DoNotOptimize(e.value + a.prob);
  }
}
BENCHMARK(BM_SeparateForward);

void BM_SharedForward(benchmark::State& state) {
  std::mt19937_64 rng = make_rng(7);
  const SharedNetWeights w = random_shared_weights(rng);
  const InputVector x{0.1, -0.2, 0.3, -0.4, 1.0};
  for (auto _ : state) {
    const ForwardTrace t = shared_forward(w, x);
    benchmark::DoNotOptimize(t.value + t.prob);
  }
}
BENCHMARK(BM_SharedForward);

void BM_ManhattanUpdate(benchmark::State& state) {
  DeviceConfig dc;
  std::mt19937_64 rng = make_rng(11);
  Crossbar xb = make_crossbar(kHiddenCount, kInputCount, dc, rng);
  std::vector<int> signs(static_cast<std::size_t>(kHiddenCount) * kInputCount);
  std::mt19937_64 sign_rng = make_rng(13);
  for (auto& s : signs) s = static_cast<int>(sign_rng() % 3) - 1;
  for (auto _ : state) {
    manhattan_update(xb, signs, dc);
    benchmark::DoNotOptimize(xb.at(0, 0).pos.g);
  }
}
BENCHMARK(BM_ManhattanUpdate);

void BM_VariableAmplitudeUpdate(benchmark::State& state) {
  DeviceConfig dc;
  std::mt19937_64 rng = make_rng(11);
  Crossbar xb = make_crossbar(kHiddenCount, kInputCount, dc, rng);
  std::vector<double> dw(static_cast<std::size_t>(kHiddenCount) * kInputCount);
  std::mt19937_64 dw_rng = make_rng(13);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& d : dw) d = u(dw_rng);
  WriteStats stats;
  for (auto _ : state) {
    variable_amplitude_update(xb, dw, 1.0, dc, &stats);
    benchmark::DoNotOptimize(xb.at(0, 0).pos.g);
  }
}
BENCHMARK(BM_VariableAmplitudeUpdate);

void BM_Rng8(benchmark::State& state) {
  HardwareRng rng = make_hardware_rng(21);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rng8(rng));
  }
}
BENCHMARK(BM_Rng8);

void BM_TrainTrial(benchmark::State& state) {
  const DeviceConfig dc;
  std::mt19937_64 rng = make_rng(5);
  const SeparateNetWeights init = random_separate_weights(rng);
  const TrialEnv env{PendulumConfig{}, NormalizationBounds{}};
  TrainingConfig tc = TrainingConfig::for_approach(Approach::Exact);
  const PendulumState start{0.0, 0.0, 0.05, 0.0};
  std::uint64_t draw = 0;
  for (auto _ : state) {
    SeparateBackend agent(init, dc, SeparateBackend::WritePath::Exact, 3);
    ActionSampler sampler = ActionSampler::software(derive_seed(17, "bench", draw++));
    const TrialRecord rec =
        run_trial(agent, env, tc, tc.gamma, TrialMode::Train, start, sampler);
    benchmark::DoNotOptimize(rec.steps_survived);
  }
}
BENCHMARK(BM_TrainTrial);

}  // namespace

BENCHMARK_MAIN();
