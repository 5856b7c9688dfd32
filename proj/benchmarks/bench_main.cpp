#include <benchmark/benchmark.h>

#include <random>

#include "gfn/env_quarterdisc.hpp"
#include "gfn/env_torus.hpp"
#include "gfn/objectives.hpp"

namespace {

void BM_GridRollout(benchmark::State& state) {
  gfn::GridConfig cfg;
  gfn::QuarterDiscEnv env(cfg);
  std::mt19937_64 rng(1);
  for (auto _ : state) {
    auto batch = env.rollout_batch(static_cast<int>(state.range(0)), 0.0, rng);
    benchmark::DoNotOptimize(batch);
  }
}
BENCHMARK(BM_GridRollout)->Arg(32)->Arg(128);

void BM_GridTbStep(benchmark::State& state) {
  gfn::GridConfig cfg;
  gfn::QuarterDiscEnv env(cfg);
  std::mt19937_64 rng(1);
  auto batch = env.rollout_batch(128, 0.0, rng);
  for (auto _ : state) {
    gfn::Tape tape;
    auto lv = env.params().leaves(tape);
    auto terms = env.eval_batch(tape, lv, batch);
    gfn::Var loss = gfn::tb_loss(tape, lv.at("log_z"), terms);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(lv.at("log_z")));
  }
}
BENCHMARK(BM_GridTbStep);

void BM_TorusTbStep(benchmark::State& state) {
  gfn::TorusConfig cfg;
  gfn::TorusEnv env(cfg);
  std::mt19937_64 rng(1);
  auto batch = env.rollout_batch(100, 0.0, rng);
  for (auto _ : state) {
    gfn::Tape tape;
    auto lv = env.params().leaves(tape);
    auto terms = env.eval_batch(tape, lv, batch);
    gfn::Var loss = gfn::tb_loss(tape, lv.at("log_z"), terms);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(lv.at("log_z")));
  }
}
BENCHMARK(BM_TorusTbStep);

}  // namespace

BENCHMARK_MAIN();
