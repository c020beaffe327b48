/// @file bench_kernels.cpp
/// @brief Serial vs OpenMP-parallel (over samples) throughput of the network
///        kernels, the weak-form loss, batched inference and the classical
///        solver ensemble.
///
/// Each benchmark takes Exec as its first argument: 0 = Serial, 1 = Parallel.
#include <benchmark/benchmark.h>

#include "speconet/app.hpp"
#include "speconet/rng.hpp"

using namespace speconet;

namespace {

Exec exec_arg(const benchmark::State& st) { return st.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  NormalSampler g(seed);
  std::vector<double> v(n);
  for (double& x : v) x = g.standard();
  return v;
}

// Velocity-network shape of the 2d-forcing preset (24^2 input grid).
const kernels::ConvShape kShape{2, 2, 10, 9, 24};

void BM_ConvForward(benchmark::State& st) {
  const Exec e = exec_arg(st);
  const int S = static_cast<int>(st.range(1));
  const auto k = randn(kShape.kernel_len(), 1), b = randn(10, 2), x = randn(S * kShape.input_len(), 3);
  std::vector<double> z(S * kShape.output_len());
  for (auto _ : st) {
    kernels::conv_forward(e, kShape, S, k, b, x, z);
    benchmark::DoNotOptimize(z.data());
  }
  st.SetItemsProcessed(st.iterations() * S);
}

void BM_ConvBackward(benchmark::State& st) {
  const Exec e = exec_arg(st);
  const int S = static_cast<int>(st.range(1));
  const auto x = randn(S * kShape.input_len(), 3), dz = randn(S * kShape.output_len(), 4);
  std::vector<double> dk(kShape.kernel_len()), db(10);
  for (auto _ : st) {
    kernels::conv_backward(e, kShape, S, x, dz, dk, db);
    benchmark::DoNotOptimize(dk.data());
  }
  st.SetItemsProcessed(st.iterations() * S);
}

void BM_LossAndGradient(benchmark::State& st) {
  const Exec e = exec_arg(st);
  const int S = static_cast<int>(st.range(1));
  RunConfig cfg = preset_config("2d-forcing");
  cfg.modes = 12;
  cfg.train.arch = {3, 9, 3, 9};
  const auto prob = make_problem(cfg, make_samples(cfg, S));
  const auto ops = SolverOperators::build(*prob.space, prob.solver);
  std::vector<SampleContext> ctx;
  for (const auto& in : prob.inputs) ctx.push_back(make_context(prob.space, prob.solver, ops, in, prob.kind));
  const auto batch = prepare_u_step(e, ctx, prob.solver.dt);
  const auto net = init_net(velocity_conv(*prob.space, 3, 9), velocity_out_len(ops, 2), 1, 7);
  std::vector<double> grad;
  for (auto _ : st) benchmark::DoNotOptimize(net_loss(e, net, 0, batch, true, &grad));
  st.SetItemsProcessed(st.iterations() * S);
}

// Trained-model inference map over a batch (toy model, 10 steps).
void BM_Inference(benchmark::State& st) {
  const Exec e = exec_arg(st);
  const int S = static_cast<int>(st.range(1));
  RunConfig cfg = preset_config("toy");
  cfg.solver.steps = 10;
  cfg.train.schedule.block_size = 10;
  cfg.train.schedule.max_iter_u = cfg.train.schedule.max_iter_phi = 20;
  cfg.train.divergence_factor = 1e300;
  static const TrainedModel model = train_sequential(make_problem(cfg, make_samples(cfg, 2)), cfg.train).model;
  const auto prob = make_problem(cfg, make_samples(cfg, S));
  for (auto _ : st) benchmark::DoNotOptimize(infer(model, prob, e));
  st.SetItemsProcessed(st.iterations() * S);
}

// Classical solver over an ensemble (perturbed preset, 10 steps).
void BM_OracleEnsemble(benchmark::State& st) {
  const Exec e = exec_arg(st);
  const int S = static_cast<int>(st.range(1));
  RunConfig cfg = preset_config("perturbed");
  cfg.solver.steps = 10;
  const auto space = make_space(cfg);
  const auto samples = make_samples(cfg, S);
  for (auto _ : st) benchmark::DoNotOptimize(oracle_runs(space, cfg.solver, samples, e));
  st.SetItemsProcessed(st.iterations() * S);
}

void args(benchmark::internal::Benchmark* b) {
  for (int e : {0, 1})
    for (int s : {8, 64}) b->Args({e, s});
  b->ArgNames({"parallel", "samples"});
}

}  // namespace

BENCHMARK(BM_ConvForward)->Apply(args);
BENCHMARK(BM_ConvBackward)->Apply(args);
BENCHMARK(BM_LossAndGradient)->Apply(args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Inference)->Apply(args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleEnsemble)->Apply(args)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
