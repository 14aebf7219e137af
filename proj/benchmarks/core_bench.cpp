#include <benchmark/benchmark.h>

#include "ssgdlab/nn.hpp"
#include "ssgdlab/optim.hpp"
#include "ssgdlab/privacy.hpp"

namespace {

using namespace ssgdlab;

struct MlpFixture {
  Network net = Network::mlp({784, 128, 10}, LossKind::SoftmaxCrossEntropy);
  ParameterSet params = init_parameters(net, Rng(1));
  Batch batch;

  explicit MlpFixture(std::size_t batch_size) {
    Rng rng(2);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < batch_size; ++i) {
      Sample s;
      s.input = Tensor({784});
      for (std::size_t p = 0; p < 784; ++p) {
        s.input[p] = rng.uniform01();
      }
      s.label = static_cast<int>(rng.below(10));
      samples.push_back(std::move(s));
    }
    batch = make_batch(net, samples);
  }
};

void BM_ForwardMlp(benchmark::State& state) {
  MlpFixture fix(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const ForwardTrace trace = forward(fix.net, fix.params, fix.batch);
    benchmark::DoNotOptimize(trace.loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardMlp)->Arg(16)->Arg(256);

void BM_BackwardMlp(benchmark::State& state) {
  MlpFixture fix(static_cast<std::size_t>(state.range(0)));
  const ForwardTrace trace = forward(fix.net, fix.params, fix.batch);
  for (auto _ : state) {
    const GradientBundle g = backward(fix.net, fix.params, trace);
    benchmark::DoNotOptimize(g.layers[0].mat[0]);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BackwardMlp)->Arg(16)->Arg(256);

void BM_NormalizePerNeuron(benchmark::State& state) {
  MlpFixture fix(16);
  const ForwardTrace trace = forward(fix.net, fix.params, fix.batch);
  const GradientBundle g = backward(fix.net, fix.params, trace);
  for (auto _ : state) {
    const GradientBundle unit = optim::normalize_per_neuron(g, 1e-12);
    benchmark::DoNotOptimize(unit.layers[0].mat[0]);
  }
}
BENCHMARK(BM_NormalizePerNeuron);

void BM_SsgdStep(benchmark::State& state) {
  MlpFixture fix(16);
  optim::OptimizerSpec spec;
  spec.algorithm = optim::Algorithm::Ssgd;
  spec.lr = optim::LrSchedule::constant(0.1);
  spec.m = 4;
  optim::OptimizerState opt_state;
  const ForwardTrace trace = forward(fix.net, fix.params, fix.batch);
  const GradientBundle g = backward(fix.net, fix.params, trace);
  const std::vector<GradientBundle> bundles(4, g);
  for (auto _ : state) {
    optim::step(spec, opt_state, fix.net, fix.params, bundles);
  }
}
BENCHMARK(BM_SsgdStep);

void BM_LaplaceSampling(benchmark::State& state) {
  Rng rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(privacy::laplace(rng, 1.0));
  }
}
BENCHMARK(BM_LaplaceSampling);

void BM_LenetForward(benchmark::State& state) {
  Network net = Network::lenet5();
  ParameterSet params = init_parameters(net, Rng(4));
  Rng rng(5);
  std::vector<Sample> samples;
  for (int i = 0; i < 16; ++i) {
    Sample s;
    s.input = Tensor({1, 28, 28});
    for (std::size_t p = 0; p < 784; ++p) {
      s.input[p] = rng.uniform01();
    }
    s.label = static_cast<int>(rng.below(10));
    samples.push_back(std::move(s));
  }
  const Batch batch = make_batch(net, samples);
  for (auto _ : state) {
    const ForwardTrace trace = forward(net, params, batch);
    benchmark::DoNotOptimize(trace.loss);
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_LenetForward);

}  // namespace

BENCHMARK_MAIN();
