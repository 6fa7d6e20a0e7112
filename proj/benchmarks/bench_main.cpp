#include <benchmark/benchmark.h>

#include "recal/gp/kernel.hpp"
#include "recal/gp/svgp.hpp"
#include "recal/gp/heads.hpp"
#include "recal/linalg.hpp"
#include "recal/metrics.hpp"
#include "recal/synth.hpp"

#include <numeric>

using namespace recal;

namespace {

CalibrationDataset make_data(Index n, std::uint64_t seed = 3) {
  SynthConfig config;
  config.kind = SynthKind::cosine;
  config.n = n;
  config.seed = seed;
  config.miscal = 2.0;
  return generate(config);
}

void BM_song_gram(benchmark::State& state) {
  const auto data = make_data(state.range(0));
  const auto inputs = gp::kernel_inputs(data);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::gram(inputs, 1.0));
  }
}

void BM_ldl_rescale(benchmark::State& state) {
  const Index k = state.range(0);
  GaussianSampler rng(7);
  Mat a(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) a(i, j) = rng();
  }
  Mat sigma = a * a.transpose();
  sigma.diagonal().array() += 0.5;
  const Vec w_lower = Vec::Ones(k * (k + 1) / 2);
  const Vec w_diag = Vec::Constant(k, 1.3);
  for (auto _ : state) {
    const auto ldl = ldl_decompose(sigma);
    benchmark::DoNotOptimize(gp::rescale_covariance(ldl, w_lower, w_diag));
  }
}

void BM_qce(benchmark::State& state) {
  const auto data = make_data(state.range(0));
  const auto preds = data.prediction_variants();
  const auto grid = QuantileGrid::regular(0.05, 0.95, 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        qce_mean_dim(preds, data.ground_truth, grid, 20, 0));
  }
}

void BM_elbo_step(benchmark::State& state) {
  const auto data = make_data(256);
  const auto inputs = gp::kernel_inputs(data);
  gp::SvgpConfig config;
  config.inducing = state.range(0);
  const auto model = gp::init_svgp(inputs, gp::HeadKind::normal, 1, config);
  const gp::NormalHeadLikelihood lik(data);
  std::vector<Index> batch(data.size());
  std::iota(batch.begin(), batch.end(), Index{0});
  Vec grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        gp::elbo_mc_grad(model, lik, inputs, batch, 128, 1, 1.0, grad));
  }
}

}  // namespace

BENCHMARK(BM_song_gram)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ldl_rescale)->Arg(4)->Arg(8)->Unit(benchmark::kNanosecond);
BENCHMARK(BM_qce)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_elbo_step)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
