#include <benchmark/benchmark.h>

#include "ivdoa/net.hpp"
#include "ivdoa/pipeline.hpp"
#include "ivdoa/rng.hpp"
#include "ivdoa/scene.hpp"
#include "ivdoa/trainer.hpp"

using namespace ivdoa;

namespace {

const StftConfig kStft{8192, 960};

FoaSignal one_second_scene() {
  SceneSpec spec;
  spec.duration_s = 1.0;
  spec.seed = 1;
  SceneEvent ev;
  ev.onset_s = 0.1;
  ev.offset_s = 0.9;
  ev.direction = direction_from_degrees(40.0, 10.0);
  spec.events.push_back(ev);
  spec.reverb = {0.4, 0.0, 32};
  spec.noise = {true, 10.0, NoiseKind::White};
  return simulate_scene(spec).mixture;
}

TrainSample one_second_sample() {
  const FoaSignal sig = one_second_scene();
  const SpectrogramSet sp = stft_foa(sig, kStft);
  const MelFilterbank fb = mel_filterbank(96, kStft.fft_size, 48000.0);
  FeatureSet fs = make_features(sp, fb);
  TrainSample s;
  s.features = std::move(fs.x);
  s.iv_mel_norm = std::move(fs.iv_mel_norm);
  const std::size_t frames = s.features.frames;
  for (std::size_t t = 0; t < frames; ++t) {
    s.gt.azimuth.push_back(0.5);
    s.gt.elevation.push_back(0.1);
    s.gt.degenerate.push_back(0);
    s.z.push_back(1);
  }
  return s;
}

void BM_Stft(benchmark::State& state) {
  const FoaSignal sig = one_second_scene();
  MonoSignal mono{sig.channels[0], sig.sample_rate};
  for (auto _ : state) benchmark::DoNotOptimize(stft(mono, kStft));
}
BENCHMARK(BM_Stft)->Unit(benchmark::kMillisecond);

void BM_BaselinePipeline(benchmark::State& state) {
  const FoaSignal sig = one_second_scene();
  for (auto _ : state) benchmark::DoNotOptimize(run_baseline(sig, kStft, true));
}
BENCHMARK(BM_BaselinePipeline)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  SceneSpec spec;
  spec.duration_s = 1.0;
  spec.seed = 2;
  SceneEvent ev;
  ev.onset_s = 0.1;
  ev.offset_s = 0.9;
  ev.direction = direction_from_degrees(-60.0, 5.0);
  spec.events.push_back(ev);
  spec.reverb = {0.5, 0.0, 32};
  spec.noise = {true, 6.0, NoiseKind::White};
  for (auto _ : state) benchmark::DoNotOptimize(simulate_scene(spec));
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

void BM_ForwardEval(benchmark::State& state) {
  const TrainSample s = one_second_sample();
  const NetworkParams net = NetworkParams::init(NetConfig{}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, s.features, NetMode::Eval));
}
BENCHMARK(BM_ForwardEval)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const TrainSample s = one_second_sample();
  NetworkParams net = NetworkParams::init(NetConfig{}, 3);
  AdamState adam = AdamState::make(net);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(net, adam, s, 1e-3));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
