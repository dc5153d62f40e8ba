// Serial reference kernels against their OpenMP versions, at the shapes the
// calibration network and the ADC simulation actually use.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "deepadc/kernels/conv1d.hpp"
#include "deepadc/kernels/interpolate.hpp"
#include "deepadc/kernels/lstm.hpp"

namespace k = deepadc::kernels;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// batch 256 through the 64 -> 128 channel block, 64 samples per window
const k::Conv1dShape kConv{256, 64, 128, 64, 3, 1};

template <bool Parallel>
void conv_forward(benchmark::State& st) {
  const auto x = noise(kConv.batch * kConv.in_ch * kConv.length, 1);
  const auto w = noise(kConv.out_ch * kConv.in_ch * kConv.kernel, 2);
  const auto b = noise(kConv.out_ch, 3);
  std::vector<float> y(kConv.batch * kConv.out_ch * kConv.out_length());
  for (auto _ : st) {
    if constexpr (Parallel)
      k::parallel::conv1d_forward(kConv, x.data(), w.data(), b.data(), y.data());
    else
      k::serial::conv1d_forward(kConv, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * kConv.batch);
}

template <bool Parallel>
void conv_backward(benchmark::State& st) {
  const auto x = noise(kConv.batch * kConv.in_ch * kConv.length, 1);
  const auto w = noise(kConv.out_ch * kConv.in_ch * kConv.kernel, 2);
  const auto dy = noise(kConv.batch * kConv.out_ch * kConv.out_length(), 4);
  std::vector<float> dx(x.size()), dw(w.size()), db(kConv.out_ch);
  for (auto _ : st) {
    if constexpr (Parallel)
      k::parallel::conv1d_backward(kConv, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    else
      k::serial::conv1d_backward(kConv, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dw.data());
  }
  st.SetItemsProcessed(st.iterations() * kConv.batch);
}

// first recurrent layer: 128 features in, 64 hidden, 64 steps
const k::LstmShape kLstm{256, 64, 128, 64};

template <bool Parallel>
void lstm_forward(benchmark::State& st) {
  const auto x = noise(kLstm.batch * kLstm.steps * kLstm.in, 1);
  const auto wih = noise(4 * kLstm.hidden * kLstm.in, 2);
  const auto whh = noise(4 * kLstm.hidden * kLstm.hidden, 3);
  const auto b = noise(4 * kLstm.hidden, 4);
  std::vector<float> y(kLstm.batch * kLstm.steps * kLstm.hidden);
  k::LstmCache<float> cache;
  for (auto _ : st) {
    if constexpr (Parallel)
      k::parallel::lstm_forward(kLstm, x.data(), wih.data(), whh.data(), b.data(), y.data(), &cache);
    else
      k::serial::lstm_forward(kLstm, x.data(), wih.data(), whh.data(), b.data(), y.data(), &cache);
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * kLstm.batch);
}

template <bool Parallel>
void lstm_backward(benchmark::State& st) {
  const auto x = noise(kLstm.batch * kLstm.steps * kLstm.in, 1);
  const auto wih = noise(4 * kLstm.hidden * kLstm.in, 2);
  const auto whh = noise(4 * kLstm.hidden * kLstm.hidden, 3);
  const auto b = noise(4 * kLstm.hidden, 4);
  const auto dy = noise(kLstm.batch * kLstm.steps * kLstm.hidden, 5);
  std::vector<float> y(dy.size()), dx(x.size()), dwih(wih.size()), dwhh(whh.size()), db(b.size());
  k::LstmCache<float> cache;
  k::serial::lstm_forward(kLstm, x.data(), wih.data(), whh.data(), b.data(), y.data(), &cache);
  for (auto _ : st) {
    if constexpr (Parallel)
      k::parallel::lstm_backward(kLstm, x.data(), wih.data(), whh.data(), y.data(), cache, dy.data(), dx.data(),
                                 dwih.data(), dwhh.data(), db.data());
    else
      k::serial::lstm_backward(kLstm, x.data(), wih.data(), whh.data(), y.data(), cache, dy.data(), dx.data(),
                               dwih.data(), dwhh.data(), db.data());
    benchmark::DoNotOptimize(dwih.data());
  }
  st.SetItemsProcessed(st.iterations() * kLstm.batch);
}

// one channel's worth of non-uniform sampling: 2^16 output points
template <bool Parallel>
void interpolate(benchmark::State& st) {
  const std::size_t n = 8 << 16;
  std::vector<double> x(n), times(n / 8), out(n / 8);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0), jit(-0.01, 0.01);
  for (auto& v : x) v = u(rng);
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = 64.0 + 7.9 * i + jit(rng);
  const k::SincInterpolator interp;
  for (auto _ : st) {
    if constexpr (Parallel)
      k::parallel::interpolate(interp, x, times, out);
    else
      k::serial::interpolate(interp, x, times, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(times.size()));
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv1d_forward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(conv_forward<true>)->Name("conv1d_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<false>)->Name("conv1d_backward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<true>)->Name("conv1d_backward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(lstm_forward<false>)->Name("lstm_forward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(lstm_forward<true>)->Name("lstm_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(lstm_backward<false>)->Name("lstm_backward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(lstm_backward<true>)->Name("lstm_backward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(interpolate<false>)->Name("interpolate/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(interpolate<true>)->Name("interpolate/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
