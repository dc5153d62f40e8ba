#include <cmath>
#include <random>

#include "doctest.h"
#include "deepadc/error.hpp"
#include "deepadc/quantized.hpp"
#include "deepadc/signal_gen.hpp"

using namespace deepadc;
using namespace deepadc::quant;

namespace {

adc::AdcCapture capture(int order, int symbols, std::uint64_t seed) {
  const auto rec = signal::generate_record(order, symbols, {}, seed);
  return adc::simulate_interleaved(rec, adc::draw_adc_config({}, rec.sample_rate, 3));
}

// Random weights plus batchnorm statistics from a few train-mode batches.
calib::Model warmed_model(const calib::WindowDataset& data) {
  auto m = calib::build_network(21);
  nn::Tensor<float> x({32, 1, 64});
  for (std::size_t rep = 0; rep < 4; ++rep) {
    for (std::size_t b = 0; b < 32; ++b)
      std::copy(data.window_data(rep * 32 + b), data.window_data(rep * 32 + b) + 64, x.data.begin() + b * 64);
    m.net.forward(x, nn::Mode::train);
  }
  // nontrivial affine batchnorm parameters
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.5f, 1.5f);
  for (auto* p : m.net.parameters())
    if (p->name == "gamma" || p->name == "beta")
      for (auto& v : p->value.data) v = p->name == "gamma" ? u(rng) : u(rng) - 1.0f;
  return m;
}

std::vector<float> flat_windows(const calib::WindowDataset& d, std::size_t n) {
  std::vector<float> out;
  for (std::size_t i = 0; i < n; ++i) out.insert(out.end(), d.window_data(i), d.window_data(i) + 64);
  return out;
}

}  // namespace

TEST_CASE("symmetric scale and rounding") {
  const std::vector<double> w{0.5, -2.0, 1.25};
  CHECK(quant_max(8) == 127);
  CHECK(symmetric_scale(w, 8) == doctest::Approx(2.0 / 127));
  bool zero = false;
  CHECK(symmetric_scale(std::vector<double>(5, 0.0), 8, &zero) == 1.0);
  CHECK(zero);
  symmetric_scale(w, 8, &zero);
  CHECK_FALSE(zero);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int bits : {4, 8, 12, 16, 24}) {
    std::vector<double> v(500);
    for (auto& x : v) x = g(rng);
    const double s = symmetric_scale(v, bits);
    for (double x : v) REQUIRE(std::abs(fake_quantize(x, s, bits) - x) <= s / 2 * (1 + 1e-12));
  }
  CHECK(fake_quantize(10.0, 0.1, 4) == doctest::Approx(0.7));
  CHECK(fake_quantize(-10.0, 0.1, 4) == doctest::Approx(-0.7));
  CHECK_THROWS_AS(symmetric_scale(std::vector<double>{1.0, NAN}, 8), NumericError);
}

TEST_CASE("lookup table") {
  const LookupTable t([](double x) { return std::tanh(x); }, 6.0, 256);
  const double step = 12.0 / 255;
  for (int i = 0; i < 256; i += 17) CHECK(t(-6.0 + i * step) == doctest::Approx(std::tanh(-6.0 + i * step)).epsilon(1e-12));
  double worst = 0;
  for (double x = -6; x <= 6; x += 1e-3) worst = std::max(worst, std::abs(t(x) - std::tanh(x)));
  CHECK(worst < step * step / 8 * 0.8);  // h^2/8 max|f''|, max|tanh''| < 0.77
  CHECK(t(100.0) == doctest::Approx(std::tanh(6.0)));
  CHECK(t(-100.0) == doctest::Approx(std::tanh(-6.0)));
}

TEST_CASE("batchnorm folding and quantized forward") {
  const auto cap = capture(256, 2, 4);
  const auto data = calib::make_windows(cap);
  auto m = warmed_model(data);
  const auto folded = fold_batchnorm(m);
  CHECK(folded.layers.size() == m.net.size() - 4);

  const std::size_t n = 200;
  const auto xs = flat_windows(data, n);
  nn::Tensor<float> x({n, 1, 64});
  std::copy(xs.begin(), xs.end(), x.data.begin());
  const auto ref = m.net.forward(x, nn::Mode::infer);
  const auto f = forward(folded, xs);
  double worst = 0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(f[i] - ref.data[i]));
  MESSAGE("fold max |diff| = " << worst);
  CHECK(worst < 1e-5);

  QuantScheme s;
  s.weight_bits = s.activation_bits = 24;
  const auto q24 = calibrate_and_quantize(m, s, data);
  CHECK(q24.activation_scales.size() == 1 + 4 + 3 * 3 + 1);
  for (const auto& w : q24.weights) {
    CHECK(w.scale > 0);
    CHECK(w.max_rounding_error <= w.scale / 2 * (1 + 1e-9));
  }
  CHECK(q24.weights.size() == 4 * 2 + 3 * 3 + 2);
  const auto y24 = forward(q24, xs);
  double w24 = 0;
  for (std::size_t i = 0; i < n; ++i) w24 = std::max(w24, std::abs(y24[i] - f[i]));
  MESSAGE("24-bit max |diff| = " << w24);
  CHECK(w24 < 1e-3);
  CHECK(forward(q24, xs) == y24);

  s.weight_bits = s.activation_bits = 8;
  const auto y8 = forward(calibrate_and_quantize(m, s, data), xs);
  double w8 = 0;
  for (std::size_t i = 0; i < n; ++i) w8 = std::max(w8, std::abs(y8[i] - f[i]));
  CHECK(w8 > w24);

  auto few = data;
  few.windows.resize(999);
  CHECK_THROWS_AS(calibrate_and_quantize(m, s, few), InvalidInput);
  s.weight_bits = 3;
  CHECK_THROWS_AS(calibrate_and_quantize(m, s, data), InvalidInput);
}

TEST_CASE("folding preconditions") {
  auto fresh = calib::build_network(1);
  CHECK_THROWS_AS(fold_batchnorm(fresh), InvalidInput);
  const std::vector<nn::LayerSpec> specs{nn::LayerSpec::parse("batchnorm1d:1"), nn::LayerSpec::parse("flatten"),
                                         nn::LayerSpec::parse("linear:64:1")};
  calib::Model odd{nn::Network<float>(specs, 1), {}, 13, 4096.0};
  CHECK_THROWS_AS(fold_batchnorm(odd), InvalidInput);
}

TEST_CASE("calibration window selection") {
  const auto data = calib::make_windows(capture(256, 2, 5));
  const auto picked = quant::select_calibration_windows(data, 1000);
  REQUIRE(picked.size() == 1000);
  float all = 0.0f, top = 0.0f;
  for (std::size_t i = 0; i < data.size(); ++i) all = std::max(all, std::abs(data.window_data(i)[31]));
  for (std::size_t i = 0; i < 500; ++i) top = std::max(top, std::abs(picked.window_data(i)[31]));
  CHECK(top == all);
  CHECK(std::abs(picked.window_data(499)[31]) <= std::abs(picked.window_data(0)[31]));
  CHECK(picked.windows[500].start == data.windows[0].start);
  CHECK(quant::select_calibration_windows(data, data.size() + 5).size() == data.size());
  CHECK_THROWS_AS(quant::select_calibration_windows(data, 0), InvalidInput);
}

TEST_CASE("bit-width sweep") {
  const auto cal = calib::make_windows(capture(256, 2, 5));
  const auto eval = capture(256, 4, 6);
  auto m = warmed_model(cal);
  const std::vector<int> bits{16, 8};
  const auto rows = sweep_bitwidths(m, bits, eval, cal);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].bits == 0);
  CHECK(rows[0].max_abs_error == 0.0);
  CHECK(rows[1].bits == 16);
  CHECK(rows[1].max_abs_error < rows[2].max_abs_error);
  CHECK(std::abs(rows[1].enob - rows[0].enob) < 0.1);
  for (const auto& r : rows) CHECK(r.enob == doctest::Approx((r.sndr - 1.76) / 6.02));
  const auto csv = sweep_csv(rows);
  CHECK(csv.rfind("bits,enob,sndr,mse,max_abs_error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK_THROWS_AS(sweep_bitwidths(m, std::vector<int>{}, eval, cal), InvalidInput);
  CHECK_THROWS_AS(sweep_bitwidths(m, std::vector<int>{2}, eval, cal), InvalidInput);
}
