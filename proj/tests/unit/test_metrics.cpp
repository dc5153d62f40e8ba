#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "deepadc/adc_model.hpp"
#include "deepadc/error.hpp"
#include "deepadc/metrics.hpp"
#include "deepadc/signal_gen.hpp"

using namespace deepadc;

TEST_CASE("SNDR of a constructed error") {
  constexpr int n = 20000;
  std::vector<double> ref(n), err(n);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int i = 0; i < n; ++i) {
    ref[i] = 1000 * std::sin(0.0123 * i);
    err[i] = g(rng);
  }
  double ps = 0, pe = 0;
  for (int i = 64; i < n - 64; ++i) {
    ps += ref[i] * ref[i];
    pe += err[i] * err[i];
  }
  const double k = std::sqrt(ps / pe / std::pow(10.0, 5.0));
  std::vector<double> test(n);
  for (int i = 0; i < n; ++i) test[i] = ref[i] + k * err[i];
  // samples inside the excluded edges do not count
  test[3] += 1e6;
  test[n - 2] -= 1e6;
  const auto r = metrics::sndr_enob(ref, test);
  CHECK(r.sndr_db == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(r.enob == doctest::Approx((50.0 - 1.76) / 6.02).epsilon(1e-12));
  CHECK_FALSE(r.infinite);
}

TEST_CASE("SNDR edge cases") {
  std::vector<double> a(5000);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::cos(0.2 * i);
  const auto same = metrics::sndr_enob(a, a);
  CHECK(same.infinite);
  CHECK(same.sndr_capped() == metrics::kSndrCapDb);
  CHECK_THROWS_AS(metrics::sndr_enob(std::vector<double>(100), std::vector<double>(100)), InvalidInput);
  CHECK_THROWS_AS(metrics::sndr_enob(a, std::vector<double>(4999)), InvalidInput);
  auto nan = a;
  nan[2000] = std::nan("");
  CHECK_THROWS_AS(metrics::sndr_enob(a, nan), NumericError);
}

TEST_CASE("full-scale sine through the ideal 13-bit path") {
  WaveformRecord r;
  r.sample_rate = 65.536e9;
  constexpr int n = 8 * 65536;
  const double f = 1.3e9;
  r.samples.resize(n);
  for (int i = 0; i < n; ++i) r.samples[i] = 0.5 * std::sin(2 * std::numbers::pi * f * i / r.sample_rate + 0.1);
  const auto cap = adc::simulate_interleaved(r, adc::ideal_adc_config());
  std::vector<double> ref(cap.size()), codes(cap.size());
  for (std::size_t k = 0; k < cap.size(); ++k) {
    ref[k] = r.samples[8 * k] * 8192.0;
    codes[k] = cap.ideal_codes[k];
  }
  const auto res = metrics::sndr_enob(ref, codes);
  MESSAGE("ideal-chain ENOB " << res.enob);
  CHECK(std::abs(res.enob - 13.0) < 0.2);
}

TEST_CASE("LSB error trace") {
  const std::vector<std::int16_t> ref{0, 4095, -4096, 100};
  const std::vector<double> test{1.0 / 4096, 4095.0 / 4096, -4096.0 / 4096, 99.5 / 4096};
  const auto e = metrics::lsb_error_trace(ref, test, 13);
  CHECK(e[0] == doctest::Approx(1.0));
  CHECK(e[1] == doctest::Approx(0.0));
  CHECK(e[2] == doctest::Approx(0.0));
  CHECK(e[3] == doctest::Approx(-0.5));
}

TEST_CASE("spectrum calibration and Parseval") {
  const double fs = 8.192e9, rbw = 1e6;
  const std::size_t seg = 8192;
  const std::size_t n = seg * 8;
  const double a = 0.3;
  const int bin = 1300;
  std::vector<double> x(n);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1e-3);
  for (std::size_t i = 0; i < n; ++i) x[i] = a * std::cos(2 * std::numbers::pi * bin * i / double(seg)) + g(rng);
  const auto s = metrics::spectrum(x, fs, rbw, 1.0e9, 1.6e9);
  CHECK(s.segment_length == seg);
  CHECK(s.segments == 15);
  CHECK(s.magnitude_db[bin] == doctest::Approx(10 * std::log10(a * a / 2)).epsilon(1e-3));
  double mean = 0;
  for (double v : x) mean += v * v / n;
  CHECK(metrics::spectrum_total_power(s) == doctest::Approx(mean).epsilon(0.02));
  CHECK(std::isnan(s.phase_rad[100]));
  CHECK(std::isfinite(s.phase_rad[bin]));
}

TEST_CASE("symbol error rates") {
  const std::vector<int> tx{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> rx = tx;
  CHECK(metrics::symbol_error_rate(tx, rx) == 0.0);
  rx[0] = 0;
  rx[4] = 0;
  CHECK(metrics::symbol_error_rate(tx, rx) == doctest::Approx(2.0 / 9));
  // three symbols of three subcarriers: only the middle one counts
  CHECK(metrics::interior_symbol_error_rate(tx, rx, 3) == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(metrics::symbol_error_rate(tx, std::vector<int>(3)), InvalidInput);
}

TEST_CASE("ideal chain demodulates without symbol errors") {
  signal::OfdmConfig ofdm;
  const auto rec = signal::generate_record(256, 20, ofdm, 12);
  const auto cap = adc::simulate_interleaved(rec, adc::ideal_adc_config());
  std::vector<double> codes(cap.ideal_codes.begin(), cap.ideal_codes.end());
  const auto rx = metrics::detect_symbols(codes, cap, ofdm);
  CHECK(metrics::symbol_error_rate(cap.source.tx_symbols, rx) == 0.0);
  const auto rep = metrics::evaluate_variant(metrics::Variant::ideal, codes, cap, ofdm);
  CHECK(rep.sndr.infinite);
  CHECK(rep.ser == 0.0);
  CHECK_FALSE(rep.papr_ccdf.empty());
  CHECK(metrics::variant_name(metrics::Variant::shift) == "shift");
}
